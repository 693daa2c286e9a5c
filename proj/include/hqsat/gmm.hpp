#pragma once

// Gaussian mixture fitting by expectation-maximization on raw data.

#include "hqsat/kernels.hpp"
#include "hqsat/noise_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hqsat {

struct Responsibilities {
    Matrix gamma;                      ///< N x R, rows sum to one
    Vector row_loglik;                 ///< log density of each sample
    std::vector<long> degenerate_rows; ///< rows set uniform because every density underflowed
    double mean_loglik = 0.0;
};

/// Log density of the renormalized mixture at x.
double log_pdf(const GmmModel& model, const Vector& x);

Responsibilities e_step(const GmmModel& model, const Matrix& data);

/// Average per-sample log-likelihood under the renormalized mixture.
double mean_log_likelihood(const GmmModel& model, const Matrix& data);

/// 1e-6 * trace(cov(data)) / D, never below 1e-12.
double covariance_floor(const Matrix& data);

/// Biased (1/N) sample covariance.
Matrix data_covariance(const Matrix& data);

struct MStepOptions {
    double floor = 0.0;      ///< added to every covariance diagonal
    std::uint64_t seed = 0;  ///< picks the data point for reseeded components
};

struct MStepResult {
    GmmModel model;
    std::vector<int> reseeded; ///< components whose mass collapsed
};

MStepResult m_step(const Matrix& data, const Matrix& gamma, const MStepOptions& opts = {});

/// k-means++ style seeding, data covariance (plus floor) for every
/// component, uniform weights.
GmmModel init_gmm(const Matrix& data, int r_count, std::uint64_t seed, double floor);

struct EmOptions {
    int max_iters = 300;
    double tol = 1e-6;                ///< on the change of mean log-likelihood
    std::uint64_t seed = 1;
    std::optional<double> floor;      ///< default covariance_floor(data)
    std::optional<GmmModel> init;     ///< default init_gmm(data, R, seed, floor)
};

struct EmTrace {
    std::vector<double> loglik;  ///< mean log-likelihood of each evaluated model
    int iterations = 0;          ///< M-steps performed
    bool converged = false;
    std::vector<std::pair<int, int>> reseeds; ///< (iteration, component)
};

struct EmFit {
    GmmModel model;
    EmTrace trace;
    double floor = 0.0;
};

EmFit fit_em(const Matrix& data, int r_count, const EmOptions& opts = {});

}  // namespace hqsat
