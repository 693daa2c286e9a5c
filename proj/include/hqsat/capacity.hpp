#pragma once

// Monte-Carlo differential entropy and achievable-rate estimation for the
// additive channel Y = T X + Z under an analytic or fitted noise mixture.

#include "hqsat/dagmm.hpp"
#include "hqsat/gmm.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hqsat {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t clamped = 0; ///< samples whose log density hit the floor
};

/// Log densities below this are clamped in cross-entropy estimates.
inline constexpr double kLogDensityFloor = -700.0;

/// -(1/n) sum ln f(z_k) with z_k drawn from the (renormalized) model. Nats.
McEstimate entropy_mc(const GmmModel& model, std::size_t n, std::uint64_t seed);

/// -(1/n) sum ln f_fitted(z_k) over held-out samples. Nats.
McEstimate cross_entropy_mc(const Matrix& samples, const GmmModel& fitted);

/// (h(Y) - h(Z)) / ln 2 bits per channel use for Gaussian modulation. Both
/// entropies share the same noise draws; the error is that of the paired
/// difference.
McEstimate capacity_estimate(const ChannelConfig& config, const GmmModel& noise, std::size_t n, std::uint64_t seed);

/// Input-space mixture from a DAGMM fitted on 1-D (or any D) noise: weights
/// from the latent mixture, means decoded from the latent means, covariances
/// from responsibility-weighted residuals about those means (plus floor).
/// Components without mass are dropped; `dropped` receives their indices.
GmmModel dagmm_noise_model(const DagmmState& state, const Matrix& noise_samples, std::vector<int>* dropped = nullptr);

enum class Method { baseline, gmm, dagmm };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct SweepScenario {
    HqnParams noise;
    /// Noise samples are z + warp * sin(z); 0 gives plain hybrid noise.
    double warp = 0.0;
    ChannelConfig channel; ///< sigma_x is overwritten per grid point
    double beta_rec = 0.95;
};

/// Var(Z) of the analytic noise mixture, used for the SNR axis.
double scenario_noise_variance(const SweepScenario& scenario);

/// sigma_x giving T^2 sigma_x^2 / Var(Z) = 10^(snr_db/10).
double sigma_x_for_snr(const SweepScenario& scenario, double snr_db);

struct SweepOptions {
    std::vector<double> grid_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<Method> methods{Method::baseline, Method::gmm, Method::dagmm};
    std::size_t mc_samples = 200000; ///< about 0.003 bits standard error at 20 dB
    std::size_t fit_samples = 2000;
    std::size_t heldout_samples = 5000;
    std::uint64_t seed = 1;
    int components = 7;
    EmOptions em{};
    DagmmConfig dagmm{};
};

/// Sweep defaults sized for 1-D noise.
SweepOptions default_sweep_options();

struct CurveCell {
    bool present = false;
    double rate = 0.0;          ///< beta_rec * capacity, bits per use
    double std_error = 0.0;
    double cross_entropy = 0.0; ///< held-out cross-entropy of the noise model, nats
    std::string error;
};

struct CapacityCurve {
    std::vector<double> snr_db;
    std::vector<Method> methods;
    std::vector<std::vector<CurveCell>> cells; ///< [method][grid point]
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;

    const CurveCell& at(Method m, std::size_t point) const;
    bool has(Method m) const;
};

/// Per grid point: baseline uses the analytic mixture, gmm fits EM to fresh
/// noise samples, dagmm fits the deep model and maps it back to input space.
/// Failures mark the cell absent and the sweep continues.
CapacityCurve snr_sweep(const SweepScenario& scenario, const SweepOptions& opts);

/// Noise samples for a scenario (warped if scenario.warp != 0), one per row.
Matrix scenario_noise(const SweepScenario& scenario, std::size_t n, std::uint64_t seed);

}  // namespace hqsat
