#pragma once

// Data-parallel inner loops. Every kernel exists twice:
//   kernels::ref  straightforward serial loops, kept as the test reference
//   kernels::par  OpenMP over fixed kChunk blocks, partial results merged
//                 in block order, so output does not depend on thread count
// Library code calls kernels::par. tests/test_kernels.cpp checks agreement
// and bench/ measures the speedup.

#include "hqsat/autoencoder.hpp"
#include "hqsat/noise_model.hpp"

#include <vector>

namespace hqsat {

/// Cholesky-factored mixture with renormalized log weights.
class PreparedMixture {
public:
    /// Throws NumericalError carrying the component index for non-SPD covariances.
    explicit PreparedMixture(const GmmModel& model);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return log_weight_.size(); }

    /// log pi_r + log N(x; mu_r, Sigma_r).
    double log_joint(std::size_t r, const Eigen::Ref<const Vector>& x) const;
    /// log of the renormalized mixture density (log-sum-exp).
    double log_pdf(const Eigen::Ref<const Vector>& x) const;

    const Vector& mean(std::size_t r) const { return mean_[r]; }
    const Matrix& precision(std::size_t r) const { return precision_[r]; }

private:
    int dim_ = 0;
    std::vector<double> log_weight_;
    std::vector<double> log_norm_;
    std::vector<Vector> mean_;
    std::vector<Matrix> chol_;
    std::vector<Matrix> precision_;
};

double log_sum_exp(std::span<const double> v);

namespace kernels {

struct EStepResult {
    Matrix gamma;                 ///< N x R responsibilities
    Vector row_loglik;            ///< log mixture density per sample
    std::vector<long> degenerate; ///< rows where every component had zero density
};

struct WeightedMeans {
    Vector counts; ///< N_r = sum_i gamma_ir
    Matrix means;  ///< R x D, row r = (1/N_r) sum_i gamma_ir x_i
};

/// Inputs of the closed-form latent update for one outer iteration.
struct LatentSolveInput {
    const Matrix* gamma = nullptr;   ///< N x R, held fixed
    const Matrix* encoded = nullptr; ///< f_theta1(x_i), one per row
    const Matrix* duals = nullptr;   ///< u_i, one per row
    std::vector<Matrix> precisions;  ///< Sigma_r^{-1}
    std::vector<Vector> means;       ///< mu_r
    double lambda_tilde = 0.0;
    double rho_tilde = 0.0;
};

/// loss = scale * sum_i ||f(in_i) - target_i||^2 and its parameter gradient.
struct RegressionGrad {
    MlpGrad grad;
    double loss = 0.0;
};

namespace ref {
EStepResult e_step(const PreparedMixture& mix, const Matrix& data);
Vector log_pdf_rows(const PreparedMixture& mix, const Matrix& data);
WeightedMeans weighted_means(const Matrix& data, const Matrix& gamma);
std::vector<Matrix> weighted_scatter(const Matrix& data, const Matrix& gamma, const Matrix& means);
Matrix latent_solve(const LatentSolveInput& in);
AeGrad autoencoder_grad(const AeParams& ae, const Matrix& data);
RegressionGrad regression_grad(const MlpParams& net, const Matrix& inputs, const Matrix& targets, double scale);
double sum(std::span<const double> v);
}  // namespace ref

namespace par {
EStepResult e_step(const PreparedMixture& mix, const Matrix& data);
Vector log_pdf_rows(const PreparedMixture& mix, const Matrix& data);
WeightedMeans weighted_means(const Matrix& data, const Matrix& gamma);
std::vector<Matrix> weighted_scatter(const Matrix& data, const Matrix& gamma, const Matrix& means);
Matrix latent_solve(const LatentSolveInput& in);
AeGrad autoencoder_grad(const AeParams& ae, const Matrix& data);
RegressionGrad regression_grad(const MlpParams& net, const Matrix& inputs, const Matrix& targets, double scale);
inline double sum(std::span<const double> v) { return deterministic_sum(v); }
}  // namespace par

}  // namespace kernels
}  // namespace hqsat
