#pragma once

// Deep autoencoder with a Gaussian mixture over its latent codes, trained by
// alternating minimization of an augmented Lagrangian.
//
// The latent codes x_hat_i are decision variables tied to the encoder by the
// constraint x_hat_i = f_enc(x_i), with scaled duals u_i. The penalty uses
// the scaled-dual convention (rho/2)||x_hat_i - f_enc(x_i) + u_i||^2, which
// makes the closed-form latent update below the exact block minimizer.
// Reconstructions decode the latent variable: y_i = f_dec(x_hat_i).
//
// One outer iteration:
//   gamma  <- responsibilities of x_hat under the latent mixture (then fixed)
//   x_hat  <- (l sum_r g_ir P_r + rho I)^{-1} (l sum_r g_ir P_r mu_r + rho (f_enc(x_i) - u_i))
//   mixture <- weighted means / covariances / N_r / N from gamma and x_hat
//   network <- gradient steps on the reconstruction and penalty terms
//   u      <- u + x_hat - f_enc(x)

#include "hqsat/autoencoder.hpp"
#include "hqsat/gmm.hpp"

#include <string>
#include <vector>

namespace hqsat {

struct DagmmHyper {
    double lambda_tilde = 0.1;
    double rho_tilde = 1.0;
    int r_count = 3;
    int init_restarts = 5; ///< EM runs on the pretrained codes; the most likely one is kept
    int outer_iters = 50;
    int net_steps_per_outer = 20;
    double step = 0.05;
    double tol = 1e-9;
    std::uint64_t seed = 1;

    void validate() const;
};

struct DagmmState {
    AeParams ae;
    Matrix latent_codes; ///< N x d_latent
    Matrix duals;        ///< N x d_latent
    GmmModel latent_gmm;
    DagmmHyper hyper;
    double floor = 0.0;  ///< latent covariance floor, fixed at initialization
};

struct TrainRow {
    int iter = 0;
    double aug_lagrangian = 0.0;
    double recon = 0.0;     ///< (1/N) sum ||x_i - f_dec(x_hat_i)||^2
    double nll = 0.0;       ///< -(1/N) sum ln p(x_hat_i)
    double violation = 0.0; ///< sqrt((1/N) sum ||x_hat_i - f_enc(x_i)||^2)
};

struct TrainReport {
    std::vector<double> pretrain_loss;
    std::vector<TrainRow> rows;   ///< row 0 is the state after initialization
    std::vector<int> first_labels; ///< after the first outer iteration
    std::vector<int> labels;
    bool aborted = false;
    std::string error;
};

/// (1/N) sum_i ( ||x_i - f_dec(x_hat_i)||^2 - lambda ln p(x_hat_i) ).
double objective(const DagmmState& state, const Matrix& data);

/// sum_i ( ||x_i - f_dec(x_hat_i)||^2 - lambda ln p(x_hat_i)
///         + (rho/2) ||x_hat_i - f_enc(x_i) + u_i||^2 ).
double augmented_lagrangian(const DagmmState& state, const Matrix& data);

/// Part of the augmented Lagrangian that depends on x_hat and the mixture,
/// with the log-sum replaced by its gamma-weighted bound:
/// sum_i ( -lambda sum_r g_ir ln(pi_r N(x_hat_i; mu_r, Sigma_r))
///         + (rho/2) ||x_hat_i - f_enc(x_i) + u_i||^2 ).
/// Both the latent update and the mixture update minimize it exactly.
double latent_block_objective(const DagmmState& state, const Matrix& data, const Matrix& gamma);

/// Analytic gradient of latent_block_objective w.r.t. every x_hat_i.
Matrix latent_block_gradient(const DagmmState& state, const Matrix& data, const Matrix& gamma);

Responsibilities latent_responsibilities(const DagmmState& state);

Matrix update_latent_codes(const DagmmState& state, const Matrix& data, const Matrix& gamma);
GmmModel update_gmm_params(const DagmmState& state, const Matrix& gamma);
Matrix update_duals(const DagmmState& state, const Matrix& data);

/// L_net = (1/N) sum ||x_i - f_dec(x_hat_i)||^2 + (rho/2N) sum ||x_hat_i - f_enc(x_i) + u_i||^2
struct NetworkLoss {
    double loss = 0.0;
    MlpGrad encoder;
    MlpGrad decoder;
};
NetworkLoss network_loss(const DagmmState& state, const Matrix& data);

/// net_steps_per_outer gradient steps on L_net. Throws NumericalError when
/// the loss becomes non-finite.
AeParams update_network(const DagmmState& state, const Matrix& data);

/// Root-mean-square constraint violation.
double constraint_violation(const DagmmState& state, const Matrix& data);

/// argmax of the latent responsibilities, lowest index on ties.
std::vector<int> assign_clusters(const DagmmState& state);
std::vector<int> argmax_labels(const Matrix& gamma);

struct DagmmConfig {
    std::vector<int> arch{3, 16, 8, 3, 8, 16, 3};
    Activation activation = Activation::tanh;
    TrainOptions pretrain{};
    DagmmHyper hyper{};
};

struct DagmmFit {
    DagmmState state;
    TrainReport report;
};

/// Pretrain, initialize codes/duals/mixture, then run the outer loop. A
/// partial report is returned (report.aborted) instead of throwing.
DagmmFit fit_dagmm(const Matrix& data, const DagmmConfig& config);

}  // namespace hqsat
