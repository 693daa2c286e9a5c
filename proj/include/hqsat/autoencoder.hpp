#pragma once

// Fully connected encoder/decoder networks with exact backpropagation and
// plain mini-batch gradient descent on the reconstruction MSE.

#include "hqsat/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hqsat {

enum class Activation { tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Hidden layers use `activation`; the last layer is always linear.
struct MlpParams {
    std::vector<int> layer_sizes;  ///< d0, d1, ..., dL
    std::vector<Matrix> weights;   ///< W^l has shape d_l x d_{l-1}
    std::vector<Vector> biases;    ///< b^l has length d_l
    Activation activation = Activation::tanh;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t layers() const { return weights.size(); }
    std::size_t parameter_count() const;
    void validate() const;
};

struct AeParams {
    MlpParams encoder;
    MlpParams decoder;

    int latent_dim() const { return encoder.output_dim(); }
    void validate() const;
};

/// Glorot-uniform weights, zero biases.
MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed);

/// Splits a symmetric architecture [d0, ..., latent, ..., d0] at its middle
/// entry into encoder and decoder and initializes both.
AeParams init_autoencoder(const std::vector<int>& arch, Activation act, std::uint64_t seed);

Vector mlp_forward(const MlpParams& net, const Vector& x);
/// Row-wise forward pass: one sample per row in and out.
Matrix mlp_forward_rows(const MlpParams& net, const Matrix& rows);

Vector encode(const MlpParams& encoder, const Vector& x);
Vector decode(const MlpParams& decoder, const Vector& latent);
Matrix reconstruct(const AeParams& ae, const Matrix& rows);

/// Mean over samples and coordinates of the squared difference.
double mse_loss(const Matrix& x, const Matrix& y);

/// Gradient with the same shapes as an MlpParams.
struct MlpGrad {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static MlpGrad zeros_like(const MlpParams& net);
    MlpGrad& operator+=(const MlpGrad& other);
    double max_abs() const;
};

struct AeGrad {
    MlpGrad encoder;
    MlpGrad decoder;
    double loss = 0.0;
};

/// Exact gradients of mse_loss(x, decode(encode(x))).
AeGrad grad_autoencoder(const AeParams& ae, const Matrix& x);

/// theta <- theta - step * grad.
void apply_step(MlpParams& net, const MlpGrad& grad, double step);

struct TrainOptions {
    int epochs = 200;
    int batch = 64;
    double step = 0.05;
    std::uint64_t seed = 1;
};

struct TrainResult {
    AeParams ae;
    /// Full-data loss before training followed by one entry per epoch.
    std::vector<double> loss_trace;
    bool diverged = false;
    std::string error;
};

/// On divergence the last parameters with a finite loss are returned.
TrainResult train_autoencoder(AeParams ae, const Matrix& data, const TrainOptions& opts);

}  // namespace hqsat
