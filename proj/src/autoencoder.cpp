#include "hqsat/autoencoder.hpp"

#include "hqsat/kernels.hpp"
#include "mlp_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hqsat {

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw DomainError("unknown activation '" + name + "'");
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
}

void MlpParams::validate() const {
    if (layer_sizes.size() < 2) throw DomainError("network needs at least two layer sizes");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
        throw DomainError("network layer count does not match layer_sizes");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (layer_sizes[l] <= 0 || layer_sizes[l + 1] <= 0) throw DomainError("layer sizes must be positive");
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1])
            throw DomainError("layer " + std::to_string(l) + " shape inconsistent with layer_sizes");
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw DomainError("layer " + std::to_string(l) + " has non-finite entries");
    }
}

void AeParams::validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.output_dim() != decoder.input_dim()) throw DomainError("encoder output != decoder input");
    if (encoder.input_dim() != decoder.output_dim()) throw DomainError("decoder output != encoder input");
}

MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw DomainError("network needs at least two layer sizes");
    MlpParams net;
    net.layer_sizes = layer_sizes;
    net.activation = act;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        if (in <= 0 || out <= 0) throw DomainError("layer sizes must be positive");
        const double bound = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> unif(-bound, bound);
        Matrix w(out, in);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) w(i, j) = unif(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(out));
    }
    return net;
}

AeParams init_autoencoder(const std::vector<int>& arch, Activation act, std::uint64_t seed) {
    if (arch.size() < 3 || arch.size() % 2 == 0)
        throw DomainError("autoencoder architecture needs an odd number (>= 3) of layer sizes");
    if (arch.front() != arch.back()) throw DomainError("autoencoder output size must equal input size");
    const std::size_t mid = arch.size() / 2;
    AeParams ae;
    ae.encoder = init_mlp({arch.begin(), arch.begin() + static_cast<long>(mid) + 1}, act, derive_seed(seed, 1));
    ae.decoder = init_mlp({arch.begin() + static_cast<long>(mid), arch.end()}, act, derive_seed(seed, 2));
    return ae;
}

Vector mlp_forward(const MlpParams& net, const Vector& x) {
    if (x.size() != net.input_dim()) throw DomainError("network input has wrong dimension");
    return detail::forward_vec(net, x, nullptr);
}

Matrix mlp_forward_rows(const MlpParams& net, const Matrix& rows) {
    if (rows.cols() != net.input_dim()) throw DomainError("network input has wrong dimension");
    Matrix out(rows.rows(), net.output_dim());
    const auto n = static_cast<std::size_t>(rows.rows());
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto begin = static_cast<Eigen::Index>(static_cast<std::size_t>(c) * kChunk);
        const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunk), rows.rows() - begin);
        const Matrix cols = rows.middleRows(begin, len).transpose();
        out.middleRows(begin, len) = detail::forward_cols(net, cols, nullptr).transpose();
    }
    return out;
}

Vector encode(const MlpParams& encoder, const Vector& x) { return mlp_forward(encoder, x); }
Vector decode(const MlpParams& decoder, const Vector& latent) { return mlp_forward(decoder, latent); }

Matrix reconstruct(const AeParams& ae, const Matrix& rows) {
    return mlp_forward_rows(ae.decoder, mlp_forward_rows(ae.encoder, rows));
}

double mse_loss(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw DomainError("mse_loss: shape mismatch");
    if (x.size() == 0) throw DomainError("mse_loss: empty batch");
    std::vector<double> per_row(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) per_row[static_cast<std::size_t>(i)] = (x.row(i) - y.row(i)).squaredNorm();
    return deterministic_sum(per_row) / static_cast<double>(x.size());
}

MlpGrad MlpGrad::zeros_like(const MlpParams& net) {
    MlpGrad g;
    for (std::size_t l = 0; l < net.layers(); ++l) {
        g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    return g;
}

MlpGrad& MlpGrad::operator+=(const MlpGrad& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

double MlpGrad::max_abs() const {
    double m = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].size() > 0) m = std::max(m, weights[l].cwiseAbs().maxCoeff());
        if (biases[l].size() > 0) m = std::max(m, biases[l].cwiseAbs().maxCoeff());
    }
    return m;
}

AeGrad grad_autoencoder(const AeParams& ae, const Matrix& x) {
    if (x.rows() == 0) throw DomainError("grad_autoencoder: empty batch");
    if (x.cols() != ae.encoder.input_dim()) throw DomainError("grad_autoencoder: input dimension mismatch");
    return kernels::par::autoencoder_grad(ae, x);
}

void apply_step(MlpParams& net, const MlpGrad& grad, double step) {
    for (std::size_t l = 0; l < net.layers(); ++l) {
        net.weights[l] -= step * grad.weights[l];
        net.biases[l] -= step * grad.biases[l];
    }
}

TrainResult train_autoencoder(AeParams ae, const Matrix& data, const TrainOptions& opts) {
    if (data.rows() == 0) throw DomainError("train_autoencoder: empty data");
    if (opts.batch <= 0 || opts.epochs < 0) throw DomainError("train_autoencoder: bad epochs/batch");
    ae.validate();
    TrainResult result;
    const auto full_loss = [&](const AeParams& p) { return mse_loss(data, reconstruct(p, data)); };
    result.loss_trace.push_back(full_loss(ae));
    if (!std::isfinite(result.loss_trace.back())) {
        result.ae = ae;
        result.diverged = true;
        result.error = "initial loss is not finite";
        return result;
    }

    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<Eigen::Index> order(n);
    AeParams last_finite = ae;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::mt19937_64 rng(derive_seed(opts.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(opts.batch)) {
            const std::size_t end = std::min(n, begin + static_cast<std::size_t>(opts.batch));
            Matrix batch(static_cast<Eigen::Index>(end - begin), data.cols());
            for (std::size_t k = begin; k < end; ++k) batch.row(static_cast<Eigen::Index>(k - begin)) = data.row(order[k]);
            const AeGrad g = kernels::par::autoencoder_grad(ae, batch);
            apply_step(ae.encoder, g.encoder, opts.step);
            apply_step(ae.decoder, g.decoder, opts.step);
        }
        const double loss = full_loss(ae);
        if (!std::isfinite(loss)) {
            result.ae = last_finite;
            result.diverged = true;
            result.error = "reconstruction loss became non-finite at epoch " + std::to_string(epoch);
            return result;
        }
        result.loss_trace.push_back(loss);
        last_finite = ae;
    }
    result.ae = std::move(ae);
    return result;
}

}  // namespace hqsat
