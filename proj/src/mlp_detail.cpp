#include "mlp_detail.hpp"

namespace hqsat::detail {

namespace {

bool hidden(const MlpParams& net, std::size_t l) { return l + 1 < net.layers(); }

}  // namespace

Matrix forward_cols(const MlpParams& net, const Matrix& in_cols, ForwardCache* cache) {
    Matrix h = in_cols;
    if (cache) {
        cache->act.clear();
        cache->act.push_back(h);
    }
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Matrix z = net.weights[l] * h;
        z.colwise() += net.biases[l];
        if (hidden(net, l) && net.activation == Activation::tanh) z = z.array().tanh().matrix();
        h = std::move(z);
        if (cache) cache->act.push_back(h);
    }
    return h;
}

Matrix backward_cols(const MlpParams& net, const ForwardCache& cache, Matrix grad_out, MlpGrad& grad,
                     bool want_input) {
    Matrix g = std::move(grad_out);
    for (std::size_t l = net.layers(); l-- > 0;) {
        if (hidden(net, l) && net.activation == Activation::tanh)
            g = (g.array() * (1.0 - cache.act[l + 1].array().square())).matrix();
        grad.weights[l].noalias() += g * cache.act[l].transpose();
        grad.biases[l] += g.rowwise().sum();
        if (l > 0 || want_input) g = net.weights[l].transpose() * g;
    }
    return want_input ? g : Matrix{};
}

Vector forward_vec(const MlpParams& net, const Vector& x, VectorCache* cache) {
    Vector h = x;
    if (cache) {
        cache->act.clear();
        cache->act.push_back(h);
    }
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Vector z = net.weights[l] * h + net.biases[l];
        if (hidden(net, l) && net.activation == Activation::tanh)
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = std::tanh(z(k));
        h = std::move(z);
        if (cache) cache->act.push_back(h);
    }
    return h;
}

Vector backward_vec(const MlpParams& net, const VectorCache& cache, Vector grad_out, MlpGrad& grad) {
    Vector g = std::move(grad_out);
    for (std::size_t l = net.layers(); l-- > 0;) {
        if (hidden(net, l) && net.activation == Activation::tanh)
            for (Eigen::Index k = 0; k < g.size(); ++k) g(k) *= 1.0 - cache.act[l + 1](k) * cache.act[l + 1](k);
        for (Eigen::Index i = 0; i < grad.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < grad.weights[l].cols(); ++j) grad.weights[l](i, j) += g(i) * cache.act[l](j);
        grad.biases[l] += g;
        g = net.weights[l].transpose() * g;
    }
    return g;
}

}  // namespace hqsat::detail
