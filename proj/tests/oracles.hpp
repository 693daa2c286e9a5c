#pragma once

// Reference computations written independently of the library code paths:
// high-precision series, adaptive quadrature, explicit matrix inverses.

#include "hqsat/autoencoder.hpp"
#include "hqsat/noise_model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using hqsat::GmmModel;
using hqsat::Matrix;
using hqsat::Vector;
using Big = boost::multiprecision::cpp_dec_float_50;

/// e^{-lambda} lambda^i / i! in 50-digit arithmetic.
inline double poisson_weight(double lambda, int i) {
    Big term = exp(Big(-lambda));
    for (int k = 1; k <= i; ++k) term = term * Big(lambda) / Big(k);
    return term.convert_to<double>();
}

inline double truncated_mass(double lambda, int r_max) {
    Big term = exp(Big(-lambda));
    Big sum = term;
    for (int k = 1; k <= r_max; ++k) {
        term = term * Big(lambda) / Big(k);
        sum += term;
    }
    return sum.convert_to<double>();
}

/// Sum_i i w_i / Sum_i w_i.
inline double truncated_mean(double lambda, int r_max) {
    Big term = exp(Big(-lambda));
    Big sum = term, first = 0;
    for (int k = 1; k <= r_max; ++k) {
        term = term * Big(lambda) / Big(k);
        sum += term;
        first += Big(k) * term;
    }
    return Big(first / sum).convert_to<double>();
}

/// Gauss-Kronrod integral of f over [a, b], split into unit-ish pieces so
/// narrow mixture peaks are never skipped.
template <class F>
double integrate(F f, double a, double b, int pieces = 200) {
    double total = 0.0;
    const double h = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p)
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a + p * h, a + (p + 1) * h, 8, 1e-13);
    return total;
}

inline double normal_pdf(double x, double mu, double var) {
    return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Raw-weight density of a 1-D mixture by direct summation.
inline double density_1d(const GmmModel& m, double x) {
    double s = 0.0;
    for (const auto& c : m.components) s += c.weight * normal_pdf(x, c.mean(0), c.covariance(0, 0));
    return s;
}

/// Density of the renormalized mixture via explicit inverse and determinant.
inline double density(const GmmModel& m, const Vector& x) {
    double total = 0.0, s = 0.0;
    for (const auto& c : m.components) total += c.weight;
    for (const auto& c : m.components) {
        const Vector d = x - c.mean;
        const Matrix inv = c.covariance.fullPivLu().inverse();
        const double det = c.covariance.fullPivLu().determinant();
        const double q = d.dot(inv * d);
        s += c.weight / total * std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, m.dim) * det);
    }
    return s;
}

/// -integral f ln f for a renormalized 1-D mixture.
inline double entropy_1d(const GmmModel& raw) {
    const double total = raw.total_weight();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : raw.components) {
        const double s = std::sqrt(c.covariance(0, 0));
        lo = std::min(lo, c.mean(0) - 14.0 * s);
        hi = std::max(hi, c.mean(0) + 14.0 * s);
    }
    auto integrand = [&](double x) {
        const double f = density_1d(raw, x) / total;
        return f > 0.0 ? -f * std::log(f) : 0.0;
    };
    return integrate(integrand, lo, hi, 400);
}

/// Forward pass with explicit loops over weights.
inline Vector mlp_forward(const hqsat::MlpParams& net, const Vector& x) {
    std::vector<double> h(x.data(), x.data() + x.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& W = net.weights[l];
        std::vector<double> next(static_cast<std::size_t>(W.rows()));
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            double acc = net.biases[l](i);
            for (Eigen::Index j = 0; j < W.cols(); ++j) acc += W(i, j) * h[static_cast<std::size_t>(j)];
            const bool hidden = l + 1 < net.weights.size();
            next[static_cast<std::size_t>(i)] =
                hidden && net.activation == hqsat::Activation::tanh ? std::tanh(acc) : acc;
        }
        h = std::move(next);
    }
    return Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
}

/// Smallest max |a_i - b_perm(i)| over all permutations (small sets only).
inline double matched_max_error(std::vector<double> a, std::vector<double> b) {
    std::vector<int> perm(b.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[static_cast<std::size_t>(perm[i])]));
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline hqsat::GaussianComponent gaussian(double w, Vector mean, Matrix cov) { return {w, std::move(mean), std::move(cov)}; }

inline GmmModel gaussian_1d(std::vector<double> weights, std::vector<double> means, std::vector<double> vars) {
    GmmModel m;
    m.dim = 1;
    for (std::size_t r = 0; r < weights.size(); ++r)
        m.components.push_back(gaussian(weights[r], Vector::Constant(1, means[r]), Matrix::Constant(1, 1, vars[r])));
    return m.renormalized();
}

inline Matrix random_spd(int d, std::mt19937_64& rng, double ridge = 0.5) {
    std::normal_distribution<double> g;
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g(rng);
    Matrix s = a * a.transpose() / d;
    s.diagonal().array() += ridge;
    return 0.5 * (s + s.transpose());
}

inline double sample_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_var(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace oracle
