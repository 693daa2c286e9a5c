#include "hqsat/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace hqsat {

namespace {

// Below this truncated mass rejection would stall, so draw the count from
// the normalized truncated weights directly (same distribution).
constexpr double kRejectionMassLimit = 1e-2;

double standard_normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

void HqnParams::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be finite and >= 0");
    if (r_max < 0) throw DomainError("r_max must be >= 0");
    if (!(sigma_cl > 0.0) || !std::isfinite(sigma_cl)) throw DomainError("sigma_cl must be > 0");
    if (!std::isfinite(mu_cl)) throw DomainError("mu_cl must be finite");
    const double mass = truncated_mass(*this);
    if (!(mass > 0.0)) throw DomainError("truncated Poisson mass underflows to zero");
}

void ChannelConfig::validate() const {
    if (!(t_coeff >= 0.0 && t_coeff <= 1.0)) throw DomainError("t_coeff must lie in [0, 1]");
    if (!(sigma_x > 0.0) || !std::isfinite(sigma_x)) throw DomainError("sigma_x must be > 0");
    if (!std::isfinite(mu_x)) throw DomainError("mu_x must be finite");
}

double GmmModel::total_weight() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight;
    return s;
}

GmmModel GmmModel::renormalized() const {
    const double total = total_weight();
    if (!(total > 0.0)) throw DomainError("mixture has zero total weight");
    GmmModel out = *this;
    for (auto& c : out.components) c.weight /= total;
    out.normalized = true;
    return out;
}

void GmmModel::validate() const {
    if (dim <= 0) throw DomainError("mixture dimension must be positive");
    if (components.empty()) throw DomainError("mixture has no components");
    for (std::size_t r = 0; r < components.size(); ++r) {
        const auto& c = components[r];
        const std::string tag = "component " + std::to_string(r) + ": ";
        if (c.mean.size() != dim) throw DomainError(tag + "mean has wrong dimension");
        if (c.covariance.rows() != dim || c.covariance.cols() != dim)
            throw DomainError(tag + "covariance has wrong shape");
        if (!(c.weight >= 0.0 && c.weight <= 1.0 + 1e-12)) throw DomainError(tag + "weight outside [0,1]");
        const double scale = std::max(1.0, c.covariance.cwiseAbs().maxCoeff());
        if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw DomainError(tag + "covariance not symmetric");
    }
    const double total = total_weight();
    if (normalized && std::abs(total - 1.0) > 1e-12) throw DomainError("normalized weights do not sum to 1");
    if (!normalized && !(total > 0.0 && total <= 1.0 + 1e-12))
        throw DomainError("unnormalized weights must sum into (0, 1]");
}

double poisson_weight(double lambda, long i) {
    if (!(lambda >= 0.0)) throw DomainError("poisson_weight: lambda must be >= 0");
    if (i < 0) throw DomainError("poisson_weight: index must be >= 0");
    if (lambda == 0.0) return i == 0 ? 1.0 : 0.0;
    const double di = static_cast<double>(i);
    return std::exp(-lambda + di * std::log(lambda) - std::lgamma(di + 1.0));
}

double truncated_mass(const HqnParams& params) {
    double s = 0.0;
    for (long i = 0; i <= params.r_max; ++i) s += poisson_weight(params.lambda, i);
    return s;
}

GmmModel hqn_gmm_1d(const HqnParams& params) { return hqn_gmm_nd(params, 1); }

GmmModel hqn_gmm_nd(const HqnParams& params, int dim) {
    if (dim <= 0) throw DomainError("hqn_gmm_nd: dimension must be >= 1");
    params.validate();
    GmmModel model;
    model.dim = dim;
    model.normalized = false;
    const double var = params.sigma_cl * params.sigma_cl;
    for (long i = 0; i <= params.r_max; ++i) {
        GaussianComponent c;
        c.weight = poisson_weight(params.lambda, i);
        c.mean = Vector::Constant(dim, params.mu_cl + static_cast<double>(i));
        c.covariance = var * Matrix::Identity(dim, dim);
        model.components.push_back(std::move(c));
    }
    return model;
}

double mixture_density(const GmmModel& model, const Vector& x) {
    if (x.size() != model.dim) throw DomainError("mixture_density: dimension mismatch");
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double s = 0.0;
    for (std::size_t r = 0; r < model.size(); ++r) {
        const auto& c = model.components[r];
        Eigen::LLT<Matrix> llt(c.covariance);
        if (llt.info() != Eigen::Success) throw NumericalError("covariance not SPD", static_cast<long>(r));
        const Vector diff = x - c.mean;
        const double maha = llt.matrixL().solve(diff).squaredNorm();
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        s += c.weight * std::exp(-0.5 * (maha + logdet + model.dim * log2pi));
    }
    return s;
}

double mixture_density(const GmmModel& model, double x) {
    if (model.dim != 1) throw DomainError("mixture_density: scalar evaluation needs a 1-D mixture");
    double s = 0.0;
    for (const auto& c : model.components) {
        const double sd = std::sqrt(c.covariance(0, 0));
        s += c.weight * standard_normal_pdf((x - c.mean(0)) / sd) / sd;
    }
    return s;
}

HqnSampler::HqnSampler(const HqnParams& params) : params_(params) {
    params_.validate();
    if (truncated_mass(params_) < kRejectionMassLimit) {
        double acc = 0.0;
        for (long i = 0; i <= params_.r_max; ++i) cdf_.push_back(acc += poisson_weight(params_.lambda, i));
        for (auto& v : cdf_) v /= acc;
    }
}

long HqnSampler::count(std::mt19937_64& rng) const {
    if (!cdf_.empty()) {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        return std::upper_bound(cdf_.begin(), cdf_.end() - 1, u) - cdf_.begin();
    }
    if (params_.lambda == 0.0) return 0;
    std::poisson_distribution<long> poisson(params_.lambda);
    long k = 0;
    do {
        k = poisson(rng);
    } while (k > params_.r_max);
    return k;
}

double HqnSampler::operator()(std::mt19937_64& rng) const {
    const auto k = static_cast<double>(count(rng));
    return k + std::normal_distribution<double>(params_.mu_cl, params_.sigma_cl)(rng);
}

std::vector<double> sample_hqn(const HqnParams& params, std::size_t n, std::uint64_t seed) {
    const HqnSampler draw(params);
    if (n == 0) throw DomainError("sample_hqn: n must be >= 1");
    std::vector<double> out(n);
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t k = begin; k < end; ++k) out[k] = draw(rng);
    }
    return out;
}

Matrix sample_gmm(const GmmModel& model, std::size_t n, std::uint64_t seed) {
    model.validate();
    if (n == 0) throw DomainError("sample_gmm: n must be >= 1");
    const GmmModel norm = model.renormalized();
    const int d = norm.dim;
    std::vector<double> cdf;
    std::vector<Matrix> chol;
    double acc = 0.0;
    for (std::size_t r = 0; r < norm.size(); ++r) {
        cdf.push_back(acc += norm.components[r].weight);
        Eigen::LLT<Matrix> llt(norm.components[r].covariance);
        if (llt.info() != Eigen::Success) throw NumericalError("covariance not SPD", static_cast<long>(r));
        chol.push_back(llt.matrixL());
    }
    Matrix out(static_cast<Eigen::Index>(n), d);
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vector z(d);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t k = begin; k < end; ++k) {
            const double u = unif(rng) * acc;
            const auto r = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
            for (int j = 0; j < d; ++j) z(j) = gauss(rng);
            out.row(static_cast<Eigen::Index>(k)) = (norm.components[r].mean + chol[r] * z).transpose();
        }
    }
    return out;
}

std::vector<double> sample_input(const ChannelConfig& config, std::size_t n, std::uint64_t seed) {
    config.validate();
    std::vector<double> out(n);
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss(config.mu_x, config.sigma_x);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t k = begin; k < end; ++k) out[k] = gauss(rng);
    }
    return out;
}

std::vector<double> simulate_channel(const ChannelConfig& config, const HqnParams& params,
                                     std::span<const double> x, std::uint64_t seed) {
    config.validate();
    if (x.empty()) throw DomainError("simulate_channel: empty input");
    std::vector<double> y = sample_hqn(params, x.size(), seed);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += config.t_coeff * x[k];
    return y;
}

std::vector<double> simulate_channel(const ChannelConfig& config, const GmmModel& noise,
                                     std::span<const double> x, std::uint64_t seed) {
    config.validate();
    if (noise.dim != 1) throw DomainError("simulate_channel: noise mixture must be 1-D");
    if (x.empty()) throw DomainError("simulate_channel: empty input");
    const Matrix z = sample_gmm(noise, x.size(), seed);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = config.t_coeff * x[k] + z(static_cast<Eigen::Index>(k), 0);
    return y;
}

GmmModel received_pdf(const ChannelConfig& config, const HqnParams& params) {
    return received_pdf(config, hqn_gmm_1d(params));
}

GmmModel received_pdf(const ChannelConfig& config, const GmmModel& noise) {
    config.validate();
    if (noise.dim != 1) throw DomainError("received_pdf: noise mixture must be 1-D");
    const double t = config.t_coeff;
    GmmModel out = noise;
    for (auto& c : out.components) {
        c.mean(0) += t * config.mu_x;
        c.covariance(0, 0) += t * t * config.sigma_x * config.sigma_x;
    }
    return out;
}

Moments mixture_moments(const GmmModel& model) {
    if (model.components.empty()) throw DomainError("mixture_moments: empty mixture");
    const double total = model.total_weight();
    if (!(total > 0.0)) throw DomainError("mixture_moments: zero total weight");
    const int d = model.dim;
    Moments m{Vector::Zero(d), Matrix::Zero(d, d)};
    for (const auto& c : model.components) m.mean += (c.weight / total) * c.mean;
    for (const auto& c : model.components) {
        const Vector diff = c.mean - m.mean;
        m.covariance += (c.weight / total) * (c.covariance + diff * diff.transpose());
    }
    return m;
}

}  // namespace hqsat
