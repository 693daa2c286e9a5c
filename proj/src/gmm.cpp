#include "hqsat/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hqsat {

double log_pdf(const GmmModel& model, const Vector& x) {
    if (x.size() != model.dim) throw DomainError("log_pdf: dimension mismatch");
    return PreparedMixture(model).log_pdf(x);
}

Responsibilities e_step(const GmmModel& model, const Matrix& data) {
    if (data.rows() == 0) throw DomainError("e_step: empty data");
    if (data.cols() != model.dim) throw DomainError("e_step: data dimension does not match model");
    auto k = kernels::par::e_step(PreparedMixture(model), data);
    Responsibilities out;
    out.gamma = std::move(k.gamma);
    out.row_loglik = std::move(k.row_loglik);
    out.degenerate_rows = std::move(k.degenerate);
    out.mean_loglik = deterministic_sum({out.row_loglik.data(), static_cast<std::size_t>(out.row_loglik.size())}) /
                      static_cast<double>(data.rows());
    return out;
}

double mean_log_likelihood(const GmmModel& model, const Matrix& data) {
    if (data.rows() == 0) throw DomainError("mean_log_likelihood: empty data");
    const Vector ll = kernels::par::log_pdf_rows(PreparedMixture(model), data);
    return deterministic_sum({ll.data(), static_cast<std::size_t>(ll.size())}) / static_cast<double>(data.rows());
}

Matrix data_covariance(const Matrix& data) {
    if (data.rows() == 0) throw DomainError("data_covariance: empty data");
    const Matrix gamma = Matrix::Ones(data.rows(), 1);
    const auto wm = kernels::par::weighted_means(data, gamma);
    return kernels::par::weighted_scatter(data, gamma, wm.means)[0] / static_cast<double>(data.rows());
}

double covariance_floor(const Matrix& data) {
    const double tr = data_covariance(data).trace();
    return std::max(1e-6 * tr / static_cast<double>(data.cols()), 1e-12);
}

MStepResult m_step(const Matrix& data, const Matrix& gamma, const MStepOptions& opts) {
    if (data.rows() == 0) throw DomainError("m_step: empty data");
    const auto n = static_cast<double>(data.rows());
    const auto r_count = gamma.cols();
    const auto d = data.cols();
    auto wm = kernels::par::weighted_means(data, gamma);
    const double min_mass = 10.0 * std::numeric_limits<double>::epsilon() * n;

    MStepResult out;
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
    Matrix fallback_cov;
    for (Eigen::Index r = 0; r < r_count; ++r) {
        if (wm.counts(r) < min_mass) {
            out.reseeded.push_back(static_cast<int>(r));
            wm.means.row(r) = data.row(pick(rng));
        }
    }
    const auto scatter = kernels::par::weighted_scatter(data, gamma, wm.means);

    out.model.dim = static_cast<int>(d);
    out.model.normalized = true;
    double total = 0.0;
    for (Eigen::Index r = 0; r < r_count; ++r) {
        GaussianComponent c;
        c.mean = wm.means.row(r).transpose();
        const bool reseeded = std::find(out.reseeded.begin(), out.reseeded.end(), static_cast<int>(r)) != out.reseeded.end();
        if (reseeded) {
            if (fallback_cov.size() == 0) fallback_cov = data_covariance(data);
            c.covariance = fallback_cov;
            c.weight = 1.0 / static_cast<double>(r_count);
        } else {
            c.covariance = scatter[static_cast<std::size_t>(r)] / wm.counts(r);
            c.weight = wm.counts(r) / n;
        }
        c.covariance.diagonal().array() += opts.floor;
        total += c.weight;
        out.model.components.push_back(std::move(c));
    }
    for (auto& c : out.model.components) c.weight /= total;
    return out;
}

GmmModel init_gmm(const Matrix& data, int r_count, std::uint64_t seed, double floor) {
    const auto n = data.rows();
    if (r_count < 1) throw DomainError("init_gmm: need at least one component");
    if (n < r_count) throw DomainError("init_gmm: fewer samples than components");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Matrix cov = data_covariance(data);
    cov.diagonal().array() += floor;
    const double jitter = std::sqrt(std::max(floor, 1e-12));

    std::vector<Vector> centers;
    centers.push_back(data.row(pick(rng)).transpose());
    Vector d2 = (data.rowwise() - centers[0].transpose()).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < r_count) {
        const double total = d2.sum();
        Vector next;
        if (total > 0.0) {
            const double u = unif(rng) * total;
            double acc = 0.0;
            Eigen::Index chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= u && d2(i) > 0.0) {
                    chosen = i;
                    break;
                }
            }
            next = data.row(chosen).transpose();
        } else {
            // Fewer distinct points than components: random point plus jitter.
            next = data.row(pick(rng)).transpose();
            for (Eigen::Index j = 0; j < next.size(); ++j) next(j) += jitter * gauss(rng);
        }
        centers.push_back(next);
        d2 = d2.cwiseMin((data.rowwise() - next.transpose()).rowwise().squaredNorm());
    }

    GmmModel model;
    model.dim = static_cast<int>(data.cols());
    model.normalized = true;
    for (auto& c : centers) model.components.push_back({1.0 / r_count, std::move(c), cov});
    return model;
}

EmFit fit_em(const Matrix& data, int r_count, const EmOptions& opts) {
    if (data.rows() == 0) throw DomainError("fit_em: empty data");
    if (r_count < 1) throw DomainError("fit_em: need at least one component");
    if (data.rows() <= r_count) throw DomainError("fit_em: need more samples than components");
    if (!data.allFinite()) throw DomainError("fit_em: data contains non-finite values");

    EmFit fit;
    fit.floor = opts.floor.value_or(covariance_floor(data));
    GmmModel model = opts.init ? *opts.init : init_gmm(data, r_count, opts.seed, fit.floor);
    if (model.dim != data.cols() || static_cast<int>(model.size()) != r_count)
        throw DomainError("fit_em: initial model does not match data/R");

    double best = -std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        const Responsibilities resp = e_step(model, data);
        fit.trace.loglik.push_back(resp.mean_loglik);
        if (!std::isfinite(resp.mean_loglik)) throw NumericalError("fit_em: log-likelihood is not finite");
        if (resp.mean_loglik > best || it == 0) {
            best = resp.mean_loglik;
            fit.model = model;
        }
        if (it > 0 && std::abs(resp.mean_loglik - fit.trace.loglik[static_cast<std::size_t>(it) - 1]) < opts.tol) {
            fit.trace.converged = true;
            break;
        }
        if (it == opts.max_iters) break;
        auto step = m_step(data, resp.gamma, {fit.floor, derive_seed(opts.seed, 0x5eed, static_cast<std::uint64_t>(it))});
        for (int r : step.reseeded) fit.trace.reseeds.emplace_back(it, r);
        model = std::move(step.model);
        fit.trace.iterations = it + 1;
    }
    return fit;
}

}  // namespace hqsat
