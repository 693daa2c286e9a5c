#include "hqsat/kernels.hpp"

#include "mlp_detail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hqsat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct ChunkRange {
    Eigen::Index begin;
    Eigen::Index len;
};

ChunkRange chunk_range(long c, Eigen::Index n) {
    const auto begin = static_cast<Eigen::Index>(static_cast<std::size_t>(c) * kChunk);
    return {begin, std::min<Eigen::Index>(static_cast<Eigen::Index>(kChunk), n - begin)};
}

long chunks_of(Eigen::Index n) { return static_cast<long>(chunk_count(static_cast<std::size_t>(n))); }

void check_gamma(const Matrix& data, const Matrix& gamma) {
    if (gamma.rows() != data.rows()) throw DomainError("responsibilities and data disagree on N");
    if (gamma.cols() == 0) throw DomainError("responsibilities have no components");
}

}  // namespace

PreparedMixture::PreparedMixture(const GmmModel& model) : dim_(model.dim) {
    model.validate();
    const double total = model.total_weight();
    for (std::size_t r = 0; r < model.size(); ++r) {
        const auto& c = model.components[r];
        Eigen::LLT<Matrix> llt(c.covariance);
        if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all())
            throw NumericalError("component " + std::to_string(r) + ": covariance is not positive definite",
                                 static_cast<long>(r));
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        log_weight_.push_back(c.weight > 0.0 ? std::log(c.weight / total) : kNegInf);
        log_norm_.push_back(-0.5 * (dim_ * kLog2Pi + logdet));
        mean_.push_back(c.mean);
        chol_.push_back(llt.matrixL());
        precision_.push_back(llt.solve(Matrix::Identity(dim_, dim_)));
    }
}

double PreparedMixture::log_joint(std::size_t r, const Eigen::Ref<const Vector>& x) const {
    const Vector diff = x - mean_[r];
    const double maha = chol_[r].triangularView<Eigen::Lower>().solve(diff).squaredNorm();
    return log_weight_[r] + log_norm_[r] - 0.5 * maha;
}

double PreparedMixture::log_pdf(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != dim_) throw DomainError("log_pdf: dimension mismatch");
    double buf[64];
    std::vector<double> heap;
    double* v = buf;
    if (size() > 64) {
        heap.resize(size());
        v = heap.data();
    }
    for (std::size_t r = 0; r < size(); ++r) v[r] = log_joint(r, x);
    return log_sum_exp({v, size()});
}

double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

namespace kernels {

// ---------------------------------------------------------------------------
// Serial reference. Gaussian densities go through an explicit inverse and an
// LU log-determinant rather than the Cholesky path used by par.
// ---------------------------------------------------------------------------
namespace ref {

namespace {

struct DirectComponent {
    double log_weight;
    double log_norm;
    Vector mean;
    Matrix inverse;
};

std::vector<DirectComponent> direct(const PreparedMixture& mix) {
    std::vector<DirectComponent> out;
    const int d = mix.dim();
    for (std::size_t r = 0; r < mix.size(); ++r) {
        const Matrix cov = mix.precision(r).inverse();
        const Eigen::PartialPivLU<Matrix> lu(cov);
        double logdet = 0.0;
        for (int k = 0; k < d; ++k) logdet += std::log(std::abs(lu.matrixLU()(k, k)));
        const double log_norm = -0.5 * (d * kLog2Pi + logdet);
        // Recover the log weight from one joint evaluation at the mean.
        const double log_weight = mix.log_joint(r, mix.mean(r)) - log_norm;
        out.push_back({log_weight, log_norm, mix.mean(r), cov.inverse()});
    }
    return out;
}

double direct_log_joint(const DirectComponent& c, const Vector& x) {
    const Vector diff = x - c.mean;
    return c.log_weight + c.log_norm - 0.5 * diff.dot(c.inverse * diff);
}

}  // namespace

EStepResult e_step(const PreparedMixture& mix, const Matrix& data) {
    const auto comps = direct(mix);
    const auto n = data.rows();
    const auto r_count = static_cast<Eigen::Index>(comps.size());
    EStepResult out{Matrix(n, r_count), Vector(n), {}};
    std::vector<double> lj(comps.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = data.row(i).transpose();
        for (std::size_t r = 0; r < comps.size(); ++r) lj[r] = direct_log_joint(comps[r], x);
        const double lse = log_sum_exp(lj);
        out.row_loglik(i) = lse;
        if (!std::isfinite(lse)) {
            out.gamma.row(i).setConstant(1.0 / static_cast<double>(r_count));
            out.degenerate.push_back(static_cast<long>(i));
            continue;
        }
        for (Eigen::Index r = 0; r < r_count; ++r) out.gamma(i, r) = std::exp(lj[static_cast<std::size_t>(r)] - lse);
    }
    return out;
}

Vector log_pdf_rows(const PreparedMixture& mix, const Matrix& data) {
    return e_step(mix, data).row_loglik;
}

WeightedMeans weighted_means(const Matrix& data, const Matrix& gamma) {
    check_gamma(data, gamma);
    WeightedMeans out{Vector::Zero(gamma.cols()), Matrix::Zero(gamma.cols(), data.cols())};
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        for (Eigen::Index r = 0; r < gamma.cols(); ++r) {
            out.counts(r) += gamma(i, r);
            out.means.row(r) += gamma(i, r) * data.row(i);
        }
    for (Eigen::Index r = 0; r < gamma.cols(); ++r)
        if (out.counts(r) > 0.0) out.means.row(r) /= out.counts(r);
    return out;
}

std::vector<Matrix> weighted_scatter(const Matrix& data, const Matrix& gamma, const Matrix& means) {
    check_gamma(data, gamma);
    const auto d = data.cols();
    std::vector<Matrix> out(static_cast<std::size_t>(gamma.cols()), Matrix::Zero(d, d));
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        for (Eigen::Index r = 0; r < gamma.cols(); ++r) {
            const Vector diff = (data.row(i) - means.row(r)).transpose();
            out[static_cast<std::size_t>(r)] += gamma(i, r) * diff * diff.transpose();
        }
    return out;
}

Matrix latent_solve(const LatentSolveInput& in) {
    const Matrix& gamma = *in.gamma;
    const Matrix& f = *in.encoded;
    const Matrix& u = *in.duals;
    const auto d = f.cols();
    Matrix out(f.rows(), d);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        Matrix a = in.rho_tilde * Matrix::Identity(d, d);
        Vector b = in.rho_tilde * (f.row(i) - u.row(i)).transpose();
        for (std::size_t r = 0; r < in.means.size(); ++r) {
            const double g = gamma(i, static_cast<Eigen::Index>(r));
            a += in.lambda_tilde * g * in.precisions[r];
            b += in.lambda_tilde * g * (in.precisions[r] * in.means[r]);
        }
        out.row(i) = a.fullPivLu().solve(b).transpose();
    }
    return out;
}

AeGrad autoencoder_grad(const AeParams& ae, const Matrix& data) {
    AeGrad out{MlpGrad::zeros_like(ae.encoder), MlpGrad::zeros_like(ae.decoder), 0.0};
    const double scale = 1.0 / static_cast<double>(data.size());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        detail::VectorCache ce;
        detail::VectorCache cd;
        const Vector x = data.row(i).transpose();
        const Vector z = detail::forward_vec(ae.encoder, x, &ce);
        const Vector y = detail::forward_vec(ae.decoder, z, &cd);
        out.loss += scale * (y - x).squaredNorm();
        const Vector gz = detail::backward_vec(ae.decoder, cd, 2.0 * scale * (y - x), out.decoder);
        detail::backward_vec(ae.encoder, ce, gz, out.encoder);
    }
    return out;
}

RegressionGrad regression_grad(const MlpParams& net, const Matrix& inputs, const Matrix& targets, double scale) {
    RegressionGrad out{MlpGrad::zeros_like(net), 0.0};
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        detail::VectorCache cache;
        const Vector y = detail::forward_vec(net, inputs.row(i).transpose(), &cache);
        const Vector diff = y - targets.row(i).transpose();
        out.loss += scale * diff.squaredNorm();
        detail::backward_vec(net, cache, 2.0 * scale * diff, out.grad);
    }
    return out;
}

double sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels.
// ---------------------------------------------------------------------------
namespace par {

EStepResult e_step(const PreparedMixture& mix, const Matrix& data) {
    if (data.cols() != mix.dim()) throw DomainError("e_step: data dimension does not match mixture");
    const auto n = data.rows();
    const auto r_count = static_cast<Eigen::Index>(mix.size());
    EStepResult out{Matrix(n, r_count), Vector(n), {}};
    const long chunks = chunks_of(n);
    std::vector<std::vector<long>> degenerate(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, n);
        std::vector<double> lj(mix.size());
        for (Eigen::Index i = begin; i < begin + len; ++i) {
            for (std::size_t r = 0; r < mix.size(); ++r) lj[r] = mix.log_joint(r, data.row(i).transpose());
            const double lse = log_sum_exp(lj);
            out.row_loglik(i) = lse;
            if (!std::isfinite(lse)) {
                out.gamma.row(i).setConstant(1.0 / static_cast<double>(r_count));
                degenerate[static_cast<std::size_t>(c)].push_back(static_cast<long>(i));
                continue;
            }
            for (Eigen::Index r = 0; r < r_count; ++r)
                out.gamma(i, r) = std::exp(lj[static_cast<std::size_t>(r)] - lse);
        }
    }
    for (const auto& d : degenerate) out.degenerate.insert(out.degenerate.end(), d.begin(), d.end());
    return out;
}

Vector log_pdf_rows(const PreparedMixture& mix, const Matrix& data) {
    if (data.cols() != mix.dim()) throw DomainError("log_pdf_rows: data dimension does not match mixture");
    const auto n = data.rows();
    Vector out(n);
    const long chunks = chunks_of(n);
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, n);
        for (Eigen::Index i = begin; i < begin + len; ++i) out(i) = mix.log_pdf(data.row(i).transpose());
    }
    return out;
}

WeightedMeans weighted_means(const Matrix& data, const Matrix& gamma) {
    check_gamma(data, gamma);
    const long chunks = chunks_of(data.rows());
    const auto r_count = gamma.cols();
    std::vector<Vector> counts(static_cast<std::size_t>(chunks));
    std::vector<Matrix> sums(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, data.rows());
        const auto g = gamma.middleRows(begin, len);
        counts[static_cast<std::size_t>(c)] = g.colwise().sum().transpose();
        sums[static_cast<std::size_t>(c)] = g.transpose() * data.middleRows(begin, len);
    }
    WeightedMeans out{Vector::Zero(r_count), Matrix::Zero(r_count, data.cols())};
    for (long c = 0; c < chunks; ++c) {
        out.counts += counts[static_cast<std::size_t>(c)];
        out.means += sums[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index r = 0; r < r_count; ++r)
        if (out.counts(r) > 0.0) out.means.row(r) /= out.counts(r);
    return out;
}

std::vector<Matrix> weighted_scatter(const Matrix& data, const Matrix& gamma, const Matrix& means) {
    check_gamma(data, gamma);
    const long chunks = chunks_of(data.rows());
    const auto r_count = static_cast<std::size_t>(gamma.cols());
    const auto d = data.cols();
    std::vector<std::vector<Matrix>> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, data.rows());
        auto& mine = partial[static_cast<std::size_t>(c)];
        mine.resize(r_count);
        for (std::size_t r = 0; r < r_count; ++r) {
            const auto re = static_cast<Eigen::Index>(r);
            const Matrix centered = data.middleRows(begin, len).rowwise() - means.row(re);
            const Matrix weighted = centered.array().colwise() * gamma.col(re).segment(begin, len).array();
            mine[r] = weighted.transpose() * centered;
        }
    }
    std::vector<Matrix> out(r_count, Matrix::Zero(d, d));
    for (const auto& mine : partial)
        for (std::size_t r = 0; r < r_count; ++r) out[r] += mine[r];
    for (auto& m : out) m = 0.5 * (m + m.transpose()).eval();
    return out;
}

Matrix latent_solve(const LatentSolveInput& in) {
    const Matrix& gamma = *in.gamma;
    const Matrix& f = *in.encoded;
    const Matrix& u = *in.duals;
    const auto d = f.cols();
    std::vector<Vector> pm;
    for (std::size_t r = 0; r < in.means.size(); ++r) pm.push_back(in.precisions[r] * in.means[r]);
    Matrix out(f.rows(), d);
    const long chunks = chunks_of(f.rows());
    bool failed = false;
#pragma omp parallel for schedule(static) reduction(|| : failed)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, f.rows());
        Matrix a(d, d);
        Vector b(d);
        for (Eigen::Index i = begin; i < begin + len; ++i) {
            a.setIdentity();
            a *= in.rho_tilde;
            b = in.rho_tilde * (f.row(i) - u.row(i)).transpose();
            for (std::size_t r = 0; r < pm.size(); ++r) {
                const double w = in.lambda_tilde * gamma(i, static_cast<Eigen::Index>(r));
                a.noalias() += w * in.precisions[r];
                b.noalias() += w * pm[r];
            }
            Eigen::LLT<Matrix> llt(a);
            if (llt.info() != Eigen::Success) {
                failed = true;
                continue;
            }
            out.row(i) = llt.solve(b).transpose();
        }
    }
    if (failed) throw NumericalError("latent update system is not positive definite");
    return out;
}

AeGrad autoencoder_grad(const AeParams& ae, const Matrix& data) {
    const long chunks = chunks_of(data.rows());
    const double scale = 1.0 / static_cast<double>(data.size());
    std::vector<AeGrad> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, data.rows());
        AeGrad& g = partial[static_cast<std::size_t>(c)];
        g.encoder = MlpGrad::zeros_like(ae.encoder);
        g.decoder = MlpGrad::zeros_like(ae.decoder);
        const Matrix x = data.middleRows(begin, len).transpose();
        detail::ForwardCache ce;
        detail::ForwardCache cd;
        const Matrix z = detail::forward_cols(ae.encoder, x, &ce);
        const Matrix y = detail::forward_cols(ae.decoder, z, &cd);
        const Matrix diff = y - x;
        g.loss = scale * diff.squaredNorm();
        const Matrix gz = detail::backward_cols(ae.decoder, cd, 2.0 * scale * diff, g.decoder, true);
        detail::backward_cols(ae.encoder, ce, gz, g.encoder, false);
    }
    AeGrad out{MlpGrad::zeros_like(ae.encoder), MlpGrad::zeros_like(ae.decoder), 0.0};
    for (const auto& g : partial) {
        out.encoder += g.encoder;
        out.decoder += g.decoder;
        out.loss += g.loss;
    }
    return out;
}

RegressionGrad regression_grad(const MlpParams& net, const Matrix& inputs, const Matrix& targets, double scale) {
    const long chunks = chunks_of(inputs.rows());
    std::vector<RegressionGrad> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        const auto [begin, len] = chunk_range(c, inputs.rows());
        RegressionGrad& g = partial[static_cast<std::size_t>(c)];
        g.grad = MlpGrad::zeros_like(net);
        detail::ForwardCache cache;
        const Matrix y = detail::forward_cols(net, inputs.middleRows(begin, len).transpose(), &cache);
        const Matrix diff = y - targets.middleRows(begin, len).transpose();
        g.loss = scale * diff.squaredNorm();
        detail::backward_cols(net, cache, 2.0 * scale * diff, g.grad, false);
    }
    RegressionGrad out{MlpGrad::zeros_like(net), 0.0};
    for (const auto& g : partial) {
        out.grad += g.grad;
        out.loss += g.loss;
    }
    return out;
}

}  // namespace par
}  // namespace kernels
}  // namespace hqsat
