#include "hqsat/dagmm.hpp"

#include <cmath>
#include <limits>

namespace hqsat {

void DagmmHyper::validate() const {
    if (!(lambda_tilde > 0.0)) throw DomainError("lambda_tilde must be > 0");
    if (!(rho_tilde > 0.0)) throw DomainError("rho_tilde must be > 0");
    if (r_count < 1) throw DomainError("r_count must be >= 1");
    if (init_restarts < 1) throw DomainError("init_restarts must be >= 1");
    if (outer_iters < 0 || net_steps_per_outer < 0) throw DomainError("iteration counts must be >= 0");
    if (!(step >= 0.0)) throw DomainError("step must be >= 0");
}

namespace {

void check_shapes(const DagmmState& s, const Matrix& data) {
    if (data.rows() != s.latent_codes.rows()) throw DomainError("data and latent codes disagree on N");
    if (data.cols() != s.ae.encoder.input_dim()) throw DomainError("data dimension does not match encoder");
    if (s.duals.rows() != s.latent_codes.rows() || s.duals.cols() != s.latent_codes.cols())
        throw DomainError("duals and latent codes disagree in shape");
    if (s.latent_gmm.dim != s.latent_codes.cols()) throw DomainError("latent mixture dimension mismatch");
}

double sum_vec(const Vector& v) { return deterministic_sum({v.data(), static_cast<std::size_t>(v.size())}); }

// Per-sample terms shared by objective() and augmented_lagrangian().
struct Terms {
    Vector recon;
    Vector loglik;
    Vector penalty;
};

Terms terms(const DagmmState& s, const Matrix& data) {
    check_shapes(s, data);
    Terms t;
    const Matrix y = mlp_forward_rows(s.ae.decoder, s.latent_codes);
    t.recon = (data - y).rowwise().squaredNorm();
    t.loglik = kernels::par::log_pdf_rows(PreparedMixture(s.latent_gmm), s.latent_codes);
    const Matrix f = mlp_forward_rows(s.ae.encoder, data);
    t.penalty = (s.latent_codes - f + s.duals).rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < t.recon.size(); ++i)
        if (!std::isfinite(t.recon(i)) || !std::isfinite(t.loglik(i)) || !std::isfinite(t.penalty(i)))
            throw NumericalError("non-finite objective term at sample " + std::to_string(i), static_cast<long>(i));
    return t;
}

}  // namespace

double objective(const DagmmState& state, const Matrix& data) {
    const Terms t = terms(state, data);
    const Vector per = t.recon - state.hyper.lambda_tilde * t.loglik;
    return sum_vec(per) / static_cast<double>(data.rows());
}

double augmented_lagrangian(const DagmmState& state, const Matrix& data) {
    const Terms t = terms(state, data);
    const Vector per = t.recon - state.hyper.lambda_tilde * t.loglik + 0.5 * state.hyper.rho_tilde * t.penalty;
    return sum_vec(per);
}

double latent_block_objective(const DagmmState& state, const Matrix& data, const Matrix& gamma) {
    check_shapes(state, data);
    const PreparedMixture mix(state.latent_gmm);
    const Matrix f = mlp_forward_rows(state.ae.encoder, data);
    Vector per(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        double g_term = 0.0;
        for (std::size_t r = 0; r < mix.size(); ++r) {
            const double g = gamma(i, static_cast<Eigen::Index>(r));
            if (g > 0.0) g_term += g * mix.log_joint(r, state.latent_codes.row(i).transpose());
        }
        const double pen = (state.latent_codes.row(i) - f.row(i) + state.duals.row(i)).squaredNorm();
        per(i) = -state.hyper.lambda_tilde * g_term + 0.5 * state.hyper.rho_tilde * pen;
    }
    return sum_vec(per);
}

Matrix latent_block_gradient(const DagmmState& state, const Matrix& data, const Matrix& gamma) {
    check_shapes(state, data);
    const PreparedMixture mix(state.latent_gmm);
    const Matrix f = mlp_forward_rows(state.ae.encoder, data);
    Matrix grad = state.hyper.rho_tilde * (state.latent_codes - f + state.duals);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Vector x = state.latent_codes.row(i).transpose();
        for (std::size_t r = 0; r < mix.size(); ++r) {
            const double g = gamma(i, static_cast<Eigen::Index>(r));
            grad.row(i) += (state.hyper.lambda_tilde * g * (mix.precision(r) * (x - mix.mean(r)))).transpose();
        }
    }
    return grad;
}

Responsibilities latent_responsibilities(const DagmmState& state) { return e_step(state.latent_gmm, state.latent_codes); }

Matrix update_latent_codes(const DagmmState& state, const Matrix& data, const Matrix& gamma) {
    check_shapes(state, data);
    if (gamma.rows() != data.rows() || gamma.cols() != static_cast<Eigen::Index>(state.latent_gmm.size()))
        throw DomainError("update_latent_codes: responsibilities have the wrong shape");
    const PreparedMixture mix(state.latent_gmm);
    const Matrix f = mlp_forward_rows(state.ae.encoder, data);
    kernels::LatentSolveInput in;
    in.gamma = &gamma;
    in.encoded = &f;
    in.duals = &state.duals;
    for (std::size_t r = 0; r < mix.size(); ++r) {
        in.precisions.push_back(mix.precision(r));
        in.means.push_back(mix.mean(r));
    }
    in.lambda_tilde = state.hyper.lambda_tilde;
    in.rho_tilde = state.hyper.rho_tilde;
    return kernels::par::latent_solve(in);
}

GmmModel update_gmm_params(const DagmmState& state, const Matrix& gamma) {
    return m_step(state.latent_codes, gamma, {state.floor, derive_seed(state.hyper.seed, 0x9a4)}).model;
}

Matrix update_duals(const DagmmState& state, const Matrix& data) {
    check_shapes(state, data);
    return state.duals + state.latent_codes - mlp_forward_rows(state.ae.encoder, data);
}

NetworkLoss network_loss(const DagmmState& state, const Matrix& data) {
    check_shapes(state, data);
    const double n = static_cast<double>(data.rows());
    const auto dec = kernels::par::regression_grad(state.ae.decoder, state.latent_codes, data, 1.0 / n);
    const Matrix target = state.latent_codes + state.duals;
    const auto enc = kernels::par::regression_grad(state.ae.encoder, data, target, 0.5 * state.hyper.rho_tilde / n);
    return {dec.loss + enc.loss, enc.grad, dec.grad};
}

AeParams update_network(const DagmmState& state, const Matrix& data) {
    DagmmState work = state;
    for (int s = 0; s < state.hyper.net_steps_per_outer; ++s) {
        const NetworkLoss nl = network_loss(work, data);
        if (!std::isfinite(nl.loss)) throw NumericalError("network loss became non-finite");
        apply_step(work.ae.encoder, nl.encoder, state.hyper.step);
        apply_step(work.ae.decoder, nl.decoder, state.hyper.step);
    }
    if (!std::isfinite(network_loss(work, data).loss)) throw NumericalError("network loss became non-finite");
    return work.ae;
}

double constraint_violation(const DagmmState& state, const Matrix& data) {
    check_shapes(state, data);
    const Vector v = (state.latent_codes - mlp_forward_rows(state.ae.encoder, data)).rowwise().squaredNorm();
    return std::sqrt(sum_vec(v) / static_cast<double>(data.rows()));
}

std::vector<int> argmax_labels(const Matrix& gamma) {
    std::vector<int> labels(static_cast<std::size_t>(gamma.rows()), 0);
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < gamma.cols(); ++r)
            if (gamma(i, r) > gamma(i, best)) best = r;
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return labels;
}

std::vector<int> assign_clusters(const DagmmState& state) { return argmax_labels(latent_responsibilities(state).gamma); }

namespace {

TrainRow make_row(int iter, const DagmmState& s, const Matrix& data) {
    const Terms t = terms(s, data);
    const double n = static_cast<double>(data.rows());
    TrainRow row;
    row.iter = iter;
    row.recon = sum_vec(t.recon) / n;
    row.nll = -sum_vec(t.loglik) / n;
    row.aug_lagrangian = sum_vec(t.recon) - s.hyper.lambda_tilde * sum_vec(t.loglik) + 0.5 * s.hyper.rho_tilde * sum_vec(t.penalty);
    row.violation = constraint_violation(s, data);
    return row;
}

}  // namespace

DagmmFit fit_dagmm(const Matrix& data, const DagmmConfig& config) {
    const DagmmHyper& hyper = config.hyper;
    hyper.validate();
    if (data.rows() <= hyper.r_count) throw DomainError("fit_dagmm: need more samples than components");
    if (config.arch.empty() || config.arch.front() != data.cols())
        throw DomainError("fit_dagmm: architecture input size does not match data");

    DagmmFit fit;
    DagmmState& s = fit.state;
    TrainReport& rep = fit.report;
    s.hyper = hyper;

    TrainOptions pre = config.pretrain;
    pre.seed = derive_seed(hyper.seed, 0xae);
    auto trained = train_autoencoder(init_autoencoder(config.arch, config.activation, derive_seed(hyper.seed, 0x1a)), data, pre);
    rep.pretrain_loss = trained.loss_trace;
    s.ae = std::move(trained.ae);
    s.latent_codes = mlp_forward_rows(s.ae.encoder, data);
    s.duals = Matrix::Zero(s.latent_codes.rows(), s.latent_codes.cols());
    if (trained.diverged) {
        rep.aborted = true;
        rep.error = "pretraining: " + trained.error;
        return fit;
    }

    try {
        s.floor = covariance_floor(s.latent_codes);
        double best = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < hyper.init_restarts; ++k) {
            EmOptions em;
            em.seed = derive_seed(hyper.seed, 0xe3, static_cast<std::uint64_t>(k));
            em.floor = s.floor;
            EmFit trial = fit_em(s.latent_codes, hyper.r_count, em);
            if (trial.trace.loglik.back() > best) {
                best = trial.trace.loglik.back();
                s.latent_gmm = std::move(trial.model);
            }
        }
        rep.rows.push_back(make_row(0, s, data));
        rep.first_labels = assign_clusters(s);

        for (int it = 1; it <= hyper.outer_iters; ++it) {
            const Responsibilities resp = latent_responsibilities(s);
            s.latent_codes = update_latent_codes(s, data, resp.gamma);
            s.latent_gmm = update_gmm_params(s, resp.gamma);
            s.ae = update_network(s, data);
            s.duals = update_duals(s, data);
            rep.rows.push_back(make_row(it, s, data));
            if (it == 1) rep.first_labels = assign_clusters(s);
            const auto& cur = rep.rows.back();
            const auto& prev = rep.rows[rep.rows.size() - 2];
            if (cur.violation < hyper.tol &&
                std::abs(cur.aug_lagrangian - prev.aug_lagrangian) < hyper.tol * std::max(1.0, std::abs(prev.aug_lagrangian)))
                break;
        }
        rep.labels = assign_clusters(s);
    } catch (const std::exception& e) {
        rep.aborted = true;
        rep.error = e.what();
    }
    return fit;
}

}  // namespace hqsat
