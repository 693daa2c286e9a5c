#include "hqsat/capacity.hpp"

#include "hqsat/datagen.hpp"
#include "hqsat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hqsat {

namespace {

McEstimate mean_and_error(const std::vector<double>& v, std::size_t clamped = 0) {
    const auto n = static_cast<double>(v.size());
    const double mean = kernels::par::sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) sq[k] = (v[k] - mean) * (v[k] - mean);
    const double var = v.size() > 1 ? kernels::par::sum(sq) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n), clamped};
}

void require_samples(std::size_t n, const char* who) {
    if (n < 2) throw DomainError(std::string(who) + ": need at least 2 samples");
}

}  // namespace

McEstimate entropy_mc(const GmmModel& model, std::size_t n, std::uint64_t seed) {
    require_samples(n, "entropy_mc");
    const GmmModel norm = model.renormalized();
    const PreparedMixture mix(norm);
    const Matrix z = sample_gmm(norm, n, seed);
    const Vector lp = kernels::par::log_pdf_rows(mix, z);
    std::vector<double> neg(n);
    for (std::size_t k = 0; k < n; ++k) neg[k] = -lp(static_cast<Eigen::Index>(k));
    return mean_and_error(neg);
}

McEstimate cross_entropy_mc(const Matrix& samples, const GmmModel& fitted) {
    require_samples(static_cast<std::size_t>(samples.rows()), "cross_entropy_mc");
    if (samples.cols() != fitted.dim) throw DomainError("cross_entropy_mc: sample dimension does not match model");
    const PreparedMixture mix(fitted.renormalized());
    const Vector lp = kernels::par::log_pdf_rows(mix, samples);
    std::vector<double> neg(static_cast<std::size_t>(lp.size()));
    std::size_t clamped = 0;
    for (Eigen::Index k = 0; k < lp.size(); ++k) {
        double v = lp(k);
        if (!(v >= kLogDensityFloor)) {
            v = kLogDensityFloor;
            ++clamped;
        }
        neg[static_cast<std::size_t>(k)] = -v;
    }
    return mean_and_error(neg, clamped);
}

McEstimate capacity_estimate(const ChannelConfig& config, const GmmModel& noise, std::size_t n, std::uint64_t seed) {
    config.validate();
    if (noise.dim != 1) throw DomainError("capacity_estimate: noise model must be 1-D");
    require_samples(n, "capacity_estimate");
    const GmmModel z_model = noise.renormalized();
    const PreparedMixture z_mix(z_model);
    const PreparedMixture y_mix(received_pdf(config, z_model));

    const Matrix z = sample_gmm(z_model, n, derive_seed(seed, 0x2));
    const std::vector<double> x = sample_input(config, n, derive_seed(seed, 0x1));
    Matrix y(static_cast<Eigen::Index>(n), 1);
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        y(i, 0) = config.t_coeff * x[k] + z(i, 0);
    }
    const Vector ly = kernels::par::log_pdf_rows(y_mix, y);
    const Vector lz = kernels::par::log_pdf_rows(z_mix, z);
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        d[k] = (lz(i) - ly(i)) / std::numbers::ln2;
    }
    return mean_and_error(d);
}

GmmModel dagmm_noise_model(const DagmmState& state, const Matrix& noise_samples, std::vector<int>* dropped) {
    if (noise_samples.cols() != state.ae.encoder.input_dim())
        throw DomainError("dagmm_noise_model: sample dimension does not match the autoencoder");
    const Matrix codes = mlp_forward_rows(state.ae.encoder, noise_samples);
    const PreparedMixture latent(state.latent_gmm);
    const Matrix gamma = kernels::par::e_step(latent, codes).gamma;
    const auto r_count = static_cast<Eigen::Index>(state.latent_gmm.size());

    Matrix means(r_count, noise_samples.cols());
    for (Eigen::Index r = 0; r < r_count; ++r)
        means.row(r) = decode(state.ae.decoder, state.latent_gmm.components[static_cast<std::size_t>(r)].mean).transpose();
    const Vector counts = gamma.colwise().sum().transpose();
    const std::vector<Matrix> scatter = kernels::par::weighted_scatter(noise_samples, gamma, means);
    const double floor = covariance_floor(noise_samples);
    const double min_mass = 10.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(noise_samples.rows());

    GmmModel out;
    out.dim = static_cast<int>(noise_samples.cols());
    for (Eigen::Index r = 0; r < r_count; ++r) {
        const auto& comp = state.latent_gmm.components[static_cast<std::size_t>(r)];
        if (!(counts(r) > min_mass) || !(comp.weight > 0.0)) {
            if (dropped) dropped->push_back(static_cast<int>(r));
            continue;
        }
        GaussianComponent c;
        c.weight = comp.weight;
        c.mean = means.row(r).transpose();
        c.covariance = scatter[static_cast<std::size_t>(r)] / counts(r);
        c.covariance.diagonal().array() += floor;
        out.components.push_back(std::move(c));
    }
    if (out.components.empty()) throw NumericalError("dagmm_noise_model: every component is empty");
    return out.renormalized();
}

std::string to_string(Method m) {
    switch (m) {
        case Method::baseline: return "baseline";
        case Method::gmm: return "gmm";
        case Method::dagmm: return "dagmm";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "baseline") return Method::baseline;
    if (name == "gmm") return Method::gmm;
    if (name == "dagmm") return Method::dagmm;
    throw DomainError("unknown method '" + name + "'");
}

double scenario_noise_variance(const SweepScenario& scenario) {
    return mixture_moments(hqn_gmm_1d(scenario.noise)).covariance(0, 0);
}

double sigma_x_for_snr(const SweepScenario& scenario, double snr_db) {
    if (!(scenario.channel.t_coeff > 0.0)) throw DomainError("sweep needs a positive transmission coefficient");
    const double snr = std::pow(10.0, snr_db / 10.0);
    return std::sqrt(snr * scenario_noise_variance(scenario)) / scenario.channel.t_coeff;
}

Matrix scenario_noise(const SweepScenario& scenario, std::size_t n, std::uint64_t seed) {
    const std::vector<double> z = gen_warped_noise(scenario.noise, scenario.warp, n, seed);
    return Eigen::Map<const Matrix>(z.data(), static_cast<Eigen::Index>(n), 1);
}

SweepOptions default_sweep_options() {
    SweepOptions o;
    o.dagmm.arch = {1, 8, 1, 8, 1};
    o.dagmm.hyper.r_count = o.components;
    return o;
}

const CurveCell& CapacityCurve::at(Method m, std::size_t point) const {
    for (std::size_t j = 0; j < methods.size(); ++j)
        if (methods[j] == m) return cells[j].at(point);
    throw DomainError("curve has no '" + to_string(m) + "' column");
}

bool CapacityCurve::has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

CapacityCurve snr_sweep(const SweepScenario& scenario, const SweepOptions& opts) {
    scenario.noise.validate();
    if (opts.grid_db.empty()) throw DomainError("snr_sweep: empty SNR grid");
    for (std::size_t i = 1; i < opts.grid_db.size(); ++i)
        if (!(opts.grid_db[i] > opts.grid_db[i - 1])) throw DomainError("snr_sweep: grid must be strictly increasing");
    if (opts.methods.empty()) throw DomainError("snr_sweep: no methods requested");

    CapacityCurve curve;
    curve.snr_db = opts.grid_db;
    curve.methods = opts.methods;
    curve.mc_samples = opts.mc_samples;
    curve.seed = opts.seed;
    curve.cells.assign(opts.methods.size(), std::vector<CurveCell>(opts.grid_db.size()));

    const Matrix heldout = scenario_noise(scenario, opts.heldout_samples, derive_seed(opts.seed, 0x4e1d));

    for (std::size_t j = 0; j < opts.methods.size(); ++j) {
        const Method m = opts.methods[j];
        const auto tag = static_cast<std::uint64_t>(m);
        // The noise law does not depend on SNR, so each method fits once and
        // the grid points reuse the model with their own MC streams.
        GmmModel noise;
        std::string fit_error;
        try {
            if (m == Method::baseline) {
                noise = hqn_gmm_1d(scenario.noise).renormalized();
            } else {
                const Matrix train = scenario_noise(scenario, opts.fit_samples, derive_seed(opts.seed, 0xf17, tag));
                if (m == Method::gmm) {
                    EmOptions em = opts.em;
                    em.seed = derive_seed(opts.seed, 0xe3, tag);
                    noise = fit_em(train, opts.components, em).model;
                } else {
                    DagmmConfig cfg = opts.dagmm;
                    cfg.hyper.seed = derive_seed(opts.seed, 0xda, tag);
                    const DagmmFit fit = fit_dagmm(train, cfg);
                    if (fit.report.aborted) throw NumericalError("dagmm fit aborted: " + fit.report.error);
                    noise = dagmm_noise_model(fit.state, train);
                }
            }
        } catch (const std::exception& e) {
            fit_error = e.what();
        }
        double xent = 0.0;
        if (fit_error.empty()) {
            try {
                xent = cross_entropy_mc(heldout, noise).value;
            } catch (const std::exception& e) {
                fit_error = e.what();
            }
        }

        for (std::size_t i = 0; i < opts.grid_db.size(); ++i) {
            CurveCell& cell = curve.cells[j][i];
            if (!fit_error.empty()) {
                cell.error = fit_error;
                continue;
            }
            try {
                ChannelConfig ch = scenario.channel;
                ch.sigma_x = sigma_x_for_snr(scenario, opts.grid_db[i]);
                const McEstimate c = capacity_estimate(ch, noise, opts.mc_samples, derive_seed(opts.seed, i, tag));
                if (!std::isfinite(c.value)) throw NumericalError("non-finite capacity estimate");
                cell.present = true;
                cell.rate = scenario.beta_rec * c.value;
                cell.std_error = scenario.beta_rec * c.std_error;
                cell.cross_entropy = xent;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    }
    return curve;
}

}  // namespace hqsat
