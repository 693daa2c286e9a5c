#include "hqsat/cli.hpp"

#include "hqsat/metrics.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>

namespace hqsat {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Bookkeeping shared by every command: resolved config, output list,
/// timings, and the manifest written on the way out.
class Run {
public:
    Run(const CliOptions& opts, std::ostream& log) : opts_(opts), log_(log), start_(Clock::now()) {}

    const CliOptions& opts() const { return opts_; }
    std::ostream& log() { return log_; }
    RunConfig& cfg() { return cfg_; }
    const fs::path& dir() const { return dir_; }
    Json& derived() { return derived_; }
    Json& failures() { return failures_; }
    Json& lineage() { return lineage_; }

    void resolve() {
        cfg_ = default_config();
        Json sources = {{"out", "default"}, {"seed", "default"}, {"jobs", "default"}};
        if (!opts_.config_path.empty()) {
            cfg_ = load_config(opts_.config_path);
            const Json raw = read_json(opts_.config_path);
            for (const char* k : {"out", "seed", "jobs"})
                if (raw.contains(k)) sources[k] = "file";
            if (raw.contains("fit")) {
                if (raw["fit"].contains("method")) sources["fit.method"] = "file";
                if (raw["fit"].contains("data")) sources["fit.data"] = "file";
            }
        }
        if (opts_.out) cfg_.out = *opts_.out, sources["out"] = "flag";
        if (opts_.seed) cfg_.seed = *opts_.seed, sources["seed"] = "flag";
        if (opts_.jobs) {
            if (*opts_.jobs < 0) throw ConfigError("jobs", "must be >= 0");
            cfg_.jobs = *opts_.jobs, sources["jobs"] = "flag";
        }
        if (opts_.method) {
            if (*opts_.method != "gmm" && *opts_.method != "dagmm")
                throw ConfigError("fit.method", "expected \"gmm\" or \"dagmm\"");
            cfg_.fit.method = *opts_.method, sources["fit.method"] = "flag";
        }
        if (opts_.data) cfg_.fit.data = *opts_.data, sources["fit.data"] = "flag";
        sources_ = std::move(sources);
        if (cfg_.jobs > 0) set_worker_count(cfg_.jobs);
    }

    void open_dir(const std::string& sub) {
        dir_ = fs::path(opts_.out.value_or(cfg_.out)) / sub;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw ConfigError("out", "cannot create output directory '" + dir_.string() + "'");
    }

    fs::path output(const std::string& name) {
        outputs_.push_back(dir_ / name);
        return dir_ / name;
    }

    void phase(const std::string& name, double secs) { timings_[name] = secs; }

    void write_manifest(int code, const std::string& error) {
        if (dir_.empty()) return;
        Json m;
        m["tool"] = "hqsat";
        m["version"] = kToolVersion;
        m["command"] = opts_.command;
        m["status"] = code == kExitOk ? "ok" : "error";
        m["exit_code"] = code;
        m["error"] = error;
        m["seed"] = cfg_.seed;
        m["config"] = config_to_json(cfg_);
        m["config_sources"] = sources_;
        m["derived"] = derived_;
        if (!lineage_.is_null()) m["lineage"] = lineage_;
        m["failures"] = failures_;
        Json t = timings_;
        t["total_s"] = seconds_since(start_);
        m["timings"] = t;
        Json outs = Json::array();
        for (const auto& p : outputs_) {
            std::error_code ec;
            if (!fs::exists(p, ec)) continue;
            outs.push_back(Json{{"file", p.filename().string()}, {"bytes", fs::file_size(p, ec)}, {"sha256", sha256_file(p)}});
        }
        m["outputs"] = outs;
        try {
            write_json(m, dir_ / "manifest.json");
        } catch (const std::exception& e) {
            log_ << "error: manifest not written: " << e.what() << '\n';
        }
    }

    SvgOptions svg(const std::string& title) const { return SvgOptions{title, !opts_.no_timestamp}; }

private:
    CliOptions opts_;
    std::ostream& log_;
    Clock::time_point start_;
    RunConfig cfg_ = default_config();
    Json sources_ = Json::object();
    fs::path dir_;
    Json derived_ = Json::object();
    Json failures_ = Json::array();
    Json lineage_;
    Json timings_ = Json::object();
    std::vector<fs::path> outputs_;
};

void record_channel(Run& run) {
    const EffectiveChannel eff = resolve_channel(run.cfg().scenario);
    const auto& p = eff.provenance;
    Json d;
    d["t_coeff"] = p.t_coeff;
    d["tau_total"] = p.tau_total;
    d["sigma_cl_effective"] = p.sigma_cl_eff;
    d["noise_variance_effective"] = p.noise_variance_eff;
    if (run.cfg().scenario.link) {
        d["tau_free_space"] = p.tau_fs;
        d["rayleigh_range_m"] = p.rayleigh_range;
        d["beam_radius_rx_m"] = p.beam_radius_rx;
    }
    d["truncated_mass"] = truncated_mass(eff.noise);
    d["noise_variance_mixture"] = mixture_moments(hqn_gmm_1d(eff.noise)).covariance(0, 0);
    run.derived()["channel"] = d;
}

int cmd_gen(Run& run) {
    run.open_dir("gen");
    record_channel(run);
    const RunConfig& c = run.cfg();
    const HqnParams noise = resolve_channel(c.scenario).noise;
    const auto t0 = Clock::now();
    Dataset ds;
    if (c.gen.kind == "cluster3d") {
        ds = gen_cluster3d(c.gen.k, c.gen.n, c.gen.warp, noise, c.seed, c.gen.cluster);
    } else if (c.gen.kind == "dgmm") {
        ds = dgmm_sample(c.gen.layers, c.gen.n, c.seed);
    } else {
        ds.data = scenario_noise(sweep_scenario(c), c.gen.n, c.seed);
        ds.seed = c.seed;
        ds.descriptor = "noise warp=" + format_double(c.scenario.warp) + " n=" + std::to_string(c.gen.n) +
                        " seed=" + std::to_string(c.seed);
    }
    run.phase("generate_s", seconds_since(t0));
    save_dataset(ds, run.output("dataset.csv"));
    run.derived()["rows"] = ds.data.rows();
    run.derived()["cols"] = ds.data.cols();
    run.derived()["descriptor"] = ds.descriptor;
    run.log() << "gen: wrote " << ds.data.rows() << " x " << ds.data.cols() << " to " << (run.dir() / "dataset.csv").string() << '\n';
    return kExitOk;
}

void scatter(Run& run, const Matrix& data, std::vector<std::vector<int>> sets, std::vector<std::string> captions,
             const std::string& title) {
    if (data.cols() < 2) return;
    write_text(scatter_svg(data, sets, captions, run.svg(title)), run.output("scatter.svg"));
}

int cmd_fit(Run& run) {
    RunConfig& c = run.cfg();
    const std::string method = c.fit.method;
    const fs::path data_path = c.fit.data.empty() ? fs::path(c.out) / "gen" / "dataset.csv" : fs::path(c.fit.data);
    run.open_dir("fit-" + method);
    if (!fs::exists(data_path)) throw ConfigError("fit.data", "dataset '" + data_path.string() + "' not found");
    Dataset ds;
    try {
        ds = load_dataset(data_path);
    } catch (const ParseError& e) {
        throw ConfigError("fit.data", data_path.string() + ": " + e.what());
    }
    run.lineage() = Json{{"data", data_path.string()},
                         {"data_sha256", sha256_file(data_path)},
                         {"data_descriptor", ds.descriptor},
                         {"seed", c.seed}};
    const bool truth = !ds.labels.empty();
    const auto t0 = Clock::now();

    if (method == "gmm") {
        EmOptions em;
        em.seed = c.seed;
        em.max_iters = c.fit.em_max_iters;
        em.tol = c.fit.em_tol;
        const EmFit fit = fit_em(ds.data, c.components(), em);
        run.phase("fit_s", seconds_since(t0));
        write_json(gmm_to_json(fit.model, fit.floor, fit.trace.loglik), run.output("model.json"));
        write_em_trace_csv(fit.trace, run.output("trace.csv"));
        const auto labels = argmax_labels(e_step(fit.model, ds.data).gamma);
        write_labels_csv(labels, run.output("labels.csv"));
        run.derived()["components"] = c.components();
        run.derived()["iterations"] = fit.trace.iterations;
        run.derived()["converged"] = fit.trace.converged;
        run.derived()["final_loglik"] = fit.trace.loglik.back();
        run.derived()["reseeds"] = fit.trace.reseeds.size();
        if (truth) run.derived()["ari"] = adjusted_rand_index(labels, ds.labels);
        std::vector<std::vector<int>> sets{labels};
        std::vector<std::string> caps{"EM hard labels"};
        if (truth) sets.push_back(ds.labels), caps.push_back("ground truth");
        scatter(run, ds.data, sets, caps, "Gaussian mixture clusters");
        run.log() << "fit gmm: " << fit.trace.iterations << " iterations, mean loglik " << fit.trace.loglik.back() << '\n';
        return kExitOk;
    }

    DagmmConfig dc = c.fit.dagmm;
    dc.hyper.seed = c.seed;
    if (dc.arch.empty() || dc.arch.front() != ds.data.cols() || dc.arch.back() != ds.data.cols())
        throw ConfigError("fit.dagmm.arch", "input/output width must equal the data dimension " + std::to_string(ds.data.cols()));
    const DagmmFit fit = fit_dagmm(ds.data, dc);
    run.phase("fit_s", seconds_since(t0));
    write_loss_trace_csv(fit.report.pretrain_loss, run.output("pretrain.csv"));
    write_train_report_csv(fit.report, run.output("trace.csv"));
    run.derived()["outer_iterations"] = fit.report.rows.empty() ? 0 : fit.report.rows.back().iter;
    if (!fit.report.rows.empty()) {
        const auto& last = fit.report.rows.back();
        run.derived()["final"] = Json{{"aug_lagrangian", last.aug_lagrangian}, {"recon", last.recon}, {"nll", last.nll},
                                      {"violation", last.violation}};
    }
    if (fit.report.aborted) {
        run.failures().push_back(Json{{"stage", "dagmm"}, {"error", fit.report.error}});
        throw NumericalError(fit.report.error);
    }
    write_json(state_to_json(fit.state), run.output("model.json"));
    write_labels_csv(fit.report.labels, run.output("labels.csv"));
    write_labels_csv(fit.report.first_labels, run.output("labels_epoch1.csv"));
    if (truth) {
        run.derived()["ari"] = adjusted_rand_index(fit.report.labels, ds.labels);
        run.derived()["ari_epoch1"] = adjusted_rand_index(fit.report.first_labels, ds.labels);
    }
    scatter(run, ds.data, {fit.report.first_labels, fit.report.labels}, {"after outer iteration 1", "final"},
            "Deep mixture clusters");
    run.log() << "fit dagmm: " << fit.report.rows.size() - 1 << " outer iterations, violation "
              << fit.report.rows.back().violation << '\n';
    return kExitOk;
}

int cmd_sweep(Run& run) {
    run.open_dir("sweep");
    record_channel(run);
    const RunConfig& c = run.cfg();
    const SweepScenario sc = sweep_scenario(c);
    const SweepOptions so = sweep_options(c);
    Json grid = Json::array();
    for (double db : so.grid_db) grid.push_back(Json{{"snr_db", db}, {"sigma_x", sigma_x_for_snr(sc, db)}});
    run.derived()["grid"] = grid;
    run.derived()["noise_variance"] = scenario_noise_variance(sc);

    const auto t0 = Clock::now();
    const CapacityCurve curve = snr_sweep(sc, so);
    run.phase("sweep_s", seconds_since(t0));
    write_curve_csv(curve, run.output("curve.csv"));
    write_text(curve_svg(curve, run.svg("Achievable rate versus SNR")), run.output("curve.svg"));

    int code = kExitOk;
    Json xent = Json::object();
    for (std::size_t j = 0; j < curve.methods.size(); ++j) {
        const std::string name = to_string(curve.methods[j]);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < curve.snr_db.size(); ++i) {
            const CurveCell& cell = curve.cells[j][i];
            if (cell.present) {
                ++ok;
                xent[name] = cell.cross_entropy;
            } else {
                run.failures().push_back(Json{{"method", name}, {"snr_db", curve.snr_db[i]}, {"error", cell.error}});
            }
        }
        if (ok == 0) code = kExitNumerical;
        run.log() << "sweep " << name << ": " << ok << "/" << curve.snr_db.size() << " points\n";
    }
    run.derived()["heldout_cross_entropy_nats"] = xent;
    return code;
}

int cmd_gradcheck(Run& run, const GradcheckHooks& hooks) {
    run.open_dir("gradcheck");
    const auto t0 = Clock::now();
    const auto rows = gradcheck_matrix(hooks);
    run.phase("gradcheck_s", seconds_since(t0));
    auto os_path = run.output("gradcheck.csv");
    std::ostringstream csv;
    csv << "arch,parameters,max_rel_error,pass\n";
    bool ok = true;
    Json report = Json::array();
    for (const auto& r : rows) {
        std::string arch;
        for (std::size_t i = 0; i < r.arch.size(); ++i) arch += (i ? "-" : "") + std::to_string(r.arch[i]);
        const bool pass = r.max_rel_error < kGradcheckTolerance;
        ok = ok && pass;
        csv << arch << ',' << r.parameters << ',' << format_double(r.max_rel_error) << ',' << (pass ? 1 : 0) << '\n';
        run.log() << "gradcheck [" << arch << "] params=" << r.parameters << " max_rel_error=" << std::scientific
                  << std::setprecision(3) << r.max_rel_error << std::defaultfloat << (pass ? " ok" : " FAIL") << '\n';
        report.push_back(Json{{"arch", r.arch}, {"parameters", r.parameters}, {"max_rel_error", r.max_rel_error}, {"pass", pass}});
    }
    write_text(csv.str(), os_path);
    run.derived()["gradcheck"] = report;
    run.derived()["tolerance"] = kGradcheckTolerance;
    return ok ? kExitOk : kExitSelfCheck;
}

int cmd_report(Run& run) {
    const fs::path root = run.cfg().out;
    run.open_dir("report");
    Json summary = Json::object();
    bool found = false;

    const fs::path curve_csv = root / "sweep" / "curve.csv";
    if (fs::exists(curve_csv)) {
        found = true;
        const CurveTable t = read_curve_csv(curve_csv);
        write_text(curve_svg(t, run.svg("Achievable rate versus SNR")), run.output("curve.svg"));
        Json rates = Json::object();
        for (std::size_t j = 0; j < t.methods.size(); ++j) {
            Json col = Json::array();
            for (double v : t.rate[j]) col.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
            rates[t.methods[j]] = col;
        }
        summary["sweep"] = Json{{"snr_db", t.snr_db}, {"rate_bits", rates}};
    }
    for (const char* method : {"gmm", "dagmm"}) {
        const fs::path fit_dir = root / (std::string("fit-") + method);
        const fs::path labels_csv = fit_dir / "labels.csv";
        if (!fs::exists(labels_csv)) continue;
        found = true;
        const auto labels = read_labels_csv(labels_csv);
        Json entry{{"samples", labels.size()}};
        std::map<int, std::size_t> counts;
        for (int l : labels) ++counts[l];
        Json sizes = Json::object();
        for (const auto& [l, n] : counts) sizes[std::to_string(l)] = n;
        entry["cluster_sizes"] = sizes;
        const fs::path manifest = fit_dir / "manifest.json";
        if (fs::exists(manifest)) {
            const Json m = read_json(manifest);
            if (m.contains("lineage") && m["lineage"].contains("data")) {
                const fs::path data = m["lineage"]["data"].get<std::string>();
                if (fs::exists(data)) {
                    const Dataset ds = load_dataset(data);
                    if (static_cast<std::size_t>(ds.data.rows()) == labels.size()) {
                        if (!ds.labels.empty()) entry["ari"] = adjusted_rand_index(labels, ds.labels);
                        if (ds.data.cols() >= 2)
                            write_text(scatter_svg(ds.data, {labels}, {std::string(method) + " labels"},
                                                   run.svg(std::string(method) + " clusters")),
                                       run.output(std::string("scatter_") + method + ".svg"));
                    }
                }
            }
        }
        summary[method] = entry;
    }
    if (!found) throw ConfigError("out", "nothing to report under '" + root.string() + "'");
    write_json(summary, run.output("summary.json"));
    run.derived()["summary"] = summary;
    run.log() << "report: wrote " << (run.dir() / "summary.json").string() << '\n';
    return kExitOk;
}

double perturbed_loss(AeParams& ae, double& slot, double delta, const Matrix& x) {
    const double keep = slot;
    slot = keep + delta;
    const double loss = mse_loss(x, reconstruct(ae, x));
    slot = keep;
    return loss;
}

}  // namespace

std::vector<GradcheckRow> gradcheck_matrix(const GradcheckHooks& hooks) {
    const std::vector<std::vector<int>> archs{{3, 8, 2, 8, 3}, {1, 4, 1, 4, 1}, {3, 16, 8, 2, 8, 16, 3}};
    const double h = 1e-5;
    const double floor = 1e-6;
    std::vector<GradcheckRow> rows;
    for (std::size_t a = 0; a < archs.size(); ++a) {
        AeParams ae = init_autoencoder(archs[a], Activation::tanh, derive_seed(0x9c, a));
        std::mt19937_64 rng(derive_seed(0x9d, a));
        std::normal_distribution<double> g(0.0, 1.0);
        Matrix x(6, archs[a].front());
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        // Nonzero biases so their gradients are exercised away from the init.
        for (auto* net : {&ae.encoder, &ae.decoder})
            for (auto& b : net->biases)
                for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * g(rng);

        AeGrad grad = grad_autoencoder(ae, x);
        const double sign = hooks.flip_sign ? -1.0 : 1.0;
        GradcheckRow row;
        row.arch = archs[a];
        auto visit = [&](MlpParams& net, const MlpGrad& gnet) {
            for (std::size_t l = 0; l < net.layers(); ++l) {
                for (Eigen::Index k = 0; k < net.weights[l].size(); ++k) {
                    double& slot = net.weights[l].data()[k];
                    const double num = (perturbed_loss(ae, slot, h, x) - perturbed_loss(ae, slot, -h, x)) / (2 * h);
                    const double ana = sign * gnet.weights[l].data()[k];
                    row.max_rel_error = std::max(row.max_rel_error, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor}));
                    ++row.parameters;
                }
                for (Eigen::Index k = 0; k < net.biases[l].size(); ++k) {
                    double& slot = net.biases[l](k);
                    const double num = (perturbed_loss(ae, slot, h, x) - perturbed_loss(ae, slot, -h, x)) / (2 * h);
                    const double ana = sign * gnet.biases[l](k);
                    row.max_rel_error = std::max(row.max_rel_error, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor}));
                    ++row.parameters;
                }
            }
        };
        visit(ae.encoder, grad.encoder);
        visit(ae.decoder, grad.decoder);
        rows.push_back(std::move(row));
    }
    return rows;
}

int run_command(const CliOptions& opts, std::ostream& log, const GradcheckHooks& hooks) {
    Run run(opts, log);
    int code = kExitOk;
    std::string error;
    try {
        run.resolve();
        if (opts.command == "gen") code = cmd_gen(run);
        else if (opts.command == "fit") code = cmd_fit(run);
        else if (opts.command == "sweep") code = cmd_sweep(run);
        else if (opts.command == "gradcheck") code = cmd_gradcheck(run, hooks);
        else if (opts.command == "report") code = cmd_report(run);
        else throw ConfigError("", "unknown command '" + opts.command + "'");
    } catch (const ConfigError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const DomainError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const ParseError& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const NumericalError& e) {
        code = kExitNumerical;
        error = e.what();
    } catch (const fs::filesystem_error& e) {
        code = kExitConfig;
        error = e.what();
    } catch (const std::exception& e) {
        code = kExitNumerical;
        error = e.what();
    }
    if (!error.empty()) log << "error: " << error << '\n';
    if (run.dir().empty()) {
        // Failed before the command chose its directory: still leave a manifest.
        try {
            run.open_dir(opts.command.empty() ? "run" : opts.command);
        } catch (const std::exception&) {
        }
    }
    run.write_manifest(code, error);
    return code;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Hybrid quantum noise channel simulation, mixture fitting and capacity estimation"};
    app.require_subcommand(1);
    CliOptions opts;
    std::uint64_t seed = 0;
    std::string out, method, data;
    int jobs = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "JSON run configuration");
        sub->add_option("--seed", seed, "master seed (u64)");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--jobs", jobs, "worker threads (0: all)");
        sub->add_flag("--no-timestamp", opts.no_timestamp, "omit the generation time from SVG files");
    };
    CLI::App* gen = app.add_subcommand("gen", "generate a data set");
    CLI::App* fit = app.add_subcommand("fit", "fit a mixture model to a data set");
    CLI::App* sweep = app.add_subcommand("sweep", "achievable rate versus SNR");
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of backpropagation");
    CLI::App* report = app.add_subcommand("report", "summarize and re-plot an output directory");
    for (auto* s : {gen, fit, sweep, grad, report}) common(s);
    fit->add_option("--method", method, "gmm or dagmm")->check(CLI::IsMember({"gmm", "dagmm"}));
    fit->add_option("--data", data, "dataset CSV (default <out>/gen/dataset.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    opts.command = app.get_subcommands().front()->get_name();
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--jobs")) opts.jobs = jobs;
    if (opts.command == "fit") {
        if (fit->count("--method")) opts.method = method;
        if (fit->count("--data")) opts.data = data;
    }
    return run_command(opts, std::cerr);
}

}  // namespace hqsat
