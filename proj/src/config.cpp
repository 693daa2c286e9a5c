#include "hqsat/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>

namespace hqsat {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Walks one JSON object, handing each known key to a setter and rejecting
/// everything else.
class Section {
public:
    Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(path_, "expected an object");
    }

    template <class T>
    Section& field(const std::string& key, T& target) {
        known_.insert(key);
        if (auto it = doc_.find(key); it != doc_.end()) target = convert<T>(*it, join(path_, key));
        return *this;
    }

    Section& object(const std::string& key, const std::function<void(const Json&, const std::string&)>& read) {
        known_.insert(key);
        if (auto it = doc_.find(key); it != doc_.end()) read(*it, join(path_, key));
        return *this;
    }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!known_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }

    template <class T>
    static T convert(const Json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                    throw ConfigError(path, "expected a nonnegative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
        } else {
            if (!v.is_array()) throw ConfigError(path, "expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
            return out;
        }
        return v.get<T>();
    }

private:
    const Json& doc_;
    std::string path_;
    std::set<std::string> known_;
};

template <class T>
void optional_field(Section& s, const std::string& key, std::optional<T>& target, const std::string& path) {
    s.object(key, [&](const Json& v, const std::string& p) {
        if (v.is_null()) target.reset();
        else target = Section::convert<T>(v, p);
    });
    (void)path;
}

void read_hqn(Section& s, HqnParams& p) {
    s.field("lambda", p.lambda).field("r_max", p.r_max).field("mu_cl", p.mu_cl).field("sigma_cl", p.sigma_cl);
}

void read_link(const Json& v, const std::string& path, std::optional<LinkBudget>& link) {
    if (v.is_null()) {
        link.reset();
        return;
    }
    LinkBudget l = link.value_or(LinkBudget{});
    Section s(v, path);
    s.field("altitude", l.altitude)
        .field("beam_waist", l.beam_waist)
        .field("wavelength", l.wavelength)
        .field("rx_aperture", l.rx_aperture)
        .field("tx_aperture", l.tx_aperture)
        .field("eta_det", l.eta_det)
        .field("nu_ele", l.nu_ele)
        .field("epsilon_excess", l.epsilon_excess)
        .field("pulse_width", l.pulse_width)
        .field("grav_constant", l.grav_constant)
        .field("earth_mass", l.earth_mass);
    s.finish();
    link = l;
}

void read_dagmm(const Json& v, const std::string& path, DagmmConfig& c) {
    Section s(v, path);
    std::string act = to_string(c.activation);
    s.field("arch", c.arch).field("activation", act);
    s.object("pretrain", [&](const Json& pv, const std::string& pp) {
        Section p(pv, pp);
        p.field("epochs", c.pretrain.epochs).field("batch", c.pretrain.batch).field("step", c.pretrain.step);
        p.finish();
    });
    auto& h = c.hyper;
    s.field("lambda_tilde", h.lambda_tilde)
        .field("rho_tilde", h.rho_tilde)
        .field("r_count", h.r_count)
        .field("init_restarts", h.init_restarts)
        .field("outer_iters", h.outer_iters)
        .field("net_steps_per_outer", h.net_steps_per_outer)
        .field("step", h.step)
        .field("tol", h.tol);
    s.finish();
    try {
        c.activation = activation_from_string(act);
    } catch (const std::exception&) {
        throw ConfigError(path + ".activation", "expected \"tanh\" or \"identity\"");
    }
}

void read_layers(const Json& v, const std::string& path, LayerSpec& spec) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of layers");
    spec.layers.clear();
    for (std::size_t l = 0; l < v.size(); ++l) {
        const std::string lp = path + "[" + std::to_string(l) + "]";
        Layer layer;
        Section s(v[l], lp);
        s.object("branches", [&](const Json& bv, const std::string& bp) {
            if (!bv.is_array()) throw ConfigError(bp, "expected an array");
            for (std::size_t b = 0; b < bv.size(); ++b) {
                Branch br;
                Section bs(bv[b], bp + "[" + std::to_string(b) + "]");
                bs.field("t_coeff", br.t_coeff).field("prob", br.prob);
                bs.finish();
                layer.branches.push_back(br);
            }
        });
        s.object("noise", [&](const Json& nv, const std::string& np) {
            if (nv.is_null()) return;
            HqnParams p;
            Section ns(nv, np);
            read_hqn(ns, p);
            ns.finish();
            layer.noise = p;
        });
        s.finish();
        spec.layers.push_back(std::move(layer));
    }
}

template <class F>
void check(const std::string& path, F&& validate) {
    try {
        validate();
    } catch (const DomainError& e) {
        throw ConfigError(path, e.what());
    }
}

Json hqn_json(const HqnParams& p) {
    return Json{{"lambda", p.lambda}, {"r_max", p.r_max}, {"mu_cl", p.mu_cl}, {"sigma_cl", p.sigma_cl}};
}

Json dagmm_json(const DagmmConfig& c) {
    Json d;
    d["arch"] = c.arch;
    d["activation"] = to_string(c.activation);
    d["pretrain"] = Json{{"epochs", c.pretrain.epochs}, {"batch", c.pretrain.batch}, {"step", c.pretrain.step}};
    Json h = hyper_to_json(c.hyper);
    h.erase("seed");
    for (auto it = h.begin(); it != h.end(); ++it) d[it.key()] = it.value();
    return d;
}

}  // namespace

RunConfig default_config() {
    RunConfig c;
    c.scenario.link = LinkBudget{};
    c.gen.layers.layers = {Layer{{Branch{1.0, 0.5}, Branch{-1.0, 0.5}}, HqnParams{}}};
    c.sweep.dagmm = default_sweep_options().dagmm;
    c.sweep.dagmm.hyper.r_count = c.components();
    return c;
}

RunConfig parse_config(const Json& doc) {
    RunConfig c = default_config();
    Section root(doc, "");
    root.field("out", c.out).field("seed", c.seed).field("jobs", c.jobs);

    bool sweep_r_set = false;
    root.object("scenario", [&](const Json& v, const std::string& p) {
        Section s(v, p);
        read_hqn(s, c.scenario.noise);
        s.field("t_coeff", c.scenario.channel.t_coeff)
            .field("mu_x", c.scenario.channel.mu_x)
            .field("sigma_x", c.scenario.channel.sigma_x)
            .field("warp", c.scenario.warp)
            .field("beta_rec", c.scenario.beta_rec);
        s.object("link", [&](const Json& lv, const std::string& lp) { read_link(lv, lp, c.scenario.link); });
        s.finish();
    });
    root.object("gen", [&](const Json& v, const std::string& p) {
        Section s(v, p);
        s.field("kind", c.gen.kind)
            .field("n", c.gen.n)
            .field("k", c.gen.k)
            .field("warp", c.gen.warp)
            .field("radius", c.gen.cluster.radius)
            .field("cluster_std", c.gen.cluster.cluster_std)
            .field("min_separation", c.gen.cluster.min_separation)
            .field("dim", c.gen.layers.dim);
        s.object("layers", [&](const Json& lv, const std::string& lp) { read_layers(lv, lp, c.gen.layers); });
        s.finish();
    });
    root.object("fit", [&](const Json& v, const std::string& p) {
        Section s(v, p);
        s.field("method", c.fit.method).field("data", c.fit.data);
        optional_field(s, "components", c.fit.components, p + ".components");
        s.object("em", [&](const Json& ev, const std::string& ep) {
            Section e(ev, ep);
            e.field("max_iters", c.fit.em_max_iters).field("tol", c.fit.em_tol);
            e.finish();
        });
        s.object("dagmm", [&](const Json& dv, const std::string& dp) { read_dagmm(dv, dp, c.fit.dagmm); });
        s.finish();
    });
    root.object("sweep", [&](const Json& v, const std::string& p) {
        Section s(v, p);
        std::vector<std::string> methods;
        for (Method m : c.sweep.methods) methods.push_back(to_string(m));
        s.field("grid_db", c.sweep.grid_db)
            .field("methods", methods)
            .field("mc_samples", c.sweep.mc_samples)
            .field("fit_samples", c.sweep.fit_samples)
            .field("heldout_samples", c.sweep.heldout_samples);
        s.object("dagmm", [&](const Json& dv, const std::string& dp) {
            read_dagmm(dv, dp, c.sweep.dagmm);
            sweep_r_set = dv.contains("r_count");
        });
        s.finish();
        c.sweep.methods.clear();
        for (std::size_t i = 0; i < methods.size(); ++i) {
            try {
                c.sweep.methods.push_back(method_from_string(methods[i]));
            } catch (const DomainError& e) {
                throw ConfigError(p + ".methods[" + std::to_string(i) + "]", e.what());
            }
        }
    });
    root.finish();
    if (!sweep_r_set) c.sweep.dagmm.hyper.r_count = c.components();

    check("scenario", [&] { c.scenario.noise.validate(); });
    check("scenario", [&] { c.scenario.channel.validate(); });
    if (c.scenario.link) check("scenario.link", [&] { c.scenario.link->validate(); });
    if (!(c.scenario.beta_rec > 0.0 && c.scenario.beta_rec <= 1.0)) throw ConfigError("scenario.beta_rec", "must lie in (0, 1]");
    if (c.gen.kind != "cluster3d" && c.gen.kind != "dgmm" && c.gen.kind != "noise")
        throw ConfigError("gen.kind", "expected \"cluster3d\", \"dgmm\" or \"noise\"");
    if (c.gen.n < 1) throw ConfigError("gen.n", "must be >= 1");
    if (c.gen.k < 1) throw ConfigError("gen.k", "must be >= 1");
    check("gen.layers", [&] { c.gen.layers.validate(); });
    if (c.fit.method != "gmm" && c.fit.method != "dagmm") throw ConfigError("fit.method", "expected \"gmm\" or \"dagmm\"");
    if (c.components() < 1) throw ConfigError("fit.components", "must be >= 1");
    if (c.fit.em_max_iters < 1) throw ConfigError("fit.em.max_iters", "must be >= 1");
    if (!(c.fit.em_tol >= 0.0)) throw ConfigError("fit.em.tol", "must be >= 0");
    check("fit.dagmm", [&] { c.fit.dagmm.hyper.validate(); });
    check("sweep.dagmm", [&] { c.sweep.dagmm.hyper.validate(); });
    if (c.sweep.grid_db.empty()) throw ConfigError("sweep.grid_db", "must not be empty");
    for (std::size_t i = 1; i < c.sweep.grid_db.size(); ++i)
        if (!(c.sweep.grid_db[i] > c.sweep.grid_db[i - 1])) throw ConfigError("sweep.grid_db", "must be strictly increasing");
    if (c.sweep.methods.empty()) throw ConfigError("sweep.methods", "must not be empty");
    if (c.sweep.mc_samples < 1000) throw ConfigError("sweep.mc_samples", "must be >= 1000");
    if (c.sweep.fit_samples < 10) throw ConfigError("sweep.fit_samples", "must be >= 10");
    if (c.sweep.heldout_samples < 2) throw ConfigError("sweep.heldout_samples", "must be >= 2");
    if (c.sweep.dagmm.arch.empty() || c.sweep.dagmm.arch.front() != 1 || c.sweep.dagmm.arch.back() != 1)
        throw ConfigError("sweep.dagmm.arch", "noise networks must start and end with width 1");
    if (c.jobs < 0) throw ConfigError("jobs", "must be >= 0");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("", "cannot open config file '" + path.string() + "'");
    Json doc;
    try {
        doc = Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", "config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

Json config_to_json(const RunConfig& c) {
    Json doc;
    doc["out"] = c.out;
    doc["seed"] = c.seed;
    doc["jobs"] = c.jobs;

    Json sc = hqn_json(c.scenario.noise);
    sc["t_coeff"] = c.scenario.channel.t_coeff;
    sc["mu_x"] = c.scenario.channel.mu_x;
    sc["sigma_x"] = c.scenario.channel.sigma_x;
    sc["warp"] = c.scenario.warp;
    sc["beta_rec"] = c.scenario.beta_rec;
    if (c.scenario.link) {
        const auto& l = *c.scenario.link;
        sc["link"] = Json{{"altitude", l.altitude},         {"beam_waist", l.beam_waist},
                          {"wavelength", l.wavelength},     {"rx_aperture", l.rx_aperture},
                          {"tx_aperture", l.tx_aperture},   {"eta_det", l.eta_det},
                          {"nu_ele", l.nu_ele},             {"epsilon_excess", l.epsilon_excess},
                          {"pulse_width", l.pulse_width},   {"grav_constant", l.grav_constant},
                          {"earth_mass", l.earth_mass}};
    } else {
        sc["link"] = nullptr;
    }
    doc["scenario"] = std::move(sc);

    Json layers = Json::array();
    for (const auto& l : c.gen.layers.layers) {
        Json branches = Json::array();
        for (const auto& b : l.branches) branches.push_back(Json{{"t_coeff", b.t_coeff}, {"prob", b.prob}});
        layers.push_back(Json{{"branches", std::move(branches)}, {"noise", l.noise ? hqn_json(*l.noise) : Json(nullptr)}});
    }
    doc["gen"] = Json{{"kind", c.gen.kind},
                      {"n", c.gen.n},
                      {"k", c.gen.k},
                      {"warp", c.gen.warp},
                      {"radius", c.gen.cluster.radius},
                      {"cluster_std", c.gen.cluster.cluster_std},
                      {"min_separation", c.gen.cluster.min_separation},
                      {"dim", c.gen.layers.dim},
                      {"layers", std::move(layers)}};

    doc["fit"] = Json{{"method", c.fit.method},
                      {"data", c.fit.data},
                      {"components", c.components()},
                      {"em", Json{{"max_iters", c.fit.em_max_iters}, {"tol", c.fit.em_tol}}},
                      {"dagmm", dagmm_json(c.fit.dagmm)}};

    std::vector<std::string> methods;
    for (Method m : c.sweep.methods) methods.push_back(to_string(m));
    doc["sweep"] = Json{{"grid_db", c.sweep.grid_db},
                        {"methods", methods},
                        {"mc_samples", c.sweep.mc_samples},
                        {"fit_samples", c.sweep.fit_samples},
                        {"heldout_samples", c.sweep.heldout_samples},
                        {"dagmm", dagmm_json(c.sweep.dagmm)}};
    return doc;
}

EffectiveChannel resolve_channel(const ScenarioConfig& s) {
    if (s.link) return effective_channel(*s.link, s.noise, s.channel);
    EffectiveChannel out;
    out.channel = s.channel;
    out.noise = s.noise;
    auto& p = out.provenance;
    p.t_coeff = s.channel.t_coeff;
    p.tau_total = s.channel.t_coeff * s.channel.t_coeff;
    p.sigma_cl_in = p.sigma_cl_eff = s.noise.sigma_cl;
    p.noise_variance_in = p.noise_variance_eff = s.noise.sigma_cl * s.noise.sigma_cl;
    return out;
}

SweepScenario sweep_scenario(const RunConfig& cfg) {
    const EffectiveChannel eff = resolve_channel(cfg.scenario);
    SweepScenario sc;
    sc.noise = eff.noise;
    sc.channel = eff.channel;
    sc.warp = cfg.scenario.warp;
    sc.beta_rec = cfg.scenario.beta_rec;
    return sc;
}

SweepOptions sweep_options(const RunConfig& cfg) {
    SweepOptions o;
    o.grid_db = cfg.sweep.grid_db;
    o.methods = cfg.sweep.methods;
    o.mc_samples = cfg.sweep.mc_samples;
    o.fit_samples = cfg.sweep.fit_samples;
    o.heldout_samples = cfg.sweep.heldout_samples;
    o.seed = cfg.seed;
    o.components = cfg.components();
    o.em.max_iters = cfg.fit.em_max_iters;
    o.em.tol = cfg.fit.em_tol;
    o.dagmm = cfg.sweep.dagmm;
    return o;
}

}  // namespace hqsat
