#pragma once

// Run configuration: JSON document with exhaustive key validation, built-in
// defaults, and the resolved form written into every manifest.

#include "hqsat/capacity.hpp"
#include "hqsat/datagen.hpp"
#include "hqsat/io.hpp"
#include "hqsat/linkbudget.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace hqsat {

/// Invalid configuration; `key_path` names the offending entry ("scenario.lamda").
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& what)
        : std::runtime_error(key_path.empty() ? what : key_path + ": " + what), key_path_(key_path) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

struct ScenarioConfig {
    HqnParams noise;
    ChannelConfig channel;
    double warp = 0.0;       ///< noise warp for sweeps
    double beta_rec = 0.95;
    std::optional<LinkBudget> link; ///< when set, T and sigma_cl come from the link budget
};

struct GenConfig {
    std::string kind = "cluster3d"; ///< cluster3d | dgmm | noise
    std::size_t n = 3000;
    int k = 3;
    double warp = 0.5;
    ClusterOptions cluster;
    LayerSpec layers;               ///< used by kind = dgmm
};

struct FitConfig {
    std::string method = "gmm";     ///< gmm | dagmm
    std::string data;               ///< empty: <out>/gen/dataset.csv
    std::optional<int> components;  ///< EM components; default r_max + 1
    int em_max_iters = 300;
    double em_tol = 1e-6;
    DagmmConfig dagmm;
};

struct SweepConfig {
    std::vector<double> grid_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<Method> methods{Method::baseline, Method::gmm, Method::dagmm};
    std::size_t mc_samples = 200000; ///< about 0.003 bits standard error at 20 dB
    std::size_t fit_samples = 2000;
    std::size_t heldout_samples = 5000;
    DagmmConfig dagmm;              ///< network for 1-D noise
};

struct RunConfig {
    ScenarioConfig scenario;
    GenConfig gen;
    FitConfig fit;
    SweepConfig sweep;
    std::string out = "out";
    std::uint64_t seed = 1;
    int jobs = 0;                   ///< 0: OpenMP default

    /// EM component count after defaulting.
    int components() const { return fit.components.value_or(scenario.noise.r_max + 1); }
};

RunConfig default_config();

/// Overlays a JSON document on the defaults. Unknown keys and type errors
/// raise ConfigError naming the key path.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Every field, defaults materialized.
Json config_to_json(const RunConfig& cfg);

/// Channel and noise after applying the link budget (if any).
EffectiveChannel resolve_channel(const ScenarioConfig& s);

SweepScenario sweep_scenario(const RunConfig& cfg);
SweepOptions sweep_options(const RunConfig& cfg);

}  // namespace hqsat
