#pragma once

// Synthetic data sets: the layered mixture-of-affine-maps generator, warped
// 3-D clusters with hybrid noise, and warped 1-D hybrid noise.

#include "hqsat/noise_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hqsat {

struct Branch {
    double t_coeff = 1.0;
    double prob = 1.0;
};

struct Layer {
    std::vector<Branch> branches;
    std::optional<HqnParams> noise; ///< nullopt: noiseless layer
};

/// layers[0] produces the observation, layers.back() consumes the standard
/// normal top variable. Branch choices are independent across layers.
struct LayerSpec {
    std::vector<Layer> layers;
    int dim = 3;

    void validate() const;
    /// Number of distinct paths (product of branch counts).
    int path_count() const;
};

struct Dataset {
    Matrix data;
    std::vector<int> labels; ///< empty when the generator has no ground truth
    std::string descriptor;
    std::uint64_t seed = 0;
};

/// Label of a sample is its path encoded in mixed radix, layer 0 least
/// significant.
Dataset dgmm_sample(const LayerSpec& spec, std::size_t n, std::uint64_t seed);

struct ClusterOptions {
    double radius = 5.0;
    double cluster_std = 0.5;
    /// Centers are redrawn until every pair is at least this far apart
    /// after removing the component along 1_D (the photon-shift axis).
    double min_separation = 6.0;
};

/// k clusters on a sphere, warped by v + warp * sin(v) and perturbed by the
/// multivariate hybrid noise (shared photon shift, independent Gaussian).
Dataset gen_cluster3d(int k, std::size_t n, double warp, const HqnParams& params, std::uint64_t seed,
                      const ClusterOptions& opts = {});

/// Cluster centers used by gen_cluster3d for (k, seed, opts).
Matrix cluster_centers(int k, std::uint64_t seed, const ClusterOptions& opts = {});

/// 1-D hybrid noise pushed through z + warp * sin(z).
std::vector<double> gen_warped_noise(const HqnParams& params, double warp, std::size_t n, std::uint64_t seed);

/// CSV with a '#' descriptor line, a d0..d{D-1}[,label] header, 17
/// significant digits, LF endings.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Plain sample CSV (header d0..d{D-1}).
void save_samples(const Matrix& samples, const std::filesystem::path& path);

}  // namespace hqsat
