#include "hqsat/datagen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace hqsat {

void LayerSpec::validate() const {
    if (layers.empty()) throw DomainError("layer spec needs depth >= 1");
    if (dim < 1) throw DomainError("layer spec dimension must be >= 1");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.branches.empty()) throw DomainError("layer " + std::to_string(l) + " has no branches");
        double total = 0.0;
        for (const auto& b : layer.branches) {
            if (!(b.prob >= 0.0 && b.prob <= 1.0)) throw DomainError("branch probability outside [0,1]");
            total += b.prob;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DomainError("layer " + std::to_string(l) + " probabilities do not sum to 1");
        if (layer.noise) layer.noise->validate();
    }
}

int LayerSpec::path_count() const {
    int n = 1;
    for (const auto& l : layers) n *= static_cast<int>(l.branches.size());
    return n;
}

namespace {

std::size_t pick_branch(const Layer& layer, double u) {
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < layer.branches.size(); ++s) {
        acc += layer.branches[s].prob;
        if (u < acc) return s;
    }
    return layer.branches.size() - 1;
}

}  // namespace

Dataset dgmm_sample(const LayerSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw DomainError("dgmm_sample: n must be >= 1");
    std::vector<std::optional<HqnSampler>> samplers;
    for (const auto& l : spec.layers) samplers.emplace_back(l.noise ? std::optional<HqnSampler>(*l.noise) : std::nullopt);

    Dataset ds;
    ds.seed = seed;
    ds.descriptor = "dgmm depth=" + std::to_string(spec.layers.size()) + " dim=" + std::to_string(spec.dim) +
                    " n=" + std::to_string(n) + " seed=" + std::to_string(seed);
    ds.data.resize(static_cast<Eigen::Index>(n), spec.dim);
    ds.labels.resize(n);
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        // Noise has its own stream so branch choices and the top variable do
        // not depend on which layers are noisy.
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::mt19937_64 noise_rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0x6e));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vector x(spec.dim);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t k = begin; k < end; ++k) {
            for (int j = 0; j < spec.dim; ++j) x(j) = gauss(rng);
            int label = 0;
            int radix = 1;
            for (std::size_t l = 0; l < spec.layers.size(); ++l) radix *= static_cast<int>(spec.layers[l].branches.size());
            for (std::size_t l = spec.layers.size(); l-- > 0;) {
                const Layer& layer = spec.layers[l];
                const auto s = pick_branch(layer, unif(rng));
                x *= layer.branches[s].t_coeff;
                if (samplers[l])
                    for (int j = 0; j < spec.dim; ++j) x(j) += (*samplers[l])(noise_rng);
                radix /= static_cast<int>(layer.branches.size());
                label += static_cast<int>(s) * radix;
            }
            ds.data.row(static_cast<Eigen::Index>(k)) = x.transpose();
            ds.labels[k] = label;
        }
    }
    return ds;
}

Matrix cluster_centers(int k, std::uint64_t seed, const ClusterOptions& opts) {
    if (k < 1) throw DomainError("gen_cluster3d: k must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, 0xc3));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vector axis = Vector::Constant(3, 1.0 / std::sqrt(3.0));
    Matrix best(k, 3);
    double best_sep = -1.0;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Matrix centers(k, 3);
        for (int c = 0; c < k; ++c) {
            Vector v(3);
            for (int j = 0; j < 3; ++j) v(j) = gauss(rng);
            centers.row(c) = (opts.radius / v.norm()) * v.transpose();
        }
        double sep = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) {
                const Vector d = (centers.row(a) - centers.row(b)).transpose();
                sep = std::min(sep, (d - d.dot(axis) * axis).norm());
            }
        if (sep > best_sep) {
            best_sep = sep;
            best = centers;
        }
        if (best_sep >= opts.min_separation) break;
    }
    return best;
}

Dataset gen_cluster3d(int k, std::size_t n, double warp, const HqnParams& params, std::uint64_t seed,
                      const ClusterOptions& opts) {
    if (n == 0) throw DomainError("gen_cluster3d: n must be >= 1");
    params.validate();
    const Matrix centers = cluster_centers(k, seed, opts);
    const HqnSampler hqn(params);

    Dataset ds;
    ds.seed = seed;
    std::ostringstream desc;
    desc << "cluster3d k=" << k << " n=" << n << " warp=" << format_double(warp) << " lambda="
         << format_double(params.lambda) << " r_max=" << params.r_max << " mu_cl=" << format_double(params.mu_cl)
         << " sigma_cl=" << format_double(params.sigma_cl) << " seed=" << seed;
    ds.descriptor = desc.str();
    ds.data.resize(static_cast<Eigen::Index>(n), 3);
    ds.labels.resize(n);
    const auto chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < chunks; ++c) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::normal_distribution<double> classical(params.mu_cl, params.sigma_cl);
        std::uniform_int_distribution<int> pick(0, k - 1);
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (std::size_t i = begin; i < end; ++i) {
            const int label = pick(rng);
            Eigen::RowVector3d v = centers.row(label);
            for (int j = 0; j < 3; ++j) v(j) += opts.cluster_std * gauss(rng);
            for (int j = 0; j < 3; ++j) v(j) += warp * std::sin(v(j));
            const auto shift = static_cast<double>(hqn.count(rng));
            for (int j = 0; j < 3; ++j) v(j) += shift + classical(rng);
            ds.data.row(static_cast<Eigen::Index>(i)) = v;
            ds.labels[i] = label;
        }
    }
    return ds;
}

std::vector<double> gen_warped_noise(const HqnParams& params, double warp, std::size_t n, std::uint64_t seed) {
    std::vector<double> z = sample_hqn(params, n, seed);
    for (double& v : z) v += warp * std::sin(v);
    return z;
}

namespace {

void write_header(std::ostream& os, Eigen::Index cols, bool labels) {
    for (Eigen::Index j = 0; j < cols; ++j) os << (j ? "," : "") << 'd' << j;
    if (labels) os << ",label";
    os << '\n';
}

void write_rows(std::ostream& os, const Matrix& m, const std::vector<int>* labels) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
        if (labels) os << ',' << (*labels)[static_cast<std::size_t>(i)];
        os << '\n';
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return os;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    const bool has_labels = !ds.labels.empty();
    if (has_labels && ds.labels.size() != static_cast<std::size_t>(ds.data.rows()))
        throw DomainError("save_dataset: label count does not match rows");
    auto os = open_out(path);
    if (!ds.descriptor.empty()) os << "# " << ds.descriptor << '\n';
    write_header(os, ds.data.cols(), has_labels);
    write_rows(os, ds.data, has_labels ? &ds.labels : nullptr);
    if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void save_samples(const Matrix& samples, const std::filesystem::path& path) {
    auto os = open_out(path);
    write_header(os, samples.cols(), false);
    write_rows(os, samples, nullptr);
    if (!os) throw std::runtime_error("write to '" + path.string() + "' failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::size_t dims = 0;
    bool labels = false;
    std::vector<double> values;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (!line.empty() && line[0] == '#') {
                ds.descriptor = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
                continue;
            }
            const auto cells = split(line);
            for (const auto& cell : cells) {
                if (cell == "label" && &cell == &cells.back()) {
                    labels = true;
                } else if (cell != "d" + std::to_string(dims)) {
                    throw ParseError("expected header d0..d{D-1}[,label], got '" + line + "'", lineno);
                } else {
                    ++dims;
                }
            }
            if (dims == 0) throw ParseError("header names no data columns", lineno);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != dims + (labels ? 1 : 0))
            throw ParseError("expected " + std::to_string(dims + (labels ? 1 : 0)) + " fields, got " +
                                 std::to_string(cells.size()),
                             lineno);
        for (std::size_t j = 0; j < dims; ++j) {
            double v = 0.0;
            const auto& cell = cells[j];
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw ParseError("bad number '" + cell + "'", lineno);
            values.push_back(v);
        }
        if (labels) {
            int lab = 0;
            const auto& cell = cells.back();
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), lab);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || lab < 0)
                throw ParseError("bad label '" + cell + "'", lineno);
            ds.labels.push_back(lab);
        }
    }
    if (!have_header) throw ParseError("missing header", lineno == 0 ? 1 : lineno);
    const auto rows = static_cast<Eigen::Index>(values.size() / dims);
    ds.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), rows, static_cast<Eigen::Index>(dims));
    return ds;
}

}  // namespace hqsat
