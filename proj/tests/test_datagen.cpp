#include "hqsat/datagen.hpp"
#include "hqsat/gmm.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

using namespace hqsat;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hqsat_test_datagen";
    fs::create_directories(dir);
    return dir / name;
}

HqnParams silent() {
    HqnParams p;
    p.lambda = 1e-12;
    p.sigma_cl = 1e-12;
    return p;
}

}  // namespace

TEST_CASE("single noiseless layer") {
    LayerSpec spec;
    spec.layers.push_back({{{1.0, 1.0}}, std::nullopt});
    const Dataset ds = dgmm_sample(spec, 5000, 3);
    std::vector<double> v(ds.data.data(), ds.data.data() + ds.data.size());
    CHECK(std::abs(oracle::sample_mean(v)) < 0.03);
    CHECK(oracle::sample_var(v) == doctest::Approx(1.0).epsilon(0.04));
    for (int l : ds.labels) CHECK(l == 0);
}

TEST_CASE("single layer branch frequencies") {
    LayerSpec spec;
    spec.layers.push_back({{{1.0, 0.2}, {-2.0, 0.5}, {0.5, 0.3}}, std::nullopt});
    const std::size_t n = 20000;
    const Dataset ds = dgmm_sample(spec, n, 4);
    std::vector<double> count(3, 0.0);
    for (int l : ds.labels) count[static_cast<std::size_t>(l)] += 1.0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double p = spec.layers[0].branches[s].prob;
        CHECK(std::abs(count[s] / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("two-layer path means") {
    HqnParams top;
    top.lambda = 1.0;
    top.r_max = 4;
    top.mu_cl = 0.5;
    top.sigma_cl = 0.3;
    HqnParams bottom;
    bottom.lambda = 2.0;
    bottom.r_max = 6;
    bottom.mu_cl = -1.0;
    bottom.sigma_cl = 0.5;
    LayerSpec spec;
    spec.dim = 1;
    spec.layers.push_back({{{1.0, 0.5}, {-0.5, 0.5}}, bottom});
    spec.layers.push_back({{{2.0, 0.5}, {0.3, 0.5}}, top});
    CHECK(spec.path_count() == 4);
    const Dataset ds = dgmm_sample(spec, 100'000, 5);
    const double ez1 = oracle::truncated_mean(1.0, 4) + 0.5, ez0 = oracle::truncated_mean(2.0, 6) - 1.0;
    std::vector<double> sum(4, 0.0), cnt(4, 0.0);
    for (Eigen::Index i = 0; i < ds.data.rows(); ++i) {
        sum[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += ds.data(i, 0);
        cnt[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int label = 0; label < 4; ++label) {
        const double t0 = spec.layers[0].branches[static_cast<std::size_t>(label % 2)].t_coeff;
        const double t1 = spec.layers[1].branches[static_cast<std::size_t>(label / 2)].t_coeff;
        const double expect = t0 * (t1 * 0.0 + ez1) + ez0;
        CHECK(std::abs(sum[static_cast<std::size_t>(label)] / cnt[static_cast<std::size_t>(label)] - expect) < 0.05);
    }
}

TEST_CASE("noise-free layers compose exactly") {
    LayerSpec noisy;
    noisy.dim = 2;
    noisy.layers.push_back({{{0.5, 0.5}, {-1.5, 0.5}}, silent()});
    noisy.layers.push_back({{{2.0, 1.0}}, silent()});
    LayerSpec clean = noisy;
    for (auto& l : clean.layers) l.noise.reset();
    const Dataset a = dgmm_sample(noisy, 2000, 6), b = dgmm_sample(clean, 2000, 6);
    CHECK(a.labels == b.labels);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("layer validation") {
    LayerSpec spec;
    CHECK_THROWS_AS(spec.validate(), DomainError);
    spec.layers.push_back({{{1.0, 0.6}, {1.0, 0.3}}, std::nullopt});
    CHECK_THROWS_AS(spec.validate(), DomainError);
}

TEST_CASE("warped clusters") {
    const Dataset a = gen_cluster3d(3, 3000, 0.5, HqnParams{}, 1);
    const Dataset b = gen_cluster3d(3, 3000, 0.5, HqnParams{}, 1);
    CHECK(a.data == b.data);
    CHECK(a.labels == b.labels);
    for (int l : a.labels) CHECK((l >= 0 && l < 3));

    const Dataset one = gen_cluster3d(1, 500, 0.5, HqnParams{}, 2);
    for (int l : one.labels) CHECK(l == 0);

    HqnParams quiet;
    quiet.lambda = 1e-12;
    quiet.sigma_cl = 1e-3;
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        const Dataset plain = gen_cluster3d(3, 3000, 0.0, quiet, seed);
        EmOptions o;
        o.seed = seed;
        const EmFit fit = fit_em(plain.data, 3, o);
        const Matrix centers = cluster_centers(3, seed);
        for (int c = 0; c < 3; ++c) {
            double best = 1e9;
            for (const auto& comp : fit.model.components) best = std::min(best, (comp.mean - centers.row(c).transpose()).cwiseAbs().maxCoeff());
            CHECK(best < 0.2);
        }
    }
}

TEST_CASE("cluster means are well separated") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset ds = gen_cluster3d(3, 3000, 0.5, HqnParams{}, seed);
        std::vector<Vector> mean(3, Vector::Zero(3));
        std::vector<double> cnt(3, 0.0);
        for (Eigen::Index i = 0; i < ds.data.rows(); ++i) {
            mean[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += ds.data.row(i).transpose();
            cnt[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] += 1.0;
        }
        for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] /= cnt[static_cast<std::size_t>(c)];
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                const Vector dir = (mean[static_cast<std::size_t>(a)] - mean[static_cast<std::size_t>(b)]).normalized();
                double spread = 0.0;
                for (int c : {a, b}) {
                    std::vector<double> proj;
                    for (Eigen::Index i = 0; i < ds.data.rows(); ++i)
                        if (ds.labels[static_cast<std::size_t>(i)] == c) proj.push_back(ds.data.row(i).dot(dir.transpose()));
                    spread = std::max(spread, std::sqrt(oracle::sample_var(proj)));
                }
                CHECK((mean[static_cast<std::size_t>(a)] - mean[static_cast<std::size_t>(b)]).norm() >= 3.0 * spread);
            }
    }
}

TEST_CASE("warped noise") {
    const HqnParams p;
    const auto plain = sample_hqn(p, 1000, 3);
    const auto warped = gen_warped_noise(p, 0.5, 1000, 3);
    for (std::size_t k = 0; k < plain.size(); ++k) CHECK(warped[k] == plain[k] + 0.5 * std::sin(plain[k]));
    CHECK(gen_warped_noise(p, 0.0, 1000, 3) == plain);
}

TEST_CASE("CSV round trip") {
    const Dataset ds = gen_cluster3d(3, 1000, 0.5, HqnParams{}, 9);
    const fs::path path = temp_file("roundtrip.csv");
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    CHECK(back.data == ds.data);
    CHECK(back.labels == ds.labels);
    CHECK(back.descriptor == ds.descriptor);

    std::ifstream is(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(is)), {});
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.rfind("# cluster3d", 0) == 0);

    Matrix odd(3, 2);
    odd << 0.1, -1e-300, 1.0 / 3.0, 5e300, -0.0, 2.2250738585072014e-308;
    save_samples(odd, temp_file("odd.csv"));
    CHECK(load_dataset(temp_file("odd.csv")).data == odd);
}

TEST_CASE("malformed CSV") {
    const fs::path path = temp_file("bad.csv");
    {
        std::ofstream os(path);
        os << "1,2,3\n4,5,6\n";
    }
    try {
        (void)load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    {
        std::ofstream os(path);
        os << "d0,d1\n1,2\n3,x\n";
    }
    try {
        (void)load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    {
        std::ofstream os(path);
        os << "d0,d1,label\n1,2\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ParseError);
}

TEST_CASE("large round trip is fast") {
    Dataset ds;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    ds.data = Matrix::NullaryExpr(100'000, 3, [&](Eigen::Index, Eigen::Index) { return g(rng); });
    const fs::path path = temp_file("large.csv");
    const auto t0 = std::chrono::steady_clock::now();
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(back.data == ds.data);
    CHECK(secs < 2.0);
}
