#include "hqsat/datagen.hpp"
#include "hqsat/gmm.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace hqsat;

namespace {

GmmModel random_model(int d, int r, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.2, 1.0);
    GmmModel m;
    m.dim = d;
    double total = 0.0;
    for (int k = 0; k < r; ++k) {
        Vector mu(d);
        for (int j = 0; j < d; ++j) mu(j) = 2.0 * g(rng);
        m.components.push_back({u(rng), mu, oracle::random_spd(d, rng)});
        total += m.components.back().weight;
    }
    for (auto& c : m.components) c.weight /= total;
    return m;
}

Matrix column(const std::vector<double>& v) {
    return Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
}

Matrix three_bumps(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<double> v(n);
    for (double& x : v) x = 5.0 * pick(rng) + g(rng);
    return column(v);
}

}  // namespace

TEST_CASE("log_pdf") {
    const GmmModel n01 = oracle::gaussian_1d({1.0}, {0.0}, {1.0});
    CHECK(log_pdf(n01, Vector::Zero(1)) == doctest::Approx(-0.918939).epsilon(1e-6));
    const GmmModel twin = oracle::gaussian_1d({0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0});
    for (double x : {-2.0, 0.3, 5.0}) CHECK(log_pdf(twin, Vector::Constant(1, x)) == doctest::Approx(log_pdf(n01, Vector::Constant(1, x))).epsilon(1e-15));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    const GmmModel m = random_model(2, 3, rng);
    for (int k = 0; k < 10; ++k) {
        const Vector x = Vector::NullaryExpr(2, [&](Eigen::Index) { return 2.0 * g(rng); });
        CHECK(std::exp(log_pdf(m, x)) == doctest::Approx(oracle::density(m, x)).epsilon(1e-12));
    }

    GmmModel bad = n01;
    bad.components[0].weight = 0.5;
    bad.components.push_back({0.5, Vector::Zero(1), Matrix::Constant(1, 1, -1.0)});
    try {
        (void)log_pdf(bad, Vector::Zero(1));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.index() == 1);
    }
}

TEST_CASE("e_step") {
    const GmmModel same = oracle::gaussian_1d({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const Matrix x = three_bumps(50, 1);
    const Responsibilities r = e_step(same, x);
    CHECK((r.gamma.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
    CHECK((e_step(oracle::gaussian_1d({1.0}, {0.0}, {1.0}), x).gamma.array() == 1.0).all());

    const GmmModel pair = oracle::gaussian_1d({0.5, 0.5}, {0.0, 10.0}, {1.0, 1.0});
    const Responsibilities near = e_step(pair, Matrix::Zero(1, 1));
    CHECK(near.gamma(0, 0) >= 1.0 - 1e-20);
    CHECK(near.gamma(0, 1) == doctest::Approx(std::exp(-50.0)).epsilon(1e-10));

    // Every component underflows: uniform row, flagged.
    const GmmModel narrow = oracle::gaussian_1d({0.5, 0.5}, {0.0, 1.0}, {1e-6, 1e-6});
    const Responsibilities lost = e_step(narrow, Matrix::Constant(1, 1, std::numeric_limits<double>::infinity()));
    CHECK(lost.degenerate_rows == std::vector<long>{0});
    CHECK(lost.gamma(0, 0) == 0.5);
}

TEST_CASE("responsibility rows sum to one") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        const GmmModel m = random_model(3, 4, rng);
        const Matrix x = sample_gmm(m, 300, k) * 1.5;
        const Matrix g = e_step(m, x).gamma;
        CHECK((g.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
        CHECK(g.minCoeff() >= 0.0);
        CHECK(g.maxCoeff() <= 1.0);
    }
}

TEST_CASE("m_step") {
    const Matrix x = three_bumps(200, 2);
    const MStepResult one = m_step(x, Matrix::Ones(200, 1));
    CHECK(one.model.components[0].mean(0) == doctest::Approx(x.mean()).epsilon(1e-12));
    CHECK(one.model.components[0].covariance(0, 0) == doctest::Approx((x.array() - x.mean()).square().mean()).epsilon(1e-12));

    // Uniform responsibilities: every component carries the global moments.
    const MStepResult uni = m_step(x, Matrix::Constant(200, 4, 0.25));
    for (const auto& c : uni.model.components) {
        CHECK(c.weight == doctest::Approx(0.25));
        CHECK(c.mean(0) == doctest::Approx(x.mean()).epsilon(1e-12));
        CHECK(c.covariance(0, 0) == doctest::Approx(one.model.components[0].covariance(0, 0)).epsilon(1e-12));
    }

    // One-hot: per-cluster statistics of the partition.
    Matrix hot = Matrix::Zero(200, 2);
    double s0 = 0, s1 = 0;
    int n0 = 0;
    for (int i = 0; i < 200; ++i) {
        const bool left = x(i, 0) < 2.5;
        hot(i, left ? 0 : 1) = 1.0;
        (left ? s0 : s1) += x(i, 0);
        n0 += left;
    }
    const MStepResult part = m_step(x, hot);
    CHECK(part.model.components[0].mean(0) == doctest::Approx(s0 / n0));
    CHECK(part.model.components[1].mean(0) == doctest::Approx(s1 / (200 - n0)));
    CHECK(part.model.components[0].weight == doctest::Approx(n0 / 200.0));

    // Six samples, explicit weighted averages.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix d(6, 1), g(6, 2);
    for (int i = 0; i < 6; ++i) {
        d(i, 0) = 4.0 * u(rng) - 2.0;
        g(i, 0) = u(rng);
        g(i, 1) = 1.0 - g(i, 0);
    }
    const MStepResult small = m_step(d, g);
    for (int r = 0; r < 2; ++r) {
        double nr = 0, sx = 0, sxx = 0;
        for (int i = 0; i < 6; ++i) {
            nr += g(i, r);
            sx += g(i, r) * d(i, 0);
        }
        const double mu = sx / nr;
        for (int i = 0; i < 6; ++i) sxx += g(i, r) * (d(i, 0) - mu) * (d(i, 0) - mu);
        const auto& c = small.model.components[static_cast<std::size_t>(r)];
        CHECK(std::abs(c.weight - nr / 6.0) < 1e-12);
        CHECK(std::abs(c.mean(0) - mu) < 1e-12);
        CHECK(std::abs(c.covariance(0, 0) - sxx / nr) < 1e-12);
    }

    // Empty component is reseeded onto a data point.
    Matrix empty = Matrix::Zero(200, 2);
    empty.col(0).setOnes();
    const MStepResult re = m_step(x, empty, {0.0, 3});
    CHECK(re.reseeded == std::vector<int>{1});
    CHECK((x.array() == re.model.components[1].mean(0)).any());
}

TEST_CASE("initialization") {
    const Matrix x = three_bumps(300, 3);
    const GmmModel one = init_gmm(x, 1, 5, 0.0);
    CHECK(one.components[0].weight == 1.0);
    CHECK((x.array() == one.components[0].mean(0)).any());
    const GmmModel a = init_gmm(x, 3, 9, 1e-6), b = init_gmm(x, 3, 9, 1e-6);
    for (std::size_t r = 0; r < 3; ++r) CHECK(a.components[r].mean == b.components[r].mean);

    int distinct = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const GmmModel m = init_gmm(x, 3, s, 0.0);
        std::vector<int> bins;
        for (const auto& c : m.components) bins.push_back(static_cast<int>(std::lround(c.mean(0) / 5.0)));
        std::sort(bins.begin(), bins.end());
        distinct += std::unique(bins.begin(), bins.end()) == bins.end();
    }
    CHECK(distinct >= 95);

    // Fewer distinct points than components.
    Matrix dup(10, 1);
    dup.setConstant(1.0);
    dup(9, 0) = 2.0;
    const GmmModel j = init_gmm(dup, 4, 1, 1e-6);
    CHECK(j.size() == 4);
    CHECK_THROWS_AS(init_gmm(dup, 11, 1, 0.0), DomainError);
}

TEST_CASE("fit_em recovers known generators") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> v(10'000);
    for (double& x : v) x = g(rng);
    const EmFit single = fit_em(column(v), 1);
    CHECK(std::abs(single.model.components[0].mean(0)) < 0.05);
    CHECK(std::abs(single.model.components[0].covariance(0, 0) - 1.0) < 0.1);

    EmOptions o;
    o.seed = 4;
    const EmFit three = fit_em(three_bumps(5000, 4), 3, o);
    std::vector<double> means;
    for (const auto& c : three.model.components) means.push_back(c.mean(0));
    CHECK(oracle::matched_max_error({0.0, 5.0, 10.0}, means) < 0.1);
}

TEST_CASE("fit_em log-likelihood never decreases") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Dataset ds = gen_cluster3d(3, 600, 0.5, HqnParams{}, s);
        EmOptions o;
        o.seed = s;
        const EmFit fit = fit_em(ds.data, 3, o);
        for (std::size_t i = 1; i < fit.trace.loglik.size(); ++i)
            CHECK(fit.trace.loglik[i] - fit.trace.loglik[i - 1] >= -1e-9);
    }
}

TEST_CASE("fit_em is permutation equivariant") {
    const Matrix x = gen_cluster3d(3, 500, 0.5, HqnParams{}, 6).data;
    EmOptions o;
    o.init = init_gmm(x, 3, 6, covariance_floor(x));
    o.tol = 0.0;
    o.max_iters = 40;
    const EmFit a = fit_em(x, 3, o);
    std::vector<Eigen::Index> perm(500);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
    Matrix y(500, 3);
    for (Eigen::Index i = 0; i < 500; ++i) y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const EmFit b = fit_em(y, 3, o);
    CHECK(std::abs(a.trace.loglik.back() - b.trace.loglik.back()) < 1e-9);
}

TEST_CASE("degenerate and invalid data") {
    Matrix flat(100, 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        flat(i, 0) = g(rng);
        flat(i, 1) = 3.0;
    }
    const EmFit fit = fit_em(flat, 2);
    CHECK(std::isfinite(fit.trace.loglik.back()));
    CHECK(fit.model.components[0].covariance(1, 1) >= covariance_floor(flat));
    CHECK_THROWS_AS(fit_em(Matrix(0, 2), 2), DomainError);
    CHECK(covariance_floor(Matrix::Constant(10, 2, 1.0)) == 1e-12);
}
