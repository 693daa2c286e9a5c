#include "hqsat/core.hpp"

#include <doctest.h>

#include <charconv>
#include <random>
#include <set>
#include <vector>

using namespace hqsat;

TEST_CASE("derive_seed separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 8; ++s)
        for (std::uint64_t a = 0; a < 8; ++a)
            for (std::uint64_t b = 0; b < 8; ++b) seen.insert(derive_seed(s, a, b));
    CHECK(seen.size() == 512);
    CHECK(derive_seed(5, 1, 2) == derive_seed(5, 1, 2));
}

TEST_CASE("deterministic_sum does not depend on the worker count") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1e3);
    std::vector<double> v(50'001);
    for (double& x : v) x = g(rng);
    const int saved = worker_count();
    set_worker_count(1);
    const double one = deterministic_sum(v);
    set_worker_count(4);
    const double four = deterministic_sum(v);
    set_worker_count(saved);
    CHECK(one == four);

    long double exact = 0.0L;
    for (double x : v) exact += x;
    CHECK(one == doctest::Approx(static_cast<double>(exact)).epsilon(1e-12));
    CHECK(deterministic_sum({}) == 0.0);
}

TEST_CASE("format_double round trips") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng) * std::pow(10.0, k % 40 - 20);
        const std::string s = format_double(v);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(back == v);
    }
    CHECK(format_double(0.5) == "0.5");
}
