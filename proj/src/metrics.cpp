#include "hqsat/metrics.hpp"

#include "hqsat/core.hpp"

#include <algorithm>
#include <map>

namespace hqsat {

namespace {
double choose2(double n) { return 0.5 * n * (n - 1.0); }
}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DomainError("adjusted_rand_index: label vectors differ in length");
    if (a.size() < 2) throw DomainError("adjusted_rand_index: need at least 2 samples");
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [k, n] : table) index += choose2(n);
    for (const auto& [k, n] : rows) sum_a += choose2(n);
    for (const auto& [k, n] : cols) sum_b += choose2(n);
    const double expected = sum_a * sum_b / choose2(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0; // both labelings trivial
    return (index - expected) / (max_index - expected);
}

}  // namespace hqsat
