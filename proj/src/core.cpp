#include "hqsat/core.hpp"

#include <charconv>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hqsat {

namespace {

double pairwise(std::span<const double> partials) {
    if (partials.empty()) return 0.0;
    if (partials.size() == 1) return partials[0];
    const std::size_t half = partials.size() / 2;
    return pairwise(partials.first(half)) + pairwise(partials.subspan(half));
}

}  // namespace

double deterministic_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    const auto chunks = static_cast<long>(chunk_count(n));
    std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static) if (chunks > 4)
    for (long c = 0; c < chunks; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += values[i];
        partial[static_cast<std::size_t>(c)] = s;
    }
    return pairwise(partial);
}

int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_worker_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

}  // namespace hqsat
