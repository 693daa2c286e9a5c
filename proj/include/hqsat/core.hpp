#pragma once

// Shared vocabulary types, error classes, seed derivation and the
// deterministic reduction used by every parallel kernel.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace hqsat {

using Vector = Eigen::VectorXd;
/// Data sets are stored one sample per row.
using Matrix = Eigen::MatrixXd;

/// Precondition violated by the caller (bad shape, negative rate, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Floating point breakdown: non-SPD covariance, non-finite loss, ...
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, long index = -1)
        : std::runtime_error(what), index_(index) {}
    /// Offending component or sample index, -1 when not applicable.
    long index() const noexcept { return index_; }

private:
    long index_;
};

/// Malformed input file; line numbers are 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for (seed, a, b). Used for per-chunk, per-grid-point and
/// per-method streams so results never depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ (a + 0x632be59bd9b4e019ULL)) ^
                      (b + 0x85157af5ULL));
}

/// Fixed chunk length shared by sampling and reductions. Changing it changes
/// every seeded output, so it is part of the reproducibility contract.
inline constexpr std::size_t kChunk = 1024;

inline std::size_t chunk_count(std::size_t n) noexcept { return (n + kChunk - 1) / kChunk; }

/// Sum with fixed association: sequential inside kChunk blocks, pairwise
/// across blocks. Bit-identical whatever the number of OpenMP workers.
double deterministic_sum(std::span<const double> values);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Number of OpenMP workers in use (1 when built without OpenMP).
int worker_count();
void set_worker_count(int n);

}  // namespace hqsat
