#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hj {

using Vec = std::vector<double>;

/// Inclusive integer box [lo, hi] in Z^d with row-major flattening
/// (last axis fastest). The basic addressing unit for layer storage.
struct IndexBox {
    std::vector<std::int64_t> lo;
    std::vector<std::int64_t> hi;

    int dim() const { return static_cast<int>(lo.size()); }
    std::int64_t extent(int j) const { return hi[j] - lo[j] + 1; }
    std::int64_t size() const;
    bool contains(std::span<const std::int64_t> m) const;
    std::int64_t flatten(std::span<const std::int64_t> m) const;
    void unflatten(std::int64_t idx, std::span<std::int64_t> m) const;
    IndexBox expanded(std::int64_t rings) const;
    bool operator==(const IndexBox&) const = default;
};

/// Sum-of-coordinates parity, 0 = even, 1 = odd.
inline int parity_of(std::span<const std::int64_t> m) {
    std::int64_t s = 0;
    for (auto v : m) s += v;
    return static_cast<int>(((s % 2) + 2) % 2);
}

/// SplitMix64 mixer; used to derive independent seeds per stream index.
std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic per-index RNG stream: identical (seed, index) pairs give
/// identical draws no matter how work is scheduled across threads.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

/// Number of worker threads: HJSOLVE_THREADS if set (>=1), else the
/// hardware count.
int thread_count();

/// Runs fn(begin, end) over a partition of [0, n) on up to thread_count()
/// threads. Chunks are contiguous; callers must keep writes disjoint and
/// reductions order-independent so results do not depend on the split.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

/// In-place Cholesky solve of A x = b for symmetric positive definite A
/// (row-major d x d, destroyed). Returns false if A is not positive
/// definite to working precision.
bool solve_spd(std::vector<double>& a, std::vector<double>& b, int d);

double norm_inf(std::span<const double> v);

/// Shortest round-trip double formatting, locale independent.
std::string fmt_double(double v);

} // namespace hj
