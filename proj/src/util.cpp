#include "hj/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "hj/errors.hpp"

namespace hj {

std::int64_t IndexBox::size() const {
    std::int64_t n = 1;
    for (int j = 0; j < dim(); ++j) n *= extent(j);
    return n;
}

bool IndexBox::contains(std::span<const std::int64_t> m) const {
    for (int j = 0; j < dim(); ++j)
        if (m[j] < lo[j] || m[j] > hi[j]) return false;
    return true;
}

std::int64_t IndexBox::flatten(std::span<const std::int64_t> m) const {
    std::int64_t idx = 0;
    for (int j = 0; j < dim(); ++j) idx = idx * extent(j) + (m[j] - lo[j]);
    return idx;
}

void IndexBox::unflatten(std::int64_t idx, std::span<std::int64_t> m) const {
    for (int j = dim() - 1; j >= 0; --j) {
        const std::int64_t e = extent(j);
        m[j] = lo[j] + idx % e;
        idx /= e;
    }
}

IndexBox IndexBox::expanded(std::int64_t rings) const {
    IndexBox out = *this;
    for (int j = 0; j < dim(); ++j) {
        out.lo[j] -= rings;
        out.hi[j] += rings;
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t s = splitmix64(seed ^ splitmix64(index + 1));
    return std::mt19937_64(s);
}

int thread_count() {
    if (const char* env = std::getenv("HJSOLVE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<int>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int nt = std::min<std::int64_t>(thread_count(), n);
    if (nt <= 1 || n < 1024) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::int64_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const std::int64_t b = t * chunk;
        const std::int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

bool solve_spd(std::vector<double>& a, std::vector<double>& b, int d) {
    // Cholesky A = L L^T, then forward/back substitution.
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * d + j];
            for (int k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) return false;
                a[i * d + i] = std::sqrt(s);
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    for (int i = 0; i < d; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= a[i * d + k] * b[k];
        b[i] = s / a[i * d + i];
    }
    for (int i = d - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < d; ++k) s -= a[k * d + i] * b[k];
        b[i] = s / a[i * d + i];
    }
    return true;
}

double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace hj
