#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ccref/common.hpp"

namespace ccref {

// Minimal deterministic PRNG (splitmix64). The standard distributions are
// implementation-defined, so anything that must reproduce bit-exactly across
// toolchains draws from this instead.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // uniform in [0, bound)
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }
    double uniform01() { return (next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

template <typename T>
void shuffle_inplace(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Fractional (average) ranks, 1-based; ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    size_t n = a.size();
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) throw DataError("pearson: constant input vector");
    return cov / std::sqrt(va * vb);
}

namespace detail {

inline double ln_gamma(double x) { return std::lgamma(x); }

// Continued-fraction evaluation of the regularized incomplete beta I_x(a,b)
// (Lentz's method).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double bt = std::exp(ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) +
                         b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

inline double student_t_cdf(double t, double df) {
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    double x = df / (df + t * t);
    double ib = detail::incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0 ? 1.0 - ib / 2.0 : ib / 2.0;
}

enum class Alternative { Greater, Less, TwoSided };

inline std::string to_string(Alternative a) {
    switch (a) {
        case Alternative::Greater: return "greater";
        case Alternative::Less: return "less";
        default: return "two-sided";
    }
}

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
    std::string p_method;  // "t-approximation", "permutation-exhaustive", "permutation"
};

namespace detail {

inline std::vector<double> copy_doubles(const std::vector<double>& v) { return v; }

inline double tail_count_fraction(double rho_obs, const std::vector<double>& rhos,
                                  Alternative alt) {
    constexpr double kTieEps = 1e-12;
    size_t hits = 0;
    for (double r : rhos) {
        bool hit = false;
        switch (alt) {
            case Alternative::Greater: hit = r >= rho_obs - kTieEps; break;
            case Alternative::Less: hit = r <= rho_obs + kTieEps; break;
            case Alternative::TwoSided: hit = std::abs(r) >= std::abs(rho_obs) - kTieEps; break;
        }
        if (hit) ++hits;
    }
    return static_cast<double>(hits + 1) / static_cast<double>(rhos.size() + 1);
}

}  // namespace detail

// Spearman's rank correlation with average ranks for ties. p-value by the
// t-approximation for n > 30, otherwise by permutation of the second rank
// vector: exhaustive for n <= 8, seeded Monte Carlo (>= 1e5 draws) above.
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y,
                               Alternative alternative = Alternative::TwoSided,
                               std::uint64_t seed = 0x5eed5eedULL, size_t draws = 100000) {
    if (x.size() != y.size()) throw DataError("spearman: length mismatch");
    size_t n = x.size();
    if (n < 3) throw DataError("spearman: need at least 3 observations");
    std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
    SpearmanResult res;
    res.rho = pearson(rx, ry);  // throws on constant input

    if (n > 30) {
        res.p_method = "t-approximation";
        double denom = 1.0 - res.rho * res.rho;
        double t = denom <= 0.0
                       ? (res.rho > 0 ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity())
                       : res.rho * std::sqrt((static_cast<double>(n) - 2.0) / denom);
        double cdf = student_t_cdf(t, static_cast<double>(n) - 2.0);
        switch (alternative) {
            case Alternative::Greater: res.p_value = 1.0 - cdf; break;
            case Alternative::Less: res.p_value = cdf; break;
            case Alternative::TwoSided:
                res.p_value = std::min(1.0, 2.0 * std::min(cdf, 1.0 - cdf));
                break;
        }
        return res;
    }

    std::vector<double> rhos;
    std::vector<double> perm = ry;
    if (n <= 8) {
        res.p_method = "permutation-exhaustive";
        std::sort(perm.begin(), perm.end());
        do {
            rhos.push_back(pearson(rx, perm));
        } while (std::next_permutation(perm.begin(), perm.end()));
        // exhaustive: exact tail fraction without the +1 smoothing
        constexpr double kTieEps = 1e-12;
        size_t hits = 0;
        for (double r : rhos) {
            bool hit = false;
            switch (alternative) {
                case Alternative::Greater: hit = r >= res.rho - kTieEps; break;
                case Alternative::Less: hit = r <= res.rho + kTieEps; break;
                case Alternative::TwoSided: hit = std::abs(r) >= std::abs(res.rho) - kTieEps; break;
            }
            if (hit) ++hits;
        }
        res.p_value = static_cast<double>(hits) / static_cast<double>(rhos.size());
        return res;
    }

    res.p_method = "permutation";
    SplitMix64 rng(seed);
    rhos.reserve(draws);
    for (size_t i = 0; i < draws; ++i) {
        shuffle_inplace(perm, rng);
        rhos.push_back(pearson(rx, perm));
    }
    res.p_value = detail::tail_count_fraction(res.rho, rhos, alternative);
    return res;
}

}  // namespace ccref
