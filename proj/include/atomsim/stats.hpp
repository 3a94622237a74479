// stats.hpp -- numerical statistics helpers: normal tails, exact binomial
// (Clopper-Pearson) intervals, a two-component 1-D Gaussian mixture fit, and
// small least-squares helpers used by the alignment scan.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atomsim/units.hpp"

namespace atomsim::stats {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Upper tail P(Z > z) of the standard normal.
inline double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_stddev(std::span<const double> xs) {
    const size_t n = xs.size();
    if (n < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta I_x(a, b), Lentz continued fraction.
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Inverse of I_x(a, b) in x, by bisection. Monotone, so this is robust.
inline double incomplete_beta_inv(double a, double b, double p) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Exact (Clopper-Pearson) binomial confidence interval for k successes in n
/// trials at the given two-sided confidence level.
inline Interval clopper_pearson(int64_t k, int64_t n, double confidence) {
    if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson: bad k/n");
    const double alpha = 1.0 - confidence;
    Interval ci;
    ci.lo = (k == 0) ? 0.0
                     : incomplete_beta_inv(static_cast<double>(k),
                                           static_cast<double>(n - k + 1), alpha / 2.0);
    ci.hi = (k == n) ? 1.0
                     : incomplete_beta_inv(static_cast<double>(k + 1),
                                           static_cast<double>(n - k), 1.0 - alpha / 2.0);
    return ci;
}

// ---------------------------------------------------------------------------
// Two-component 1-D Gaussian mixture, fitted by EM on raw samples.
// ---------------------------------------------------------------------------

struct GaussianComponent {
    double mean = 0.0;
    double sigma = 1.0;
    double weight = 0.5;
};

struct MixtureFit {
    bool converged = false;
    std::string failure;          // set when !converged
    GaussianComponent lower;      // component with the smaller mean
    GaussianComponent upper;
    int iterations = 0;
    double separation = 0.0;      // |mu2-mu1| / max(sigma)
};

inline MixtureFit fit_two_gaussians(std::span<const double> samples) {
    MixtureFit fit;
    const size_t n = samples.size();
    if (n < 100) {
        fit.failure = "need at least 100 samples";
        return fit;
    }

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) { return sorted[static_cast<size_t>(q * (n - 1))]; };

    GaussianComponent a{quantile(0.15), 0.0, 0.5};
    GaussianComponent b{quantile(0.85), 0.0, 0.5};
    const double spread = std::max(1e-9, sample_stddev(samples));
    a.sigma = b.sigma = spread / 2.0;
    if (b.mean - a.mean < 1e-12) b.mean = a.mean + spread;

    std::vector<double> resp(n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 500; ++iter) {
        fit.iterations = iter + 1;
        double wsum = 0.0, ll = 0.0;
        double m1 = 0.0, m2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double za = (samples[i] - a.mean) / a.sigma;
            const double zb = (samples[i] - b.mean) / b.sigma;
            const double pa = a.weight / a.sigma * std::exp(-0.5 * za * za);
            const double pb = b.weight / b.sigma * std::exp(-0.5 * zb * zb);
            const double tot = pa + pb;
            resp[i] = tot > 0.0 ? pa / tot : 0.5;
            wsum += resp[i];
            m1 += resp[i] * samples[i];
            m2 += (1.0 - resp[i]) * samples[i];
            ll += std::log(std::max(tot / std::sqrt(2.0 * units::kPi), 1e-300));
        }
        if (wsum < 1.0 || wsum > static_cast<double>(n) - 1.0) {
            fit.failure = "one component collapsed";
            return fit;
        }
        a.mean = m1 / wsum;
        b.mean = m2 / (static_cast<double>(n) - wsum);
        double v1 = 0.0, v2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            v1 += resp[i] * (samples[i] - a.mean) * (samples[i] - a.mean);
            v2 += (1.0 - resp[i]) * (samples[i] - b.mean) * (samples[i] - b.mean);
        }
        a.sigma = std::max(std::sqrt(v1 / wsum), 1e-6);
        b.sigma = std::max(std::sqrt(v2 / (static_cast<double>(n) - wsum)), 1e-6);
        a.weight = wsum / static_cast<double>(n);
        b.weight = 1.0 - a.weight;
        if (std::fabs(ll - prev_ll) < 1e-10 * std::fabs(ll)) break;
        prev_ll = ll;
    }

    if (a.mean > b.mean) std::swap(a, b);
    fit.lower = a;
    fit.upper = b;
    fit.separation = (b.mean - a.mean) / std::max(a.sigma, b.sigma);
    if (fit.separation < 2.0) {
        fit.failure = "modes not separated (unimodal data?)";
        return fit;
    }
    if (a.weight < 0.02 || b.weight < 0.02) {
        fit.failure = "degenerate component weight";
        return fit;
    }
    fit.converged = true;
    return fit;
}

// ---------------------------------------------------------------------------
// Least-squares fit of y = c0 + c1 cos(2 pi x / period) + c2 sin(2 pi x / period).
// ---------------------------------------------------------------------------

struct CosineFit {
    bool ok = false;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double amplitude = 0.0;   // peak-to-trough of the cosine term
    double phase_x = 0.0;     // x at which the fitted curve is maximal
    double residual_rms = 0.0;
};

inline CosineFit fit_cosine(std::span<const double> x, std::span<const double> y, double period) {
    CosineFit out;
    const size_t n = x.size();
    if (n < 4 || y.size() != n || period <= 0.0) return out;

    // normal equations for the 3-parameter linear model
    double ata[3][3] = {};
    double atb[3] = {};
    for (size_t i = 0; i < n; ++i) {
        const double w = 2.0 * units::kPi * x[i] / period;
        const double basis[3] = {1.0, std::cos(w), std::sin(w)};
        for (int r = 0; r < 3; ++r) {
            atb[r] += basis[r] * y[i];
            for (int c = 0; c < 3; ++c) ata[r][c] += basis[r] * basis[c];
        }
    }
    // Gaussian elimination with partial pivoting
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(ata[idx[r]][col]) > std::fabs(ata[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        const double d = ata[idx[col]][col];
        if (std::fabs(d) < 1e-12) return out;
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = ata[idx[r]][col] / d;
            for (int c = 0; c < 3; ++c) ata[idx[r]][c] -= f * ata[idx[col]][c];
            atb[idx[r]] -= f * atb[idx[col]];
        }
    }
    const double c0 = atb[idx[0]] / ata[idx[0]][0];
    const double c1 = atb[idx[1]] / ata[idx[1]][1];
    const double c2 = atb[idx[2]] / ata[idx[2]][2];

    out.c0 = c0;
    out.c1 = c1;
    out.c2 = c2;
    out.amplitude = 2.0 * std::hypot(c1, c2);
    out.phase_x = period * std::atan2(c2, c1) / (2.0 * units::kPi);
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double w = 2.0 * units::kPi * x[i] / period;
        const double fit_y = c0 + c1 * std::cos(w) + c2 * std::sin(w);
        ss += (y[i] - fit_y) * (y[i] - fit_y);
    }
    out.residual_rms = std::sqrt(ss / static_cast<double>(n));
    out.ok = true;
    return out;
}

/// FNV-1a 64-bit hash, used to stamp output files with their config identity.
inline uint64_t fnv1a(std::string_view text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace atomsim::stats
