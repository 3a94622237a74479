// imaging.hpp -- photon-count generation, occupancy classification, and the
// two imaging-fidelity estimators: a two-Gaussian histogram fit and the
// repeated-image consistency method.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atomsim/config.hpp"
#include "atomsim/random.hpp"
#include "atomsim/stats.hpp"

namespace atomsim::imaging {

/// Counts are continuous (camera-calibrated photoelectron equivalents); the
/// background can dip below zero after baseline subtraction.
inline double sample_counts(bool occupied, const ImagingModel& m, Rng& rng) {
    if (occupied) return rng.gaussian(m.signal_mean_counts, m.signal_width_counts);
    return rng.gaussian(m.background_mean_counts, m.background_width_counts);
}

/// Occupied iff counts exceed the threshold; a tie classifies as empty.
inline bool classify(double counts, double threshold) { return counts > threshold; }

struct MisclassificationRates {
    double false_occupied = 0.0;  // empty site classified occupied
    double false_empty = 0.0;     // occupied site classified empty
};

/// Analytic tail probabilities of the count model at its threshold.
inline MisclassificationRates misclassification_rates(const ImagingModel& m) {
    MisclassificationRates r;
    r.false_occupied = stats::normal_tail(
        (m.threshold_counts - m.background_mean_counts) / m.background_width_counts);
    r.false_empty = stats::normal_cdf(
        (m.threshold_counts - m.signal_mean_counts) / m.signal_width_counts);
    return r;
}

// ---------------------------------------------------------------------------
// Fidelity estimators
// ---------------------------------------------------------------------------

enum class FidelityMethod { gaussian_fit, repeated_images };

struct FidelityEstimate {
    double fidelity = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    FidelityMethod method = FidelityMethod::gaussian_fit;
    int64_t sample_size = 0;
};

struct HistogramFit {
    bool ok = false;
    std::string failure;
    stats::MixtureFit mixture;
    double threshold = 0.0;
    FidelityEstimate estimate;
};

/// Fit a sum of two Gaussians to count samples, place the threshold where the
/// weighted tail areas balance, and estimate fidelity as one minus the
/// normalized area on the wrong side of the threshold.
inline HistogramFit fit_histogram(std::span<const double> samples) {
    HistogramFit out;
    out.mixture = stats::fit_two_gaussians(samples);
    if (!out.mixture.converged) {
        out.failure = out.mixture.failure;
        return out;
    }
    const auto& bg = out.mixture.lower;
    const auto& sig = out.mixture.upper;

    // balanced threshold: weighted false-positive and false-negative areas equal
    auto imbalance = [&](double t) {
        const double fp = bg.weight * stats::normal_tail((t - bg.mean) / bg.sigma);
        const double fn = sig.weight * stats::normal_cdf((t - sig.mean) / sig.sigma);
        return fp - fn;
    };
    double lo = bg.mean, hi = sig.mean;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (imbalance(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.threshold = 0.5 * (lo + hi);

    const double wrong =
        bg.weight * stats::normal_tail((out.threshold - bg.mean) / bg.sigma) +
        sig.weight * stats::normal_cdf((out.threshold - sig.mean) / sig.sigma);
    out.estimate.method = FidelityMethod::gaussian_fit;
    out.estimate.fidelity = 1.0 - wrong;
    out.estimate.sample_size = static_cast<int64_t>(samples.size());

    // CI from the effective misclassified count at this sample size
    const auto n = static_cast<int64_t>(samples.size());
    const auto k = static_cast<int64_t>(std::llround(wrong * static_cast<double>(n)));
    const auto ci = stats::clopper_pearson(std::min(k, n), n, 0.68);
    out.estimate.ci_low = 1.0 - ci.hi;
    out.estimate.ci_high = 1.0 - ci.lo;
    out.ok = true;
    return out;
}

/// Count misidentification events: images whose classification differs from
/// both neighbors. First and last images of each sequence cannot qualify.
inline FidelityEstimate repeated_image_fidelity(
    const std::vector<std::vector<bool>>& sequences) {
    int64_t events = 0;
    int64_t interior = 0;
    for (const auto& seq : sequences) {
        if (seq.size() < 3)
            throw std::invalid_argument("repeated_image_fidelity: sequences need >= 3 images");
        for (size_t i = 1; i + 1 < seq.size(); ++i) {
            ++interior;
            if (seq[i] != seq[i - 1] && seq[i] != seq[i + 1]) ++events;
        }
    }
    FidelityEstimate est;
    est.method = FidelityMethod::repeated_images;
    est.sample_size = interior;
    est.fidelity = 1.0 - static_cast<double>(events) / static_cast<double>(interior);
    const auto ci = stats::clopper_pearson(events, interior, 0.68);
    est.ci_low = 1.0 - ci.hi;
    est.ci_high = 1.0 - ci.lo;
    return est;
}

// ---------------------------------------------------------------------------
// Single-atom imaging with loss and spin bookkeeping
// ---------------------------------------------------------------------------

enum class Spin : int { down = -1, up = +1 };  // up is the bright state

struct ImageOutcome {
    bool classified_occupied = false;
    bool survived = false;
    Spin spin_after = Spin::up;
    double counts = 0.0;
};

/// Image one site. Loss applies with loss_per_image (attributed 30% vacuum /
/// 70% Raman scattering in the budget). In spin-selective mode the spin can
/// flip and only the bright state scatters signal.
inline ImageOutcome image_atom(bool occupied, Spin spin, const ImagingModel& m, Rng& rng) {
    ImageOutcome out;
    out.spin_after = spin;
    if (!occupied) {
        out.counts = sample_counts(false, m, rng);
        out.classified_occupied = classify(out.counts, m.threshold_counts);
        out.survived = false;
        return out;
    }
    if (m.mode == ImagingMode::spin_selective && rng.bernoulli(m.spin_flip_probability)) {
        out.spin_after = (spin == Spin::up) ? Spin::down : Spin::up;
    }
    const bool bright = (m.mode == ImagingMode::occupancy) || (out.spin_after == Spin::up);
    out.counts = sample_counts(bright, m, rng);
    out.classified_occupied = classify(out.counts, m.threshold_counts);
    out.survived = !rng.bernoulli(m.loss_per_image);
    return out;
}

// ---------------------------------------------------------------------------
// Histogram export
// ---------------------------------------------------------------------------

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    int64_t count = 0;
};

inline std::vector<HistogramBin> histogram(std::span<const double> samples, int nbins,
                                           double lo, double hi) {
    if (nbins < 1 || hi <= lo) throw std::invalid_argument("histogram: bad binning");
    std::vector<HistogramBin> bins(nbins);
    const double w = (hi - lo) / nbins;
    for (int i = 0; i < nbins; ++i) {
        bins[i].lo = lo + i * w;
        bins[i].hi = lo + (i + 1) * w;
    }
    for (double s : samples) {
        if (s < lo || s >= hi) continue;
        ++bins[static_cast<size_t>((s - lo) / w)].count;
    }
    return bins;
}

}  // namespace atomsim::imaging
