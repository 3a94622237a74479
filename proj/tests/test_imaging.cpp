#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "atomsim/imaging.hpp"

using namespace atomsim;
using Catch::Approx;

namespace {

/// Independent oracle for Clopper-Pearson bounds: bisect the exact binomial
/// tail sums instead of using the incomplete-beta route the library takes.
double binom_tail_ge(int64_t k, int64_t n, double p) {
    // P(X >= k)
    double total = 0.0;
    for (int64_t i = k; i <= n; ++i) {
        const double lg = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                          std::lgamma(n - i + 1.0) + i * std::log(p) +
                          (n - i) * std::log1p(-p);
        total += std::exp(lg);
    }
    return std::min(total, 1.0);
}

double oracle_lower(int64_t k, int64_t n, double alpha) {
    if (k == 0) return 0.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (binom_tail_ge(k, n, mid) < alpha / 2) ? lo = mid : hi = mid;
    }
    return 0.5 * (lo + hi);
}

double oracle_upper(int64_t k, int64_t n, double alpha) {
    if (k == n) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (1.0 - binom_tail_ge(k + 1, n, mid) < alpha / 2) ? hi = mid : lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("count sampling") {
    ImagingModel m;
    Rng rng(1);

    SECTION("degenerate widths collapse to the means") {
        auto zero = m;
        zero.signal_width_counts = 0.0;
        zero.background_width_counts = 0.0;
        CHECK(imaging::sample_counts(true, zero, rng) == m.signal_mean_counts);
        CHECK(imaging::sample_counts(false, zero, rng) == m.background_mean_counts);
    }
    SECTION("background draws stay below threshold in at least 99.9% of cases") {
        int below = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i)
            if (imaging::sample_counts(false, m, rng) <= m.threshold_counts) ++below;
        CHECK(below >= static_cast<int>(0.999 * n));
    }
    SECTION("histogram of draws is bimodal at the two means") {
        std::vector<double> samples;
        for (int i = 0; i < 100000; ++i)
            samples.push_back(imaging::sample_counts(i % 2 == 0, m, rng));
        const auto bins = imaging::histogram(samples, 60, -15.0, 105.0);
        auto peak_in = [&](double lo, double hi) {
            double center = 0.0;
            int64_t best = -1;
            for (const auto& b : bins) {
                if (b.lo >= lo && b.hi <= hi && b.count > best) {
                    best = b.count;
                    center = 0.5 * (b.lo + b.hi);
                }
            }
            return center;
        };
        CHECK(peak_in(-15.0, 25.0) == Approx(5.0).margin(3.0));
        CHECK(peak_in(25.0, 105.0) == Approx(50.0).margin(3.0));
    }
}

TEST_CASE("classification") {
    ImagingModel m;
    CHECK(imaging::classify(m.signal_mean_counts, m.threshold_counts));
    CHECK_FALSE(imaging::classify(0.0, m.threshold_counts));
    CHECK_FALSE(imaging::classify(m.threshold_counts, m.threshold_counts));  // tie -> empty

    SECTION("threshold sweep is monotone") {
        Rng rng(2);
        std::vector<double> counts;
        for (int i = 0; i < 200; ++i) counts.push_back(imaging::sample_counts(i % 2 == 0, m, rng));
        int prev = static_cast<int>(counts.size());
        for (double t = -20.0; t <= 120.0; t += 1.0) {
            int occ = 0;
            for (double c : counts)
                if (imaging::classify(c, t)) ++occ;
            CHECK(occ <= prev);
            prev = occ;
        }
        CHECK(prev == 0);
    }
}

TEST_CASE("two-Gaussian histogram fit") {
    ImagingModel m;
    Rng rng(5);
    std::vector<double> samples;
    for (int i = 0; i < 40000; ++i) samples.push_back(imaging::sample_counts(i % 2 == 0, m, rng));

    const auto fit = imaging::fit_histogram(samples);
    REQUIRE(fit.ok);
    SECTION("recovered parameters match the generating model within 2%") {
        CHECK(fit.mixture.lower.mean == Approx(m.background_mean_counts).epsilon(0.02));
        CHECK(fit.mixture.upper.mean == Approx(m.signal_mean_counts).epsilon(0.02));
        CHECK(fit.mixture.lower.sigma == Approx(m.background_width_counts).epsilon(0.05));
        CHECK(fit.mixture.upper.sigma == Approx(m.signal_width_counts).epsilon(0.05));
    }
    SECTION("fidelity lands at the calibrated overlap") {
        CHECK(fit.estimate.fidelity == Approx(0.9995).margin(3e-4));
        CHECK(fit.threshold > m.background_mean_counts);
        CHECK(fit.threshold < m.signal_mean_counts);
    }
    SECTION("widely separated modes give fidelity near one") {
        std::vector<double> far;
        Rng r2(6);
        for (int i = 0; i < 2000; ++i) far.push_back(r2.gaussian(i % 2 ? 1000.0 : 0.0, 1.0));
        const auto f2 = imaging::fit_histogram(far);
        REQUIRE(f2.ok);
        CHECK(f2.estimate.fidelity == Approx(1.0).margin(1e-9));
    }
    SECTION("unimodal data reports a fit failure") {
        std::vector<double> uni;
        Rng r3(7);
        for (int i = 0; i < 2000; ++i) uni.push_back(r3.gaussian(10.0, 2.0));
        const auto f3 = imaging::fit_histogram(uni);
        CHECK_FALSE(f3.ok);
        CHECK_FALSE(f3.failure.empty());
    }
}

TEST_CASE("repeated-image fidelity estimator") {
    SECTION("one isolated flip is exactly one event") {
        std::vector<std::vector<bool>> seqs{{true, true, false, true, true}};
        const auto est = imaging::repeated_image_fidelity(seqs);
        CHECK(est.sample_size == 3);
        CHECK(est.fidelity == Approx(1.0 - 1.0 / 3.0));
    }
    SECTION("a real loss (step change) is not an event") {
        std::vector<std::vector<bool>> seqs{{true, true, false, false, false}};
        const auto est = imaging::repeated_image_fidelity(seqs);
        CHECK(est.fidelity == 1.0);
    }
    SECTION("error-free sequences give fidelity one with a k=0 interval") {
        std::vector<std::vector<bool>> seqs{std::vector<bool>(101, true)};
        const auto est = imaging::repeated_image_fidelity(seqs);
        CHECK(est.fidelity == 1.0);
        CHECK(est.ci_high == 1.0);
        CHECK(est.ci_low == Approx(std::pow(0.16, 1.0 / 99.0)).epsilon(1e-6));
    }
    SECTION("sequences shorter than three are rejected") {
        std::vector<std::vector<bool>> seqs{{true, false}};
        CHECK_THROWS_AS(imaging::repeated_image_fidelity(seqs), std::invalid_argument);
    }
    SECTION("estimator converges to the analytic misclassification rate") {
        ImagingModel m;
        const auto rates = imaging::misclassification_rates(m);
        Rng rng(11);
        std::vector<std::vector<bool>> seqs;
        const int n_sites = 20, len = 5002;
        for (int s = 0; s < n_sites; ++s) {
            const bool truth = s % 2 == 0;
            std::vector<bool> seq(len);
            for (int i = 0; i < len; ++i)
                seq[i] = imaging::classify(imaging::sample_counts(truth, m, rng),
                                           m.threshold_counts);
            seqs.push_back(std::move(seq));
        }
        const auto est = imaging::repeated_image_fidelity(seqs);
        const double c = 0.5 * (rates.false_occupied + rates.false_empty);
        const double expected_event_rate = c * (1.0 - c);
        const double sigma = std::sqrt(expected_event_rate / est.sample_size);
        CHECK(std::fabs((1.0 - est.fidelity) - expected_event_rate) <= 3.0 * sigma);
    }
}

TEST_CASE("Clopper-Pearson intervals match the exact binomial tails") {
    for (auto conf : {0.68, 0.95}) {
        const double alpha = 1.0 - conf;
        for (auto [k, n] : std::vector<std::pair<int64_t, int64_t>>{
                 {0, 10}, {1, 10}, {5, 20}, {19, 20}, {7, 6570}}) {
            const auto ci = stats::clopper_pearson(k, n, conf);
            CHECK(ci.lo == Approx(oracle_lower(k, n, alpha)).margin(1e-7));
            CHECK(ci.hi == Approx(oracle_upper(k, n, alpha)).margin(1e-7));
        }
    }
}

TEST_CASE("the two estimators agree on the same dataset") {
    ImagingModel m;
    m.loss_per_image = 0.0;
    Rng rng(13);
    std::vector<std::vector<bool>> seqs;
    std::vector<double> counts;
    for (int s = 0; s < 50; ++s) {
        const bool truth = s % 2 == 0;
        std::vector<bool> seq(400);
        for (auto&& b : seq) {
            const double c = imaging::sample_counts(truth, m, rng);
            counts.push_back(c);
            b = imaging::classify(c, m.threshold_counts);
        }
        seqs.push_back(std::move(seq));
    }
    const auto rep = imaging::repeated_image_fidelity(seqs);
    const auto fit = imaging::fit_histogram(counts);
    REQUIRE(fit.ok);
    const double lo = std::max(rep.ci_low, fit.estimate.ci_low);
    const double hi = std::min(rep.ci_high, fit.estimate.ci_high);
    CHECK(lo <= hi);  // joint confidence intervals overlap
}

TEST_CASE("threshold balances false positives and negatives") {
    ImagingModel m;
    Rng rng(17);
    int fp = 0, fn = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        if (imaging::classify(imaging::sample_counts(false, m, rng), m.threshold_counts)) ++fp;
        if (!imaging::classify(imaging::sample_counts(true, m, rng), m.threshold_counts)) ++fn;
    }
    CHECK(std::fabs(fp - fn) <= 2.0 * std::sqrt(static_cast<double>(fp + fn)) + 1.0);
}

TEST_CASE("single-atom imaging outcomes") {
    ImagingModel m;
    SECTION("loss statistics reproduce the per-image survival") {
        Rng rng(19);
        int survived = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i)
            if (imaging::image_atom(true, imaging::Spin::up, m, rng).survived) ++survived;
        CHECK(static_cast<double>(survived) / n == Approx(0.998).margin(1e-3));
    }
    SECTION("spin-selective mode adds apparent loss from spin flips") {
        auto spin_model = m;
        spin_model.mode = ImagingMode::spin_selective;
        Rng rng(23);
        int dark = 0, flipped = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const auto out = imaging::image_atom(true, imaging::Spin::up, spin_model, rng);
            if (!out.classified_occupied) ++dark;
            if (out.spin_after == imaging::Spin::down) ++flipped;
        }
        CHECK(static_cast<double>(flipped) / n == Approx(4e-3).margin(1e-3));
        CHECK(static_cast<double>(dark) / n == Approx(4.5e-3).margin(1.5e-3));
    }
    SECTION("no loss channels means guaranteed survival") {
        auto safe = m;
        safe.loss_per_image = 0.0;
        safe.spin_flip_probability = 0.0;
        Rng rng(29);
        for (int i = 0; i < 2000; ++i)
            CHECK(imaging::image_atom(true, imaging::Spin::up, safe, rng).survived);
    }
}
