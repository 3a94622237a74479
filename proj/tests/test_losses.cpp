#include <catch2/catch_amalgamated.hpp>

#include "atomsim/losses.hpp"
#include "atomsim/report.hpp"

using namespace atomsim;
using Catch::Approx;

namespace {

thermal::ThermalState rsc_floor(const SimConfig& cfg) {
    return thermal::apply_cooling(
        thermal::state_at_temperature(cfg.thermal.post_image_temperature_uk, cfg.thermal),
        thermal::CoolingStage::rsc, cfg.thermal);
}

}  // namespace

TEST_CASE("vacuum survival") {
    CHECK(losses::vacuum_survival(300.0, 30.0) == Approx(0.990050).margin(1e-5));
    CHECK(losses::vacuum_survival(150.0, 30.0) == Approx(0.995012).margin(1e-5));
    CHECK(losses::vacuum_survival(0.0, 5.0) == 1.0);
    CHECK_THROWS_AS(losses::vacuum_survival(-1.0, 5.0), std::invalid_argument);

    SECTION("exponential semigroup") {
        Rng rng(1);
        for (int i = 0; i < 50; ++i) {
            const double t1 = rng.uniform(0.0, 500.0);
            const double t2 = rng.uniform(0.0, 500.0);
            CHECK(losses::vacuum_survival(t1 + t2, 30.0) ==
                  Approx(losses::vacuum_survival(t1, 30.0) *
                         losses::vacuum_survival(t2, 30.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("handoff loss model") {
    const auto cfg = default_config();
    const auto floor = rsc_floor(cfg);
    const auto aligned = losses::alignment_from(cfg.losses);

    SECTION("plateaus at nominal depth, cold, aligned") {
        const double l459 = losses::handoff_loss(1.0, losses::TrapWavelength::nm459, floor,
                                                 aligned, cfg.losses);
        const double l423 = losses::handoff_loss(1.0, losses::TrapWavelength::nm423, floor,
                                                 aligned, cfg.losses);
        CHECK(l459 == Approx(0.0006).margin(1e-4));
        CHECK(l423 == Approx(0.0015).margin(2e-4));
        // the plateau is the model's asymptote
        CHECK(l459 - cfg.losses.handoff_loss_459 >= 0.0);
        CHECK(l459 - cfg.losses.handoff_loss_459 <= 2e-5);
        const double deep = losses::handoff_loss(3.0, losses::TrapWavelength::nm459, floor,
                                                 aligned, cfg.losses);
        CHECK(deep == Approx(cfg.losses.handoff_loss_459).margin(1e-12));
    }
    SECTION("half-period misalignment raises the loss to the configured cap") {
        auto off = aligned;
        off.offset_x_um = cfg.losses.lattice_period_um / 2.0;
        CHECK(losses::handoff_loss(1.0, losses::TrapWavelength::nm459, floor, off,
                                   cfg.losses) == Approx(0.02).margin(2e-4));
        // diagonal half-period offsets are just as bad
        off.offset_y_um = off.offset_x_um;
        CHECK(losses::handoff_loss(1.0, losses::TrapWavelength::nm459, floor, off,
                                   cfg.losses) == Approx(0.02).margin(2e-4));
    }
    SECTION("zero depth loses hot atoms with certainty") {
        CHECK(losses::handoff_survival(0.0, losses::TrapWavelength::nm459, floor, aligned,
                                       cfg.losses) == 0.0);
    }
    SECTION("survival is monotone non-decreasing in depth") {
        double prev = -1.0;
        for (double d = 0.0; d <= 1.5; d += 0.05) {
            const double s = losses::handoff_survival(d, losses::TrapWavelength::nm459, floor,
                                                      aligned, cfg.losses);
            CHECK(s >= prev - 1e-12);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
            prev = s;
        }
    }
    SECTION("loss turns on below three quarters of nominal depth") {
        auto loss_at = [&](double d) {
            return losses::handoff_loss(d, losses::TrapWavelength::nm459, floor, aligned,
                                        cfg.losses);
        };
        CHECK(loss_at(0.9) - cfg.losses.handoff_loss_459 < 2e-4);
        CHECK(loss_at(0.7) > 1.5 * cfg.losses.handoff_loss_459);
        CHECK(loss_at(0.5) > 5.0 * cfg.losses.handoff_loss_459);
    }
}

TEST_CASE("rearrangement tweezer response") {
    const auto cfg = default_config();
    const auto at = [&](double d) {
        return losses::rearrangement_tweezer_response(d, cfg.losses);
    };
    CHECK(at(0.0).pickup_success == 0.0);
    CHECK(at(1.0).pickup_success >= 0.99);
    CHECK(at(1.0).disturbance_per_pass <= 1e-4);
    CHECK(at(2.0).disturbance_per_pass > at(1.2).disturbance_per_pass);
    double prev = -1.0;
    for (double d = 0.0; d <= 2.0; d += 0.1) {
        CHECK(at(d).pickup_success >= prev);
        prev = at(d).pickup_success;
    }
}

TEST_CASE("alignment scan") {
    auto cfg = default_config();
    std::vector<double> offsets;
    for (int i = 0; i <= 40; ++i) offsets.push_back(-0.4 + 0.8 * i / 40.0);

    SECTION("recovers a true optimum at zero within period/50") {
        Rng rng(31);
        const auto scan = losses::alignment_scan(offsets, 25, 2000, 10.0, cfg, rng);
        REQUIRE(scan.fit_ok);
        CHECK(std::fabs(scan.fitted_optimum_um) <= cfg.losses.lattice_period_um / 50.0);
    }
    SECTION("survival is periodic with the lattice period") {
        Rng rng(37);
        const double p = cfg.losses.lattice_period_um;
        const std::vector<double> probe{-0.15, -0.15 + p, 0.1, 0.1 + p, -0.3, 0.35};
        const auto scan = losses::alignment_scan(probe, 25, 4000, 10.0, cfg, rng);
        CHECK(scan.survival[0] == Approx(scan.survival[1]).margin(0.04));
        CHECK(scan.survival[2] == Approx(scan.survival[3]).margin(0.04));
    }
    SECTION("worst-to-best survival ratio over 25 pairs") {
        const auto floor = rsc_floor(cfg);
        Rng rng(41);
        auto run_pairs = [&](double off) {
            losses::AlignmentState al{off, 0.0, cfg.losses.lattice_period_um};
            int alive = 30000;
            auto st = floor;
            for (int p = 0; p < 25; ++p) {
                const double loss = losses::handoff_loss(1.0, losses::TrapWavelength::nm459,
                                                         st, al, cfg.losses);
                int surv = 0;
                for (int a = 0; a < alive; ++a)
                    if (!rng.bernoulli(loss)) ++surv;
                alive = surv;
                st = thermal::apply_heating(st, 10.0, cfg.thermal.heating_tau_ms);
            }
            return alive / 30000.0;
        };
        const double ratio = run_pairs(cfg.losses.lattice_period_um / 2.0) / run_pairs(0.0);
        const double expected = std::pow(0.98, 25) / std::pow(1.0 - 0.0006, 25);
        CHECK(ratio == Approx(expected).margin(0.03));
    }
    SECTION("flat modulation reports a fit failure") {
        auto flat = cfg;
        flat.losses.misaligned_handoff_loss_max = flat.losses.handoff_loss_459;
        Rng rng(43);
        const auto scan = losses::alignment_scan(offsets, 25, 500, 10.0, flat, rng);
        CHECK_FALSE(scan.fit_ok);
        CHECK_FALSE(scan.failure.empty());
    }
    SECTION("offsets must span a full period") {
        Rng rng(47);
        const std::vector<double> narrow{0.0, 0.05, 0.1, 0.15};
        CHECK_THROWS_AS(losses::alignment_scan(narrow, 5, 100, 10.0, cfg, rng),
                        std::invalid_argument);
    }
}

TEST_CASE("loss budget") {
    const auto cfg = default_config();
    const auto table = report::budget_report(cfg, false);

    auto row = [&](const std::string& name) {
        for (const auto& r : table.rows)
            if (r.mechanism == name) return r;
        FAIL("missing row " + name);
        return report::BudgetRow{};
    };
    SECTION("vacuum is the dominant percent-level mechanism") {
        CHECK(table.dominant == "vacuum");
        CHECK(row("vacuum").per_cycle == Approx(0.01).margin(0.003));
    }
    SECTION("imaging row carries the vacuum/Raman split") {
        const auto r = row("imaging");
        CHECK(r.per_cycle == Approx(2e-3).margin(1e-4));
        CHECK(r.note.find("0.0006 vacuum") != std::string::npos);
        CHECK(r.note.find("0.0014 Raman") != std::string::npos);
    }
    SECTION("infinite lifetime zeroes the vacuum row") {
        auto long_lived = cfg;
        long_lived.losses.vacuum_lifetime_s = 1e15;
        const auto t2 = report::budget_report(long_lived, false);
        for (const auto& r : t2.rows)
            if (r.mechanism == "vacuum") CHECK(r.per_cycle <= 1e-9);
        CHECK(t2.dominant == "imaging");
    }
    SECTION("handoff rows match the plateaus") {
        CHECK(row("handoff_pair_459").per_cycle == Approx(0.0006).margin(1e-4));
        CHECK(row("handoff_pair_423").per_cycle == Approx(0.0015).margin(2e-4));
    }
}
