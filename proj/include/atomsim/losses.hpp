// losses.hpp -- per-mechanism loss models: vacuum survival, tweezer/lattice
// handoff loss (depth, temperature, and alignment dependent), the
// rearrangement-tweezer response, and the array alignment scan.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "atomsim/config.hpp"
#include "atomsim/random.hpp"
#include "atomsim/stats.hpp"
#include "atomsim/thermal.hpp"

namespace atomsim::losses {

/// Survival against background-gas collisions over a dwell time.
inline double vacuum_survival(double dwell_ms, double lifetime_s) {
    if (dwell_ms < 0.0 || lifetime_s <= 0.0)
        throw std::invalid_argument("vacuum_survival: dwell >= 0 and lifetime > 0 required");
    return std::exp(-dwell_ms / (1e3 * lifetime_s));
}

/// Probability that a 3-D thermal atom has total energy below the trap depth
/// (energy ~ Gamma(3, kT)): 1 - e^-u (1 + u + u^2/2) with u = U/kT.
inline double boltzmann_retention(double depth_uk, double temp_uk) {
    if (depth_uk <= 0.0) return 0.0;
    if (temp_uk <= 0.0) return 1.0;
    const double u = depth_uk / temp_uk;
    return -std::expm1(-u + std::log1p(u + 0.5 * u * u));
}

enum class TrapWavelength { nm459, nm423 };

struct AlignmentState {
    double offset_x_um = 0.0;
    double offset_y_um = 0.0;
    double lattice_period_um = 0.3919;
};

inline AlignmentState alignment_from(const LossParams& p) {
    return {p.alignment_offset_x_um, p.alignment_offset_y_um, p.lattice_period_um};
}

/// Loss probability for one handoff pair (tweezers -> lattice -> tweezers).
/// Deep, cold, aligned handoffs sit on the measured plateau; shallow traps
/// lose the energetic tail of the thermal distribution; misalignment raises
/// the loss up to misaligned_handoff_loss_max at a half-period offset.
inline double handoff_loss(double depth_fraction, TrapWavelength wl,
                           const thermal::ThermalState& state, const AlignmentState& align,
                           const LossParams& p) {
    if (depth_fraction < 0.0)
        throw std::invalid_argument("handoff_loss: depth_fraction must be >= 0");
    const double plateau = (wl == TrapWavelength::nm459) ? p.handoff_loss_459
                                                         : p.handoff_loss_423;
    // per-axis raised-cosine misalignment, combined as a probabilistic OR
    auto mis = [&](double off) {
        return 0.5 * (1.0 - std::cos(2.0 * units::kPi * off / align.lattice_period_um));
    };
    const double mx = mis(align.offset_x_um);
    const double my = mis(align.offset_y_um);
    const double misalign = mx + my - mx * my;
    const double base = plateau + (p.misaligned_handoff_loss_max - plateau) * misalign;

    const double depth_uk = depth_fraction * p.target_depth_nominal_uk;
    const double retention =
        boltzmann_retention(depth_uk, thermal::effective_temperature_uk(state));
    const double survival = (1.0 - base) * retention;
    return std::min(1.0, std::max(0.0, 1.0 - survival));
}

inline double handoff_survival(double depth_fraction, TrapWavelength wl,
                               const thermal::ThermalState& state,
                               const AlignmentState& align, const LossParams& p) {
    return 1.0 - handoff_loss(depth_fraction, wl, state, align, p);
}

// ---------------------------------------------------------------------------
// Rearrangement tweezer response
// ---------------------------------------------------------------------------

struct TweezerResponse {
    double pickup_success = 0.0;
    double disturbance_per_pass = 0.0;
};

/// Pickup success saturates toward rearr_pickup_max as the tweezer deepens;
/// disturbance of nearby occupied sites is zero up to nominal depth and grows
/// quadratically above it.
inline TweezerResponse rearrangement_tweezer_response(double depth_fraction,
                                                      const LossParams& p) {
    if (depth_fraction < 0.0)
        throw std::invalid_argument("rearrangement_tweezer_response: depth must be >= 0");
    TweezerResponse r;
    const double z = depth_fraction / p.rearr_pickup_scale;
    r.pickup_success = p.rearr_pickup_max * (1.0 - std::exp(-z * z));
    const double excess = std::max(0.0, depth_fraction - 1.0);
    r.disturbance_per_pass = std::min(1.0, p.rearr_disturbance_coeff * excess * excess);
    return r;
}

// ---------------------------------------------------------------------------
// Alignment scan
// ---------------------------------------------------------------------------

struct AlignmentScan {
    std::vector<double> offsets_um;
    std::vector<double> survival;      // fraction alive after n pairs, per offset
    double fitted_optimum_um = 0.0;
    double modulation_amplitude = 0.0; // in per-pair loss units
    bool fit_ok = false;
    std::string failure;
};

/// Simulate repeated handoff pairs at each tweezer-array offset (no cooling
/// between pairs, so the lattice heating accumulates), then fit a periodic
/// model to locate the survival maximum.
inline AlignmentScan alignment_scan(const std::vector<double>& offsets_um, int n_pairs,
                                    int atoms_per_offset, double pair_dwell_ms,
                                    const SimConfig& cfg, Rng& rng) {
    if (offsets_um.size() < 4) throw std::invalid_argument("alignment_scan: need >= 4 offsets");
    const double span = *std::max_element(offsets_um.begin(), offsets_um.end()) -
                        *std::min_element(offsets_um.begin(), offsets_um.end());
    if (span < cfg.losses.lattice_period_um)
        throw std::invalid_argument("alignment_scan: offsets must span >= one lattice period");

    AlignmentScan scan;
    scan.offsets_um = offsets_um;
    scan.survival.resize(offsets_um.size(), 0.0);

    for (size_t i = 0; i < offsets_um.size(); ++i) {
        AlignmentState align = alignment_from(cfg.losses);
        align.offset_x_um = offsets_um[i];
        align.offset_y_um = 0.0;
        int alive = atoms_per_offset;
        thermal::ThermalState st = thermal::state_at_temperature(
            cfg.thermal.doppler_floor_uk, cfg.thermal);
        st = thermal::apply_cooling(st, thermal::CoolingStage::rsc, cfg.thermal);
        for (int pair = 0; pair < n_pairs; ++pair) {
            const double loss = handoff_loss(cfg.losses.target_depth_fraction,
                                             TrapWavelength::nm459, st, align, cfg.losses);
            int survivors = 0;
            for (int a = 0; a < alive; ++a)
                if (!rng.bernoulli(loss)) ++survivors;
            alive = survivors;
            st = thermal::apply_heating(st, pair_dwell_ms, cfg.thermal.heating_tau_ms);
        }
        scan.survival[i] = static_cast<double>(alive) / atoms_per_offset;
    }

    // fit -ln(S)/n (per-pair loss) to a cosine at the known lattice period
    std::vector<double> y(offsets_um.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const double s = std::max(scan.survival[i], 1.0 / (2.0 * atoms_per_offset));
        y[i] = -std::log(s) / n_pairs;
    }
    const auto fit = stats::fit_cosine(offsets_um, y, cfg.losses.lattice_period_um);
    if (!fit.ok) {
        scan.failure = "cosine fit failed";
        return scan;
    }
    scan.modulation_amplitude = fit.amplitude;
    if (fit.amplitude < 4.0 * fit.residual_rms) {
        scan.failure = "modulation indistinguishable from noise";
        return scan;
    }
    // loss is maximal at fit.phase_x; survival peaks half a period away
    double opt = fit.phase_x + 0.5 * cfg.losses.lattice_period_um;
    const double p = cfg.losses.lattice_period_um;
    opt -= p * std::floor(opt / p + 0.5);  // wrap to [-p/2, p/2)
    scan.fitted_optimum_um = opt;
    scan.fit_ok = true;
    return scan;
}

}  // namespace atomsim::losses
