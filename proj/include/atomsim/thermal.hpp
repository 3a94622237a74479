// thermal.hpp -- rate-equation model of atom temperature and motional
// occupation: Bose occupation <-> temperature conversions, Doppler and Raman
// sideband cooling stages, exponential lattice heating, and sideband
// asymmetry.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "atomsim/config.hpp"
#include "atomsim/units.hpp"

namespace atomsim::thermal {

struct ThermalState {
    double nbar_x = 0.0;
    double nbar_y = 0.0;
    double nbar_z = 0.0;
    double trap_freq_x_khz = 160.0;
    double trap_freq_y_khz = 160.0;
    double trap_freq_z_khz = 50.0;
};

/// Bose-Einstein occupation of a harmonic mode at temperature T.
inline double nbar_from_temperature(double temp_uk, double freq_khz) {
    if (temp_uk < 0.0 || freq_khz <= 0.0)
        throw std::invalid_argument("nbar_from_temperature: T >= 0 and f > 0 required");
    if (temp_uk == 0.0) return 0.0;
    const double x = units::trap_quantum_uk(freq_khz) / temp_uk;
    return 1.0 / std::expm1(x);
}

/// Boltzmann-equivalent temperature of a mode with occupation nbar.
inline double temperature_from_nbar(double nbar, double freq_khz) {
    if (nbar < 0.0 || freq_khz <= 0.0)
        throw std::invalid_argument("temperature_from_nbar: nbar >= 0 and f > 0 required");
    if (nbar == 0.0) return 0.0;
    return units::trap_quantum_uk(freq_khz) / std::log1p(1.0 / nbar);
}

inline ThermalState state_at_temperature(double temp_uk, const ThermalParams& p) {
    ThermalState s;
    s.trap_freq_x_khz = s.trap_freq_y_khz = p.trap_freq_xy_khz;
    s.trap_freq_z_khz = p.trap_freq_z_khz;
    s.nbar_x = s.nbar_y = nbar_from_temperature(temp_uk, p.trap_freq_xy_khz);
    s.nbar_z = nbar_from_temperature(temp_uk, p.trap_freq_z_khz);
    return s;
}

enum class CoolingStage { doppler, rsc };

/// Doppler stage thermalizes to the Doppler floor. The RSC stage multiplies
/// each nbar by the per-iteration decay factor, clamped at the configured
/// floor, so a full sequence lands on the floor exactly.
inline ThermalState apply_cooling(ThermalState s, CoolingStage stage, const ThermalParams& p) {
    switch (stage) {
        case CoolingStage::doppler: {
            const ThermalState floor = state_at_temperature(p.doppler_floor_uk, p);
            s.nbar_x = std::min(s.nbar_x, floor.nbar_x);
            s.nbar_y = std::min(s.nbar_y, floor.nbar_y);
            s.nbar_z = std::min(s.nbar_z, floor.nbar_z);
            break;
        }
        case CoolingStage::rsc: {
            const double decay = std::pow(p.rsc_decay_per_iteration, p.rsc_iterations);
            s.nbar_x = std::max(p.rsc_floor_nbar_xy, s.nbar_x * decay);
            s.nbar_y = std::max(p.rsc_floor_nbar_xy, s.nbar_y * decay);
            s.nbar_z = std::max(p.rsc_floor_nbar_z, s.nbar_z * decay);
            break;
        }
    }
    return s;
}

/// Parametric heating: nbar grows exponentially with the configured time
/// constant. The measured constant is in-plane; the z axis uses the same
/// value (no independent measurement exists).
inline ThermalState apply_heating(ThermalState s, double dwell_ms, double tau_ms) {
    if (dwell_ms < 0.0) throw std::invalid_argument("apply_heating: dwell must be >= 0");
    const double g = std::exp(dwell_ms / tau_ms);
    s.nbar_x *= g;
    s.nbar_y *= g;
    s.nbar_z *= g;
    return s;
}

/// Red/blue sideband strength ratio for occupation nbar.
inline double sideband_asymmetry(double nbar) {
    if (nbar < 0.0) throw std::invalid_argument("sideband_asymmetry: nbar must be >= 0");
    return nbar / (nbar + 1.0);
}

inline double nbar_from_asymmetry(double ratio) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw std::invalid_argument("nbar_from_asymmetry: ratio must be in [0, 1)");
    return ratio / (1.0 - ratio);
}

/// Hottest-axis Boltzmann temperature; the recapture model keys off this.
inline double effective_temperature_uk(const ThermalState& s) {
    const double tx = temperature_from_nbar(s.nbar_x, s.trap_freq_x_khz);
    const double ty = temperature_from_nbar(s.nbar_y, s.trap_freq_y_khz);
    const double tz = temperature_from_nbar(s.nbar_z, s.trap_freq_z_khz);
    return std::max({tx, ty, tz});
}

}  // namespace atomsim::thermal
