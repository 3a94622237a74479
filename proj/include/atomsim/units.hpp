// units.hpp -- physical constants and unit conversions used across the library.
//
// Internal unit conventions:
//   lengths   µm        durations  ms (lifetimes in s where noted)
//   depths    µK or MHz trap/laser frequencies  kHz / MHz
//   powers    mW        polarizability           MHz per (mW/µm²)

#pragma once

#include <cmath>

namespace atomsim::units {

inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J/K

// Trap depth conversion: 1 MHz of light shift corresponds to h*1MHz/k_B kelvin.
inline constexpr double kMicroKelvinPerMHz = kPlanck * 1e6 / kBoltzmann * 1e6;

inline constexpr double uk_from_mhz(double mhz) { return mhz * kMicroKelvinPerMHz; }
inline constexpr double mhz_from_uk(double uk) { return uk / kMicroKelvinPerMHz; }

// h*f/k_B in µK for a trap frequency given in kHz.
inline constexpr double trap_quantum_uk(double freq_khz) {
    return kPlanck * 1e3 / kBoltzmann * 1e6 * freq_khz;
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace atomsim::units
