// cavity.hpp -- deterministic optics calculator: cavity power buildup, trap
// depth per unit power for cavity-enhanced lattices and tweezer arrays, the
// lattice/tweezer power comparison, and lattice homogeneity maps.

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "atomsim/config.hpp"
#include "atomsim/units.hpp"

namespace atomsim::cavity {

/// finesse = free spectral range / linewidth.
inline double finesse_from_linewidth(double fsr_mhz, double linewidth_khz) {
    if (fsr_mhz <= 0.0 || linewidth_khz <= 0.0)
        throw std::invalid_argument("finesse_from_linewidth: inputs must be > 0");
    return fsr_mhz * 1e3 / linewidth_khz;
}

/// Photon lifetime 1/(2 pi linewidth), in ns.
inline double photon_lifetime_ns(double linewidth_khz) {
    if (linewidth_khz <= 0.0)
        throw std::invalid_argument("photon_lifetime_ns: linewidth must be > 0");
    return 1e9 / (2.0 * units::kPi * linewidth_khz * 1e3);
}

/// Power buildup factor: circulating / input power on resonance.
inline double buildup_factor(const CavitySpec& spec) {
    return 2.0 * spec.finesse * spec.impedance_match / units::kPi;
}

/// Lattice depth per input power, MHz/mW. Depth here is the barrier between
/// adjacent lattice sites at the mode center.
inline double lattice_depth_per_power(const CavitySpec& spec, double polarizability) {
    const double lambda = buildup_factor(spec);
    return 2.0 * polarizability * lambda * spec.interference_factor /
           (units::kPi * spec.waist_um * spec.waist_um);
}

/// Tweezer-array depth per total power, MHz/mW, for N tweezers sharing P.
inline double tweezer_depth_per_power(const OpticalParams& p) {
    return 2.0 * p.polarizability_mhz_per_mw_um2 /
           (units::kPi * p.tweezer_waist_um * p.tweezer_waist_um * p.tweezer_count);
}

/// Ratio of per-power depths: how much less power the lattice needs.
inline double power_advantage(double lattice_mhz_per_mw, double tweezer_mhz_per_mw) {
    if (lattice_mhz_per_mw <= 0.0 || tweezer_mhz_per_mw <= 0.0)
        throw std::invalid_argument("power_advantage: inputs must be > 0");
    return lattice_mhz_per_mw / tweezer_mhz_per_mw;
}

// ---------------------------------------------------------------------------
// Homogeneity maps
// ---------------------------------------------------------------------------

struct GridPoint {
    int row = 0;
    int col = 0;
    double x_um = 0.0;
    double y_um = 0.0;
};

struct HomogeneitySite {
    GridPoint at;
    double xy_rel = 1.0;  // relative depth, 1.0 at the array center
    double z_rel = 1.0;
};

struct HomogeneityMap {
    std::vector<HomogeneitySite> sites;
    int rows = 0;
    int cols = 0;
    std::vector<double> row_avg_xy, col_avg_xy;
    std::vector<double> row_avg_z, col_avg_z;
    double min_xy = 1.0, min_z = 1.0;
    bool low_depth_flagged = false;  // any site fell below half the center depth
};

/// Relative XY-lattice depth at (x, y): product of the field envelopes of the
/// two crossing standing-wave passes, normalized at the crossing center.
inline double xy_relative_depth(const LatticeGeometry& g, double x_um, double y_um) {
    const double w2 = g.xy_waist_um * g.xy_waist_um;
    return std::exp(-(x_um * x_um + y_um * y_um) / w2);
}

/// Relative Z-lattice depth at (x, y). The two traveling passes cross in the
/// x-z plane at z_crossing_angle from the array plane, so the transverse
/// offset of a point (x, y, 0) from each beam axis is (x sin(theta), y).
inline double z_relative_depth(const LatticeGeometry& g, double x_um, double y_um) {
    const double s = std::sin(g.z_crossing_angle_deg * units::kPi / 180.0);
    const double w2 = g.z_waist_um * g.z_waist_um;
    const double r2 = x_um * x_um * s * s + y_um * y_um;
    return std::exp(-2.0 * r2 / w2);
}

/// Build a square grid of evaluation points spanning +-halfwidth.
inline std::vector<GridPoint> make_square_grid(int rows, int cols, double spacing_um) {
    std::vector<GridPoint> pts;
    pts.reserve(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            GridPoint p;
            p.row = r;
            p.col = c;
            p.x_um = (c - 0.5 * (cols - 1)) * spacing_um;
            p.y_um = (r - 0.5 * (rows - 1)) * spacing_um;
            pts.push_back(p);
        }
    }
    return pts;
}

inline HomogeneityMap homogeneity_map(const LatticeGeometry& g,
                                      const std::vector<GridPoint>& points) {
    if (g.array_halfwidth_um >= std::min(g.xy_waist_um, g.z_waist_um))
        throw std::invalid_argument("homogeneity_map: array does not fit inside the mode waist");
    HomogeneityMap map;
    map.sites.reserve(points.size());
    for (const auto& p : points) {
        HomogeneitySite s;
        s.at = p;
        s.xy_rel = xy_relative_depth(g, p.x_um, p.y_um);
        s.z_rel = z_relative_depth(g, p.x_um, p.y_um);
        map.min_xy = std::min(map.min_xy, s.xy_rel);
        map.min_z = std::min(map.min_z, s.z_rel);
        map.rows = std::max(map.rows, p.row + 1);
        map.cols = std::max(map.cols, p.col + 1);
        map.sites.push_back(s);
    }
    map.low_depth_flagged = (map.min_xy < 0.5) || (map.min_z < 0.5);

    map.row_avg_xy.assign(map.rows, 0.0);
    map.row_avg_z.assign(map.rows, 0.0);
    map.col_avg_xy.assign(map.cols, 0.0);
    map.col_avg_z.assign(map.cols, 0.0);
    std::vector<int> row_n(map.rows, 0), col_n(map.cols, 0);
    for (const auto& s : map.sites) {
        map.row_avg_xy[s.at.row] += s.xy_rel;
        map.row_avg_z[s.at.row] += s.z_rel;
        map.col_avg_xy[s.at.col] += s.xy_rel;
        map.col_avg_z[s.at.col] += s.z_rel;
        ++row_n[s.at.row];
        ++col_n[s.at.col];
    }
    for (int r = 0; r < map.rows; ++r)
        if (row_n[r]) {
            map.row_avg_xy[r] /= row_n[r];
            map.row_avg_z[r] /= row_n[r];
        }
    for (int c = 0; c < map.cols; ++c)
        if (col_n[c]) {
            map.col_avg_xy[c] /= col_n[c];
            map.col_avg_z[c] /= col_n[c];
        }
    return map;
}

struct ShiftSite {
    GridPoint at;
    double shift_mhz = 0.0;
};

/// Differential light shift per site for a probe transition whose excited
/// state has `polarizability_ratio` times the ground-state polarizability.
/// shift = (ratio - 1) * local depth, expressed in MHz.
inline std::vector<ShiftSite> light_shift_map(const HomogeneityMap& map, bool use_xy,
                                              double peak_depth_uk,
                                              double polarizability_ratio) {
    if (polarizability_ratio <= 0.0)
        throw std::invalid_argument("light_shift_map: ratio must be > 0");
    std::vector<ShiftSite> out;
    out.reserve(map.sites.size());
    const double peak_mhz = units::mhz_from_uk(peak_depth_uk);
    for (const auto& s : map.sites) {
        ShiftSite sh;
        sh.at = s.at;
        const double rel = use_xy ? s.xy_rel : s.z_rel;
        sh.shift_mhz = (polarizability_ratio - 1.0) * peak_mhz * rel;
        out.push_back(sh);
    }
    return out;
}

}  // namespace atomsim::cavity
