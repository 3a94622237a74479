// report.hpp -- rendering and file output: run records as JSON-lines and CSV,
// text summaries, the per-cycle loss budget, the optics comparison report,
// and homogeneity/alignment exports. Every file starts with a header line
// naming the config hash and seed, and the same inputs always produce the
// same bytes.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "atomsim/cavity.hpp"
#include "atomsim/config.hpp"
#include "atomsim/losses.hpp"
#include "atomsim/protocol.hpp"

namespace atomsim::report {

inline std::string fmt(double v, const char* spec = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

inline std::string hash_header(const SimConfig& cfg, uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash(cfg)),
                  static_cast<unsigned long long>(seed));
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

inline std::string run_record_jsonl(const protocol::RunRecord& run) {
    std::ostringstream os;
    os << hash_header(run.config, run.seed);
    for (const auto& c : run.cycles) {
        json j;
        j["iteration"] = c.iteration;
        j["atoms_start"] = c.atoms_start;
        j["atoms_end"] = c.atoms_end;
        j["pre_rearr_atoms"] = c.pre_rearr_atoms;
        j["pre_rearr_fill"] = c.pre_rearr_fill;
        if (c.post_rearr_atoms) {
            j["post_rearr_atoms"] = *c.post_rearr_atoms;
            j["post_rearr_fill"] = *c.post_rearr_fill;
        } else {
            j["post_rearr_atoms"] = nullptr;
            j["post_rearr_fill"] = nullptr;
        }
        j["true_post_rearr_atoms"] = c.true_post_rearr_atoms;
        j["true_post_rearr_fill"] = c.true_post_rearr_fill;
        j["reservoir_atoms"] = c.reservoir_atoms;
        j["transfers_in"] = c.transfers_in;
        j["moves_planned"] = c.moves_planned;
        j["losses"] = {{"vacuum", c.loss_vacuum},
                       {"imaging", c.loss_imaging},
                       {"handoff", c.loss_handoff},
                       {"disturbance", c.loss_disturbance},
                       {"collision", c.loss_collision}};
        j["reservoir_events"] = {{"pickup_failures", c.reservoir_pickup_failures},
                                 {"phantom_moves", c.reservoir_phantom_moves},
                                 {"losses", c.reservoir_losses}};
        j["rearrange_duration_ms"] = c.rearrange_duration_ms;
        j["cycle_duration_ms"] = c.cycle_duration_ms;
        j["nbar_xy"] = c.nbar_xy;
        j["nbar_z"] = c.nbar_z;
        os << j.dump() << "\n";
    }
    return os.str();
}

/// Plot-ready projection: iteration, fills, and the classified atom number.
inline std::string run_record_csv(const protocol::RunRecord& run) {
    std::ostringstream os;
    os << hash_header(run.config, run.seed);
    os << "iteration,pre_fill,post_fill,atoms\n";
    for (const auto& c : run.cycles) {
        os << c.iteration << "," << fmt(c.pre_rearr_fill, "%.6f") << ",";
        if (c.post_rearr_fill) os << fmt(*c.post_rearr_fill, "%.6f");
        os << "," << c.pre_rearr_atoms << "\n";
    }
    return os.str();
}

inline std::string render_summary(const protocol::RunRecord& run) {
    const auto& s = run.summary;
    std::ostringstream os;
    os << hash_header(run.config, run.seed);
    os << "mode: " << (run.mode == protocol::RunMode::loading ? "loading" : "maintenance")
       << ", cycles: " << run.cycles.size()
       << ", diagnostics: " << (run.diagnostics ? "on" : "off") << "\n";
    os << "initial slope: " << fmt(s.initial_slope_atoms_per_cycle, "%.1f")
       << " atoms/cycle (least squares over the first " << s.linear_regime_cycles
       << " cycles)\n";
    if (s.cycles_to_fill_99 > 0) {
        os << "cycles to 99% fill (ground truth, post-rearrangement): " << s.cycles_to_fill_99
           << "\n";
    } else {
        os << "cycles to 99% fill (ground truth, post-rearrangement): not reached\n";
    }
    os << "steady-state pre-rearrangement fill: " << fmt(s.steady_pre_fill_mean, "%.4f")
       << " +- " << fmt(s.steady_pre_fill_se, "%.4f") << " (from cycle "
       << s.steady_window_start + 1 << ")\n";
    if (run.diagnostics) {
        os << "steady-state post-rearrangement fill (diagnostic): "
           << fmt(s.steady_post_fill_mean, "%.4f") << " +- "
           << fmt(s.steady_post_fill_se, "%.4f") << "\n";
    }
    os << "steady-state post-rearrangement fill (ground truth): "
       << fmt(s.steady_true_post_fill_mean, "%.4f") << " +- "
       << fmt(s.steady_true_post_fill_se, "%.4f") << "\n";
    os << "dominant loss mechanism: " << s.dominant_loss << "\n";
    os << "losses by mechanism:";
    for (const auto& [name, count] : s.losses_by_mechanism) os << " " << name << "=" << count;
    os << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Loss budget
// ---------------------------------------------------------------------------

struct BudgetRow {
    std::string mechanism;
    double per_cycle = 0.0;
    std::string note;
};

struct BudgetTable {
    std::vector<BudgetRow> rows;
    std::string dominant;
    double cycle_duration_ms = 0.0;
};

/// Per-mechanism per-cycle loss probabilities for an atom holding a target
/// site through a settled cycle, with the dominant mechanism flagged.
inline BudgetTable budget_report(const SimConfig& cfg, bool diagnostic_images = false) {
    const auto ss = protocol::steady_state_analytic(cfg, diagnostic_images);
    BudgetTable t;
    t.cycle_duration_ms = ss.cycle_duration_ms;
    const int images = diagnostic_images ? 2 : 1;

    t.rows.push_back({"vacuum", ss.loss_vacuum,
                      "background gas over " + fmt(ss.cycle_duration_ms, "%.0f") + " ms"});
    {
        const double vac_part = ss.loss_imaging * cfg.imaging.vacuum_fraction_of_loss;
        const double raman_part = ss.loss_imaging - vac_part;
        t.rows.push_back({"imaging", ss.loss_imaging,
                          std::to_string(images) + " image(s); " + fmt(vac_part, "%.2g") +
                              " vacuum + " + fmt(raman_part, "%.2g") + " Raman scattering"});
    }
    t.rows.push_back({"handoff_pair_459", ss.loss_handoff_459,
                      std::to_string(images) + " pair(s) per cycle, 459 nm zone"});
    t.rows.push_back({"handoff_pair_423", ss.loss_handoff_423,
                      std::to_string(images) + " pair(s) per cycle, 423 nm zone"});
    t.rows.push_back({"rearrangement_disturbance", ss.loss_disturbance,
                      "per close pass within " + fmt(cfg.losses.proximity_distance_um, "%.2g") +
                          " um"});
    if (cfg.imaging.mode == ImagingMode::spin_selective) {
        t.rows.push_back({"spin_flips",
                          1.0 - std::pow(1.0 - cfg.imaging.spin_flip_probability, images),
                          "apparent loss in spin-selective imaging"});
    }
    double best = -1.0;
    for (const auto& r : t.rows) {
        if (r.per_cycle > best) {
            best = r.per_cycle;
            t.dominant = r.mechanism;
        }
    }
    return t;
}

inline std::string budget_csv(const SimConfig& cfg, const BudgetTable& t) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "mechanism,per_cycle_loss,dominant,note\n";
    for (const auto& r : t.rows) {
        os << r.mechanism << "," << fmt(r.per_cycle, "%.6g") << ","
           << (r.mechanism == t.dominant ? "yes" : "no") << ",\"" << r.note << "\"\n";
    }
    return os.str();
}

inline std::string budget_text(const SimConfig& cfg, const BudgetTable& t) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "per-cycle loss budget (cycle duration " << fmt(t.cycle_duration_ms, "%.0f")
       << " ms)\n";
    for (const auto& r : t.rows) {
        os << "  " << r.mechanism << ": " << fmt(r.per_cycle, "%.3g")
           << (r.mechanism == t.dominant ? "  << dominant" : "") << "  (" << r.note << ")\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Optics report
// ---------------------------------------------------------------------------

struct OpticsReport {
    double finesse_xy = 0.0, finesse_z = 0.0;
    double lifetime_xy_ns = 0.0, lifetime_z_ns = 0.0;
    double buildup_xy = 0.0, buildup_z = 0.0;
    double depth_xy_mhz_per_mw = 0.0, depth_z_mhz_per_mw = 0.0;
    double depth_tweezer_mhz_per_mw = 0.0;
    double advantage_xy = 0.0, advantage_z = 0.0;
    double advantage_xy_rounded = 0.0, advantage_z_rounded = 0.0;
};

inline OpticsReport optics_report(const OpticsConfig& o) {
    OpticsReport r;
    r.finesse_xy = cavity::finesse_from_linewidth(o.xy_cavity.fsr_mhz, o.xy_cavity.linewidth_khz);
    r.finesse_z = cavity::finesse_from_linewidth(o.z_cavity.fsr_mhz, o.z_cavity.linewidth_khz);
    r.lifetime_xy_ns = cavity::photon_lifetime_ns(o.xy_cavity.linewidth_khz);
    r.lifetime_z_ns = cavity::photon_lifetime_ns(o.z_cavity.linewidth_khz);
    r.buildup_xy = cavity::buildup_factor(o.xy_cavity);
    r.buildup_z = cavity::buildup_factor(o.z_cavity);
    const double alpha = o.tweezer.polarizability_mhz_per_mw_um2;
    r.depth_xy_mhz_per_mw = cavity::lattice_depth_per_power(o.xy_cavity, alpha);
    r.depth_z_mhz_per_mw = cavity::lattice_depth_per_power(o.z_cavity, alpha);
    r.depth_tweezer_mhz_per_mw = cavity::tweezer_depth_per_power(o.tweezer);
    r.advantage_xy = cavity::power_advantage(r.depth_xy_mhz_per_mw, r.depth_tweezer_mhz_per_mw);
    r.advantage_z = cavity::power_advantage(r.depth_z_mhz_per_mw, r.depth_tweezer_mhz_per_mw);
    // quotients of the two-significant-figure tabulated values, for comparison
    auto round2 = [](double v) {
        const double scale = std::pow(10.0, std::floor(std::log10(v)) - 1.0);
        return std::round(v / scale) * scale;
    };
    r.advantage_xy_rounded = round2(r.depth_xy_mhz_per_mw) / round2(r.depth_tweezer_mhz_per_mw);
    r.advantage_z_rounded = round2(r.depth_z_mhz_per_mw) / round2(r.depth_tweezer_mhz_per_mw);
    return r;
}

inline std::string optics_text(const SimConfig& cfg, const OpticsReport& r) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    auto row = [&](const char* name, double xy, double z, const char* unit) {
        os << "  " << name << ": XY " << fmt(xy) << " " << unit << ", Z " << fmt(z) << " "
           << unit << "\n";
    };
    os << "cavity-enhanced lattice vs tweezer array\n";
    row("finesse (fsr/linewidth)", r.finesse_xy, r.finesse_z, "");
    row("photon lifetime", r.lifetime_xy_ns, r.lifetime_z_ns, "ns");
    row("power buildup", r.buildup_xy, r.buildup_z, "");
    row("U_l/P", r.depth_xy_mhz_per_mw, r.depth_z_mhz_per_mw, "MHz/mW");
    row("U_l/P", units::uk_from_mhz(r.depth_xy_mhz_per_mw),
        units::uk_from_mhz(r.depth_z_mhz_per_mw), "uK/mW");
    os << "  U_t/P (" << cfg.optics.tweezer.tweezer_count
       << " tweezers): " << fmt(r.depth_tweezer_mhz_per_mw) << " MHz/mW ("
       << fmt(units::uk_from_mhz(r.depth_tweezer_mhz_per_mw)) << " uK/mW)\n";
    os << "  power advantage: XY " << fmt(r.advantage_xy, "%.1f") << "x, Z "
       << fmt(r.advantage_z, "%.1f") << "x\n";
    os << "  note: quotients of the values rounded to two significant figures are XY "
       << fmt(r.advantage_xy_rounded, "%.1f") << "x, Z " << fmt(r.advantage_z_rounded, "%.1f")
       << "x; the exact and rounded quotients differ by several percent\n";
    return os.str();
}

inline std::string optics_csv(const SimConfig& cfg, const OpticsReport& r) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "quantity,xy,z,tweezer\n";
    os << "finesse," << fmt(r.finesse_xy) << "," << fmt(r.finesse_z) << ",\n";
    os << "photon_lifetime_ns," << fmt(r.lifetime_xy_ns) << "," << fmt(r.lifetime_z_ns) << ",\n";
    os << "buildup," << fmt(r.buildup_xy) << "," << fmt(r.buildup_z) << ",\n";
    os << "depth_per_power_mhz_per_mw," << fmt(r.depth_xy_mhz_per_mw) << ","
       << fmt(r.depth_z_mhz_per_mw) << "," << fmt(r.depth_tweezer_mhz_per_mw) << "\n";
    os << "power_advantage," << fmt(r.advantage_xy, "%.2f") << "," << fmt(r.advantage_z, "%.2f")
       << ",1\n";
    return os.str();
}

inline std::string homogeneity_csv(const SimConfig& cfg, const cavity::HomogeneityMap& map,
                                   bool use_xy) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "row,col,x_um,y_um,value\n";
    for (const auto& s : map.sites) {
        os << s.at.row << "," << s.at.col << "," << fmt(s.at.x_um, "%.4f") << ","
           << fmt(s.at.y_um, "%.4f") << "," << fmt(use_xy ? s.xy_rel : s.z_rel, "%.6f") << "\n";
    }
    return os.str();
}

inline std::string light_shift_csv(const SimConfig& cfg,
                                   const std::vector<cavity::ShiftSite>& shifts) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "row,col,x_um,y_um,value\n";
    for (const auto& s : shifts) {
        os << s.at.row << "," << s.at.col << "," << fmt(s.at.x_um, "%.4f") << ","
           << fmt(s.at.y_um, "%.4f") << "," << fmt(s.shift_mhz, "%.6f") << "\n";
    }
    return os.str();
}

inline std::string alignment_csv(const SimConfig& cfg, const losses::AlignmentScan& scan) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    os << "offset_um,survival\n";
    for (size_t i = 0; i < scan.offsets_um.size(); ++i)
        os << fmt(scan.offsets_um[i], "%.5f") << "," << fmt(scan.survival[i], "%.6f") << "\n";
    return os.str();
}

inline std::string alignment_text(const SimConfig& cfg, const losses::AlignmentScan& scan) {
    std::ostringstream os;
    os << hash_header(cfg, cfg.rng_seed);
    if (scan.fit_ok) {
        os << "fitted optimum offset: " << fmt(scan.fitted_optimum_um, "%.5f") << " um\n";
        os << "modulation amplitude (per-pair loss): " << fmt(scan.modulation_amplitude, "%.4g")
           << "\n";
    } else {
        os << "fit failed: " << scan.failure << "\n";
    }
    return os.str();
}

}  // namespace atomsim::report
