// config.hpp -- scenario configuration: parameter structs with baseline
// defaults, strict JSON ingestion (unknown keys rejected, omitted keys filled
// from defaults), validation with key-path diagnostics, and serialization.
//
// A SimConfig is immutable after validation and safe to share across
// concurrently running simulations.

#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomsim/stats.hpp"
#include "atomsim/units.hpp"

namespace atomsim {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Parameter structs. Defaults encode the baseline scenario; every value is
// either a measured quantity from the modeled apparatus or a calibrated
// default documented in docs/scenario_schema.md.
// ---------------------------------------------------------------------------

struct PhaseTimings {
    double mot_load_ms = 80.0;        // overlapped with the science sequence
    double transport_ms = 100.0;
    double tweezer_ramp_ms = 1.0;     // one intensity ramp; a handoff uses two
    double galvo_translate_ms = 10.0;
    double doppler_ms = 2.0;
    double rsc_total_ms = 8.0;
    double image_ms = 7.0;
    double rearrange_fixed_overhead_ms = 75.0;  // move computation + setup

    double handoff_ms() const { return 2.0 * tweezer_ramp_ms; }
};

enum class ImagingMode { occupancy, spin_selective };

struct ImagingModel {
    double signal_mean_counts = 50.0;
    double background_mean_counts = 5.0;
    // widths calibrated so the balanced threshold leaves ~5e-4 in each tail
    double signal_width_counts = 10.3905;
    double background_width_counts = 3.2857;
    double duration_ms = 7.0;             // mirrors phase_timings.image_ms
    double threshold_counts = 15.8117;    // balanced between the two tails
    double loss_per_image = 2e-3;
    double vacuum_fraction_of_loss = 0.3; // remainder attributed to Raman scattering
    double spin_flip_probability = 4e-3;  // spin_selective mode only
    ImagingMode mode = ImagingMode::occupancy;
};

struct ThermalParams {
    double doppler_floor_uk = 10.0;
    double rsc_floor_nbar_xy = 0.08;
    double rsc_floor_nbar_z = 0.12;
    int rsc_iterations = 20;
    double rsc_decay_per_iteration = 0.6;  // nbar multiplier per cooling iteration
    double heating_tau_ms = 190.0;
    double post_image_temperature_uk = 20.0;
    double trap_freq_xy_khz = 160.0;
    double trap_freq_z_khz = 50.0;
};

struct LossParams {
    double vacuum_lifetime_s = 30.0;
    double handoff_loss_459 = 0.0006;   // per handoff pair, plateau
    double handoff_loss_423 = 0.0015;
    double handoff_depth_threshold = 0.75;
    double misaligned_handoff_loss_max = 0.02;
    double proximity_distance_um = 1.6;
    double rearr_depth_nominal_uk = 150.0;
    double target_depth_nominal_uk = 50.0;
    double rearr_depth_fraction = 1.0;   // rearrangement tweezer depth / nominal
    double target_depth_fraction = 1.0;  // target tweezer depth / nominal
    double rearr_pickup_max = 0.995;     // pickup success asymptote
    double rearr_pickup_scale = 0.35;    // depth scale of the pickup turn-on
    double rearr_disturbance_coeff = 0.03;  // per-pass disturbance above nominal
    double alignment_offset_x_um = 0.0;
    double alignment_offset_y_um = 0.0;
    double lattice_period_um = 0.3919;   // tweezer-vs-lattice registration period
};

enum class PlannerPolicy { optimal, greedy };

struct PlannerParams {
    PlannerPolicy policy = PlannerPolicy::optimal;
    double speed_um_per_ms = 75.0;
    double pickup_ramp_ms = 1.0;
    double release_ramp_ms = 1.0;
    double compute_overhead_ms = 75.0;   // mirrors phase_timings.rearrange_fixed_overhead_ms
};

struct CavitySpec {
    double finesse = 0.0;
    double fsr_mhz = 0.0;
    double linewidth_khz = 0.0;
    double waist_um = 0.0;
    double interference_factor = 4.0;   // 4: standing wave / self-crossing ring; 16: self-crossing standing wave
    double input_transmission = 0.0;
    double total_transmission = 0.0;    // round trip, all mirrors
    double total_loss = 0.0;            // round trip, additional loss
    double impedance_match = 0.0;       // = input_transmission / (total_loss + total_transmission)
};

inline CavitySpec xy_cavity_defaults() {
    // round-trip budget 2*pi/F split so T_in/(T_tot+L_tot) = 0.96
    CavitySpec c;
    c.finesse = 2900.0;
    c.fsr_mhz = 890.38;
    c.linewidth_khz = 307.0;
    c.waist_um = 268.0;
    c.interference_factor = 16.0;
    c.input_transmission = 2.0799510e-3;
    c.total_loss = 4.30e-5;
    c.total_transmission = 2.1236156e-3;
    c.impedance_match = 0.96;
    return c;
}

inline CavitySpec z_cavity_defaults() {
    CavitySpec c;
    c.finesse = 3000.0;
    c.fsr_mhz = 1345.13;
    c.linewidth_khz = 448.0;
    c.waist_um = 183.0;
    c.interference_factor = 4.0;
    c.input_transmission = 2.0106193e-3;
    c.total_loss = 4.20e-5;
    c.total_transmission = 2.0523951e-3;
    c.impedance_match = 0.96;
    return c;
}

struct OpticalParams {
    double polarizability_mhz_per_mw_um2 = 0.79;
    double tweezer_waist_um = 0.7;
    int tweezer_count = 1225;
    double laser_power_mw = 1.0;
};

struct LatticeGeometry {
    double xy_waist_um = 268.0;
    double z_waist_um = 183.0;
    double z_crossing_angle_deg = 15.0;  // angle of each Z-cavity pass from the array plane
    double array_halfwidth_um = 57.5;
    double site_spacing_um = 115.0 / 34.0;
};

struct OpticsConfig {
    CavitySpec xy_cavity = xy_cavity_defaults();
    CavitySpec z_cavity = z_cavity_defaults();
    OpticalParams tweezer;
    LatticeGeometry geometry;
    double excited_polarizability_ratio = 1.4;  // probe transition vs ground state
    double xy_peak_depth_uk = 330.0;
    double z_peak_depth_uk = 260.0;
};

struct SimConfig {
    int reservoir_sites = 105;
    int target_rows = 35;
    int target_cols = 35;
    double target_spacing_um = 3.3;
    double reservoir_offset_um = 3.3;   // gap between reservoir and target edge columns
    double lac_fill_probability = 0.5;
    double mot_load_rate_per_s = 1.5e6;
    double mot_saturation_time_ms = 80.0;
    double transport_survival = 0.7;
    uint64_t rng_seed = 1;

    PhaseTimings phase_timings;
    ImagingModel imaging;
    ThermalParams thermal;
    LossParams losses;
    PlannerParams planner;
    OpticsConfig optics;

    int target_sites() const { return target_rows * target_cols; }
    double transport_duration_ms() const { return phase_timings.transport_ms; }
    double vacuum_lifetime_s() const { return losses.vacuum_lifetime_s; }
};

/// The baseline scenario with every default filled in.
inline SimConfig default_config() { return SimConfig{}; }

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string key;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const {
        std::ostringstream os;
        for (const auto& v : violations) os << v.key << ": " << v.message << "\n";
        return os.str();
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public ConfigError {
public:
    explicit ValidationError(const ValidationReport& report)
        : ConfigError("invalid configuration:\n" + report.to_string()), report_(report) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

inline ValidationReport validate(const SimConfig& c) {
    ValidationReport rep;
    auto req = [&rep](bool cond, const std::string& key, const std::string& msg) {
        if (!cond) rep.violations.push_back({key, msg});
    };
    auto prob = [&](double v, const std::string& key) {
        req(v >= 0.0 && v <= 1.0, key, "must be a probability in [0, 1]");
    };
    auto pos = [&](double v, const std::string& key) { req(v > 0.0, key, "must be > 0"); };
    auto nonneg = [&](double v, const std::string& key) { req(v >= 0.0, key, "must be >= 0"); };

    req(c.reservoir_sites >= 1, "reservoir_sites", "must be >= 1");
    req(c.target_rows >= 1, "target_rows", "must be >= 1");
    req(c.target_cols >= 1, "target_cols", "must be >= 1");
    pos(c.target_spacing_um, "target_spacing_um");
    nonneg(c.reservoir_offset_um, "reservoir_offset_um");
    prob(c.lac_fill_probability, "lac_fill_probability");
    pos(c.mot_load_rate_per_s, "mot_load_rate_per_s");
    pos(c.mot_saturation_time_ms, "mot_saturation_time_ms");
    prob(c.transport_survival, "transport_survival");

    const auto& t = c.phase_timings;
    nonneg(t.mot_load_ms, "phase_timings.mot_load_ms");
    nonneg(t.transport_ms, "phase_timings.transport_ms");
    nonneg(t.tweezer_ramp_ms, "phase_timings.tweezer_ramp_ms");
    nonneg(t.galvo_translate_ms, "phase_timings.galvo_translate_ms");
    nonneg(t.doppler_ms, "phase_timings.doppler_ms");
    nonneg(t.rsc_total_ms, "phase_timings.rsc_total_ms");
    nonneg(t.image_ms, "phase_timings.image_ms");
    nonneg(t.rearrange_fixed_overhead_ms, "phase_timings.rearrange_fixed_overhead_ms");

    const auto& im = c.imaging;
    req(im.signal_mean_counts > im.background_mean_counts, "imaging.signal_mean_counts",
        "signal mean must exceed background mean");
    pos(im.signal_width_counts, "imaging.signal_width_counts");
    pos(im.background_width_counts, "imaging.background_width_counts");
    prob(im.loss_per_image, "imaging.loss_per_image");
    prob(im.vacuum_fraction_of_loss, "imaging.vacuum_fraction_of_loss");
    prob(im.spin_flip_probability, "imaging.spin_flip_probability");

    const auto& th = c.thermal;
    pos(th.doppler_floor_uk, "thermal.doppler_floor_uk");
    req(th.rsc_floor_nbar_xy >= 0.0 && th.rsc_floor_nbar_xy < 1.0, "thermal.rsc_floor_nbar_xy",
        "must be in [0, 1)");
    req(th.rsc_floor_nbar_z >= 0.0 && th.rsc_floor_nbar_z < 1.0, "thermal.rsc_floor_nbar_z",
        "must be in [0, 1)");
    req(th.rsc_iterations >= 1, "thermal.rsc_iterations", "must be >= 1");
    req(th.rsc_decay_per_iteration > 0.0 && th.rsc_decay_per_iteration < 1.0,
        "thermal.rsc_decay_per_iteration", "must be in (0, 1)");
    pos(th.heating_tau_ms, "thermal.heating_tau_ms");
    pos(th.post_image_temperature_uk, "thermal.post_image_temperature_uk");
    pos(th.trap_freq_xy_khz, "thermal.trap_freq_xy_khz");
    pos(th.trap_freq_z_khz, "thermal.trap_freq_z_khz");

    const auto& lo = c.losses;
    pos(lo.vacuum_lifetime_s, "losses.vacuum_lifetime_s");
    prob(lo.handoff_loss_459, "losses.handoff_loss_459");
    prob(lo.handoff_loss_423, "losses.handoff_loss_423");
    req(lo.handoff_depth_threshold > 0.0 && lo.handoff_depth_threshold <= 1.0,
        "losses.handoff_depth_threshold", "must be in (0, 1]");
    prob(lo.misaligned_handoff_loss_max, "losses.misaligned_handoff_loss_max");
    nonneg(lo.proximity_distance_um, "losses.proximity_distance_um");
    pos(lo.rearr_depth_nominal_uk, "losses.rearr_depth_nominal_uk");
    pos(lo.target_depth_nominal_uk, "losses.target_depth_nominal_uk");
    nonneg(lo.rearr_depth_fraction, "losses.rearr_depth_fraction");
    nonneg(lo.target_depth_fraction, "losses.target_depth_fraction");
    prob(lo.rearr_pickup_max, "losses.rearr_pickup_max");
    pos(lo.rearr_pickup_scale, "losses.rearr_pickup_scale");
    nonneg(lo.rearr_disturbance_coeff, "losses.rearr_disturbance_coeff");
    pos(lo.lattice_period_um, "losses.lattice_period_um");

    const auto& pl = c.planner;
    pos(pl.speed_um_per_ms, "planner.speed_um_per_ms");
    nonneg(pl.pickup_ramp_ms, "planner.pickup_ramp_ms");
    nonneg(pl.release_ramp_ms, "planner.release_ramp_ms");
    nonneg(pl.compute_overhead_ms, "planner.compute_overhead_ms");

    auto check_cavity = [&](const CavitySpec& cav, const std::string& key) {
        pos(cav.finesse, key + ".finesse");
        pos(cav.fsr_mhz, key + ".fsr_mhz");
        pos(cav.linewidth_khz, key + ".linewidth_khz");
        pos(cav.waist_um, key + ".waist_um");
        req(cav.interference_factor == 4.0 || cav.interference_factor == 16.0,
            key + ".interference_factor", "must be 4 or 16");
        pos(cav.input_transmission, key + ".input_transmission");
        pos(cav.total_transmission, key + ".total_transmission");
        nonneg(cav.total_loss, key + ".total_loss");
        const double denom = cav.total_loss + cav.total_transmission;
        if (denom > 0.0 && cav.finesse > 0.0 && cav.linewidth_khz > 0.0) {
            const double eps = cav.input_transmission / denom;
            req(std::fabs(eps - cav.impedance_match) <= 1e-3 * std::max(1.0, cav.impedance_match),
                key + ".impedance_match",
                "inconsistent with input_transmission / (total_loss + total_transmission)");
            req(cav.impedance_match > 0.0 && cav.impedance_match <= 1.0, key + ".impedance_match",
                "must be in (0, 1]");
            const double f_spec = cav.fsr_mhz * 1e3 / cav.linewidth_khz;
            req(std::fabs(f_spec - cav.finesse) <= 0.02 * cav.finesse, key + ".finesse",
                "finesse disagrees with fsr/linewidth by more than 2%");
        }
    };
    check_cavity(c.optics.xy_cavity, "optics.xy_cavity");
    check_cavity(c.optics.z_cavity, "optics.z_cavity");

    const auto& tw = c.optics.tweezer;
    pos(tw.polarizability_mhz_per_mw_um2, "optics.tweezer.polarizability_mhz_per_mw_um2");
    pos(tw.tweezer_waist_um, "optics.tweezer.tweezer_waist_um");
    req(tw.tweezer_count >= 1, "optics.tweezer.tweezer_count", "must be >= 1");
    pos(tw.laser_power_mw, "optics.tweezer.laser_power_mw");

    const auto& g = c.optics.geometry;
    pos(g.xy_waist_um, "optics.geometry.xy_waist_um");
    pos(g.z_waist_um, "optics.geometry.z_waist_um");
    req(g.z_crossing_angle_deg > 0.0 && g.z_crossing_angle_deg < 90.0,
        "optics.geometry.z_crossing_angle_deg", "must be in (0, 90)");
    pos(g.array_halfwidth_um, "optics.geometry.array_halfwidth_um");
    pos(g.site_spacing_um, "optics.geometry.site_spacing_um");
    pos(c.optics.excited_polarizability_ratio, "optics.excited_polarizability_ratio");
    pos(c.optics.xy_peak_depth_uk, "optics.xy_peak_depth_uk");
    pos(c.optics.z_peak_depth_uk, "optics.z_peak_depth_uk");

    return rep;
}

// ---------------------------------------------------------------------------
// JSON ingestion / serialization
// ---------------------------------------------------------------------------

namespace detail {

/// Strict reader: every key consumed must be known, every known key optional.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.push_back(key);
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + key + ": wrong type");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json* child(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.push_back(key);
        return &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
                throw ConfigError(path_ + it.key() + ": unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline void read_cavity(const json& j, const std::string& path, CavitySpec& c) {
    Reader r(j, path);
    r.get("finesse", c.finesse);
    r.get("fsr_mhz", c.fsr_mhz);
    r.get("linewidth_khz", c.linewidth_khz);
    r.get("waist_um", c.waist_um);
    r.get("interference_factor", c.interference_factor);
    r.get("input_transmission", c.input_transmission);
    r.get("total_transmission", c.total_transmission);
    r.get("total_loss", c.total_loss);
    r.get("impedance_match", c.impedance_match);
    r.finish();
}

}  // namespace detail

/// Parse a scenario JSON document. Omitted keys keep their defaults; unknown
/// keys and out-of-range values raise ConfigError / ValidationError.
inline SimConfig load_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    SimConfig c;
    detail::Reader r(j, "");
    r.get("reservoir_sites", c.reservoir_sites);
    r.get("target_rows", c.target_rows);
    r.get("target_cols", c.target_cols);
    r.get("target_spacing_um", c.target_spacing_um);
    r.get("reservoir_offset_um", c.reservoir_offset_um);
    r.get("lac_fill_probability", c.lac_fill_probability);
    r.get("mot_load_rate_per_s", c.mot_load_rate_per_s);
    r.get("mot_saturation_time_ms", c.mot_saturation_time_ms);
    r.get("transport_survival", c.transport_survival);
    r.get("rng_seed", c.rng_seed);

    if (const json* pj = r.child("phase_timings")) {
        detail::Reader pr(*pj, "phase_timings.");
        auto& t = c.phase_timings;
        pr.get("mot_load_ms", t.mot_load_ms);
        pr.get("transport_ms", t.transport_ms);
        pr.get("tweezer_ramp_ms", t.tweezer_ramp_ms);
        pr.get("galvo_translate_ms", t.galvo_translate_ms);
        pr.get("doppler_ms", t.doppler_ms);
        pr.get("rsc_total_ms", t.rsc_total_ms);
        pr.get("image_ms", t.image_ms);
        pr.get("rearrange_fixed_overhead_ms", t.rearrange_fixed_overhead_ms);
        pr.finish();
    }

    if (const json* ij = r.child("imaging")) {
        detail::Reader ir(*ij, "imaging.");
        auto& im = c.imaging;
        ir.get("signal_mean_counts", im.signal_mean_counts);
        ir.get("background_mean_counts", im.background_mean_counts);
        ir.get("signal_width_counts", im.signal_width_counts);
        ir.get("background_width_counts", im.background_width_counts);
        ir.get("threshold_counts", im.threshold_counts);
        ir.get("loss_per_image", im.loss_per_image);
        ir.get("vacuum_fraction_of_loss", im.vacuum_fraction_of_loss);
        ir.get("spin_flip_probability", im.spin_flip_probability);
        std::string mode = "occupancy";
        if (im.mode == ImagingMode::spin_selective) mode = "spin_selective";
        ir.get("mode", mode);
        if (mode == "occupancy") {
            im.mode = ImagingMode::occupancy;
        } else if (mode == "spin_selective") {
            im.mode = ImagingMode::spin_selective;
        } else {
            throw ConfigError("imaging.mode: must be \"occupancy\" or \"spin_selective\"");
        }
        ir.finish();
    }

    if (const json* tj = r.child("thermal")) {
        detail::Reader tr(*tj, "thermal.");
        auto& th = c.thermal;
        tr.get("doppler_floor_uk", th.doppler_floor_uk);
        tr.get("rsc_floor_nbar_xy", th.rsc_floor_nbar_xy);
        tr.get("rsc_floor_nbar_z", th.rsc_floor_nbar_z);
        tr.get("rsc_iterations", th.rsc_iterations);
        tr.get("rsc_decay_per_iteration", th.rsc_decay_per_iteration);
        tr.get("heating_tau_ms", th.heating_tau_ms);
        tr.get("post_image_temperature_uk", th.post_image_temperature_uk);
        tr.get("trap_freq_xy_khz", th.trap_freq_xy_khz);
        tr.get("trap_freq_z_khz", th.trap_freq_z_khz);
        tr.finish();
    }

    if (const json* lj = r.child("losses")) {
        detail::Reader lr(*lj, "losses.");
        auto& lo = c.losses;
        lr.get("vacuum_lifetime_s", lo.vacuum_lifetime_s);
        lr.get("handoff_loss_459", lo.handoff_loss_459);
        lr.get("handoff_loss_423", lo.handoff_loss_423);
        lr.get("handoff_depth_threshold", lo.handoff_depth_threshold);
        lr.get("misaligned_handoff_loss_max", lo.misaligned_handoff_loss_max);
        lr.get("proximity_distance_um", lo.proximity_distance_um);
        lr.get("rearr_depth_nominal_uk", lo.rearr_depth_nominal_uk);
        lr.get("target_depth_nominal_uk", lo.target_depth_nominal_uk);
        lr.get("rearr_depth_fraction", lo.rearr_depth_fraction);
        lr.get("target_depth_fraction", lo.target_depth_fraction);
        lr.get("rearr_pickup_max", lo.rearr_pickup_max);
        lr.get("rearr_pickup_scale", lo.rearr_pickup_scale);
        lr.get("rearr_disturbance_coeff", lo.rearr_disturbance_coeff);
        lr.get("alignment_offset_x_um", lo.alignment_offset_x_um);
        lr.get("alignment_offset_y_um", lo.alignment_offset_y_um);
        lr.get("lattice_period_um", lo.lattice_period_um);
        lr.finish();
    }

    if (const json* pj = r.child("planner")) {
        detail::Reader pr(*pj, "planner.");
        auto& pl = c.planner;
        std::string policy = pl.policy == PlannerPolicy::greedy ? "greedy" : "optimal";
        pr.get("policy", policy);
        if (policy == "optimal") {
            pl.policy = PlannerPolicy::optimal;
        } else if (policy == "greedy") {
            pl.policy = PlannerPolicy::greedy;
        } else {
            throw ConfigError("planner.policy: must be \"optimal\" or \"greedy\"");
        }
        pr.get("speed_um_per_ms", pl.speed_um_per_ms);
        pr.get("pickup_ramp_ms", pl.pickup_ramp_ms);
        pr.get("release_ramp_ms", pl.release_ramp_ms);
        pr.get("compute_overhead_ms", pl.compute_overhead_ms);
        pr.finish();
    }

    if (const json* oj = r.child("optics")) {
        detail::Reader orr(*oj, "optics.");
        auto& op = c.optics;
        if (const json* cj = orr.child("xy_cavity"))
            detail::read_cavity(*cj, "optics.xy_cavity.", op.xy_cavity);
        if (const json* cj = orr.child("z_cavity"))
            detail::read_cavity(*cj, "optics.z_cavity.", op.z_cavity);
        if (const json* tj = orr.child("tweezer")) {
            detail::Reader tr(*tj, "optics.tweezer.");
            tr.get("polarizability_mhz_per_mw_um2", op.tweezer.polarizability_mhz_per_mw_um2);
            tr.get("tweezer_waist_um", op.tweezer.tweezer_waist_um);
            tr.get("tweezer_count", op.tweezer.tweezer_count);
            tr.get("laser_power_mw", op.tweezer.laser_power_mw);
            tr.finish();
        }
        if (const json* gj = orr.child("geometry")) {
            detail::Reader gr(*gj, "optics.geometry.");
            gr.get("xy_waist_um", op.geometry.xy_waist_um);
            gr.get("z_waist_um", op.geometry.z_waist_um);
            gr.get("z_crossing_angle_deg", op.geometry.z_crossing_angle_deg);
            gr.get("array_halfwidth_um", op.geometry.array_halfwidth_um);
            gr.get("site_spacing_um", op.geometry.site_spacing_um);
            gr.finish();
        }
        orr.get("excited_polarizability_ratio", op.excited_polarizability_ratio);
        orr.get("xy_peak_depth_uk", op.xy_peak_depth_uk);
        orr.get("z_peak_depth_uk", op.z_peak_depth_uk);
        orr.finish();
    }
    r.finish();

    // keep the duplicated quantities in sync (single source: phase_timings)
    c.imaging.duration_ms = c.phase_timings.image_ms;
    c.planner.compute_overhead_ms = c.phase_timings.rearrange_fixed_overhead_ms;

    const ValidationReport rep = validate(c);
    if (!rep.ok()) throw ValidationError(rep);
    return c;
}

inline json to_json(const CavitySpec& c) {
    return json{{"finesse", c.finesse},
                {"fsr_mhz", c.fsr_mhz},
                {"linewidth_khz", c.linewidth_khz},
                {"waist_um", c.waist_um},
                {"interference_factor", c.interference_factor},
                {"input_transmission", c.input_transmission},
                {"total_transmission", c.total_transmission},
                {"total_loss", c.total_loss},
                {"impedance_match", c.impedance_match}};
}

inline json to_json(const SimConfig& c) {
    json j;
    j["reservoir_sites"] = c.reservoir_sites;
    j["target_rows"] = c.target_rows;
    j["target_cols"] = c.target_cols;
    j["target_spacing_um"] = c.target_spacing_um;
    j["reservoir_offset_um"] = c.reservoir_offset_um;
    j["lac_fill_probability"] = c.lac_fill_probability;
    j["mot_load_rate_per_s"] = c.mot_load_rate_per_s;
    j["mot_saturation_time_ms"] = c.mot_saturation_time_ms;
    j["transport_survival"] = c.transport_survival;
    j["rng_seed"] = c.rng_seed;
    j["phase_timings"] = {{"mot_load_ms", c.phase_timings.mot_load_ms},
                          {"transport_ms", c.phase_timings.transport_ms},
                          {"tweezer_ramp_ms", c.phase_timings.tweezer_ramp_ms},
                          {"galvo_translate_ms", c.phase_timings.galvo_translate_ms},
                          {"doppler_ms", c.phase_timings.doppler_ms},
                          {"rsc_total_ms", c.phase_timings.rsc_total_ms},
                          {"image_ms", c.phase_timings.image_ms},
                          {"rearrange_fixed_overhead_ms",
                           c.phase_timings.rearrange_fixed_overhead_ms}};
    j["imaging"] = {{"signal_mean_counts", c.imaging.signal_mean_counts},
                    {"background_mean_counts", c.imaging.background_mean_counts},
                    {"signal_width_counts", c.imaging.signal_width_counts},
                    {"background_width_counts", c.imaging.background_width_counts},
                    {"threshold_counts", c.imaging.threshold_counts},
                    {"loss_per_image", c.imaging.loss_per_image},
                    {"vacuum_fraction_of_loss", c.imaging.vacuum_fraction_of_loss},
                    {"spin_flip_probability", c.imaging.spin_flip_probability},
                    {"mode", c.imaging.mode == ImagingMode::occupancy ? "occupancy"
                                                                      : "spin_selective"}};
    j["thermal"] = {{"doppler_floor_uk", c.thermal.doppler_floor_uk},
                    {"rsc_floor_nbar_xy", c.thermal.rsc_floor_nbar_xy},
                    {"rsc_floor_nbar_z", c.thermal.rsc_floor_nbar_z},
                    {"rsc_iterations", c.thermal.rsc_iterations},
                    {"rsc_decay_per_iteration", c.thermal.rsc_decay_per_iteration},
                    {"heating_tau_ms", c.thermal.heating_tau_ms},
                    {"post_image_temperature_uk", c.thermal.post_image_temperature_uk},
                    {"trap_freq_xy_khz", c.thermal.trap_freq_xy_khz},
                    {"trap_freq_z_khz", c.thermal.trap_freq_z_khz}};
    j["losses"] = {{"vacuum_lifetime_s", c.losses.vacuum_lifetime_s},
                   {"handoff_loss_459", c.losses.handoff_loss_459},
                   {"handoff_loss_423", c.losses.handoff_loss_423},
                   {"handoff_depth_threshold", c.losses.handoff_depth_threshold},
                   {"misaligned_handoff_loss_max", c.losses.misaligned_handoff_loss_max},
                   {"proximity_distance_um", c.losses.proximity_distance_um},
                   {"rearr_depth_nominal_uk", c.losses.rearr_depth_nominal_uk},
                   {"target_depth_nominal_uk", c.losses.target_depth_nominal_uk},
                   {"rearr_depth_fraction", c.losses.rearr_depth_fraction},
                   {"target_depth_fraction", c.losses.target_depth_fraction},
                   {"rearr_pickup_max", c.losses.rearr_pickup_max},
                   {"rearr_pickup_scale", c.losses.rearr_pickup_scale},
                   {"rearr_disturbance_coeff", c.losses.rearr_disturbance_coeff},
                   {"alignment_offset_x_um", c.losses.alignment_offset_x_um},
                   {"alignment_offset_y_um", c.losses.alignment_offset_y_um},
                   {"lattice_period_um", c.losses.lattice_period_um}};
    j["planner"] = {{"policy", c.planner.policy == PlannerPolicy::optimal ? "optimal" : "greedy"},
                    {"speed_um_per_ms", c.planner.speed_um_per_ms},
                    {"pickup_ramp_ms", c.planner.pickup_ramp_ms},
                    {"release_ramp_ms", c.planner.release_ramp_ms}};
    j["optics"] = {{"xy_cavity", to_json(c.optics.xy_cavity)},
                   {"z_cavity", to_json(c.optics.z_cavity)},
                   {"tweezer",
                    {{"polarizability_mhz_per_mw_um2", c.optics.tweezer.polarizability_mhz_per_mw_um2},
                     {"tweezer_waist_um", c.optics.tweezer.tweezer_waist_um},
                     {"tweezer_count", c.optics.tweezer.tweezer_count},
                     {"laser_power_mw", c.optics.tweezer.laser_power_mw}}},
                   {"geometry",
                    {{"xy_waist_um", c.optics.geometry.xy_waist_um},
                     {"z_waist_um", c.optics.geometry.z_waist_um},
                     {"z_crossing_angle_deg", c.optics.geometry.z_crossing_angle_deg},
                     {"array_halfwidth_um", c.optics.geometry.array_halfwidth_um},
                     {"site_spacing_um", c.optics.geometry.site_spacing_um}}},
                   {"excited_polarizability_ratio", c.optics.excited_polarizability_ratio},
                   {"xy_peak_depth_uk", c.optics.xy_peak_depth_uk},
                   {"z_peak_depth_uk", c.optics.z_peak_depth_uk}};
    return j;
}

inline std::string save_config(const SimConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Hash of the serialized configuration, stamped into every output file.
inline uint64_t config_hash(const SimConfig& c) { return stats::fnv1a(save_config(c)); }

}  // namespace atomsim
