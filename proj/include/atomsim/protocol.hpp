// protocol.hpp -- the discrete-event engine: composes reservoir filling,
// imaging, cooling, handoffs, and rearrangement into the repeated loading
// cycle, plus a mean-field analytic steady state derived from the same
// per-mechanism survivals the Monte Carlo applies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atomsim/config.hpp"
#include "atomsim/imaging.hpp"
#include "atomsim/losses.hpp"
#include "atomsim/random.hpp"
#include "atomsim/rearrange.hpp"
#include "atomsim/thermal.hpp"

namespace atomsim::protocol {

// ---------------------------------------------------------------------------
// Phase clock
// ---------------------------------------------------------------------------

/// Deterministic phase durations of one cycle. The MOT reload overlaps the
/// science sequence, so it contributes to the cycle duration only on the
/// first cycle (nothing is trapped yet anyway). Rearrangement adds its
/// variable, plan-dependent duration on top.
struct CycleClock {
    double reservoir_ms = 0.0;    // transport + load ramps + galvo translate
    double pre_image_ms = 0.0;    // handoff into the lattice + image
    double cool_ms = 0.0;         // Doppler + RSC
    double handoff_out_ms = 0.0;  // handoff back into the tweezers
    double diag_pre_ms = 0.0;     // diagnostic handoff in + image
    double diag_post_ms = 0.0;    // diagnostic cooling + handoff out

    static CycleClock from(const PhaseTimings& t) {
        CycleClock c;
        c.reservoir_ms = t.transport_ms + t.handoff_ms() + t.galvo_translate_ms;
        c.pre_image_ms = t.handoff_ms() + t.image_ms;
        c.cool_ms = t.doppler_ms + t.rsc_total_ms;
        c.handoff_out_ms = t.handoff_ms();
        c.diag_pre_ms = t.handoff_ms() + t.image_ms;
        c.diag_post_ms = t.doppler_ms + t.rsc_total_ms + t.handoff_ms();
        return c;
    }

    double fixed_total_ms(bool diagnostics) const {
        double total = reservoir_ms + pre_image_ms + cool_ms + handoff_out_ms;
        if (diagnostics) total += diag_pre_ms + diag_post_ms;
        return total;
    }
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct CycleRecord {
    int iteration = 0;
    int atoms_start = 0;              // ground truth at cycle start
    int atoms_end = 0;                // ground truth at cycle end
    int pre_rearr_atoms = 0;          // classified occupied at the main image
    double pre_rearr_fill = 0.0;
    std::optional<int> post_rearr_atoms;     // classified, diagnostic image only
    std::optional<double> post_rearr_fill;
    int true_post_rearr_atoms = 0;    // ground truth right after rearrangement
    double true_post_rearr_fill = 0.0;
    int reservoir_atoms = 0;          // classified occupied reservoir sites
    int transfers_in = 0;
    int moves_planned = 0;
    // target-scope losses; these close the per-cycle conservation identity
    int64_t loss_vacuum = 0;
    int64_t loss_imaging = 0;
    int64_t loss_handoff = 0;
    int64_t loss_disturbance = 0;
    int64_t loss_collision = 0;       // two atoms per collision event
    // reservoir-scope events (outside the target identity)
    int64_t reservoir_pickup_failures = 0;
    int64_t reservoir_phantom_moves = 0;
    int64_t reservoir_losses = 0;
    double rearrange_duration_ms = 0.0;
    double cycle_duration_ms = 0.0;
    double nbar_xy = 0.0;             // at the handoff back into the tweezers
    double nbar_z = 0.0;

    int64_t losses_total() const {
        return loss_vacuum + loss_imaging + loss_handoff + loss_disturbance + loss_collision;
    }
    bool conserves() const {
        return atoms_end - atoms_start == transfers_in - losses_total();
    }
};

enum class RunMode { loading, maintenance };

struct RunSummary {
    double initial_slope_atoms_per_cycle = 0.0;
    int linear_regime_cycles = 0;
    int cycles_to_fill_99 = -1;       // ground-truth post-rearrangement fill
    double steady_pre_fill_mean = 0.0;
    double steady_pre_fill_se = 0.0;
    double steady_post_fill_mean = 0.0;   // diagnostic images, when enabled
    double steady_post_fill_se = 0.0;
    double steady_true_post_fill_mean = 0.0;
    double steady_true_post_fill_se = 0.0;
    int steady_window_start = 0;
    std::string dominant_loss = "none";
    std::map<std::string, int64_t> losses_by_mechanism;
};

struct RunRecord {
    SimConfig config;
    uint64_t seed = 0;
    RunMode mode = RunMode::loading;
    bool diagnostics = false;
    std::vector<CycleRecord> cycles;
    RunSummary summary;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Reservoir occupancy after MOT collection, transport, and light-assisted
/// collisions. When the collected atom number (rate x duration x transport
/// survival) saturates the demand implied by the saturation time, every site
/// fills independently at the collisional limit; short MOT phases scale the
/// fill probability down proportionally.
inline std::vector<uint8_t> fill_reservoir(const SimConfig& cfg, Rng& rng) {
    const double supply =
        cfg.mot_load_rate_per_s * (cfg.phase_timings.mot_load_ms * 1e-3) * cfg.transport_survival;
    const double demand =
        cfg.mot_load_rate_per_s * (cfg.mot_saturation_time_ms * 1e-3) * cfg.transport_survival;
    const double scale = demand > 0.0 ? std::min(1.0, supply / demand) : 0.0;
    const double p = cfg.lac_fill_probability * scale;
    std::vector<uint8_t> occ(cfg.reservoir_sites, 0);
    for (auto& site : occ) site = rng.bernoulli(p) ? 1 : 0;
    return occ;
}

struct EngineState {
    rearrange::OccupancyGrid grid;
    thermal::ThermalState thermal_state;
    int iteration = 0;

    static EngineState start(const SimConfig& cfg, RunMode mode) {
        EngineState s;
        s.grid = rearrange::OccupancyGrid::from_config(cfg);
        if (mode == RunMode::maintenance)
            std::fill(s.grid.target_occupied.begin(), s.grid.target_occupied.end(), 1);
        s.thermal_state = thermal::apply_cooling(
            thermal::state_at_temperature(cfg.thermal.post_image_temperature_uk, cfg.thermal),
            thermal::CoolingStage::rsc, cfg.thermal);
        return s;
    }
};

namespace detail {

inline int apply_vacuum(std::vector<uint8_t>& occ, double survival, Rng& rng) {
    int losses = 0;
    for (auto& site : occ) {
        if (site && !rng.bernoulli(survival)) {
            site = 0;
            ++losses;
        }
    }
    return losses;
}

}  // namespace detail

/// One full cycle: reservoir fill, imaging, cooling, handoff, rearrangement,
/// and the optional diagnostic image, with per-atom Bernoulli losses per
/// phase. Classification errors feed the planner; ground truth is retained
/// only for scoring.
inline CycleRecord run_cycle(EngineState& state, const SimConfig& cfg, Rng& rng,
                             bool diagnostic_image) {
    const CycleClock clock = CycleClock::from(cfg.phase_timings);
    const double tau_s = cfg.losses.vacuum_lifetime_s;
    auto& g = state.grid;

    CycleRecord rec;
    rec.iteration = state.iteration;
    rec.atoms_start = g.occupied_targets();

    // (1) load reservoir; existing atoms wait in their tweezers
    g.reservoir_occupied = fill_reservoir(cfg, rng);
    rec.loss_vacuum += detail::apply_vacuum(
        g.target_occupied, losses::vacuum_survival(clock.reservoir_ms, tau_s), rng);

    // (2) hand off to the lattice and image everything
    {
        const double s = losses::vacuum_survival(clock.pre_image_ms, tau_s);
        rec.loss_vacuum += detail::apply_vacuum(g.target_occupied, s, rng);
        rec.reservoir_losses += detail::apply_vacuum(g.reservoir_occupied, s, rng);
    }
    std::vector<uint8_t> target_class(g.target_sites(), 0);
    std::vector<uint8_t> reservoir_class(g.reservoir_sites(), 0);
    for (int i = 0; i < g.target_sites(); ++i)
        target_class[i] = imaging::classify(
            imaging::sample_counts(g.target_occupied[i] != 0, cfg.imaging, rng),
            cfg.imaging.threshold_counts);
    for (int i = 0; i < g.reservoir_sites(); ++i)
        reservoir_class[i] = imaging::classify(
            imaging::sample_counts(g.reservoir_occupied[i] != 0, cfg.imaging, rng),
            cfg.imaging.threshold_counts);
    rec.pre_rearr_atoms =
        static_cast<int>(std::count(target_class.begin(), target_class.end(), 1));
    rec.pre_rearr_fill = static_cast<double>(rec.pre_rearr_atoms) / g.target_sites();
    rec.reservoir_atoms =
        static_cast<int>(std::count(reservoir_class.begin(), reservoir_class.end(), 1));
    rec.loss_imaging += detail::apply_vacuum(g.target_occupied,
                                             1.0 - cfg.imaging.loss_per_image, rng);
    rec.reservoir_losses += detail::apply_vacuum(g.reservoir_occupied,
                                                 1.0 - cfg.imaging.loss_per_image, rng);

    // (3) Doppler + RSC in the lattice
    state.thermal_state = thermal::state_at_temperature(
        cfg.thermal.post_image_temperature_uk, cfg.thermal);
    state.thermal_state =
        thermal::apply_cooling(state.thermal_state, thermal::CoolingStage::doppler, cfg.thermal);
    state.thermal_state =
        thermal::apply_cooling(state.thermal_state, thermal::CoolingStage::rsc, cfg.thermal);
    rec.nbar_xy = state.thermal_state.nbar_x;
    rec.nbar_z = state.thermal_state.nbar_z;
    {
        const double s =
            losses::vacuum_survival(clock.cool_ms + clock.handoff_out_ms, tau_s);
        rec.loss_vacuum += detail::apply_vacuum(g.target_occupied, s, rng);
        rec.reservoir_losses += detail::apply_vacuum(g.reservoir_occupied, s, rng);
    }

    // (4) handoff pair back into the tweezers (the pair's loss lands here)
    const auto align = losses::alignment_from(cfg.losses);
    for (int i = 0; i < g.target_sites(); ++i) {
        if (!g.target_occupied[i]) continue;
        const double loss = losses::handoff_loss(cfg.losses.target_depth_fraction,
                                                 g.target_zone[i], state.thermal_state, align,
                                                 cfg.losses);
        if (rng.bernoulli(loss)) {
            g.target_occupied[i] = 0;
            ++rec.loss_handoff;
        }
    }
    {
        // reservoir tweezers are deep and magic-wavelength; use the lower plateau
        const double loss =
            losses::handoff_loss(1.0, losses::TrapWavelength::nm459, state.thermal_state,
                                 align, cfg.losses);
        for (auto& site : g.reservoir_occupied) {
            if (site && rng.bernoulli(loss)) {
                site = 0;
                ++rec.reservoir_losses;
            }
        }
    }

    // (5) plan from the classified occupancies
    const auto part = rearrange::identify_vacancies(g, target_class, reservoir_class);
    auto plan = rearrange::plan_moves(g, target_class, part.occupied_reservoir,
                                      part.vacant_targets, cfg.planner.policy,
                                      cfg.losses.proximity_distance_um);
    plan = rearrange::schedule(plan, cfg.planner);
    rec.moves_planned = static_cast<int>(plan.moves.size());
    rec.rearrange_duration_ms = plan.total_duration_ms;

    // (6) execute
    const auto response =
        losses::rearrangement_tweezer_response(cfg.losses.rearr_depth_fraction, cfg.losses);
    const auto exec = rearrange::execute_plan(
        plan, g, response, losses::vacuum_survival(plan.total_duration_ms, tau_s),
        cfg.losses.proximity_distance_um, rng);
    rec.transfers_in = exec.transfers_in;
    rec.loss_vacuum += exec.vacuum_losses;
    rec.loss_disturbance += exec.disturbed;
    rec.loss_collision += 2 * exec.collisions;
    rec.reservoir_pickup_failures = exec.pickup_failures;
    rec.reservoir_phantom_moves = exec.phantom_moves;
    rec.true_post_rearr_atoms = g.occupied_targets();
    rec.true_post_rearr_fill = static_cast<double>(rec.true_post_rearr_atoms) / g.target_sites();

    // (7) optional diagnostic image, with its own losses
    if (diagnostic_image) {
        rec.loss_vacuum += detail::apply_vacuum(
            g.target_occupied, losses::vacuum_survival(clock.diag_pre_ms, tau_s), rng);
        int classified = 0;
        for (int i = 0; i < g.target_sites(); ++i)
            if (imaging::classify(
                    imaging::sample_counts(g.target_occupied[i] != 0, cfg.imaging, rng),
                    cfg.imaging.threshold_counts))
                ++classified;
        rec.post_rearr_atoms = classified;
        rec.post_rearr_fill = static_cast<double>(classified) / g.target_sites();
        rec.loss_imaging += detail::apply_vacuum(g.target_occupied,
                                                 1.0 - cfg.imaging.loss_per_image, rng);
        rec.loss_vacuum += detail::apply_vacuum(
            g.target_occupied, losses::vacuum_survival(clock.diag_post_ms, tau_s), rng);
        for (int i = 0; i < g.target_sites(); ++i) {
            if (!g.target_occupied[i]) continue;
            const double loss = losses::handoff_loss(cfg.losses.target_depth_fraction,
                                                     g.target_zone[i], state.thermal_state,
                                                     align, cfg.losses);
            if (rng.bernoulli(loss)) {
                g.target_occupied[i] = 0;
                ++rec.loss_handoff;
            }
        }
    }

    rec.atoms_end = g.occupied_targets();
    rec.cycle_duration_ms = clock.fixed_total_ms(diagnostic_image) + plan.total_duration_ms +
                            (state.iteration == 0 ? cfg.phase_timings.mot_load_ms : 0.0);
    ++state.iteration;
    return rec;
}

// ---------------------------------------------------------------------------
// Run driver and summary statistics
// ---------------------------------------------------------------------------

namespace detail {

inline void finalize_summary(RunRecord& run) {
    auto& s = run.summary;
    const auto& cycles = run.cycles;
    const int n = static_cast<int>(cycles.size());
    if (n == 0) return;
    const int sites = run.config.target_sites();

    // initial slope: least-squares slope of the classified atom number over
    // the linear regime (pre-rearrangement fill below one half)
    int k_lin = 0;
    while (k_lin < n && cycles[k_lin].pre_rearr_fill < 0.5) ++k_lin;
    k_lin = std::max(k_lin, 2);
    k_lin = std::min(k_lin, n);
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < k_lin; ++i) {
            const double x = i;
            const double y = cycles[i].pre_rearr_atoms;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = k_lin * sxx - sx * sx;
        s.initial_slope_atoms_per_cycle = denom != 0.0 ? (k_lin * sxy - sx * sy) / denom : 0.0;
        s.linear_regime_cycles = k_lin;
    }

    s.cycles_to_fill_99 = -1;
    for (int i = 0; i < n; ++i) {
        if (cycles[i].true_post_rearr_fill >= 0.99) {
            s.cycles_to_fill_99 = i + 1;  // 1-based cycle count
            break;
        }
    }

    const int start = (run.mode == RunMode::maintenance)
                          ? std::min(n / 5, 10)
                          : std::max(n / 2, std::min(n - 1, s.cycles_to_fill_99));
    s.steady_window_start = start;
    auto mean_se = [&](auto getter, double& mean, double& se) {
        std::vector<double> xs;
        for (int i = start; i < n; ++i) {
            const auto v = getter(cycles[i]);
            if (v.has_value()) xs.push_back(*v / sites);
        }
        if (xs.empty()) {
            mean = se = 0.0;
            return;
        }
        mean = stats::mean(xs);
        se = stats::sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
    };
    mean_se([](const CycleRecord& c) { return std::optional<double>(c.pre_rearr_atoms); },
            s.steady_pre_fill_mean, s.steady_pre_fill_se);
    mean_se(
        [](const CycleRecord& c) {
            return c.post_rearr_atoms ? std::optional<double>(*c.post_rearr_atoms)
                                      : std::nullopt;
        },
        s.steady_post_fill_mean, s.steady_post_fill_se);
    mean_se([](const CycleRecord& c) { return std::optional<double>(c.true_post_rearr_atoms); },
            s.steady_true_post_fill_mean, s.steady_true_post_fill_se);

    auto& lm = s.losses_by_mechanism;
    for (const auto& c : cycles) {
        lm["vacuum"] += c.loss_vacuum;
        lm["imaging"] += c.loss_imaging;
        lm["handoff"] += c.loss_handoff;
        lm["disturbance"] += c.loss_disturbance;
        lm["collision"] += c.loss_collision;
    }
    int64_t best = -1;
    for (const auto& [name, count] : lm) {
        if (count > best) {
            best = count;
            s.dominant_loss = name;
        }
    }
}

}  // namespace detail

/// Iterate run_cycle. Loading mode starts from an empty target array,
/// maintenance mode from a filled one. Bit-exact reproducible for a fixed
/// (config, seed).
inline RunRecord run_simulation(const SimConfig& cfg, int n_cycles, RunMode mode,
                                bool diagnostic_images) {
    if (n_cycles < 1) throw std::invalid_argument("run_simulation: n_cycles must be >= 1");
    RunRecord run;
    run.config = cfg;
    run.seed = cfg.rng_seed;
    run.mode = mode;
    run.diagnostics = diagnostic_images;
    Rng rng(cfg.rng_seed);
    EngineState state = EngineState::start(cfg, mode);
    run.cycles.reserve(n_cycles);
    for (int i = 0; i < n_cycles; ++i)
        run.cycles.push_back(run_cycle(state, cfg, rng, diagnostic_images));
    detail::finalize_summary(run);
    return run;
}

// ---------------------------------------------------------------------------
// Analytic steady state
// ---------------------------------------------------------------------------

struct ZoneSteadyState {
    double pre_fill_true = 0.0;
    double post_fill_true = 0.0;
    int site_count = 0;
};

struct SteadyState {
    double pre_fill = 0.0;        // measured (classified), matching the records
    double post_fill = 0.0;       // measured at the diagnostic image
    double pre_fill_true = 0.0;
    double post_fill_true = 0.0;
    ZoneSteadyState zone_459, zone_423;
    bool supply_limited = false;
    std::string supply_note;
    double expected_moves = 0.0;
    double expected_rearr_ms = 0.0;
    double cycle_duration_ms = 0.0;
    // per-cycle per-atom loss probabilities of a settled array (budget rows)
    double loss_vacuum = 0.0;
    double loss_imaging = 0.0;
    double loss_handoff_459 = 0.0;
    double loss_handoff_423 = 0.0;
    double loss_disturbance = 0.0;
    double pickup_success = 0.0;
};

namespace detail {

/// Expected distance from each target site to the nearest classified-occupied
/// reservoir site, with iid site occupancy p. Used for the expected move
/// duration; the assignment step's contention correction is negligible at
/// reservoir occupancies well above the vacancy count.
inline std::vector<double> expected_nearest_source_um(const rearrange::OccupancyGrid& g,
                                                      double p_occ) {
    std::vector<double> out(g.target_sites(), 0.0);
    std::vector<double> d(g.reservoir_sites());
    for (int t = 0; t < g.target_sites(); ++t) {
        for (int r = 0; r < g.reservoir_sites(); ++r)
            d[r] = rearrange::distance(g.target_pos[t], g.reservoir_pos[r]);
        std::sort(d.begin(), d.end());
        double expect = 0.0, none = 1.0;
        for (double dist : d) {
            expect += dist * p_occ * none;
            none *= (1.0 - p_occ);
            if (none < 1e-12) break;
        }
        out[t] = expect + none * (d.empty() ? 0.0 : d.back());
    }
    return out;
}

}  // namespace detail

/// Closed-form equilibrium of the maintenance cycle, zone-resolved and built
/// from the same survival factors the Monte Carlo draws against. Solved as a
/// small fixed point because the rearrangement duration depends on the
/// vacancy level it produces.
inline SteadyState steady_state_analytic(const SimConfig& cfg, bool diagnostic_images) {
    const CycleClock clock = CycleClock::from(cfg.phase_timings);
    const double tau = cfg.losses.vacuum_lifetime_s;
    const auto rates = imaging::misclassification_rates(cfg.imaging);
    const double c_fp = rates.false_occupied;
    const double c_fn = rates.false_empty;
    const double li = cfg.imaging.loss_per_image;

    thermal::ThermalState floor = thermal::apply_cooling(
        thermal::state_at_temperature(cfg.thermal.post_image_temperature_uk, cfg.thermal),
        thermal::CoolingStage::rsc, cfg.thermal);
    const auto align = losses::alignment_from(cfg.losses);
    const double pair_459 = losses::handoff_loss(cfg.losses.target_depth_fraction,
                                                 losses::TrapWavelength::nm459, floor, align,
                                                 cfg.losses);
    const double pair_423 = losses::handoff_loss(cfg.losses.target_depth_fraction,
                                                 losses::TrapWavelength::nm423, floor, align,
                                                 cfg.losses);
    const auto response =
        losses::rearrangement_tweezer_response(cfg.losses.rearr_depth_fraction, cfg.losses);

    const auto grid = rearrange::OccupancyGrid::from_config(cfg);
    int sites_459 = 0;
    for (auto z : grid.target_zone)
        if (z == losses::TrapWavelength::nm459) ++sites_459;
    const int sites_423 = grid.target_sites() - sites_459;

    // reservoir supply chain
    const double supply_scale =
        cfg.mot_saturation_time_ms > 0.0
            ? std::min(1.0, cfg.phase_timings.mot_load_ms / cfg.mot_saturation_time_ms)
            : 0.0;
    const double p_fill = cfg.lac_fill_probability * supply_scale;
    const double v_pre_image = losses::vacuum_survival(clock.pre_image_ms, tau);
    const double p_occ_at_class = p_fill * v_pre_image;
    const double p_classified_occ =
        p_occ_at_class * (1.0 - c_fn) + (1.0 - p_occ_at_class) * c_fp;
    const double phantom_rate =
        p_classified_occ > 0.0 ? (1.0 - p_occ_at_class) * c_fp / p_classified_occ : 0.0;
    const double source_survival =
        (1.0 - li) *
        losses::vacuum_survival(clock.cool_ms + clock.handoff_out_ms, tau) *
        (1.0 - losses::handoff_loss(1.0, losses::TrapWavelength::nm459, floor, align,
                                    cfg.losses));
    const double q_eff = response.pickup_success * (1.0 - phantom_rate) * source_survival;

    // expected path length, weighted by where vacancies sit (zone-uniform)
    const auto nearest = detail::expected_nearest_source_um(grid, p_classified_occ);

    SteadyState out;
    out.pickup_success = response.pickup_success;
    double v459 = 0.016, v423 = 0.018;  // initial guesses, iterated below
    double rearr_ms = 0.0;

    for (int iter = 0; iter < 60; ++iter) {
        // expected classified-empty counts and mean move path
        const double empties_459 = sites_459 * (v459 * (1.0 - c_fp) + (1.0 - v459) * c_fn);
        const double empties_423 = sites_423 * (v423 * (1.0 - c_fp) + (1.0 - v423) * c_fn);
        const double moves = empties_459 + empties_423;
        double path_sum = 0.0, weight_sum = 0.0;
        for (int t = 0; t < grid.target_sites(); ++t) {
            const bool is459 = grid.target_zone[t] == losses::TrapWavelength::nm459;
            const double w = is459 ? empties_459 / std::max(sites_459, 1)
                                   : empties_423 / std::max(sites_423, 1);
            path_sum += w * nearest[t];
            weight_sum += w;
        }
        const double mean_path = weight_sum > 0.0 ? path_sum / weight_sum : 0.0;
        rearr_ms = cfg.planner.compute_overhead_ms +
                   moves * (cfg.planner.pickup_ramp_ms + cfg.planner.release_ramp_ms +
                            mean_path / cfg.planner.speed_um_per_ms);
        out.expected_moves = moves;

        const double v_window = losses::vacuum_survival(rearr_ms, tau);
        const double v_cool_out =
            losses::vacuum_survival(clock.cool_ms + clock.handoff_out_ms, tau);
        const double v_diag_pre = losses::vacuum_survival(clock.diag_pre_ms, tau);
        const double v_diag_post = losses::vacuum_survival(clock.diag_post_ms, tau);
        const double v_reservoir = losses::vacuum_survival(clock.reservoir_ms, tau);

        auto solve_zone = [&](double pair_loss) {
            // survival of a settled atom from its classification to the end of
            // the rearrangement window
            const double a = (1.0 - li) * (1.0 - pair_loss) * v_cool_out * v_window;
            const double alpha = (1.0 - c_fn) * a +
                                 c_fn * (a * (1.0 - q_eff) + (1.0 - a) * q_eff);
            const double beta = (1.0 - c_fp) * q_eff;
            double s2;  // from the post-rearrangement point to the next classification
            double post_factor = 1.0;
            if (diagnostic_images) {
                post_factor = v_diag_pre;
                s2 = (1.0 - li) * (1.0 - pair_loss) * v_diag_post * v_reservoir * v_pre_image;
            } else {
                s2 = v_reservoir * v_pre_image;
            }
            const double gain = post_factor * s2;
            const double f = gain * beta / (1.0 - gain * (alpha - beta));
            const double post_true = post_factor * (f * alpha + (1.0 - f) * beta);
            return std::pair<double, double>(f, post_true);
        };
        const auto [f459, post459] = solve_zone(pair_459);
        const auto [f423, post423] = solve_zone(pair_423);
        const double new_v459 = 1.0 - f459;
        const double new_v423 = 1.0 - f423;
        const bool done = std::fabs(new_v459 - v459) < 1e-12 && std::fabs(new_v423 - v423) < 1e-12;
        v459 = new_v459;
        v423 = new_v423;
        out.zone_459 = {f459, post459, sites_459};
        out.zone_423 = {f423, post423, sites_423};
        if (done) break;
    }

    const double n_total = grid.target_sites();
    out.pre_fill_true =
        (out.zone_459.pre_fill_true * sites_459 + out.zone_423.pre_fill_true * sites_423) /
        n_total;
    out.post_fill_true =
        (out.zone_459.post_fill_true * sites_459 + out.zone_423.post_fill_true * sites_423) /
        n_total;
    out.pre_fill = out.pre_fill_true * (1.0 - c_fn) + (1.0 - out.pre_fill_true) * c_fp;
    out.post_fill = out.post_fill_true * (1.0 - c_fn) + (1.0 - out.post_fill_true) * c_fp;
    out.expected_rearr_ms = rearr_ms;
    out.cycle_duration_ms = clock.fixed_total_ms(diagnostic_images) + rearr_ms;

    // budget rows for a settled atom over one cycle
    const int images = diagnostic_images ? 2 : 1;
    out.loss_vacuum = 1.0 - losses::vacuum_survival(out.cycle_duration_ms, tau);
    out.loss_imaging = 1.0 - std::pow(1.0 - li, images);
    out.loss_handoff_459 = 1.0 - std::pow(1.0 - pair_459, images);
    out.loss_handoff_423 = 1.0 - std::pow(1.0 - pair_423, images);
    out.loss_disturbance = response.disturbance_per_pass;  // per close pass

    // supply check: mean usable reservoir atoms vs refill demand
    const double supply_mean = cfg.reservoir_sites * p_classified_occ;
    const double demand_mean = out.expected_moves;
    if (supply_mean < demand_mean) {
        out.supply_limited = true;
        std::ostringstream os;
        os << "supply-limited: mean classified reservoir supply " << supply_mean
           << " < mean per-cycle refill demand " << demand_mean;
        out.supply_note = os.str();
    }
    return out;
}

}  // namespace atomsim::protocol
