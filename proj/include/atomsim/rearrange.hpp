// rearrange.hpp -- occupancy bookkeeping and single-tweezer rearrangement:
// vacancy identification, source/vacancy assignment (exact Hungarian or
// greedy), move scheduling, and plan execution against the loss models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomsim/config.hpp"
#include "atomsim/losses.hpp"
#include "atomsim/random.hpp"

namespace atomsim::rearrange {

struct SitePos {
    double x_um = 0.0;
    double y_um = 0.0;
};

inline double distance(const SitePos& a, const SitePos& b) {
    return std::hypot(a.x_um - b.x_um, a.y_um - b.y_um);
}

/// Target and reservoir site geometry plus boolean occupancy (ground truth).
/// Target ids are row-major; the two wavelength zones split the grid into
/// side-by-side column blocks. The reservoir is a narrow column block placed
/// to the left of the target array, one gap away.
struct OccupancyGrid {
    int rows = 0;
    int cols = 0;
    double spacing_um = 3.3;

    std::vector<SitePos> target_pos;
    std::vector<uint8_t> target_occupied;
    std::vector<losses::TrapWavelength> target_zone;

    std::vector<SitePos> reservoir_pos;
    std::vector<uint8_t> reservoir_occupied;

    int target_sites() const { return static_cast<int>(target_pos.size()); }
    int reservoir_sites() const { return static_cast<int>(reservoir_pos.size()); }

    int occupied_targets() const {
        return static_cast<int>(std::count(target_occupied.begin(), target_occupied.end(), 1));
    }
    int occupied_reservoir() const {
        return static_cast<int>(
            std::count(reservoir_occupied.begin(), reservoir_occupied.end(), 1));
    }

    SitePos reservoir_centroid() const {
        SitePos c;
        for (const auto& p : reservoir_pos) {
            c.x_um += p.x_um;
            c.y_um += p.y_um;
        }
        if (!reservoir_pos.empty()) {
            c.x_um /= reservoir_pos.size();
            c.y_um /= reservoir_pos.size();
        }
        return c;
    }

    static OccupancyGrid from_config(const SimConfig& cfg) {
        OccupancyGrid g;
        g.rows = cfg.target_rows;
        g.cols = cfg.target_cols;
        g.spacing_um = cfg.target_spacing_um;
        const double a = cfg.target_spacing_um;
        const int zone_split = (cfg.target_cols + 1) / 2;  // left block is 459 nm
        for (int r = 0; r < g.rows; ++r) {
            for (int c = 0; c < g.cols; ++c) {
                g.target_pos.push_back({(c - 0.5 * (g.cols - 1)) * a,
                                        (r - 0.5 * (g.rows - 1)) * a});
                g.target_zone.push_back(c < zone_split ? losses::TrapWavelength::nm459
                                                       : losses::TrapWavelength::nm423);
            }
        }
        g.target_occupied.assign(g.target_pos.size(), 0);

        const int res_rows = g.rows;
        const int res_cols = (cfg.reservoir_sites + res_rows - 1) / res_rows;
        const double x_left = g.target_pos.front().x_um;  // leftmost target column
        int made = 0;
        for (int r = 0; r < res_rows && made < cfg.reservoir_sites; ++r) {
            for (int j = 0; j < res_cols && made < cfg.reservoir_sites; ++j) {
                const double x = x_left - cfg.reservoir_offset_um - (res_cols - 1 - j) * a;
                const double y = (r - 0.5 * (res_rows - 1)) * a;
                g.reservoir_pos.push_back({x, y});
                ++made;
            }
        }
        g.reservoir_occupied.assign(g.reservoir_pos.size(), 0);
        return g;
    }
};

struct Move {
    int source_id = -1;       // reservoir site
    int dest_id = -1;         // target site
    double path_length_um = 0.0;
    int close_passes = 0;     // planned, from the classified occupancy
    double duration_ms = 0.0; // filled by schedule()
};

struct MovePlan {
    std::vector<Move> moves;
    double compute_overhead_ms = 0.0;
    double total_duration_ms = 0.0;
};

struct VacancyPartition {
    std::vector<int> vacant_targets;      // classified empty
    std::vector<int> occupied_reservoir;  // classified occupied
};

/// Partition sites by their *classified* occupancy. Classification errors
/// propagate: a falsely-empty target lands in the vacancy list.
inline VacancyPartition identify_vacancies(const OccupancyGrid& g,
                                           const std::vector<uint8_t>& target_classified,
                                           const std::vector<uint8_t>& reservoir_classified) {
    if (target_classified.size() != g.target_pos.size() ||
        reservoir_classified.size() != g.reservoir_pos.size())
        throw std::invalid_argument("identify_vacancies: classification size mismatch");
    VacancyPartition part;
    for (int i = 0; i < g.target_sites(); ++i)
        if (!target_classified[i]) part.vacant_targets.push_back(i);
    for (int i = 0; i < g.reservoir_sites(); ++i)
        if (reservoir_classified[i]) part.occupied_reservoir.push_back(i);
    return part;
}

// ---------------------------------------------------------------------------
// Minimum-cost assignment (Hungarian / shortest augmenting path, O(n^2 m)).
// ---------------------------------------------------------------------------

/// cost is n x m with n <= m; returns for each row the assigned column,
/// minimizing the total cost. Deterministic for a fixed input.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const int m = static_cast<int>(cost[0].size());
    if (n > m) throw std::invalid_argument("min_cost_assignment: need rows <= cols");
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> match(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

inline double segment_point_distance(const SitePos& a, const SitePos& b, const SitePos& p) {
    const double dx = b.x_um - a.x_um;
    const double dy = b.y_um - a.y_um;
    const double l2 = dx * dx + dy * dy;
    if (l2 <= 0.0) return distance(a, p);
    double t = ((p.x_um - a.x_um) * dx + (p.y_um - a.y_um) * dy) / l2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x_um - (a.x_um + t * dx), p.y_um - (a.y_um + t * dy));
}

/// Occupied target sites within proximity of the straight segment, excluding
/// the destination itself.
inline int count_close_passes(const OccupancyGrid& g, const std::vector<uint8_t>& occupied,
                              int source_id, int dest_id, double proximity_um) {
    const SitePos a = g.reservoir_pos[source_id];
    const SitePos b = g.target_pos[dest_id];
    int n = 0;
    for (int i = 0; i < g.target_sites(); ++i) {
        if (i == dest_id || !occupied[i]) continue;
        if (segment_point_distance(a, b, g.target_pos[i]) <= proximity_um) ++n;
    }
    return n;
}

/// Pair reservoir sources with target vacancies. The optimal policy solves
/// the assignment problem exactly on Euclidean distance; greedy walks the
/// vacancies sorted by distance from the reservoir and takes the nearest
/// unused source (ties resolved by lowest site id). Moves are ordered
/// farthest destination first.
inline MovePlan plan_moves(const OccupancyGrid& g,
                           const std::vector<uint8_t>& classified_target_occ,
                           const std::vector<int>& sources, const std::vector<int>& vacancies,
                           PlannerPolicy policy, double proximity_um) {
    MovePlan plan;
    const int n_moves = static_cast<int>(std::min(sources.size(), vacancies.size()));
    if (n_moves == 0) return plan;

    std::vector<std::pair<int, int>> pairs;  // (source_id, dest_id)
    pairs.reserve(n_moves);

    if (policy == PlannerPolicy::optimal) {
        // rows = smaller side of the bipartite problem
        const bool sources_small = sources.size() <= vacancies.size();
        const auto& small = sources_small ? sources : vacancies;
        const auto& large = sources_small ? vacancies : sources;
        std::vector<std::vector<double>> cost(small.size(),
                                              std::vector<double>(large.size(), 0.0));
        for (size_t i = 0; i < small.size(); ++i) {
            for (size_t j = 0; j < large.size(); ++j) {
                const SitePos& ps = sources_small ? g.reservoir_pos[small[i]]
                                                  : g.reservoir_pos[large[j]];
                const SitePos& pv = sources_small ? g.target_pos[large[j]]
                                                  : g.target_pos[small[i]];
                cost[i][j] = distance(ps, pv);
            }
        }
        const auto assign = min_cost_assignment(cost);
        for (size_t i = 0; i < small.size(); ++i) {
            if (assign[i] < 0) continue;
            if (sources_small) {
                pairs.emplace_back(small[i], large[assign[i]]);
            } else {
                pairs.emplace_back(large[assign[i]], small[i]);
            }
        }
    } else {
        const SitePos res_ref = g.reservoir_centroid();
        std::vector<int> order(vacancies.begin(), vacancies.end());
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double da = distance(g.target_pos[a], res_ref);
            const double db = distance(g.target_pos[b], res_ref);
            if (da != db) return da < db;
            return a < b;
        });
        std::vector<char> used(sources.size(), 0);
        int assigned = 0;
        for (int dest : order) {
            if (assigned == n_moves) break;
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t s = 0; s < sources.size(); ++s) {
                if (used[s]) continue;
                const double d = distance(g.reservoir_pos[sources[s]], g.target_pos[dest]);
                if (d < best_d || (d == best_d && best >= 0 && sources[s] < sources[best])) {
                    best_d = d;
                    best = static_cast<int>(s);
                }
            }
            if (best < 0) break;
            used[best] = 1;
            pairs.emplace_back(sources[best], dest);
            ++assigned;
        }
    }

    const SitePos res_ref = g.reservoir_centroid();
    std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
        const double da = distance(g.target_pos[a.second], res_ref);
        const double db = distance(g.target_pos[b.second], res_ref);
        if (da != db) return da > db;  // farthest destination first
        return a.second < b.second;
    });

    for (const auto& [src, dst] : pairs) {
        Move mv;
        mv.source_id = src;
        mv.dest_id = dst;
        mv.path_length_um = distance(g.reservoir_pos[src], g.target_pos[dst]);
        mv.close_passes =
            count_close_passes(g, classified_target_occ, src, dst, proximity_um);
        plan.moves.push_back(mv);
    }
    return plan;
}

/// Fill in per-move and total durations.
inline MovePlan schedule(MovePlan plan, const PlannerParams& p) {
    plan.compute_overhead_ms = p.compute_overhead_ms;
    double total = p.compute_overhead_ms;
    for (auto& mv : plan.moves) {
        mv.duration_ms =
            p.pickup_ramp_ms + mv.path_length_um / p.speed_um_per_ms + p.release_ramp_ms;
        total += mv.duration_ms;
    }
    plan.total_duration_ms = total;
    return plan;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct ExecutionResult {
    int transfers_in = 0;       // atoms placed on (truly) empty target sites, plus collisions
    int collisions = 0;         // pairwise losses on falsely-vacant sites (2 atoms each)
    int disturbed = 0;          // bystanders lost to close passes
    int vacuum_losses = 0;      // bystanders lost to background gas during the window
    int pickup_failures = 0;    // reservoir-side: atom not transferred
    int phantom_moves = 0;      // reservoir-side: source was actually empty
};

/// Execute a scheduled plan against ground truth. Background-gas loss over
/// the whole window is charged up front to atoms holding target sites when
/// the window opens; atoms placed during the window start their exposure in
/// the next phase.
inline ExecutionResult execute_plan(const MovePlan& plan, OccupancyGrid& g,
                                    const losses::TweezerResponse& response,
                                    double vacuum_window_survival, double proximity_um,
                                    Rng& rng) {
    ExecutionResult res;
    for (int i = 0; i < g.target_sites(); ++i) {
        if (g.target_occupied[i] && !rng.bernoulli(vacuum_window_survival)) {
            g.target_occupied[i] = 0;
            ++res.vacuum_losses;
        }
    }
    for (const auto& mv : plan.moves) {
        if (!g.reservoir_occupied[mv.source_id]) {
            ++res.phantom_moves;
            continue;
        }
        g.reservoir_occupied[mv.source_id] = 0;  // atom leaves the reservoir
        if (!rng.bernoulli(response.pickup_success)) {
            ++res.pickup_failures;
            continue;
        }
        if (response.disturbance_per_pass > 0.0) {
            const SitePos a = g.reservoir_pos[mv.source_id];
            const SitePos b = g.target_pos[mv.dest_id];
            for (int i = 0; i < g.target_sites(); ++i) {
                if (i == mv.dest_id || !g.target_occupied[i]) continue;
                if (segment_point_distance(a, b, g.target_pos[i]) <= proximity_um &&
                    rng.bernoulli(response.disturbance_per_pass)) {
                    g.target_occupied[i] = 0;
                    ++res.disturbed;
                }
            }
        }
        ++res.transfers_in;
        if (g.target_occupied[mv.dest_id]) {
            // light-assisted collision with the original occupant: both lost
            g.target_occupied[mv.dest_id] = 0;
            ++res.collisions;
        } else {
            g.target_occupied[mv.dest_id] = 1;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Plan serialization (JSON lines, one move per line)
// ---------------------------------------------------------------------------

inline std::string to_jsonl(const MovePlan& plan) {
    std::ostringstream os;
    for (const auto& mv : plan.moves) {
        nlohmann::json j{{"source", mv.source_id},
                         {"destination", mv.dest_id},
                         {"path_length_um", mv.path_length_um},
                         {"duration_ms", mv.duration_ms}};
        os << j.dump() << "\n";
    }
    return os.str();
}

inline MovePlan plan_from_jsonl(const std::string& text) {
    MovePlan plan;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        Move mv;
        mv.source_id = j.at("source").get<int>();
        mv.dest_id = j.at("destination").get<int>();
        mv.path_length_um = j.at("path_length_um").get<double>();
        mv.duration_ms = j.at("duration_ms").get<double>();
        plan.moves.push_back(mv);
        plan.total_duration_ms += mv.duration_ms;
    }
    return plan;
}

}  // namespace atomsim::rearrange
