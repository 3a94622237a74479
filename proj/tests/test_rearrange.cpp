#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "atomsim/rearrange.hpp"

using namespace atomsim;
using namespace atomsim::rearrange;
using Catch::Approx;

namespace {

OccupancyGrid tiny_grid(std::vector<SitePos> reservoir, std::vector<SitePos> targets) {
    OccupancyGrid g;
    g.rows = 1;
    g.cols = static_cast<int>(targets.size());
    g.reservoir_pos = std::move(reservoir);
    g.target_pos = std::move(targets);
    g.reservoir_occupied.assign(g.reservoir_pos.size(), 1);
    g.target_occupied.assign(g.target_pos.size(), 0);
    g.target_zone.assign(g.target_pos.size(), losses::TrapWavelength::nm459);
    return g;
}

double plan_total(const MovePlan& p) {
    return std::accumulate(p.moves.begin(), p.moves.end(), 0.0,
                           [](double acc, const Move& m) { return acc + m.path_length_um; });
}

/// Factorial brute force over all injections of the smaller side into the
/// larger side; exact minimum total distance.
double brute_force_min(const OccupancyGrid& g, const std::vector<int>& sources,
                       const std::vector<int>& vacancies) {
    const bool s_small = sources.size() <= vacancies.size();
    const auto& small = s_small ? sources : vacancies;
    const auto& large = s_small ? vacancies : sources;
    std::vector<int> idx(large.size());
    std::iota(idx.begin(), idx.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(small.size());
    // enumerate ordered selections via permutations of the full index set,
    // using only the first |small| entries of each distinct prefix
    std::sort(idx.begin(), idx.end());
    do {
        double total = 0.0;
        for (size_t i = 0; i < small.size(); ++i) {
            const auto& ps = s_small ? g.reservoir_pos[small[i]] : g.reservoir_pos[large[idx[i]]];
            const auto& pv = s_small ? g.target_pos[large[idx[i]]] : g.target_pos[small[i]];
            total += distance(ps, pv);
        }
        best = std::min(best, total);
        // skip permutations that only differ beyond the used prefix
        std::reverse(idx.begin() + small.size(), idx.end());
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

}  // namespace

TEST_CASE("grid construction from the default scenario") {
    const auto cfg = default_config();
    const auto g = OccupancyGrid::from_config(cfg);
    CHECK(g.target_sites() == 1225);
    CHECK(g.reservoir_sites() == 105);
    int n459 = 0;
    for (auto z : g.target_zone)
        if (z == losses::TrapWavelength::nm459) ++n459;
    CHECK(n459 == 18 * 35);  // two side-by-side column blocks
    // the reservoir sits beyond the left edge of the target array
    const double target_min_x = g.target_pos.front().x_um;
    for (const auto& p : g.reservoir_pos) CHECK(p.x_um < target_min_x);
    // positions unique
    for (size_t i = 0; i < g.target_pos.size(); ++i)
        for (size_t j = i + 1; j < std::min(g.target_pos.size(), i + 40); ++j)
            CHECK(distance(g.target_pos[i], g.target_pos[j]) > 1e-9);
}

TEST_CASE("vacancy identification from classifications") {
    const auto cfg = default_config();
    const auto g = OccupancyGrid::from_config(cfg);

    SECTION("all targets classified occupied leaves no vacancies") {
        std::vector<uint8_t> t(g.target_sites(), 1), r(g.reservoir_sites(), 0);
        const auto part = identify_vacancies(g, t, r);
        CHECK(part.vacant_targets.empty());
    }
    SECTION("empty grid with 52 classified sources") {
        std::vector<uint8_t> t(g.target_sites(), 0), r(g.reservoir_sites(), 0);
        for (int i = 0; i < 52; ++i) r[i] = 1;
        const auto part = identify_vacancies(g, t, r);
        CHECK(part.vacant_targets.size() == 1225);
        CHECK(part.occupied_reservoir.size() == 52);
    }
    SECTION("a false-empty classification surfaces as a vacancy") {
        std::vector<uint8_t> t(g.target_sites(), 1), r(g.reservoir_sites(), 0);
        t[77] = 0;  // truly occupied but classified empty
        const auto part = identify_vacancies(g, t, r);
        REQUIRE(part.vacant_targets.size() == 1);
        CHECK(part.vacant_targets[0] == 77);
    }
}

TEST_CASE("optimal assignment avoids crossings") {
    auto g = tiny_grid({{0.0, 0.0}, {3.3, 0.0}}, {{0.0, 3.3}, {3.3, 3.3}});
    std::vector<uint8_t> cls(g.target_sites(), 0);
    const auto plan =
        plan_moves(g, cls, {0, 1}, {0, 1}, PlannerPolicy::optimal, 1.6);
    REQUIRE(plan.moves.size() == 2);
    CHECK(plan_total(plan) == Approx(6.6).margin(1e-9));
    for (const auto& m : plan.moves) CHECK(m.source_id == m.dest_id);
}

TEST_CASE("optimal matches factorial brute force on small instances") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const int ns = 1 + static_cast<int>(rng.below(7));
        const int nv = 1 + static_cast<int>(rng.below(7));
        std::vector<SitePos> res, tgt;
        for (int i = 0; i < ns; ++i) res.push_back({rng.uniform(-40, 0), rng.uniform(-20, 20)});
        for (int i = 0; i < nv; ++i) tgt.push_back({rng.uniform(0, 60), rng.uniform(-20, 20)});
        auto g = tiny_grid(res, tgt);
        std::vector<int> sources(ns), vacancies(nv);
        std::iota(sources.begin(), sources.end(), 0);
        std::iota(vacancies.begin(), vacancies.end(), 0);
        std::vector<uint8_t> cls(nv, 0);

        const auto opt = plan_moves(g, cls, sources, vacancies, PlannerPolicy::optimal, 1.6);
        const auto grd = plan_moves(g, cls, sources, vacancies, PlannerPolicy::greedy, 1.6);
        const double brute = brute_force_min(g, sources, vacancies);
        CHECK(plan_total(opt) == Approx(brute).margin(1e-9));
        CHECK(plan_total(grd) >= plan_total(opt) - 1e-9);
        CHECK(opt.moves.size() == static_cast<size_t>(std::min(ns, nv)));

        // no source or vacancy is used twice
        std::vector<int> used_src, used_dst;
        for (const auto& m : opt.moves) {
            used_src.push_back(m.source_id);
            used_dst.push_back(m.dest_id);
        }
        std::sort(used_src.begin(), used_src.end());
        std::sort(used_dst.begin(), used_dst.end());
        CHECK(std::adjacent_find(used_src.begin(), used_src.end()) == used_src.end());
        CHECK(std::adjacent_find(used_dst.begin(), used_dst.end()) == used_dst.end());
    }
}

TEST_CASE("moves are ordered farthest destination first") {
    const auto cfg = default_config();
    auto g = OccupancyGrid::from_config(cfg);
    std::vector<uint8_t> cls(g.target_sites(), 1);
    std::vector<int> sources, vacancies;
    Rng rng(7);
    for (int i = 0; i < 40; ++i) sources.push_back(static_cast<int>(rng.below(105)));
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    for (int i = 0; i < 20; ++i) {
        int v = static_cast<int>(rng.below(1225));
        vacancies.push_back(v);
        cls[v] = 0;
    }
    std::sort(vacancies.begin(), vacancies.end());
    vacancies.erase(std::unique(vacancies.begin(), vacancies.end()), vacancies.end());

    const auto plan = plan_moves(g, cls, sources, vacancies, PlannerPolicy::optimal, 1.6);
    const auto ref = g.reservoir_centroid();
    for (size_t i = 1; i < plan.moves.size(); ++i) {
        CHECK(distance(g.target_pos[plan.moves[i - 1].dest_id], ref) >=
              distance(g.target_pos[plan.moves[i].dest_id], ref) - 1e-9);
    }
}

TEST_CASE("close-pass counting matches a hand-checked geometry") {
    // reservoir at the origin, one target row along x at 3.3 um spacing
    auto g = tiny_grid({{0.0, 0.0}},
                       {{3.3, 0.0}, {6.6, 0.0}, {9.9, 0.0}, {6.6, 3.3}, {6.6, -1.5}});
    std::vector<uint8_t> occ = {1, 1, 0, 1, 1};
    // path 0 -> site 2 at (9.9, 0): passes over sites 0 and 1 (distance 0),
    // site 3 is 3.3 away (no), site 4 is 1.5 away (yes)
    CHECK(count_close_passes(g, occ, 0, 2, 1.6) == 3);
    occ[4] = 0;
    CHECK(count_close_passes(g, occ, 0, 2, 1.6) == 2);
    // a short move to site 0 passes nothing else
    CHECK(count_close_passes(g, occ, 0, 0, 1.6) == 0);
}

TEST_CASE("scheduling") {
    PlannerParams p;
    SECTION("an empty plan costs only the compute overhead") {
        const auto plan = schedule(MovePlan{}, p);
        CHECK(plan.total_duration_ms == Approx(p.compute_overhead_ms));
    }
    SECTION("a steady-state-sized plan lands near 150 ms") {
        const auto cfg = default_config();
        auto g = OccupancyGrid::from_config(cfg);
        std::vector<uint8_t> cls(g.target_sites(), 1);
        std::vector<int> sources, vacancies;
        Rng rng(55);
        while (sources.size() < 52) {
            int s = static_cast<int>(rng.below(105));
            if (std::find(sources.begin(), sources.end(), s) == sources.end())
                sources.push_back(s);
        }
        while (vacancies.size() < 25) {
            int v = static_cast<int>(rng.below(1225));
            if (std::find(vacancies.begin(), vacancies.end(), v) == vacancies.end()) {
                vacancies.push_back(v);
                cls[v] = 0;
            }
        }
        auto plan = plan_moves(g, cls, sources, vacancies, PlannerPolicy::optimal, 1.6);
        plan = schedule(plan, cfg.planner);
        CHECK(plan.total_duration_ms > 105.0);
        CHECK(plan.total_duration_ms < 195.0);
    }
    SECTION("doubling the speed halves the path-time component") {
        MovePlan plan;
        Move m;
        m.path_length_um = 90.0;
        plan.moves.push_back(m);
        const auto slow = schedule(plan, p);
        auto fast_params = p;
        fast_params.speed_um_per_ms *= 2.0;
        const auto fast = schedule(plan, fast_params);
        const double slow_path = slow.moves[0].duration_ms - p.pickup_ramp_ms - p.release_ramp_ms;
        const double fast_path = fast.moves[0].duration_ms - p.pickup_ramp_ms - p.release_ramp_ms;
        CHECK(fast_path == Approx(slow_path / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("plan execution") {
    auto g = tiny_grid({{0.0, 0.0}, {0.0, 3.3}}, {{3.3, 0.0}, {3.3, 3.3}, {6.6, 0.0}});
    std::vector<uint8_t> cls(g.target_sites(), 0);

    SECTION("perfect models realize the plan exactly") {
        auto plan = plan_moves(g, cls, {0, 1}, {0, 1}, PlannerPolicy::optimal, 1.6);
        plan = schedule(plan, PlannerParams{});
        Rng rng(61);
        const auto res = execute_plan(plan, g, {1.0, 0.0}, 1.0, 1.6, rng);
        CHECK(res.transfers_in == 2);
        CHECK(g.occupied_targets() == 2);
        CHECK(g.target_occupied[0] == 1);
        CHECK(g.target_occupied[1] == 1);
        CHECK(res.pickup_failures == 0);
        CHECK(res.collisions == 0);
    }
    SECTION("a move into a falsely-vacant occupied site empties it") {
        g.target_occupied[0] = 1;  // truth: occupied; classification said empty
        auto plan = plan_moves(g, cls, {0}, {0}, PlannerPolicy::optimal, 1.6);
        plan = schedule(plan, PlannerParams{});
        Rng rng(67);
        const auto res = execute_plan(plan, g, {1.0, 0.0}, 1.0, 1.6, rng);
        CHECK(res.collisions == 1);
        CHECK(res.transfers_in == 1);
        CHECK(g.target_occupied[0] == 0);
    }
    SECTION("a phantom source is a no-op") {
        g.reservoir_occupied[0] = 0;
        auto plan = plan_moves(g, cls, {0}, {0}, PlannerPolicy::optimal, 1.6);
        plan = schedule(plan, PlannerParams{});
        Rng rng(71);
        const auto res = execute_plan(plan, g, {1.0, 0.0}, 1.0, 1.6, rng);
        CHECK(res.phantom_moves == 1);
        CHECK(res.transfers_in == 0);
        CHECK(g.target_occupied[0] == 0);
    }
    SECTION("occupancy grows by exactly the number of planned moves") {
        const auto cfg = default_config();
        auto big = OccupancyGrid::from_config(cfg);
        std::vector<uint8_t> classified(big.target_sites(), 1);
        Rng rng(73);
        std::vector<int> sources, vacancies;
        for (int i = 0; i < big.reservoir_sites(); ++i) {
            if (rng.bernoulli(0.5)) {
                big.reservoir_occupied[i] = 1;
                sources.push_back(i);
            }
        }
        for (int i = 0; i < 30; ++i) {
            const int v = static_cast<int>(rng.below(1225));
            if (classified[v]) {
                classified[v] = 0;
                vacancies.push_back(v);
            }
        }
        const int before = big.occupied_targets();
        auto plan = plan_moves(big, classified, sources, vacancies, PlannerPolicy::optimal, 1.6);
        plan = schedule(plan, cfg.planner);
        const auto res = execute_plan(plan, big, {1.0, 0.0}, 1.0, 1.6, rng);
        CHECK(big.occupied_targets() - before ==
              static_cast<int>(std::min(sources.size(), vacancies.size())));
        CHECK(res.transfers_in == static_cast<int>(plan.moves.size()));
    }
}

TEST_CASE("plan serialization round-trips") {
    const auto cfg = default_config();
    auto g = OccupancyGrid::from_config(cfg);
    std::vector<uint8_t> cls(g.target_sites(), 1);
    cls[3] = cls[500] = cls[1200] = 0;
    auto plan = plan_moves(g, cls, {0, 5, 30}, {3, 500, 1200}, PlannerPolicy::optimal, 1.6);
    plan = schedule(plan, cfg.planner);
    const auto text = to_jsonl(plan);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    const auto back = plan_from_jsonl(text);
    REQUIRE(back.moves.size() == plan.moves.size());
    for (size_t i = 0; i < plan.moves.size(); ++i) {
        CHECK(back.moves[i].source_id == plan.moves[i].source_id);
        CHECK(back.moves[i].dest_id == plan.moves[i].dest_id);
        CHECK(back.moves[i].path_length_um == Approx(plan.moves[i].path_length_um));
        CHECK(back.moves[i].duration_ms == Approx(plan.moves[i].duration_ms));
    }
}
