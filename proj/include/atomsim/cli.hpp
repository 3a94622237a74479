// cli.hpp -- command-line front end. dispatch() is the whole CLI behind a
// testable function: parse the verb and flags, run the requested job, write
// artifacts under the output directory, and map failures to exit codes
// (0 ok, 1 usage, 2 validation/config, 3 runtime).

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomsim/report.hpp"

namespace atomsim::cli {

namespace fs = std::filesystem;

inline SimConfig load_config_file(const std::string& path) {
    if (path.empty()) return default_config();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return load_config(ss.str());
}

/// Parse "start:stop:count" or a comma-separated list into values.
inline std::vector<double> parse_values(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double start = 0.0, stop = 0.0;
        long count = 0;
        char c1 = 0, c2 = 0;
        std::istringstream is(spec);
        if (!(is >> start >> c1 >> stop >> c2 >> count) || c1 != ':' || c2 != ':' || count < 2)
            throw ConfigError("bad sweep values, expected start:stop:count: " + spec);
        for (long i = 0; i < count; ++i)
            out.push_back(start + (stop - start) * static_cast<double>(i) / (count - 1));
        return out;
    }
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw ConfigError("bad sweep values: " + spec);
    return out;
}

/// Override one scalar in the scenario by dot path, then re-validate.
inline SimConfig with_override(const SimConfig& cfg, const std::string& key, double value) {
    json j = to_json(cfg);
    json* node = &j;
    std::istringstream is(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(is, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty sweep key");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) throw ConfigError("unknown sweep key: " + key);
        node = &(*node)[parts[i]];
    }
    if (!node->contains(parts.back())) throw ConfigError("unknown sweep key: " + key);
    (*node)[parts.back()] = value;
    return load_config(j.dump());
}

inline protocol::RunMode parse_mode(const std::string& mode) {
    if (mode == "loading") return protocol::RunMode::loading;
    if (mode == "maintenance") return protocol::RunMode::maintenance;
    throw ConfigError("mode must be \"loading\" or \"maintenance\"");
}

inline fs::path default_out_root() {
    if (const char* env = std::getenv("ATOMSIM_OUT")) return fs::path(env);
    return fs::path("out");
}

struct RunArtifacts {
    fs::path record_jsonl, record_csv, summary_txt;
};

inline RunArtifacts write_run(const fs::path& dir, const protocol::RunRecord& run,
                              bool dump_plans_unused = false) {
    (void)dump_plans_unused;
    RunArtifacts a{dir / "run_record.jsonl", dir / "run_record.csv", dir / "summary.txt"};
    report::write_file(a.record_jsonl, report::run_record_jsonl(run));
    report::write_file(a.record_csv, report::run_record_csv(run));
    report::write_file(a.summary_txt, report::render_summary(run));
    return a;
}

inline int dispatch(std::vector<std::string> args) {
    CLI::App app{"atomsim: iterative atom-array loading simulator and optics calculator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode = "loading", sweep_key, sweep_values;
    int cycles = 100, seeds = 1, pairs = 25, scan_atoms = 2000;
    uint64_t seed = 0;
    bool seed_set = false, diagnostics = false;
    std::string offsets_spec = "-0.4:0.4:41";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario JSON file (defaults when omitted)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the scenario rng_seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* run_cmd = app.add_subcommand("run", "run one simulation");
    add_common(run_cmd);
    run_cmd->add_option("--cycles", cycles, "number of loading cycles");
    run_cmd->add_option("--mode", mode, "loading | maintenance");
    run_cmd->add_flag("--diagnostic-images", diagnostics,
                      "add a post-rearrangement image every cycle");

    auto* sweep_cmd = app.add_subcommand("sweep", "run one simulation per parameter value");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--key", sweep_key, "config key to sweep, dot path")->required();
    sweep_cmd->add_option("--values", sweep_values, "start:stop:count or comma list")
        ->required();
    sweep_cmd->add_option("--cycles", cycles, "cycles per run");
    sweep_cmd->add_option("--mode", mode, "loading | maintenance");
    sweep_cmd->add_option("--seeds", seeds, "seeds per value (averaged in the summary)");
    sweep_cmd->add_flag("--diagnostic-images", diagnostics,
                        "add a post-rearrangement image every cycle");

    auto* budget_cmd = app.add_subcommand("budget", "write the per-cycle loss budget");
    add_common(budget_cmd);
    budget_cmd->add_flag("--diagnostic-images", diagnostics,
                         "budget for cycles with a diagnostic image");

    auto* optics_cmd = app.add_subcommand("optics", "write the lattice/tweezer comparison");
    add_common(optics_cmd);

    auto* align_cmd = app.add_subcommand("align", "simulate an array alignment scan");
    add_common(align_cmd);
    align_cmd->add_option("--offsets", offsets_spec, "offset scan, start:stop:count in um");
    align_cmd->add_option("--pairs", pairs, "handoff pairs per offset");
    align_cmd->add_option("--atoms", scan_atoms, "atoms per offset");

    try {
        std::reverse(args.begin(), args.end());  // CLI11's vector parse pops from the back
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help() << "\n";
            return 0;
        }
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        SimConfig cfg = load_config_file(config_path);
        if (seed_set) cfg.rng_seed = seed;
        const fs::path out = out_dir.empty() ? default_out_root() : fs::path(out_dir);

        if (run_cmd->parsed()) {
            const auto run =
                protocol::run_simulation(cfg, cycles, parse_mode(mode), diagnostics);
            write_run(out, run);
        } else if (sweep_cmd->parsed()) {
            const auto values = parse_values(sweep_values);
            const auto run_mode = parse_mode(mode);
            struct ValueResult {
                double value = 0.0;
                double pre = 0.0, post = 0.0, true_post = 0.0;
            };
            std::vector<std::future<ValueResult>> jobs;
            for (size_t vi = 0; vi < values.size(); ++vi) {
                jobs.push_back(std::async(std::launch::async, [&, vi]() {
                    SimConfig swept = with_override(cfg, sweep_key, values[vi]);
                    ValueResult res;
                    res.value = values[vi];
                    for (int s = 0; s < seeds; ++s) {
                        SimConfig seeded = swept;
                        seeded.rng_seed = swept.rng_seed + static_cast<uint64_t>(s);
                        const auto run = protocol::run_simulation(seeded, cycles, run_mode,
                                                                  diagnostics);
                        res.pre += run.summary.steady_pre_fill_mean / seeds;
                        res.post += run.summary.steady_post_fill_mean / seeds;
                        res.true_post += run.summary.steady_true_post_fill_mean / seeds;
                        if (s == 0) {
                            char sub[32];
                            std::snprintf(sub, sizeof(sub), "value_%03zu", vi);
                            write_run(out / sub, run);
                        }
                    }
                    return res;
                }));
            }
            std::ostringstream os;
            os << report::hash_header(cfg, cfg.rng_seed);
            os << "value,mean_pre_fill,mean_post_fill,mean_true_post_fill,final_vacancy\n";
            for (auto& job : jobs) {
                const auto r = job.get();
                os << report::fmt(r.value) << "," << report::fmt(r.pre, "%.6f") << ","
                   << report::fmt(r.post, "%.6f") << "," << report::fmt(r.true_post, "%.6f")
                   << "," << report::fmt(1.0 - r.true_post, "%.6f") << "\n";
            }
            report::write_file(out / "sweep_summary.csv", os.str());
        } else if (budget_cmd->parsed()) {
            const auto table = report::budget_report(cfg, diagnostics);
            report::write_file(out / "budget.csv", report::budget_csv(cfg, table));
            report::write_file(out / "budget.txt", report::budget_text(cfg, table));
        } else if (optics_cmd->parsed()) {
            const auto rep = report::optics_report(cfg.optics);
            report::write_file(out / "optics_report.txt", report::optics_text(cfg, rep));
            report::write_file(out / "optics_report.csv", report::optics_csv(cfg, rep));
            const auto& geom = cfg.optics.geometry;
            const int n = 2 * static_cast<int>(geom.array_halfwidth_um / geom.site_spacing_um /
                                               2.0) * 2 + 1;
            const auto grid = cavity::make_square_grid(n, n, geom.site_spacing_um);
            const auto map = cavity::homogeneity_map(geom, grid);
            report::write_file(out / "homogeneity_xy.csv",
                               report::homogeneity_csv(cfg, map, true));
            report::write_file(out / "homogeneity_z.csv",
                               report::homogeneity_csv(cfg, map, false));
            const auto shifts = cavity::light_shift_map(map, true, cfg.optics.xy_peak_depth_uk,
                                                        cfg.optics.excited_polarizability_ratio);
            report::write_file(out / "light_shift_xy.csv", report::light_shift_csv(cfg, shifts));
        } else if (align_cmd->parsed()) {
            const auto offsets = parse_values(offsets_spec);
            Rng rng(cfg.rng_seed);
            const auto scan =
                losses::alignment_scan(offsets, pairs, scan_atoms, 10.0, cfg, rng);
            report::write_file(out / "alignment_scan.csv", report::alignment_csv(cfg, scan));
            report::write_file(out / "alignment_summary.txt",
                               report::alignment_text(cfg, scan));
            if (!scan.fit_ok) {
                std::cerr << "alignment fit failed: " << scan.failure << "\n";
                return 3;
            }
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << e.what();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(std::move(args));
}

}  // namespace atomsim::cli
