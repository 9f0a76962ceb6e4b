// evgrid command-line front end: validate | generate | cluster | run | report
//
// Exit codes follow one rule everywhere: 0 success, 1 domain violation or
// infeasibility (bad feeder, impossible study), 2 I/O or usage error
// (unreadable file, malformed CSV/JSON, bad flags).

#include "CLI11.hpp"

#include "evgrid/charging.hpp"
#include "evgrid/clustering.hpp"
#include "evgrid/economics.hpp"
#include "evgrid/feeder_io.hpp"
#include "evgrid/profiles.hpp"
#include "evgrid/rng.hpp"
#include "evgrid/study.hpp"
#include "evgrid/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace evgrid;

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SolveError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------- validate

int cmd_validate(const std::vector<std::string>& paths) {
    int worst = 0;
    for (const std::string& path : paths) {
        std::ifstream in(path);
        if (!in) {
            std::cout << path << ": cannot open\n";
            worst = std::max(worst, 2);
            continue;
        }
        Feeder f;
        try {
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
            f = feeder_from_json(j, path);
        } catch (const std::exception& e) {
            std::cout << path << ": unparseable: " << e.what() << "\n";
            worst = std::max(worst, 2);
            continue;
        }
        auto violations = validate(f);
        if (violations.empty()) {
            std::cout << path << ": ok (" << f.buses.size() << " buses, " << f.lines.size()
                      << " lines, " << f.transformers.size() << " transformers, "
                      << f.loads.size() << " loads)\n";
        } else {
            std::cout << path << ": INVALID\n";
            for (const auto& v : violations)
                std::cout << "  [" << v.code << "] " << v.component_id << ": " << v.message
                          << "\n";
            worst = std::max(worst, 1);
        }
    }
    return worst;
}

// ---------------------------------------------------------------- generate

struct Archetype {
    const char* prefix;
    int buses;
    std::array<double, 4> class_mix; // residential, commercial, industrial, mixed
    std::array<double, 3> size_mix;
    double long_lateral_mi;
    double util_lo, util_hi;
};

// One template per corpus slot; slot i beyond the list wraps around with a
// fresh seed, so any corpus size stays deterministic. Slot 0 is the heavily
// residential feeder whose base load peaks in the early evening.
constexpr Archetype kArchetypes[] = {
    {"res-evening", 32, {0.92, 0.05, 0.00, 0.03}, {0.75, 0.20, 0.05}, 0.0, 0.62, 0.88},
    {"res-lateral", 26, {0.85, 0.08, 0.00, 0.07}, {0.70, 0.25, 0.05}, 1.6, 0.58, 0.85},
    {"suburban", 30, {0.65, 0.20, 0.03, 0.12}, {0.60, 0.30, 0.10}, 0.0, 0.55, 0.82},
    {"commercial", 24, {0.25, 0.55, 0.05, 0.15}, {0.35, 0.40, 0.25}, 0.0, 0.50, 0.78},
    {"industrial", 20, {0.30, 0.20, 0.40, 0.10}, {0.30, 0.40, 0.30}, 0.8, 0.50, 0.80},
    {"rural-long", 18, {0.80, 0.10, 0.02, 0.08}, {0.80, 0.15, 0.05}, 2.5, 0.55, 0.80},
    {"urban-dense", 40, {0.55, 0.35, 0.02, 0.08}, {0.45, 0.35, 0.20}, 0.0, 0.52, 0.80},
};
constexpr int kArchetypeCount = static_cast<int>(std::size(kArchetypes));

struct GenerateArgs {
    std::string out;
    int feeders = 7;
    std::uint64_t seed = 1;
    int first_year = 2022;
    int last_year = 2035;
    int fleet_start = 4;
    int fleet_final = 60;
    int sessions = 0;
    bool no_config = false;
};

int cmd_generate(const GenerateArgs& a) {
    if (a.feeders < 0) throw ConfigError("--feeders must be >= 0");
    if (a.last_year < a.first_year) throw ConfigError("year range runs backward");
    fs::create_directories(a.out);
    StudyConfig cfg;
    cfg.name = "demo";
    cfg.years = {a.first_year, a.last_year};
    cfg.seed = a.seed;
    if (a.feeders == 0) {
        std::cout << "0 feeders requested; wrote nothing\n";
        return 0;
    }
    fs::create_directories(fs::path(a.out) / "feeders");
    for (int i = 0; i < a.feeders; ++i) {
        const Archetype& arc = kArchetypes[i % kArchetypeCount];
        char id[64];
        std::snprintf(id, sizeof id, "%s-%02d", arc.prefix, i / kArchetypeCount + 1);
        SyntheticFeederSpec spec;
        spec.id = id;
        spec.bus_count = arc.buses;
        spec.class_mix = arc.class_mix;
        spec.size_mix = arc.size_mix;
        spec.long_lateral_mi = arc.long_lateral_mi;
        spec.min_utilization = arc.util_lo;
        spec.max_utilization = arc.util_hi;
        spec.seed = mix64(a.seed ^ fnv1a64(id));
        Feeder f = generate_synthetic_feeder(spec);
        std::string rel = "feeders/" + std::string(id) + ".json";
        save_feeder(f, fs::path(a.out) / rel);
        cfg.feeder_files.push_back(rel);
        std::cout << "wrote " << rel << " (" << f.buses.size() << " buses)\n";
        if (a.sessions > 0) {
            fs::create_directories(fs::path(a.out) / "sessions");
            auto fleet = generate_sessions(f, a.sessions, BehaviorSpec{},
                                           mix64(a.seed ^ fnv1a64("sessions") ^ fnv1a64(id)));
            std::string srel = "sessions/" + std::string(id) + ".csv";
            save_sessions(fleet, fs::path(a.out) / srel);
            std::cout << "wrote " << srel << "\n";
        }
    }
    save_profiles(ProfileStore::builtin(), fs::path(a.out) / "profiles.csv");
    std::cout << "wrote profiles.csv\n";
    save_cost_table(CostTable::builtin(), fs::path(a.out) / "cost_table.csv");
    std::cout << "wrote cost_table.csv\n";
    if (!a.no_config) {
        int span = cfg.years.count() - 1;
        for (int y = cfg.years.first; y <= cfg.years.last; ++y) {
            double t = span > 0 ? static_cast<double>(y - cfg.years.first) / span : 1.0;
            cfg.fleet_by_year[y] =
                static_cast<int>(std::lround(a.fleet_start + t * (a.fleet_final - a.fleet_start)));
        }
        cfg.profiles_file = "profiles.csv";
        cfg.cost_table_file = "cost_table.csv";
        std::ofstream out(fs::path(a.out) / "study.json");
        out << study_config_to_json(cfg).dump(2) << "\n";
        std::cout << "wrote study.json\n";
    }
    return 0;
}

// ----------------------------------------------------------------- cluster

struct ClusterArgs {
    std::vector<std::string> feeder_paths;
    std::string features_file;
    std::string profiles_file;
    std::string out = "cluster_report.csv";
    std::string save_features_file;
    int k_min = 1;
    int k_max = 10;
    std::uint64_t seed = 1;
    double variance = 0.95;
    int restarts = 10;
    int fleet = 0;
};

int cmd_cluster(const ClusterArgs& a) {
    std::vector<FeederFeatures> features;
    if (!a.features_file.empty()) {
        features = load_features(a.features_file);
    } else {
        if (a.feeder_paths.empty())
            throw ConfigError("give feeder files or --features (see --help)");
        ProfileStore profiles =
            a.profiles_file.empty() ? ProfileStore::builtin() : load_profiles(a.profiles_file);
        for (const std::string& path : a.feeder_paths) {
            Feeder f = load_feeder(path);
            std::map<DayType, std::array<double, 24>> ev;
            for (DayType d : {DayType::winter, DayType::summer, DayType::shoulder}) {
                ev[d] = {};
                if (a.fleet > 0) {
                    auto fleet = generate_sessions(
                        f, a.fleet, BehaviorSpec{},
                        mix64(a.seed ^ fnv1a64("sessions") ^ fnv1a64(f.id) ^
                              fnv1a64(to_string(d))));
                    std::vector<ChargingSchedule> sched;
                    sched.reserve(fleet.size());
                    for (const EVSession& s : fleet) sched.push_back(unmanaged_schedule(s));
                    for (const auto& [bus, kw] : aggregate_ev_load(fleet, sched))
                        for (int h = 0; h < 24; ++h)
                            ev[d][static_cast<std::size_t>(h)] += kw[static_cast<std::size_t>(h)];
                }
            }
            features.push_back(extract_features(f, profiles, ev));
        }
    }
    if (features.size() < 3)
        throw ConfigError("clustering needs at least 3 feeders (got " +
                          std::to_string(features.size()) + ")");
    std::vector<int> k_range;
    for (int k = a.k_min; k <= std::min<int>(a.k_max, static_cast<int>(features.size())); ++k)
        k_range.push_back(k);
    if (k_range.size() < 3)
        throw ConfigError("k range leaves fewer than 3 candidates; widen --k-min/--k-max");

    ClusteringRun run = cluster_feeders(features, k_range, a.seed, a.variance, a.restarts);

    if (!a.save_features_file.empty()) {
        save_features(features, a.save_features_file);
        std::cout << "wrote " << a.save_features_file << "\n";
    }
    std::cout << "feeders: " << features.size() << "\n";
    std::cout << "pca: " << run.pca.reduced_dim() << " of " << run.pca.input_dim()
              << " dimensions kept\n";
    std::cout << "wcss curve:\n";
    for (std::size_t i = 0; i < run.elbow.k_values.size(); ++i)
        std::printf("  k=%-3d wcss=%.6g\n", run.elbow.k_values[i], run.elbow.wcss[i]);
    std::cout << "selected k = " << run.elbow.k << " (elbow)\n";
    std::map<int, int> members;
    for (int c : run.model.assignment) ++members[c];
    for (int c = 0; c < run.model.k; ++c) {
        std::cout << "cluster " << c << " (" << members[c] << " members): representative ";
        std::cout << (run.representatives[static_cast<std::size_t>(c)]
                          ? *run.representatives[static_cast<std::size_t>(c)]
                          : std::string("<empty>"))
                  << "\n";
    }
    save_cluster_report(run.report(), a.out);
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// --------------------------------------------------------------------- run

struct RunArgs {
    std::string config_path;
    std::string out;
    int jobs = -1;
    std::int64_t seed = -1;
};

void print_table(const std::vector<TableRow>& rows) {
    std::printf("%-16s %-10s %10s %10s %10s %10s %10s\n", "feeder", "strategy", "peak%",
                "overload%", "tx-cost%", "line%", "npv%");
    auto cell = [](double v) {
        char buf[16];
        if (std::isnan(v))
            std::snprintf(buf, sizeof buf, "%10s", "-");
        else
            std::snprintf(buf, sizeof buf, "%10.1f", v);
        return std::string(buf);
    };
    for (const TableRow& r : rows)
        std::printf("%-16s %-10s %s %s %s %s %s\n", r.feeder_id.c_str(),
                    to_string(r.strategy).c_str(), cell(r.peak_load_reduction_pct).c_str(),
                    cell(r.overload_reduction_pct).c_str(),
                    cell(r.transformer_cost_reduction_pct).c_str(),
                    cell(r.line_cost_reduction_pct).c_str(), cell(r.npv_reduction_pct).c_str());
}

int cmd_run(const RunArgs& a) {
    StudyConfig cfg = load_study_config(a.config_path);
    if (a.jobs >= 0) cfg.jobs = a.jobs;
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    fs::path out_dir = a.out.empty() ? fs::path(cfg.name + "-run") : fs::path(a.out);

    std::cout << "study " << cfg.name << ": " << cfg.feeder_files.size() << " feeders x "
              << cfg.strategies.size() << " strategies x " << cfg.scenarios.size()
              << " scenarios, years " << cfg.years.first << "-" << cfg.years.last << "\n";
    auto t0 = std::chrono::steady_clock::now();
    StudyResult result = run_study(cfg, out_dir);
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    int baseline = *std::min_element(cfg.scenarios.begin(), cfg.scenarios.end());
    int compare = *std::max_element(cfg.scenarios.begin(), cfg.scenarios.end());
    if (baseline != compare) {
        std::cout << "\nreductions, scenario " << compare << " vs baseline " << baseline
                  << " (final year):\n";
        print_table(compute_table(result, baseline, compare));
    }
    std::size_t residual = 0;
    for (const CellResult& c : result.cells) residual += c.residual.size();
    std::printf("\n%zu cells in %.1f s; %zu unresolved violations across all plans\n",
                result.cells.size(), dt, residual);
    std::cout << "artifacts: " << out_dir.string() << "\n";
    std::cout << "manifest digest: " << result.manifest_digest << "\n";
    return residual == 0 ? 0 : 1;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
    std::string run_dir;
    std::string out;
    int baseline = -1;
    int scenario = -1;
};

int cmd_report(const ReportArgs& a) {
    StudyResult result = load_study_artifacts(a.run_dir);
    const auto& sc = result.config.scenarios;
    int baseline = a.baseline >= 0 ? a.baseline : *std::min_element(sc.begin(), sc.end());
    int scenario = a.scenario >= 0 ? a.scenario : *std::max_element(sc.begin(), sc.end());
    fs::path out_dir = a.out.empty() ? fs::path(a.run_dir) / "report" : fs::path(a.out);
    fs::create_directories(out_dir);

    auto rows = compute_table(result, baseline, scenario);
    std::cout << "reductions, scenario " << scenario << " vs baseline " << baseline
              << " (final year):\n";
    print_table(rows);
    save_table(rows, out_dir / "table.csv");
    auto written = emit_plot_data(result, out_dir / "plots");
    std::cout << "wrote " << (out_dir / "table.csv").string() << "\n";
    for (const std::string& name : written)
        std::cout << "wrote " << (out_dir / "plots" / name).string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distribution-grid EV charging impact toolkit"};
    app.set_version_flag("--version", "evgrid 0.1.0");
    app.require_subcommand(1);

    std::vector<std::string> validate_paths;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check feeder files against the model invariants");
    validate_cmd->add_option("files", validate_paths, "feeder JSON files")->required();

    GenerateArgs gen;
    CLI::App* gen_cmd =
        app.add_subcommand("generate", "write a deterministic synthetic corpus");
    gen_cmd->add_option("-o,--out", gen.out, "output directory")->required();
    gen_cmd->add_option("-n,--feeders", gen.feeders, "feeder count")
        ->capture_default_str();
    gen_cmd->add_option("-s,--seed", gen.seed, "master seed")->capture_default_str();
    gen_cmd->add_option("--first-year", gen.first_year, "study start")->capture_default_str();
    gen_cmd->add_option("--last-year", gen.last_year, "study end")->capture_default_str();
    gen_cmd->add_option("--fleet-start", gen.fleet_start, "sessions per feeder, first year")
        ->capture_default_str();
    gen_cmd->add_option("--fleet-final", gen.fleet_final, "sessions per feeder, last year")
        ->capture_default_str();
    gen_cmd->add_option("--sessions", gen.sessions,
                        "also write a sample session file per feeder with this many sessions")
        ->capture_default_str();
    gen_cmd->add_flag("--no-config", gen.no_config, "skip study.json");

    ClusterArgs cl;
    CLI::App* cluster_cmd = app.add_subcommand(
        "cluster", "group feeders by electrical similarity and pick representatives");
    cluster_cmd->add_option("files", cl.feeder_paths, "feeder JSON files");
    auto* feat_opt =
        cluster_cmd->add_option("--features", cl.features_file, "precomputed features CSV");
    cluster_cmd->add_option("--profiles", cl.profiles_file,
                            "profiles CSV (default: builtin class shapes)");
    cluster_cmd->add_option("-o,--out", cl.out, "report CSV path")->capture_default_str();
    cluster_cmd->add_option("--save-features", cl.save_features_file,
                            "also write the feature matrix CSV");
    cluster_cmd->add_option("--k-min", cl.k_min, "smallest k candidate")->capture_default_str();
    cluster_cmd->add_option("--k-max", cl.k_max, "largest k candidate")->capture_default_str();
    cluster_cmd->add_option("-s,--seed", cl.seed, "k-means seed")->capture_default_str();
    cluster_cmd->add_option("--variance", cl.variance, "PCA explained-variance target")
        ->capture_default_str();
    cluster_cmd->add_option("--restarts", cl.restarts, "k-means restarts")->capture_default_str();
    cluster_cmd->add_option("--fleet", cl.fleet,
                            "sessions per feeder for the EV-peak feature (0 = no EV load)")
        ->capture_default_str();
    feat_opt->excludes("files");

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand(
        "run", "execute a study config: simulate, plan upgrades, cost, report");
    run_cmd->add_option("config", run_args.config_path, "study config JSON")->required();
    run_cmd->add_option("-o,--out", run_args.out, "run directory (default: <name>-run)");
    run_cmd->add_option("-j,--jobs", run_args.jobs, "worker threads (default: hardware)");
    run_cmd->add_option("-s,--seed", run_args.seed, "override the config seed");

    ReportArgs rep;
    CLI::App* report_cmd = app.add_subcommand(
        "report", "recompute the comparison table and plot data from a run directory");
    report_cmd->add_option("run_dir", rep.run_dir, "directory written by `run`")->required();
    report_cmd->add_option("-o,--out", rep.out, "output directory (default: <run_dir>/report)");
    report_cmd->add_option("--baseline", rep.baseline, "baseline scenario (default: smallest)");
    report_cmd->add_option("--scenario", rep.scenario, "compared scenario (default: largest)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*validate_cmd) return guarded([&] { return cmd_validate(validate_paths); });
    if (*gen_cmd) return guarded([&] { return cmd_generate(gen); });
    if (*cluster_cmd) return guarded([&] { return cmd_cluster(cl); });
    if (*run_cmd) return guarded([&] { return cmd_run(run_args); });
    if (*report_cmd) return guarded([&] { return cmd_report(rep); });
    return 2;
}
