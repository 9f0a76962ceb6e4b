#include "doctest.h"

#include "evgrid/csv.hpp"
#include "evgrid/feeder_io.hpp"
#include "evgrid/study.hpp"
#include "evgrid/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evgrid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One small study shared by the integration cases below: a 30-bus synthetic
// feeder over the last three ramp years (so scenario 4 actually enrolls a
// useful share of the fleet), all strategies, scenarios 1 and 4.
struct SmallStudy {
    StudyInputs inputs;
    StudyConfig cfg;
    fs::path dir_a;
    StudyResult run_a;
};

SmallStudy build_small_study() {
    SmallStudy s;
    SyntheticFeederSpec spec;
    spec.id = "f1";
    spec.seed = 7;
    s.inputs.feeders.push_back(generate_synthetic_feeder(spec));
    s.inputs.profiles = ProfileStore::builtin();
    s.inputs.costs = CostTable::builtin();
    s.cfg.name = "small";
    s.cfg.years = {2033, 2035};
    s.cfg.scenarios = {1, 4};
    s.cfg.seed = 11;
    s.cfg.fleet_by_year = {{2033, 30}, {2034, 35}, {2035, 40}};
    s.dir_a = fresh_dir("evgrid_study_a");
    s.run_a = run_study(s.inputs, s.cfg, s.dir_a);
    return s;
}

const SmallStudy& small_study() {
    static SmallStudy s = build_small_study();
    return s;
}

std::string cell_rel(const std::string& feeder, Strategy strat, int scenario,
                     const std::string& file) {
    return "cells/" + feeder + "/" + to_string(strat) + "/scenario-" + std::to_string(scenario) +
           "/" + file;
}

} // namespace

TEST_CASE("strategy names round trip") {
    for (Strategy s : {Strategy::unmanaged, Strategy::tou, Strategy::lb})
        CHECK(strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(strategy_from_string("TOU"), ParseError);
    CHECK_THROWS_AS(strategy_from_string(""), ParseError);
}

TEST_CASE("study config round trips through json") {
    StudyConfig c;
    c.name = "roundtrip";
    c.years = {2024, 2028};
    c.strategies = {Strategy::lb, Strategy::tou};
    c.scenarios = {2, 3};
    c.seed = 99;
    c.jobs = 3;
    c.discount_rate = 0.05;
    c.lb_threshold = 0.8;
    c.behavior.residential_weight = 0.6;
    c.behavior.residential.plugin_mean = 19.0;
    c.behavior.commercial.duration_sd = 1.5;
    c.behavior.energy_max_kwh = 60.0;
    c.behavior.charger_share = {0.5, 0.3, 0.2};
    c.fleet_by_year = {{2024, 5}, {2025, 6}, {2026, 7}, {2027, 8}, {2028, 9}};
    c.fleet_scale = {{"f1", 0.5}, {"f2", 2.0}};
    c.solver.tolerance = 1e-9;
    c.solver.max_iterations = 80;
    c.limits.min_pu = 0.94;
    c.feeder_files = {"feeders/f1.json", "feeders/f2.json"};
    c.profiles_file = "profiles.csv";
    c.cost_table_file = "costs.csv";

    fs::path p = fs::temp_directory_path() / "evgrid_cfg_rt.json";
    {
        std::ofstream out(p);
        out << study_config_to_json(c).dump(2) << "\n";
    }
    StudyConfig r = load_study_config(p);
    CHECK(r.name == c.name);
    CHECK(r.years.first == 2024);
    CHECK(r.years.last == 2028);
    CHECK(r.strategies == c.strategies);
    CHECK(r.scenarios == c.scenarios);
    CHECK(r.seed == c.seed);
    CHECK(r.discount_rate == c.discount_rate);
    CHECK(r.lb_threshold == c.lb_threshold);
    CHECK(r.behavior.residential_weight == c.behavior.residential_weight);
    CHECK(r.behavior.residential.plugin_mean == 19.0);
    CHECK(r.behavior.commercial.duration_sd == 1.5);
    CHECK(r.behavior.energy_max_kwh == 60.0);
    CHECK(r.behavior.charger_share == c.behavior.charger_share);
    CHECK(r.fleet_by_year == c.fleet_by_year);
    CHECK(r.fleet_scale == c.fleet_scale);
    CHECK(r.solver.tolerance == c.solver.tolerance);
    CHECK(r.solver.max_iterations == c.solver.max_iterations);
    CHECK(r.limits.min_pu == c.limits.min_pu);
    CHECK(r.feeder_files == c.feeder_files);
    CHECK(r.profiles_file == c.profiles_file);
    CHECK(r.cost_table_file == c.cost_table_file);
    CHECK(r.base_dir == p.parent_path());
    // jobs is an execution knob, not part of the canonical serialization
    CHECK(r.jobs == 0);
}

TEST_CASE("config loader rejects unknown keys and bad values") {
    fs::path p = fs::temp_directory_path() / "evgrid_cfg_bad.json";
    auto write = [&](const std::string& text) {
        std::ofstream out(p);
        out << text;
    };
    write(R"({"yeras": {"first": 2022, "last": 2025}})");
    CHECK_THROWS_AS(load_study_config(p), ParseError);
    write(R"({"years": {"first": 2022, "last": 2025, "step": 1}})");
    CHECK_THROWS_AS(load_study_config(p), ParseError);
    write(R"({"years": {"first": 2030, "last": 2025}})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"strategies": []})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"strategies": ["tou", "tou"]})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"scenarios": [1, 5]})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"fleet": {"2022": 5}})"); // missing later study years
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"fleet": {"soon": 5}})");
    CHECK_THROWS_AS(load_study_config(p), ParseError);
    write(R"({"discount_rate": -1.0})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"lb_threshold": 0})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write(R"({"limits": {"min_pu": 1.2}})");
    CHECK_THROWS_AS(load_study_config(p), ConfigError);
    write("{not json");
    CHECK_THROWS_AS(load_study_config(p), ParseError);
    CHECK_THROWS_AS(load_study_config(fs::temp_directory_path() / "evgrid_absent.json"),
                    ParseError);
}

TEST_CASE("run_study fills the full grid in declared order") {
    const SmallStudy& s = small_study();
    const StudyResult& r = s.run_a;
    REQUIRE(r.cells.size() == 6); // 1 feeder x 3 strategies x 2 scenarios
    CHECK(r.feeder_ids == std::vector<std::string>{"f1"});
    std::size_t i = 0;
    for (Strategy strat : s.cfg.strategies)
        for (int sc : s.cfg.scenarios) {
            CHECK(r.cells[i].feeder_id == "f1");
            CHECK(r.cells[i].strategy == strat);
            CHECK(r.cells[i].scenario == sc);
            ++i;
        }
    CHECK(r.find("f1", Strategy::lb, 4) != nullptr);
    CHECK(r.find("f1", Strategy::lb, 2) == nullptr);
    CHECK(r.find("f9", Strategy::lb, 4) == nullptr);
    for (const CellResult& c : r.cells) {
        REQUIRE(c.years.size() == 3);
        CHECK(c.profile.size() == 3u * 3u * 24u);
        CHECK(c.voltage.size() == s.inputs.feeders[0].buses.size());
        CHECK(c.transformer_total == static_cast<int>(s.inputs.feeders[0].transformers.size()));
    }
}

TEST_CASE("study invariants: balance, TOU window, energy accounting") {
    const SmallStudy& s = small_study();
    for (const CellResult& c : s.run_a.cells) {
        CHECK(c.max_balance_error < 1e-8);
        CHECK(c.max_energy_residual_kwh < 1e-9);
        if (c.strategy == Strategy::tou) CHECK(c.tou_window_max_kw == 0.0);
        // head power equals modeled load + EV + losses (constant-power loads)
        for (const HourPoint& p : c.profile) {
            double rhs = p.base_kw + p.ev_kw + p.losses_kw;
            CHECK(std::abs(p.head_kw - rhs) <= 1e-6 * std::max(1.0, std::abs(p.head_kw)));
        }
    }
}

TEST_CASE("ev delivery grows with the fleet and the plan clears violations") {
    const SmallStudy& s = small_study();
    for (const CellResult& c : s.run_a.cells) {
        CHECK(c.years[0].ev_delivered_kwh < c.years[1].ev_delivered_kwh);
        CHECK(c.years[1].ev_delivered_kwh < c.years[2].ev_delivered_kwh);
        CHECK(c.residual.empty()); // prune keeps plans verifying clean
        for (std::size_t y = 1; y < c.years.size(); ++y)
            CHECK(c.years[y].overloaded_tx_cum >= c.years[y - 1].overloaded_tx_cum);
        double spend = 0.0;
        for (const YearMetrics& m : c.years) spend += m.spend_usd;
        CHECK(spend == doctest::Approx(c.costs.total()));
    }
    // the stress years must actually exercise the planner for the comparison
    // cases below to mean anything
    const CellResult* base = s.run_a.find("f1", Strategy::unmanaged, 4);
    REQUIRE(base != nullptr);
    CHECK(!base->violations.empty());
    CHECK(!base->plan.empty());
}

TEST_CASE("scenario 1 is strategy-invariant and unmanaged ignores scenarios") {
    const SmallStudy& s = small_study();
    // enrollment is zero everywhere under scenario 1, so every strategy
    // degenerates to unmanaged charging: identical bytes, not just close
    std::string un = slurp(s.dir_a / cell_rel("f1", Strategy::unmanaged, 1, "metrics.csv"));
    CHECK(un == slurp(s.dir_a / cell_rel("f1", Strategy::tou, 1, "metrics.csv")));
    CHECK(un == slurp(s.dir_a / cell_rel("f1", Strategy::lb, 1, "metrics.csv")));
    for (const char* f : {"plan.csv", "violations.csv", "load_profile.csv"}) {
        std::string b = slurp(s.dir_a / cell_rel("f1", Strategy::unmanaged, 1, f));
        CHECK(b == slurp(s.dir_a / cell_rel("f1", Strategy::tou, 1, f)));
        CHECK(b == slurp(s.dir_a / cell_rel("f1", Strategy::lb, 1, f)));
    }
    // unmanaged charging never reads the enrolled flag
    CHECK(slurp(s.dir_a / cell_rel("f1", Strategy::unmanaged, 1, "metrics.csv")) ==
          slurp(s.dir_a / cell_rel("f1", Strategy::unmanaged, 4, "metrics.csv")));
}

TEST_CASE("smart charging directionals on the stressed scenario") {
    const SmallStudy& s = small_study();
    const CellResult* un = s.run_a.find("f1", Strategy::unmanaged, 4);
    const CellResult* tou = s.run_a.find("f1", Strategy::tou, 4);
    const CellResult* lb = s.run_a.find("f1", Strategy::lb, 4);
    REQUIRE(un != nullptr);
    REQUIRE(tou != nullptr);
    REQUIRE(lb != nullptr);
    auto tx_overload_records = [](const CellResult& c) {
        std::size_t n = 0;
        for (const ViolationRecord& v : c.violations)
            if (v.kind == ViolationKind::transformer_overload) ++n;
        return n;
    };
    // balancing caps asset loading below the overload threshold, so adding
    // enrollment can only remove overload hours relative to unmanaged
    CHECK(tx_overload_records(*lb) <= tx_overload_records(*un));
    CHECK(lb->years.back().overloaded_tx_cum <= un->years.back().overloaded_tx_cum);
    CHECK(lb->npv_usd <= un->npv_usd);
    // TOU moves energy out of the evening window; it must not *raise* the
    // modeled peak above unmanaged here (it can match it off-window)
    CHECK(tou->years.back().peak_load_kw <= un->years.back().peak_load_kw * (1.0 + 1e-9));
}

TEST_CASE("reruns are byte-identical regardless of thread count") {
    const SmallStudy& s = small_study();
    StudyConfig serial = s.cfg;
    serial.jobs = 1;
    fs::path dir_b = fresh_dir("evgrid_study_b");
    StudyResult run_b = run_study(s.inputs, serial, dir_b);
    CHECK(run_b.manifest_digest == s.run_a.manifest_digest);
    CHECK(slurp(dir_b / "table.csv") == slurp(s.dir_a / "table.csv"));
    CHECK(slurp(dir_b / "manifest.json") == slurp(s.dir_a / "manifest.json"));
    CHECK(slurp(dir_b / cell_rel("f1", Strategy::lb, 4, "metrics.csv")) ==
          slurp(s.dir_a / cell_rel("f1", Strategy::lb, 4, "metrics.csv")));
}

TEST_CASE("artifact tree carries identity in paths, not rows") {
    const SmallStudy& s = small_study();
    CsvTable metrics = read_csv(s.dir_a / cell_rel("f1", Strategy::tou, 4, "metrics.csv"));
    CHECK(metrics.column("feeder") == -1);
    CHECK(metrics.column("strategy") == -1);
    CHECK(metrics.column("scenario") == -1);
    CHECK(metrics.column("year") == 0);
    CHECK(metrics.rows.size() == 3);

    CsvTable summary = read_csv(s.dir_a / cell_rel("f1", Strategy::tou, 4, "summary.csv"));
    REQUIRE(summary.rows.size() == 1);
    CHECK(summary.column("npv_usd") >= 0);
    CHECK(summary.column("max_balance_error") >= 0);

    // sessions are per (feeder, day): the max-fleet template
    auto sessions = load_sessions(s.dir_a / "sessions/f1-winter.csv");
    CHECK(sessions.size() == 40);
    CHECK(fs::exists(s.dir_a / "sessions/f1-summer.csv"));
    CHECK(fs::exists(s.dir_a / "sessions/f1-shoulder.csv"));

    // the config echo loads back to an equivalent study
    StudyConfig echo = load_study_config(s.dir_a / "config.json");
    CHECK(echo.name == s.cfg.name);
    CHECK(echo.seed == s.cfg.seed);
    CHECK(echo.fleet_by_year == s.cfg.fleet_by_year);

    auto manifest = nlohmann::json::parse(slurp(s.dir_a / "manifest.json"));
    CHECK(manifest.at("complete").get<bool>());
    CHECK(manifest.at("schema_version").get<int>() == 1);
    CHECK(manifest.at("artifacts").size() >= 6u * 7u + 5u + 3u + 2u);
    for (const auto& a : manifest.at("artifacts"))
        CHECK(fs::exists(s.dir_a / a.at("path").get<std::string>()));
}

TEST_CASE("plot data covers every figure and stays monotone where promised") {
    const SmallStudy& s = small_study();
    fs::path dir = fresh_dir("evgrid_plots");
    auto written = emit_plot_data(s.run_a, dir);
    CHECK(written.size() == 5);
    for (const std::string& name : written) CHECK(fs::exists(dir / name));

    CsvTable lp = read_csv(dir / "load_profiles.csv");
    CHECK(lp.rows.size() == 6u * 3u * 24u); // cells x days x hours, final year only

    CsvTable trend = read_csv(dir / "overload_trend.csv");
    CHECK(trend.rows.size() == 6u * 3u);
    int share = trend.column("overloaded_share_cum_pct");
    REQUIRE(share >= 0);
    for (std::size_t i = 1; i < trend.rows.size(); ++i) {
        bool same_series = true;
        for (int c = 0; c < 3; ++c)
            if (trend.rows[i][static_cast<std::size_t>(c)] !=
                trend.rows[i - 1][static_cast<std::size_t>(c)])
                same_series = false;
        if (same_series)
            CHECK(std::stod(trend.rows[i][static_cast<std::size_t>(share)]) >=
                  std::stod(trend.rows[i - 1][static_cast<std::size_t>(share)]));
    }

    // an empty study still yields headers-only files
    StudyResult empty;
    empty.config = s.cfg;
    fs::path edir = fresh_dir("evgrid_plots_empty");
    emit_plot_data(empty, edir);
    CsvTable e = read_csv(edir / "npv.csv");
    CHECK(e.header.size() == 4);
    CHECK(e.rows.empty());
}

TEST_CASE("compute_table arithmetic and degenerate baselines") {
    StudyResult r;
    r.config.scenarios = {1, 4};
    r.config.strategies = {Strategy::unmanaged};
    r.feeder_ids = {"f1"};
    auto cell = [](int scenario, double peak, int overloads, double tx_cost, double line_cost,
                   double npv_usd) {
        CellResult c;
        c.feeder_id = "f1";
        c.strategy = Strategy::unmanaged;
        c.scenario = scenario;
        YearMetrics m;
        m.year = 2035;
        m.peak_load_kw = peak;
        m.overloaded_tx_cum = overloads;
        c.years.push_back(m);
        if (tx_cost > 0) c.costs.by_kind[UpgradeKind::resize_transformer] = tx_cost;
        if (line_cost > 0) c.costs.by_kind[UpgradeKind::resize_line] = line_cost;
        c.npv_usd = npv_usd;
        return c;
    };
    r.cells.push_back(cell(1, 100.0, 4, 2000.0, 0.0, 1000.0));
    r.cells.push_back(cell(4, 90.0, 2, 1500.0, 120.0, 800.0));

    auto rows = compute_table(r, 1, 4);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].peak_load_reduction_pct == doctest::Approx(10.0));
    CHECK(rows[0].overload_reduction_pct == doctest::Approx(50.0));
    CHECK(rows[0].transformer_cost_reduction_pct == doctest::Approx(25.0));
    // 0 baseline vs 120: no defined percentage
    CHECK(std::isnan(rows[0].line_cost_reduction_pct));
    CHECK(rows[0].npv_reduction_pct == doctest::Approx(20.0));

    // 0 vs 0 reads as no change
    r.cells[1].costs.by_kind.erase(UpgradeKind::resize_line);
    rows = compute_table(r, 1, 4);
    CHECK(rows[0].line_cost_reduction_pct == 0.0);

    CHECK_THROWS_AS(compute_table(r, 2, 4), ConfigError);
    CHECK_THROWS_AS(compute_table(r, 1, 3), ConfigError);

    // NaN serializes as an empty field
    r.cells[1].costs.by_kind[UpgradeKind::resize_line] = 120.0;
    rows = compute_table(r, 1, 4);
    fs::path p = fs::temp_directory_path() / "evgrid_table_nan.csv";
    save_table(rows, p);
    CsvTable t = read_csv(p);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][static_cast<std::size_t>(t.column("line_cost_reduction_pct"))] == "");
    CHECK(t.rows[0][static_cast<std::size_t>(t.column("npv_reduction_pct"))] == "20");
}

TEST_CASE("artifacts reload into an equivalent result") {
    const SmallStudy& s = small_study();
    StudyResult r = load_study_artifacts(s.dir_a);
    CHECK(r.feeder_ids == s.run_a.feeder_ids);
    REQUIRE(r.cells.size() == s.run_a.cells.size());
    CHECK(r.manifest_digest == s.run_a.manifest_digest);

    const CellResult* x = r.find("f1", Strategy::lb, 4);
    const CellResult* y = s.run_a.find("f1", Strategy::lb, 4);
    REQUIRE(x != nullptr);
    // fmt_double is shortest-round-trip, so parsed values are bit-equal
    CHECK(x->npv_usd == y->npv_usd);
    CHECK(x->years.back().peak_load_kw == y->years.back().peak_load_kw);
    CHECK(x->years.back().overloaded_tx_cum == y->years.back().overloaded_tx_cum);
    CHECK(x->max_balance_error == y->max_balance_error);
    CHECK(x->profile.size() == y->profile.size());
    CHECK(x->voltage.size() == y->voltage.size());
    CHECK(x->plan == y->plan);
    CHECK(x->violations == y->violations);

    // reporting from reloaded artifacts reproduces the original bytes
    fs::path t1 = fs::temp_directory_path() / "evgrid_reload_t1.csv";
    fs::path t2 = fs::temp_directory_path() / "evgrid_reload_t2.csv";
    save_table(compute_table(s.run_a, 1, 4), t1);
    save_table(compute_table(r, 1, 4), t2);
    CHECK(slurp(t1) == slurp(t2));
    fs::path pdir = fresh_dir("evgrid_reload_plots");
    emit_plot_data(r, pdir);
    for (const char* f : {"load_profiles.csv", "npv.csv", "overload_trend.csv"})
        CHECK(slurp(pdir / f) == slurp(s.dir_a / "plots" / f));

    CHECK_THROWS_AS(load_study_artifacts(fs::temp_directory_path() / "evgrid_no_run"),
                    ParseError);
}

TEST_CASE("build_cell_horizon reproduces the charging the run saw") {
    const SmallStudy& s = small_study();
    const CellResult* c = s.run_a.find("f1", Strategy::lb, 4);
    REQUIRE(c != nullptr);
    EvHorizon ev = build_cell_horizon(s.inputs, s.cfg, "f1", Strategy::lb, 4);
    // the emitted plan verifies clean against the independently rebuilt horizon
    VerifyReport rep = verify_plan(s.inputs.feeders[0], s.inputs.profiles, ev, s.cfg.years,
                                   c->plan, s.cfg.limits, s.cfg.solver);
    CHECK(rep.clean());
    // and the plan is 1-minimal against that same horizon
    REQUIRE(!c->plan.empty());
    for (std::size_t i = 0; i < c->plan.size(); ++i) {
        auto mutant = c->plan;
        mutant.erase(mutant.begin() + static_cast<std::ptrdiff_t>(i));
        CHECK(!verify_plan(s.inputs.feeders[0], s.inputs.profiles, ev, s.cfg.years, mutant,
                           s.cfg.limits, s.cfg.solver)
                   .clean());
    }
    CHECK_THROWS_AS(build_cell_horizon(s.inputs, s.cfg, "nope", Strategy::lb, 4), ConfigError);
}

TEST_CASE("run_study validates inputs and tags cell errors with their origin") {
    const SmallStudy& s = small_study();
    StudyConfig cfg = s.cfg;

    StudyInputs bad = s.inputs;
    bad.feeders[0].id = "a/b";
    CHECK_THROWS_WITH_AS(run_study(bad, cfg), doctest::Contains("a/b"), ConfigError);

    bad = s.inputs;
    bad.feeders.push_back(bad.feeders[0]); // duplicate id
    CHECK_THROWS_WITH_AS(run_study(bad, cfg), doctest::Contains("duplicate"), ConfigError);

    cfg.fleet_scale["ghost"] = 1.0;
    CHECK_THROWS_WITH_AS(run_study(s.inputs, cfg), doctest::Contains("ghost"), ConfigError);

    // a missing profile surfaces as ConfigError naming the feeder
    StudyInputs noprof = s.inputs;
    noprof.profiles = ProfileStore{};
    CHECK_THROWS_WITH_AS(run_study(noprof, s.cfg), doctest::Contains("feeder f1"), ConfigError);
}

TEST_CASE("file-based run resolves inputs against the config directory") {
    fs::path dir = fresh_dir("evgrid_study_files");
    SyntheticFeederSpec spec;
    spec.id = "tiny";
    spec.bus_count = 12;
    spec.seed = 3;
    fs::create_directories(dir / "feeders");
    save_feeder(generate_synthetic_feeder(spec), dir / "feeders" / "tiny.json");
    {
        std::ofstream out(dir / "study.json");
        out << R"({
  "name": "files",
  "years": {"first": 2035, "last": 2035},
  "strategies": ["unmanaged"],
  "scenarios": [1],
  "seed": 5,
  "fleet": {"2035": 4},
  "feeders": ["feeders/tiny.json"]
})";
    }
    StudyConfig cfg = load_study_config(dir / "study.json");
    fs::path out_dir = dir / "out";
    StudyResult r = run_study(cfg, out_dir);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].feeder_id == "tiny");
    auto manifest = nlohmann::json::parse(slurp(out_dir / "manifest.json"));
    CHECK(manifest.at("complete").get<bool>());
    CHECK(manifest.at("inputs").contains("feeders/tiny.json"));
    CHECK(!r.manifest_digest.empty());

    StudyConfig missing = cfg;
    missing.feeder_files = {"feeders/absent.json"};
    CHECK_THROWS_AS(run_study(missing, fs::path{}), ParseError);

    // a failed run still leaves a manifest saying so
    fs::path fail_dir = dir / "fail";
    StudyConfig badscale = cfg;
    badscale.fleet_scale["ghost"] = 2.0;
    CHECK_THROWS_AS(run_study(badscale, fail_dir), ConfigError);
    auto fail_manifest = nlohmann::json::parse(slurp(fail_dir / "manifest.json"));
    CHECK(!fail_manifest.at("complete").get<bool>());
    CHECK(fail_manifest.at("error").get<std::string>().find("ghost") != std::string::npos);
}
