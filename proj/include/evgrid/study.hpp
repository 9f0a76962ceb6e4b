#pragma once

#include "evgrid/charging.hpp"
#include "evgrid/common.hpp"
#include "evgrid/economics.hpp"
#include "evgrid/feeder.hpp"
#include "evgrid/planner.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/profiles.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace evgrid {

enum class Strategy { unmanaged, tou, lb };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Full experiment description. `fleet_by_year` is the per-feeder session
/// count for each study year (scaled per feeder by `fleet_scale`, default 1);
/// vehicles persist across years, so the year-N fleet is a prefix of the
/// year-N+1 fleet. Sessions and enrollment draws depend only on (seed,
/// feeder, day), never on strategy or scenario, so every cell of the study
/// grid sees the same vehicles and the comparisons in the output table are
/// paired. `jobs` is an execution knob and stays out of the canonical
/// serialization (it cannot change results, only wall time).
struct StudyConfig {
    std::string name = "study";
    StudyYears years{};
    std::vector<Strategy> strategies{Strategy::unmanaged, Strategy::tou, Strategy::lb};
    std::vector<int> scenarios{1, 2, 3, 4};
    std::uint64_t seed = 1;
    int jobs = 0; // worker threads over the study grid; 0 = hardware count
    double discount_rate = 0.03;
    double lb_threshold = 0.9;
    BehaviorSpec behavior{};
    std::map<int, int> fleet_by_year;          // sessions per feeder per day
    std::map<std::string, double> fleet_scale; // per-feeder multiplier
    SolveOptions solver{};
    VoltageLimits limits{};

    // Input files as written in the config; resolved against base_dir (the
    // config file's directory, or the caller's choice for built configs).
    std::vector<std::string> feeder_files;
    std::string profiles_file;   // empty -> builtin class shapes
    std::string cost_table_file; // empty -> builtin placeholder costs
    std::filesystem::path base_dir = ".";

    std::filesystem::path resolve(const std::string& rel) const;
    void validate() const; // ConfigError on empty selections, bad years, ...
};

/// JSON config file. Unknown keys are rejected (they are almost always
/// typos) with ParseError; domain problems surface as ConfigError.
StudyConfig load_study_config(const std::filesystem::path& path);
nlohmann::json study_config_to_json(const StudyConfig& config);

/// One feeder-head operating point of the pre-upgrade system.
struct HourPoint {
    int year = 0;
    DayType day = DayType::winter;
    int hour = 0;
    double base_kw = 0.0;   // sum of modeled loads
    double ev_kw = 0.0;     // aggregate charging
    double head_kw = 0.0;   // solved source injection
    double losses_kw = 0.0;
};

/// Per-bus annual minimum voltage in the final study year, before and after
/// the upgrade plan. distance_mi is line length walked from the source.
struct BusVoltagePoint {
    std::string bus;
    double distance_mi = 0.0;
    double v_before_pu = 0.0;
    double v_after_pu = 0.0;
};

struct YearMetrics {
    int year = 0;
    double peak_load_kw = 0.0; // max feeder-head kW over the representative days
    double ev_delivered_kwh = 0.0; // summed over the three representative days
    double ev_unmet_kwh = 0.0;
    double min_v_pu = 1.0;      // pre-upgrade annual minimum
    double max_loading = 0.0;   // pre-upgrade annual maximum branch loading
    int overloaded_tx_cum = 0;  // distinct transformers overloaded up to this year
    double overloaded_share_cum_pct = 0.0;
    double spend_usd = 0.0; // plan actions dated this year
};

/// Everything one (feeder, strategy, scenario) cell produced.
struct CellResult {
    std::string feeder_id;
    Strategy strategy = Strategy::unmanaged;
    int scenario = 1;

    std::vector<YearMetrics> years;
    std::vector<HourPoint> profile;        // every (year, day, hour)
    std::vector<BusVoltagePoint> voltage;  // final-year bus voltages
    std::vector<UpgradeAction> plan;       // pruned and priced
    std::vector<ViolationRecord> violations; // pre-upgrade
    std::vector<ViolationRecord> residual;   // post-plan (empty when the plan verifies)
    CostStream costs;
    double npv_usd = 0.0;

    int transformer_total = 0;
    double transformer_upgrade_kva = 0.0; // sum of new ratings installed
    double line_upgrade_mi = 0.0;
    double capacitor_kvar = 0.0;

    // evidence trails for the study-wide invariants
    double max_balance_error = 0.0;        // worst relative power-balance error seen
    double tou_window_max_kw = 0.0;        // enrolled charging inside the TOU window
    double max_energy_residual_kwh = 0.0;  // worst |delivered + unmet - required|
};

struct StudyResult {
    StudyConfig config;
    std::vector<std::string> feeder_ids;
    std::vector<CellResult> cells; // ordered (feeder, strategy, scenario)
    std::string manifest_digest;   // filled when artifacts were written

    const CellResult* find(const std::string& feeder_id, Strategy s, int scenario) const;
};

struct StudyInputs {
    std::vector<Feeder> feeders;
    ProfileStore profiles;
    CostTable costs;
};

/// Runs the full (feeder x strategy x scenario) grid. Cells run in parallel;
/// results and artifacts are independent of the thread schedule. When
/// out_dir is non-empty the complete artifact tree is written there:
///   config.json, table.csv, sessions/, cells/<feeder>/<strategy>/
///   scenario-<n>/{metrics,summary,plan,violations,residual,load_profile,
///   voltage_profile}.csv, plots/, manifest.json
/// Per-cell files never name the feeder, strategy, or scenario in their
/// rows; identity lives in the path, so equal cells are byte-identical.
/// Errors carry (feeder, strategy, scenario) context and keep their type.
StudyResult run_study(const StudyInputs& inputs, const StudyConfig& config,
                      const std::filesystem::path& out_dir = {});

/// Loads feeders, profiles, and costs from the config's file references,
/// then runs as above.
StudyResult run_study(const StudyConfig& config, const std::filesystem::path& out_dir = {});

/// EV demand exactly as the study grid schedules it for one cell. This is
/// the hook external checks use to re-verify an emitted plan against the
/// same charging the run saw. ConfigError when the feeder id is unknown.
EvHorizon build_cell_horizon(const StudyInputs& inputs, const StudyConfig& config,
                             const std::string& feeder_id, Strategy strategy, int scenario);

/// Reconstructs a StudyResult from a run directory's artifact tree — the
/// parts reporting needs (per-cell metrics, summaries, profiles, voltages,
/// plans). Feeders come back in sorted-id order. ParseError on missing or
/// malformed artifacts.
StudyResult load_study_artifacts(const std::filesystem::path& run_dir);

/// One output-table row: percentage reductions of `scenario` against
/// `baseline_scenario`, (baseline - value) / baseline * 100. A 0-vs-0
/// comparison reads 0; a zero baseline against a nonzero value has no
/// defined percentage and is NaN (written as an empty CSV field).
struct TableRow {
    std::string feeder_id;
    Strategy strategy = Strategy::unmanaged;
    int baseline_scenario = 1;
    int scenario = 4;
    double peak_load_reduction_pct = 0.0;      // final-year feeder-head peak
    double overload_reduction_pct = 0.0;       // distinct overloaded transformers
    double transformer_cost_reduction_pct = 0.0;
    double line_cost_reduction_pct = 0.0;
    double npv_reduction_pct = 0.0;

    bool operator==(const TableRow&) const = default;
};

/// ConfigError when either scenario is missing from the result.
std::vector<TableRow> compute_table(const StudyResult& result, int baseline_scenario = 1,
                                    int scenario = 4);
void save_table(const std::vector<TableRow>& rows, const std::filesystem::path& path);

/// Tidy per-figure CSVs under dir: load_profiles.csv (final-year head
/// profiles), upgrade_capacity.csv, overload_trend.csv (cumulative, so
/// monotone per series), voltage_profiles.csv, npv.csv. Headers are always
/// written, so an empty study yields headers-only files. Returns the
/// dir-relative paths written.
std::vector<std::string> emit_plot_data(const StudyResult& result,
                                        const std::filesystem::path& dir);

} // namespace evgrid
