#pragma once

#include "evgrid/common.hpp"
#include "evgrid/feeder.hpp"
#include "evgrid/ladders.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/profiles.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace evgrid {

enum class ViolationKind { transformer_overload, line_overload, undervoltage };
std::string to_string(ViolationKind k);
ViolationKind violation_kind_from_string(const std::string& s);

struct ViolationRecord {
    std::string component_id; // branch id, or bus id for undervoltage
    int year = 0;
    DayType day_type = DayType::shoulder;
    int hour = 0;
    ViolationKind kind = ViolationKind::transformer_overload;
    double magnitude = 0.0; // loading fraction (> 1) or voltage pu (< limit)

    bool operator==(const ViolationRecord&) const = default;
};

enum class UpgradeKind { resize_transformer, resize_line, add_capacitor };
std::string to_string(UpgradeKind k);
UpgradeKind upgrade_kind_from_string(const std::string& s);

struct UpgradeAction {
    std::string component_id; // bus id for add_capacitor
    UpgradeKind kind = UpgradeKind::resize_transformer;
    int year = 0;
    double old_rating = 0.0; // kVA / A / 0 for a new bank
    double new_rating = 0.0; // kVA / A / kvar
    // sizing detail: new_rating = unit_size * parallel_units. parallel_units
    // stays 1 unless the need outgrew the ladder (escalation to paralleled
    // largest-size units)
    double unit_size = 0.0;
    int parallel_units = 1;
    double length_mi = 0.0;     // resize_line only, for per-mile costing
    double unit_cost_usd = 0.0; // filled in by the economics pass

    bool escalated() const { return parallel_units > 1; }
    bool operator==(const UpgradeAction&) const = default;
};

struct VoltageLimits {
    double min_pu = 0.95;
    double max_pu = 1.05; // reported only; remediation targets undervoltage
};

struct StudyYears {
    int first = 2022;
    int last = 2035; // inclusive

    int count() const { return last - first + 1; }
};

/// EV demand per (year, day type, bus): kW by hour at unity power factor.
/// Missing years/days/buses charge nothing.
using EvHorizon = std::map<int, std::map<DayType, std::map<std::string, std::array<double, 24>>>>;

/// Equipment ladders used for upgrade sizing; defaults mirror
/// evgrid::ladders. Entries must be ascending.
struct SizeLadders {
    std::vector<double> xfmr_1ph_kva;
    std::vector<double> xfmr_3ph_kva;
    std::vector<double> line_ampacity_a;
    std::vector<double> capacitor_kvar;

    static SizeLadders standard();
};

/// Feeder with resize actions dated <= year applied (capacitors are circuit
/// shunts; see active_capacitors). Later actions on the same component win.
Feeder apply_plan(const Feeder& feeder, const std::vector<UpgradeAction>& plan, int year);

/// (bus id, kvar) for every capacitor bank in service as of `year`.
std::vector<std::pair<std::string, double>> active_capacitors(
    const std::vector<UpgradeAction>& plan, int year);

struct YearResults {
    Feeder feeder; // ratings as of this year under the supplied plan
    std::map<DayType, TimeSeriesResult> days;
};

struct HorizonResults {
    std::map<int, YearResults> years;
};

/// Solves every (year, representative day, hour) over the study window,
/// with `plan` actions taking effect in their action year.
HorizonResults simulate_horizon(const Feeder& feeder, const ProfileStore& profiles,
                                const EvHorizon& ev, StudyYears years,
                                const std::vector<UpgradeAction>& plan = {},
                                const SolveOptions& opt = {});

/// One record per component-hour breach: loading strictly above rating, or
/// bus voltage strictly below the minimum. Ordered by year, day, hour, then
/// branches before buses in circuit order.
std::vector<ViolationRecord> detect_violations(const HorizonResults& results,
                                               const VoltageLimits& limits = {});

/// One action per overloaded component, dated at its first violation year,
/// sized to the smallest ladder entry covering the study-period maximum
/// observed kVA (transformers) or amps (lines). Needs outgrowing the ladder
/// escalate to paralleled largest units.
std::vector<UpgradeAction> plan_thermal_upgrades(const HorizonResults& results,
                                                 const SizeLadders& ladders = SizeLadders::standard());

struct VoltagePlanResult {
    std::vector<UpgradeAction> actions;
    std::vector<ViolationRecord> residual; // undervoltage the ladder could not fix
};

/// After thermal fixes, walks years in order and adds capacitor banks while
/// the yearly minimum voltage sits below the limit: each bank goes to the
/// nearest primary-side bus of the worst-voltage node, at the smallest
/// ladder size that clears the year (verified by re-simulation), up to
/// `max_banks_per_year`. Banks stay in service for later years.
VoltagePlanResult plan_voltage_support(const Feeder& feeder, const ProfileStore& profiles,
                                       const EvHorizon& ev, StudyYears years,
                                       const std::vector<UpgradeAction>& thermal_plan,
                                       const SizeLadders& ladders = SizeLadders::standard(),
                                       const VoltageLimits& limits = {},
                                       const SolveOptions& opt = {}, int max_banks_per_year = 10);

struct VerifyReport {
    std::vector<ViolationRecord> residual;

    bool clean() const { return residual.empty(); }
};

/// Re-simulates the horizon with the complete plan applied from each action
/// year onward and reports every violation that survives.
VerifyReport verify_plan(const Feeder& feeder, const ProfileStore& profiles, const EvHorizon& ev,
                         StudyYears years, const std::vector<UpgradeAction>& plan,
                         const VoltageLimits& limits = {}, const SolveOptions& opt = {});

/// Drops actions that re-simulation proves unnecessary: repeatedly removes
/// any single action whose absence leaves the horizon violation-free, until
/// every survivor is load-bearing. A plan that does not verify clean is
/// returned unchanged (there is no clean baseline to preserve).
std::vector<UpgradeAction> prune_plan(const Feeder& feeder, const ProfileStore& profiles,
                                      const EvHorizon& ev, StudyYears years,
                                      std::vector<UpgradeAction> plan,
                                      const VoltageLimits& limits = {},
                                      const SolveOptions& opt = {});

/// Cumulative share (percent) of distinct transformers seen overloaded up to
/// each study year. Non-decreasing by construction.
std::vector<double> overload_trend(const std::vector<ViolationRecord>& violations,
                                   int transformer_total, StudyYears years);

std::vector<UpgradeAction> load_plan(const std::filesystem::path& path);
void save_plan(const std::vector<UpgradeAction>& plan, const std::filesystem::path& path);

std::vector<ViolationRecord> load_violations(const std::filesystem::path& path);
void save_violations(const std::vector<ViolationRecord>& violations,
                     const std::filesystem::path& path);

} // namespace evgrid
