#include "evgrid/planner.hpp"

#include "evgrid/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace evgrid {

std::string to_string(ViolationKind k) {
    switch (k) {
    case ViolationKind::transformer_overload: return "transformer_overload";
    case ViolationKind::line_overload: return "line_overload";
    case ViolationKind::undervoltage: return "undervoltage";
    }
    return "?";
}

ViolationKind violation_kind_from_string(const std::string& s) {
    if (s == "transformer_overload") return ViolationKind::transformer_overload;
    if (s == "line_overload") return ViolationKind::line_overload;
    if (s == "undervoltage") return ViolationKind::undervoltage;
    throw ParseError("unknown violation kind '" + s + "'");
}

std::string to_string(UpgradeKind k) {
    switch (k) {
    case UpgradeKind::resize_transformer: return "resize_transformer";
    case UpgradeKind::resize_line: return "resize_line";
    case UpgradeKind::add_capacitor: return "add_capacitor";
    }
    return "?";
}

UpgradeKind upgrade_kind_from_string(const std::string& s) {
    if (s == "resize_transformer") return UpgradeKind::resize_transformer;
    if (s == "resize_line") return UpgradeKind::resize_line;
    if (s == "add_capacitor") return UpgradeKind::add_capacitor;
    throw ParseError("unknown upgrade kind '" + s + "'");
}

SizeLadders SizeLadders::standard() {
    SizeLadders l;
    l.xfmr_1ph_kva.assign(ladders::xfmr_1ph_kva.begin(), ladders::xfmr_1ph_kva.end());
    l.xfmr_3ph_kva.assign(ladders::xfmr_3ph_kva.begin(), ladders::xfmr_3ph_kva.end());
    l.line_ampacity_a.assign(ladders::line_ampacity_a.begin(), ladders::line_ampacity_a.end());
    l.capacitor_kvar.assign(ladders::capacitor_kvar.begin(), ladders::capacitor_kvar.end());
    return l;
}

namespace {

constexpr std::array<DayType, 3> kAllDays = {DayType::winter, DayType::summer,
                                             DayType::shoulder};

const std::map<std::string, std::array<double, 24>> kNoEv;

const std::map<std::string, std::array<double, 24>>& ev_for(const EvHorizon& ev, int year,
                                                            DayType day) {
    auto y = ev.find(year);
    if (y == ev.end()) return kNoEv;
    auto d = y->second.find(day);
    if (d == y->second.end()) return kNoEv;
    return d->second;
}

// smallest ladder entry >= need, escalating to paralleled largest units when
// the ladder tops out
std::pair<double, int> ladder_fit(const std::vector<double>& ladder, double need) {
    for (double size : ladder)
        if (size >= need) return {size, 1};
    const double top = ladder.back();
    int units = static_cast<int>(std::ceil(need / top - 1e-12));
    return {top, units};
}

// minimum voltage over phases actually present (absent phases read 0)
double bus_min_v(const SnapshotResult& r, int node) {
    double v = std::numeric_limits<double>::infinity();
    for (int p = 0; p < 3; ++p)
        if (r.v_mag_pu[static_cast<std::size_t>(node)][static_cast<std::size_t>(p)] > 0.0)
            v = std::min(v, r.v_mag_pu[static_cast<std::size_t>(node)][static_cast<std::size_t>(p)]);
    return v;
}

YearResults simulate_year(const Feeder& feeder, const ProfileStore& profiles, const EvHorizon& ev,
                          int year, const std::vector<UpgradeAction>& plan,
                          const SolveOptions& opt) {
    YearResults out;
    out.feeder = apply_plan(feeder, plan, year);
    Circuit circuit(out.feeder);
    for (const auto& [bus, kvar] : active_capacitors(plan, year)) circuit.add_capacitor(bus, kvar);
    for (DayType day : kAllDays)
        out.days.emplace(day,
                         solve_timeseries(circuit, out.feeder, profiles, day, ev_for(ev, year, day), opt));
    return out;
}

} // namespace

Feeder apply_plan(const Feeder& feeder, const std::vector<UpgradeAction>& plan, int year) {
    Feeder out = feeder;
    for (const auto& a : plan) {
        if (a.year > year) continue;
        switch (a.kind) {
        case UpgradeKind::resize_transformer: {
            auto it = std::find_if(out.transformers.begin(), out.transformers.end(),
                                   [&](const Transformer& t) { return t.id == a.component_id; });
            if (it == out.transformers.end())
                throw ConfigError("plan resizes unknown transformer " + a.component_id);
            it->rating_kva = a.new_rating;
            break;
        }
        case UpgradeKind::resize_line: {
            auto it = std::find_if(out.lines.begin(), out.lines.end(),
                                   [&](const LineSegment& l) { return l.id == a.component_id; });
            if (it == out.lines.end())
                throw ConfigError("plan resizes unknown line " + a.component_id);
            it->ampacity_a = a.new_rating;
            break;
        }
        case UpgradeKind::add_capacitor:
            break; // shunts attach to the circuit, not the feeder record
        }
    }
    return out;
}

std::vector<std::pair<std::string, double>> active_capacitors(
    const std::vector<UpgradeAction>& plan, int year) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& a : plan)
        if (a.kind == UpgradeKind::add_capacitor && a.year <= year)
            out.emplace_back(a.component_id, a.new_rating);
    return out;
}

HorizonResults simulate_horizon(const Feeder& feeder, const ProfileStore& profiles,
                                const EvHorizon& ev, StudyYears years,
                                const std::vector<UpgradeAction>& plan, const SolveOptions& opt) {
    if (years.first > years.last) throw ConfigError("study window is empty");
    HorizonResults out;
    for (int y = years.first; y <= years.last; ++y)
        out.years.emplace(y, simulate_year(feeder, profiles, ev, y, plan, opt));
    return out;
}

std::vector<ViolationRecord> detect_violations(const HorizonResults& results,
                                               const VoltageLimits& limits) {
    std::vector<ViolationRecord> out;
    for (const auto& [year, cell] : results.years) {
        Circuit circuit(cell.feeder);
        for (const auto& [day, series] : cell.days) {
            for (int h = 0; h < 24; ++h) {
                const SnapshotResult& r = series.hours[static_cast<std::size_t>(h)];
                for (int b = 0; b < circuit.branch_count(); ++b) {
                    double lf = circuit.loading_fraction(r, b);
                    if (lf > 1.0)
                        out.push_back({circuit.branch_id(b), year, day, h,
                                       circuit.branch_is_transformer(b)
                                           ? ViolationKind::transformer_overload
                                           : ViolationKind::line_overload,
                                       lf});
                }
                for (int n = 0; n < circuit.node_count(); ++n) {
                    double v = bus_min_v(r, n);
                    if (v < limits.min_pu)
                        out.push_back({circuit.bus_id(n), year, day, h,
                                       ViolationKind::undervoltage, v});
                }
            }
        }
    }
    return out;
}

std::vector<UpgradeAction> plan_thermal_upgrades(const HorizonResults& results,
                                                 const SizeLadders& ladders) {
    if (results.years.empty()) throw ConfigError("no simulated years to plan against");
    const Feeder& base = results.years.begin()->second.feeder;
    Circuit circuit(base);
    const int nb = circuit.branch_count();

    std::vector<int> first_year(static_cast<std::size_t>(nb), 0);
    std::vector<bool> overloaded(static_cast<std::size_t>(nb), false);
    std::vector<double> observed_max(static_cast<std::size_t>(nb), 0.0); // kVA or A

    for (const auto& [year, cell] : results.years) {
        for (const auto& [day, series] : cell.days) {
            for (const auto& r : series.hours) {
                for (int b = 0; b < nb; ++b) {
                    auto bi = static_cast<std::size_t>(b);
                    double seen;
                    if (circuit.branch_is_transformer(b)) {
                        seen = r.branch_kva[bi];
                    } else {
                        seen = 0.0;
                        for (int p = 0; p < 3; ++p)
                            seen = std::max(seen, r.branch_current_a[bi][static_cast<std::size_t>(p)]);
                    }
                    observed_max[bi] = std::max(observed_max[bi], seen);
                    double limit = circuit.branch_is_transformer(b) ? circuit.branch_rating_kva(b)
                                                                    : circuit.branch_ampacity_a(b);
                    if (seen > limit && !overloaded[bi]) {
                        overloaded[bi] = true;
                        first_year[bi] = year;
                    }
                }
            }
        }
    }

    std::map<std::string, const Transformer*> tx_by_id;
    for (const auto& t : base.transformers) tx_by_id[t.id] = &t;
    std::map<std::string, const LineSegment*> line_by_id;
    for (const auto& l : base.lines) line_by_id[l.id] = &l;

    std::vector<UpgradeAction> plan;
    for (int b = 0; b < nb; ++b) {
        auto bi = static_cast<std::size_t>(b);
        if (!overloaded[bi]) continue;
        UpgradeAction a;
        a.component_id = circuit.branch_id(b);
        a.year = first_year[bi];
        if (circuit.branch_is_transformer(b)) {
            const Transformer* tx = tx_by_id.at(a.component_id);
            a.kind = UpgradeKind::resize_transformer;
            a.old_rating = tx->rating_kva;
            const auto& ladder =
                tx->phase_count == 1 ? ladders.xfmr_1ph_kva : ladders.xfmr_3ph_kva;
            auto [size, units] = ladder_fit(ladder, observed_max[bi]);
            a.unit_size = size;
            a.parallel_units = units;
            a.new_rating = size * units;
        } else {
            const LineSegment* ln = line_by_id.at(a.component_id);
            a.kind = UpgradeKind::resize_line;
            a.old_rating = ln->ampacity_a;
            a.length_mi = ln->length_mi;
            auto [size, units] = ladder_fit(ladders.line_ampacity_a, observed_max[bi]);
            a.unit_size = size;
            a.parallel_units = units;
            a.new_rating = size * units;
        }
        plan.push_back(std::move(a));
    }
    return plan;
}

VoltagePlanResult plan_voltage_support(const Feeder& feeder, const ProfileStore& profiles,
                                       const EvHorizon& ev, StudyYears years,
                                       const std::vector<UpgradeAction>& thermal_plan,
                                       const SizeLadders& ladders, const VoltageLimits& limits,
                                       const SolveOptions& opt, int max_banks_per_year) {
    VoltagePlanResult out;
    std::vector<UpgradeAction> combined = thermal_plan;

    for (int year = years.first; year <= years.last; ++year) {
        for (int bank = 0;; ++bank) {
            YearResults cell = simulate_year(feeder, profiles, ev, year, combined, opt);
            Circuit circuit(cell.feeder);

            // worst bus over days, hours, nodes
            double worst_v = std::numeric_limits<double>::infinity();
            int worst_node = -1;
            for (const auto& [day, series] : cell.days)
                for (const auto& r : series.hours)
                    for (int n = 0; n < circuit.node_count(); ++n) {
                        double v = bus_min_v(r, n);
                        if (v < worst_v) {
                            worst_v = v;
                            worst_node = n;
                        }
                    }
            if (worst_v >= limits.min_pu) break; // year is clean

            if (bank >= max_banks_per_year) {
                HorizonResults single;
                single.years.emplace(year, std::move(cell));
                for (auto& rec : detect_violations(single, limits))
                    if (rec.kind == ViolationKind::undervoltage)
                        out.residual.push_back(std::move(rec));
                break;
            }

            // utility banks belong on the primary: climb out of any
            // transformer secondary before placing
            int node = worst_node;
            while (node >= 0) {
                int pb = circuit.parent_branch(node);
                if (pb < 0 || !circuit.branch_is_transformer(pb)) break;
                node = circuit.parent_node(node);
            }
            std::string place = circuit.bus_id(node);

            UpgradeAction a;
            a.kind = UpgradeKind::add_capacitor;
            a.year = year;
            a.component_id = place;
            bool placed = false;
            for (double kvar : ladders.capacitor_kvar) {
                a.new_rating = kvar;
                a.unit_size = kvar;
                std::vector<UpgradeAction> trial = combined;
                trial.push_back(a);
                YearResults check = simulate_year(feeder, profiles, ev, year, trial, opt);
                double min_v = std::numeric_limits<double>::infinity();
                for (const auto& [day, series] : check.days)
                    for (double v : series.min_v_pu) min_v = std::min(min_v, v);
                if (min_v >= limits.min_pu) {
                    placed = true;
                    break;
                }
            }
            if (!placed) {
                a.new_rating = ladders.capacitor_kvar.back();
                a.unit_size = a.new_rating;
            }
            combined.push_back(a);
            out.actions.push_back(a);
        }
    }
    return out;
}

VerifyReport verify_plan(const Feeder& feeder, const ProfileStore& profiles, const EvHorizon& ev,
                         StudyYears years, const std::vector<UpgradeAction>& plan,
                         const VoltageLimits& limits, const SolveOptions& opt) {
    HorizonResults results = simulate_horizon(feeder, profiles, ev, years, plan, opt);
    VerifyReport report;
    report.residual = detect_violations(results, limits);
    return report;
}

namespace {

// whether any year in [max(years.first, from_year), years.last] violates
// under `plan`; simulates year by year and stops at the first hit
bool horizon_violates(const Feeder& feeder, const ProfileStore& profiles, const EvHorizon& ev,
                      StudyYears years, const std::vector<UpgradeAction>& plan,
                      const VoltageLimits& limits, const SolveOptions& opt, int from_year) {
    for (int y = std::max(years.first, from_year); y <= years.last; ++y) {
        HorizonResults one;
        one.years.emplace(y, simulate_year(feeder, profiles, ev, y, plan, opt));
        if (!detect_violations(one, limits).empty()) return true;
    }
    return false;
}

} // namespace

std::vector<UpgradeAction> prune_plan(const Feeder& feeder, const ProfileStore& profiles,
                                      const EvHorizon& ev, StudyYears years,
                                      std::vector<UpgradeAction> plan, const VoltageLimits& limits,
                                      const SolveOptions& opt) {
    if (horizon_violates(feeder, profiles, ev, years, plan, limits, opt, years.first)) return plan;
    bool removed = true;
    while (removed) {
        removed = false;
        // capacitor banks are appended after thermal fixes, so testing from
        // the back retires the likeliest-redundant actions first
        for (std::size_t i = plan.size(); i-- > 0;) {
            std::vector<UpgradeAction> candidate = plan;
            candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(i));
            // years before the action never saw it, so they stay clean
            if (!horizon_violates(feeder, profiles, ev, years, candidate, limits, opt,
                                  plan[i].year)) {
                plan = std::move(candidate);
                removed = true;
            }
        }
    }
    return plan;
}

std::vector<double> overload_trend(const std::vector<ViolationRecord>& violations,
                                   int transformer_total, StudyYears years) {
    std::map<int, std::set<std::string>> fresh;
    for (const auto& v : violations)
        if (v.kind == ViolationKind::transformer_overload) fresh[v.year].insert(v.component_id);
    if (transformer_total <= 0) {
        if (!fresh.empty()) throw ConfigError("overload trend needs the transformer fleet size");
        return std::vector<double>(static_cast<std::size_t>(years.count()), 0.0);
    }
    std::vector<double> out;
    std::set<std::string> seen;
    for (int y = years.first; y <= years.last; ++y) {
        auto it = fresh.find(y);
        if (it != fresh.end()) seen.insert(it->second.begin(), it->second.end());
        out.push_back(100.0 * static_cast<double>(seen.size()) / transformer_total);
    }
    return out;
}

std::vector<UpgradeAction> load_plan(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("component_id");
    int c_kind = t.column("kind");
    int c_year = t.column("year");
    int c_old = t.column("old_rating");
    int c_new = t.column("new_rating");
    int c_cost = t.column("unit_cost_usd");
    if (c_id < 0 || c_kind < 0 || c_year < 0 || c_old < 0 || c_new < 0 || c_cost < 0)
        throw ParseError(path.string() + ": missing plan columns");
    std::vector<UpgradeAction> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::string ctx = path.string() + " row " + std::to_string(i + 1);
        UpgradeAction a;
        a.component_id = row[c_id];
        a.kind = upgrade_kind_from_string(row[c_kind]);
        try {
            a.year = std::stoi(row[c_year]);
            a.old_rating = std::stod(row[c_old]);
            a.new_rating = std::stod(row[c_new]);
            a.unit_cost_usd = std::stod(row[c_cost]);
        } catch (const std::exception&) {
            throw ParseError(ctx + ": bad numeric field");
        }
        a.unit_size = a.new_rating;
        if (a.kind != UpgradeKind::add_capacitor && a.new_rating <= a.old_rating)
            throw ParseError(ctx + ": resize must increase the rating");
        out.push_back(std::move(a));
    }
    return out;
}

void save_plan(const std::vector<UpgradeAction>& plan, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"component_id", "kind", "year", "old_rating", "new_rating", "unit_cost_usd"});
    for (const auto& a : plan)
        w.row({a.component_id, to_string(a.kind), std::to_string(a.year), fmt_double(a.old_rating),
               fmt_double(a.new_rating), fmt_double(a.unit_cost_usd)});
}

std::vector<ViolationRecord> load_violations(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("component_id");
    int c_year = t.column("year");
    int c_day = t.column("day_type");
    int c_hour = t.column("hour");
    int c_kind = t.column("kind");
    int c_mag = t.column("magnitude");
    if (c_id < 0 || c_year < 0 || c_day < 0 || c_hour < 0 || c_kind < 0 || c_mag < 0)
        throw ParseError(path.string() + ": missing violation columns");
    std::vector<ViolationRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::string ctx = path.string() + " row " + std::to_string(i + 1);
        ViolationRecord v;
        v.component_id = row[c_id];
        v.day_type = day_type_from_string(row[c_day]);
        v.kind = violation_kind_from_string(row[c_kind]);
        try {
            v.year = std::stoi(row[c_year]);
            v.hour = std::stoi(row[c_hour]);
            v.magnitude = std::stod(row[c_mag]);
        } catch (const std::exception&) {
            throw ParseError(ctx + ": bad numeric field");
        }
        if (v.hour < 0 || v.hour > 23) throw ParseError(ctx + ": hour out of range");
        out.push_back(std::move(v));
    }
    return out;
}

void save_violations(const std::vector<ViolationRecord>& violations,
                     const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"component_id", "year", "day_type", "hour", "kind", "magnitude"});
    for (const auto& v : violations)
        w.row({v.component_id, std::to_string(v.year), to_string(v.day_type),
               std::to_string(v.hour), to_string(v.kind), fmt_double(v.magnitude)});
}

} // namespace evgrid
