#include "evgrid/study.hpp"

#include "evgrid/csv.hpp"
#include "evgrid/feeder_io.hpp"
#include "evgrid/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace evgrid {

namespace {

constexpr std::array<DayType, 3> kAllDays{DayType::winter, DayType::summer, DayType::shoulder};

constexpr const char* kToolVersion = "evgrid 0.1.0";
constexpr int kSchemaVersion = 1;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t digest_bytes(const std::string& bytes) { return fnv1a64(bytes); }

std::uint64_t digest_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError(p.string() + ": cannot read for digest");
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_bytes(ss.str());
}

} // namespace

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::unmanaged: return "unmanaged";
    case Strategy::tou: return "tou";
    case Strategy::lb: return "lb";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "unmanaged") return Strategy::unmanaged;
    if (s == "tou") return Strategy::tou;
    if (s == "lb") return Strategy::lb;
    throw ParseError("unknown strategy '" + s + "' (expected unmanaged, tou, or lb)");
}

std::filesystem::path StudyConfig::resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return p;
    return base_dir / p;
}

void StudyConfig::validate() const {
    if (name.empty()) throw ConfigError("study name is empty");
    if (years.first > years.last) throw ConfigError("study years run backward");
    if (strategies.empty()) throw ConfigError("no strategies selected");
    if (scenarios.empty()) throw ConfigError("no scenarios selected");
    {
        std::set<Strategy> ss(strategies.begin(), strategies.end());
        if (ss.size() != strategies.size()) throw ConfigError("duplicate strategy in config");
        std::set<int> sc(scenarios.begin(), scenarios.end());
        if (sc.size() != scenarios.size()) throw ConfigError("duplicate scenario in config");
    }
    for (int sc : scenarios) EnrollmentTrajectory::for_scenario(sc); // throws on bad ids
    if (!fleet_by_year.empty())
        for (int y = years.first; y <= years.last; ++y)
            if (!fleet_by_year.count(y))
                throw ConfigError("fleet_by_year has no entry for " + std::to_string(y));
    for (const auto& [y, n] : fleet_by_year)
        if (n < 0) throw ConfigError("fleet count for " + std::to_string(y) + " is negative");
    for (const auto& [id, s] : fleet_scale)
        if (s < 0.0) throw ConfigError("fleet_scale for " + id + " is negative");
    if (discount_rate <= -1.0) throw ConfigError("discount rate must exceed -1");
    if (lb_threshold <= 0.0) throw ConfigError("lb_threshold must be positive");
    if (jobs < 0) throw ConfigError("jobs must be >= 0");
    if (solver.tolerance <= 0.0 || solver.max_iterations < 1)
        throw ConfigError("bad solver options");
    if (limits.min_pu <= 0.0 || limits.min_pu >= limits.max_pu)
        throw ConfigError("bad voltage limits");
}

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                 const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) throw ParseError(ctx + ": unknown key '" + it.key() + "'");
    }
}

SessionClassSpec class_spec_from_json(const json& j, const SessionClassSpec& defaults,
                                      const std::string& ctx) {
    expect_keys(j, {"plugin_mean", "plugin_sd", "duration_mean", "duration_sd"}, ctx);
    SessionClassSpec out = defaults;
    out.plugin_mean = j.value("plugin_mean", out.plugin_mean);
    out.plugin_sd = j.value("plugin_sd", out.plugin_sd);
    out.duration_mean = j.value("duration_mean", out.duration_mean);
    out.duration_sd = j.value("duration_sd", out.duration_sd);
    return out;
}

json class_spec_to_json(const SessionClassSpec& s) {
    return json{{"plugin_mean", s.plugin_mean},
                {"plugin_sd", s.plugin_sd},
                {"duration_mean", s.duration_mean},
                {"duration_sd", s.duration_sd}};
}

BehaviorSpec behavior_from_json(const json& j, const std::string& ctx) {
    expect_keys(j,
                {"residential_weight", "residential", "commercial", "energy_mean_kwh",
                 "energy_sd_kwh", "energy_min_kwh", "energy_max_kwh", "charger_share",
                 "charger_kw"},
                ctx);
    BehaviorSpec out;
    out.residential_weight = j.value("residential_weight", out.residential_weight);
    if (j.contains("residential"))
        out.residential = class_spec_from_json(j.at("residential"), out.residential,
                                               ctx + ".residential");
    if (j.contains("commercial"))
        out.commercial = class_spec_from_json(j.at("commercial"), out.commercial,
                                              ctx + ".commercial");
    out.energy_mean_kwh = j.value("energy_mean_kwh", out.energy_mean_kwh);
    out.energy_sd_kwh = j.value("energy_sd_kwh", out.energy_sd_kwh);
    out.energy_min_kwh = j.value("energy_min_kwh", out.energy_min_kwh);
    out.energy_max_kwh = j.value("energy_max_kwh", out.energy_max_kwh);
    auto read3 = [&](const char* key, std::array<double, 3>& dst) {
        if (!j.contains(key)) return;
        const json& a = j.at(key);
        if (!a.is_array() || a.size() != 3)
            throw ParseError(ctx + "." + key + ": expected 3 numbers");
        for (std::size_t i = 0; i < 3; ++i) dst[i] = a[i].get<double>();
    };
    read3("charger_share", out.charger_share);
    read3("charger_kw", out.charger_kw);
    return out;
}

json behavior_to_json(const BehaviorSpec& b) {
    return json{{"residential_weight", b.residential_weight},
                {"residential", class_spec_to_json(b.residential)},
                {"commercial", class_spec_to_json(b.commercial)},
                {"energy_mean_kwh", b.energy_mean_kwh},
                {"energy_sd_kwh", b.energy_sd_kwh},
                {"energy_min_kwh", b.energy_min_kwh},
                {"energy_max_kwh", b.energy_max_kwh},
                {"charger_share", b.charger_share},
                {"charger_kw", b.charger_kw}};
}

} // namespace

nlohmann::json study_config_to_json(const StudyConfig& c) {
    json j;
    j["name"] = c.name;
    j["years"] = json{{"first", c.years.first}, {"last", c.years.last}};
    json strategies = json::array();
    for (Strategy s : c.strategies) strategies.push_back(to_string(s));
    j["strategies"] = strategies;
    j["scenarios"] = c.scenarios;
    j["seed"] = c.seed;
    j["discount_rate"] = c.discount_rate;
    j["lb_threshold"] = c.lb_threshold;
    j["behavior"] = behavior_to_json(c.behavior);
    json fleet;
    for (const auto& [y, n] : c.fleet_by_year) fleet[std::to_string(y)] = n;
    j["fleet"] = fleet.is_null() ? json::object() : fleet;
    if (!c.fleet_scale.empty()) {
        json scale;
        for (const auto& [id, s] : c.fleet_scale) scale[id] = s;
        j["fleet_scale"] = scale;
    }
    j["solver"] = json{{"tolerance", c.solver.tolerance},
                       {"max_iterations", c.solver.max_iterations}};
    j["limits"] = json{{"min_pu", c.limits.min_pu}, {"max_pu", c.limits.max_pu}};
    j["feeders"] = c.feeder_files;
    if (!c.profiles_file.empty()) j["profiles"] = c.profiles_file;
    if (!c.cost_table_file.empty()) j["cost_table"] = c.cost_table_file;
    return j;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    StudyConfig c;
    try {
        expect_keys(j,
                    {"name", "years", "strategies", "scenarios", "seed", "jobs", "discount_rate",
                     "lb_threshold", "behavior", "fleet", "fleet_scale", "solver", "limits",
                     "feeders", "profiles", "cost_table"},
                    path.string());
        c.name = j.value("name", c.name);
        if (j.contains("years")) {
            const json& y = j.at("years");
            expect_keys(y, {"first", "last"}, path.string() + ".years");
            c.years.first = y.value("first", c.years.first);
            c.years.last = y.value("last", c.years.last);
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const json& s : j.at("strategies"))
                c.strategies.push_back(strategy_from_string(s.get<std::string>()));
        }
        if (j.contains("scenarios")) c.scenarios = j.at("scenarios").get<std::vector<int>>();
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        c.discount_rate = j.value("discount_rate", c.discount_rate);
        c.lb_threshold = j.value("lb_threshold", c.lb_threshold);
        if (j.contains("behavior"))
            c.behavior = behavior_from_json(j.at("behavior"), path.string() + ".behavior");
        if (j.contains("fleet")) {
            for (auto it = j.at("fleet").begin(); it != j.at("fleet").end(); ++it) {
                int year;
                try {
                    year = std::stoi(it.key());
                } catch (const std::exception&) {
                    throw ParseError(path.string() + ".fleet: bad year key '" + it.key() + "'");
                }
                c.fleet_by_year[year] = it.value().get<int>();
            }
        }
        if (j.contains("fleet_scale"))
            for (auto it = j.at("fleet_scale").begin(); it != j.at("fleet_scale").end(); ++it)
                c.fleet_scale[it.key()] = it.value().get<double>();
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            expect_keys(s, {"tolerance", "max_iterations"}, path.string() + ".solver");
            c.solver.tolerance = s.value("tolerance", c.solver.tolerance);
            c.solver.max_iterations = s.value("max_iterations", c.solver.max_iterations);
        }
        if (j.contains("limits")) {
            const json& l = j.at("limits");
            expect_keys(l, {"min_pu", "max_pu"}, path.string() + ".limits");
            c.limits.min_pu = l.value("min_pu", c.limits.min_pu);
            c.limits.max_pu = l.value("max_pu", c.limits.max_pu);
        }
        if (j.contains("feeders")) c.feeder_files = j.at("feeders").get<std::vector<std::string>>();
        c.profiles_file = j.value("profiles", c.profiles_file);
        c.cost_table_file = j.value("cost_table", c.cost_table_file);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// engine internals

namespace {

// Static per-feeder context shared read-only by every cell of that feeder.
struct AssetGroups {
    struct TxInfo {
        double rating_kva = 0.0;
        std::map<DayType, std::array<double, 24>> base_kw; // downstream base load
    };
    std::map<std::string, std::string> serving_tx; // bus -> transformer id, "" if none
    std::map<std::string, TxInfo> tx;
};

struct FeederContext {
    const Feeder* feeder = nullptr;
    AssetGroups assets;
    std::map<DayType, std::array<double, 24>> base_kw; // whole-feeder modeled load
    std::map<std::string, double> distance_mi;         // line miles from the source
    std::map<DayType, std::vector<EVSession>> sessions; // max-fleet templates
    int transformer_total = 0;
};

AssetGroups build_asset_groups(const Feeder& f, const ProfileStore& profiles) {
    AssetGroups out;
    Circuit c(f);
    for (int n = 0; n < c.node_count(); ++n) {
        int m = n;
        std::string tx;
        while (m >= 0) {
            int pb = c.parent_branch(m);
            if (pb < 0) break;
            if (c.branch_is_transformer(pb)) {
                tx = c.branch_id(pb);
                break;
            }
            m = c.parent_node(m);
        }
        out.serving_tx[c.bus_id(n)] = tx;
    }
    for (const Transformer& t : f.transformers) {
        AssetGroups::TxInfo info;
        info.rating_kva = t.rating_kva;
        for (DayType d : kAllDays) info.base_kw[d] = {};
        out.tx[t.id] = std::move(info);
    }
    for (const LoadPoint& ld : f.loads) {
        const std::string& tx = out.serving_tx.at(ld.bus);
        if (tx.empty()) continue;
        auto& dst = out.tx.at(tx).base_kw;
        for (DayType d : kAllDays) {
            const auto& shape = profiles.get(ld.profile_id, d).shape;
            for (int h = 0; h < 24; ++h) dst[d][h] += ld.peak_kw * shape[h];
        }
    }
    return out;
}

std::map<std::string, double> bus_distances(const Feeder& f) {
    std::map<std::string, double> line_len;
    for (const LineSegment& l : f.lines) line_len[l.id] = l.length_mi;
    Circuit c(f);
    std::map<std::string, double> out;
    for (int n = 0; n < c.node_count(); ++n) {
        double d = 0.0;
        int m = n;
        while (m >= 0) {
            int pb = c.parent_branch(m);
            if (pb < 0) break;
            if (!c.branch_is_transformer(pb)) d += line_len.at(c.branch_id(pb));
            m = c.parent_node(m);
        }
        out[c.bus_id(n)] = d;
    }
    return out;
}

int fleet_count(const StudyConfig& cfg, const std::string& feeder_id, int year) {
    auto it = cfg.fleet_by_year.find(year);
    if (it == cfg.fleet_by_year.end()) return 0;
    double scale = 1.0;
    auto s = cfg.fleet_scale.find(feeder_id);
    if (s != cfg.fleet_scale.end()) scale = s->second;
    return static_cast<int>(std::lround(it->second * scale));
}

FeederContext build_context(const Feeder& f, const ProfileStore& profiles,
                            const StudyConfig& cfg) {
    FeederContext ctx;
    ctx.feeder = &f;
    ctx.assets = build_asset_groups(f, profiles);
    ctx.distance_mi = bus_distances(f);
    ctx.transformer_total = static_cast<int>(f.transformers.size());
    for (DayType d : kAllDays) {
        auto& dst = ctx.base_kw[d];
        dst = {};
        for (const LoadPoint& ld : f.loads) {
            const auto& shape = profiles.get(ld.profile_id, d).shape;
            for (int h = 0; h < 24; ++h) dst[h] += ld.peak_kw * shape[h];
        }
    }
    int max_fleet = 0;
    for (int y = cfg.years.first; y <= cfg.years.last; ++y)
        max_fleet = std::max(max_fleet, fleet_count(cfg, f.id, y));
    for (DayType d : kAllDays) {
        std::uint64_t seed =
            mix64(mix64(cfg.seed ^ fnv1a64("sessions")) ^ fnv1a64(f.id) ^ fnv1a64(to_string(d)));
        ctx.sessions[d] = generate_sessions(f, max_fleet, cfg.behavior, seed);
    }
    return ctx;
}

std::vector<ChargingSchedule> schedule_fleet(const std::vector<EVSession>& fleet, Strategy strat,
                                             const AssetGroups& assets, DayType day,
                                             double threshold) {
    std::vector<ChargingSchedule> out(fleet.size());
    if (strat == Strategy::unmanaged) {
        for (std::size_t i = 0; i < fleet.size(); ++i) out[i] = unmanaged_schedule(fleet[i]);
        return out;
    }
    if (strat == Strategy::tou) {
        for (std::size_t i = 0; i < fleet.size(); ++i) out[i] = tou_schedule(fleet[i]);
        return out;
    }
    // LB: balance per serving transformer; sessions with no transformer
    // upstream have no asset group and charge unmanaged
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::size_t> loose;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const std::string& tx = assets.serving_tx.at(fleet[i].bus);
        if (tx.empty())
            loose.push_back(i);
        else
            groups[tx].push_back(i);
    }
    for (const auto& [tx, idxs] : groups) {
        std::vector<EVSession> grp;
        grp.reserve(idxs.size());
        for (std::size_t i : idxs) grp.push_back(fleet[i]);
        const auto& info = assets.tx.at(tx);
        LbResult r = lb_schedule(grp, info.rating_kva, info.base_kw.at(day), threshold);
        for (std::size_t j = 0; j < idxs.size(); ++j) out[idxs[j]] = std::move(r.schedules[j]);
    }
    for (std::size_t i : loose) out[i] = unmanaged_schedule(fleet[i]);
    return out;
}

struct CellHorizon {
    EvHorizon ev;
    std::map<int, double> delivered_kwh;
    std::map<int, double> unmet_kwh;
    double max_energy_residual_kwh = 0.0;
    double tou_window_max_kw = 0.0; // enrolled in-window power, TOU cells only
};

CellHorizon build_horizon(const StudyConfig& cfg, const FeederContext& ctx, Strategy strat,
                          int scenario) {
    CellHorizon out;
    const EnrollmentTrajectory traj = EnrollmentTrajectory::for_scenario(scenario);
    const std::uint64_t enroll_seed = mix64(cfg.seed ^ fnv1a64("enrollment"));
    for (int y = cfg.years.first; y <= cfg.years.last; ++y) {
        int count = fleet_count(cfg, ctx.feeder->id, y);
        for (DayType d : kAllDays) {
            const auto& all = ctx.sessions.at(d);
            count = std::min<int>(count, static_cast<int>(all.size()));
            std::vector<EVSession> fleet(all.begin(), all.begin() + count);
            apply_enrollment(fleet, traj, y, enroll_seed);
            std::vector<ChargingSchedule> sched =
                schedule_fleet(fleet, strat, ctx.assets, d, cfg.lb_threshold);
            for (std::size_t i = 0; i < fleet.size(); ++i) {
                double got = sched[i].delivered_kwh();
                out.delivered_kwh[y] += got;
                out.unmet_kwh[y] += sched[i].unmet_kwh;
                out.max_energy_residual_kwh =
                    std::max(out.max_energy_residual_kwh,
                             std::abs(got + sched[i].unmet_kwh - fleet[i].energy_kwh));
                if (strat == Strategy::tou && fleet[i].enrolled)
                    for (int t = 0; t < kHorizonSlots; ++t) {
                        int h = t % 24;
                        if (h >= kTouStartHour && h < kTouEndHour)
                            out.tou_window_max_kw =
                                std::max(out.tou_window_max_kw, std::abs(sched[i].power_kw[t]));
                    }
            }
            out.ev[y][d] = aggregate_ev_load(fleet, sched);
        }
    }
    return out;
}

CellResult run_cell(const StudyInputs& in, const StudyConfig& cfg, const FeederContext& ctx,
                    Strategy strat, int scenario) {
    CellResult out;
    out.feeder_id = ctx.feeder->id;
    out.strategy = strat;
    out.scenario = scenario;
    out.transformer_total = ctx.transformer_total;

    const StudyYears years = cfg.years;
    CellHorizon built = build_horizon(cfg, ctx, strat, scenario);
    const EvHorizon& ev = built.ev;
    out.max_energy_residual_kwh = built.max_energy_residual_kwh;
    out.tou_window_max_kw = built.tou_window_max_kw;
    const std::map<int, double>&delivered = built.delivered_kwh, &unmet = built.unmet_kwh;

    // pre-upgrade horizon, violations, and the upgrade plan
    HorizonResults pre = simulate_horizon(*ctx.feeder, in.profiles, ev, years, {}, cfg.solver);
    out.violations = detect_violations(pre, cfg.limits);
    std::vector<UpgradeAction> plan = plan_thermal_upgrades(pre);
    VoltagePlanResult vsr = plan_voltage_support(*ctx.feeder, in.profiles, ev, years, plan,
                                                 SizeLadders::standard(), cfg.limits, cfg.solver);
    plan.insert(plan.end(), vsr.actions.begin(), vsr.actions.end());
    plan = prune_plan(*ctx.feeder, in.profiles, ev, years, std::move(plan), cfg.limits,
                      cfg.solver);
    out.plan = price_plan(plan, in.costs);
    out.costs = cost_plan(out.plan, in.costs);
    out.npv_usd = npv(out.costs, cfg.discount_rate, years.first);

    HorizonResults post = simulate_horizon(*ctx.feeder, in.profiles, ev, years, out.plan,
                                           cfg.solver);
    out.residual = detect_violations(post, cfg.limits);

    for (const auto& a : out.plan) {
        switch (a.kind) {
        case UpgradeKind::resize_transformer: out.transformer_upgrade_kva += a.new_rating; break;
        case UpgradeKind::resize_line: out.line_upgrade_mi += a.length_mi; break;
        case UpgradeKind::add_capacitor: out.capacitor_kvar += a.new_rating; break;
        }
    }

    // per-year metrics and the hourly head profile (pre-upgrade system)
    std::set<std::string> overloaded_seen;
    std::map<int, std::set<std::string>> overloaded_by_year;
    for (const auto& v : out.violations)
        if (v.kind == ViolationKind::transformer_overload)
            overloaded_by_year[v.year].insert(v.component_id);
    for (int y = years.first; y <= years.last; ++y) {
        const YearResults& cell = pre.years.at(y);
        YearMetrics m;
        m.year = y;
        m.ev_delivered_kwh = delivered.count(y) ? delivered.at(y) : 0.0;
        m.ev_unmet_kwh = unmet.count(y) ? unmet.at(y) : 0.0;
        for (const auto& [d, series] : cell.days) {
            for (int h = 0; h < 24; ++h) {
                const SnapshotResult& r = series.hours[static_cast<std::size_t>(h)];
                m.peak_load_kw = std::max(m.peak_load_kw, r.source_kw);
                out.max_balance_error = std::max(out.max_balance_error, r.power_balance_error());
                HourPoint pt;
                pt.year = y;
                pt.day = d;
                pt.hour = h;
                pt.base_kw = ctx.base_kw.at(d)[static_cast<std::size_t>(h)];
                const auto& ev_day = ev.at(y).at(d);
                for (const auto& [bus, kw] : ev_day) pt.ev_kw += kw[static_cast<std::size_t>(h)];
                pt.head_kw = r.source_kw;
                pt.losses_kw = r.losses_kw;
                out.profile.push_back(pt);
            }
            for (double v : series.min_v_pu) m.min_v_pu = std::min(m.min_v_pu, v);
            for (double lf : series.max_loading) m.max_loading = std::max(m.max_loading, lf);
        }
        for (const std::string& id : overloaded_by_year[y]) overloaded_seen.insert(id);
        m.overloaded_tx_cum = static_cast<int>(overloaded_seen.size());
        m.overloaded_share_cum_pct =
            ctx.transformer_total > 0
                ? 100.0 * static_cast<double>(overloaded_seen.size()) / ctx.transformer_total
                : 0.0;
        auto spend = out.costs.by_year.find(y);
        m.spend_usd = spend != out.costs.by_year.end() ? spend->second : 0.0;
        out.years.push_back(m);
    }
    for (const auto& [y, cell] : post.years)
        for (const auto& [d, series] : cell.days)
            for (const SnapshotResult& r : series.hours)
                out.max_balance_error = std::max(out.max_balance_error, r.power_balance_error());

    // final-year voltage profile, before and after the plan
    {
        Circuit c(*ctx.feeder);
        const YearResults& before = pre.years.at(years.last);
        const YearResults& after = post.years.at(years.last);
        for (int n = 0; n < c.node_count(); ++n) {
            BusVoltagePoint bp;
            bp.bus = c.bus_id(n);
            bp.distance_mi = ctx.distance_mi.at(bp.bus);
            bp.v_before_pu = std::numeric_limits<double>::infinity();
            bp.v_after_pu = std::numeric_limits<double>::infinity();
            for (const auto& [d, series] : before.days)
                bp.v_before_pu = std::min(bp.v_before_pu, series.min_v_pu[static_cast<std::size_t>(n)]);
            for (const auto& [d, series] : after.days)
                bp.v_after_pu = std::min(bp.v_after_pu, series.min_v_pu[static_cast<std::size_t>(n)]);
            out.voltage.push_back(std::move(bp));
        }
    }
    return out;
}

// records every artifact path (relative to the run root) as it hands out
// absolute ones, so the manifest can list exactly what was written
class ArtifactLog {
  public:
    explicit ArtifactLog(std::filesystem::path root) : root_(std::move(root)) {}

    std::filesystem::path at(const std::string& rel) {
        rel_.push_back(rel);
        std::filesystem::path p = root_ / rel;
        std::filesystem::create_directories(p.parent_path());
        return p;
    }

    const std::vector<std::string>& rel_paths() const { return rel_; }
    const std::filesystem::path& root() const { return root_; }

  private:
    std::filesystem::path root_;
    std::vector<std::string> rel_;
};

void write_cell_artifacts(const CellResult& cell, ArtifactLog& log, const std::string& dir) {
    {
        CsvWriter w(log.at(dir + "/metrics.csv"));
        w.row({"year", "peak_load_kw", "ev_delivered_kwh", "ev_unmet_kwh", "min_v_pu",
               "max_loading", "overloaded_tx_cum", "overloaded_share_cum_pct", "spend_usd"});
        for (const YearMetrics& m : cell.years)
            w.row({std::to_string(m.year), fmt_double(m.peak_load_kw),
                   fmt_double(m.ev_delivered_kwh), fmt_double(m.ev_unmet_kwh),
                   fmt_double(m.min_v_pu), fmt_double(m.max_loading),
                   std::to_string(m.overloaded_tx_cum), fmt_double(m.overloaded_share_cum_pct),
                   fmt_double(m.spend_usd)});
    }
    {
        CsvWriter w(log.at(dir + "/summary.csv"));
        w.row({"transformer_total", "overloaded_tx_total", "transformer_upgrade_kva",
               "line_upgrade_mi", "capacitor_kvar", "transformer_cost_usd", "line_cost_usd",
               "capacitor_cost_usd", "total_cost_usd", "npv_usd", "residual_count",
               "max_balance_error", "tou_window_max_kw", "max_energy_residual_kwh"});
        auto kind_cost = [&](UpgradeKind k) {
            auto it = cell.costs.by_kind.find(k);
            return it != cell.costs.by_kind.end() ? it->second : 0.0;
        };
        w.row({std::to_string(cell.transformer_total),
               std::to_string(cell.years.empty() ? 0 : cell.years.back().overloaded_tx_cum),
               fmt_double(cell.transformer_upgrade_kva), fmt_double(cell.line_upgrade_mi),
               fmt_double(cell.capacitor_kvar),
               fmt_double(kind_cost(UpgradeKind::resize_transformer)),
               fmt_double(kind_cost(UpgradeKind::resize_line)),
               fmt_double(kind_cost(UpgradeKind::add_capacitor)),
               fmt_double(cell.costs.total()), fmt_double(cell.npv_usd),
               std::to_string(cell.residual.size()), fmt_double(cell.max_balance_error),
               fmt_double(cell.tou_window_max_kw), fmt_double(cell.max_energy_residual_kwh)});
    }
    save_plan(cell.plan, log.at(dir + "/plan.csv"));
    save_violations(cell.violations, log.at(dir + "/violations.csv"));
    save_violations(cell.residual, log.at(dir + "/residual.csv"));
    {
        CsvWriter w(log.at(dir + "/load_profile.csv"));
        w.row({"year", "day_type", "hour", "base_kw", "ev_kw", "head_kw", "losses_kw"});
        for (const HourPoint& p : cell.profile)
            w.row({std::to_string(p.year), to_string(p.day), std::to_string(p.hour),
                   fmt_double(p.base_kw), fmt_double(p.ev_kw), fmt_double(p.head_kw),
                   fmt_double(p.losses_kw)});
    }
    {
        CsvWriter w(log.at(dir + "/voltage_profile.csv"));
        w.row({"bus", "distance_mi", "v_min_pu_before", "v_min_pu_after"});
        for (const BusVoltagePoint& p : cell.voltage)
            w.row({p.bus, fmt_double(p.distance_mi), fmt_double(p.v_before_pu),
                   fmt_double(p.v_after_pu)});
    }
}

std::string cell_dir(const CellResult& c) {
    return "cells/" + c.feeder_id + "/" + to_string(c.strategy) + "/scenario-" +
           std::to_string(c.scenario);
}

// reductions read "percent saved vs the baseline"; 0-vs-0 saves nothing,
// and a nonzero value against a zero baseline has no defined percentage
double reduction_pct(double baseline, double value) {
    if (baseline == 0.0)
        return value == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return (baseline - value) / baseline * 100.0;
}

std::string pct_field(double v) { return std::isnan(v) ? std::string() : fmt_double(v); }

} // namespace

const CellResult* StudyResult::find(const std::string& feeder_id, Strategy s, int scenario) const {
    for (const CellResult& c : cells)
        if (c.feeder_id == feeder_id && c.strategy == s && c.scenario == scenario) return &c;
    return nullptr;
}

std::vector<TableRow> compute_table(const StudyResult& result, int baseline_scenario,
                                    int scenario) {
    const auto& sc = result.config.scenarios;
    if (std::find(sc.begin(), sc.end(), baseline_scenario) == sc.end())
        throw ConfigError("baseline scenario " + std::to_string(baseline_scenario) +
                          " is not part of the study");
    if (std::find(sc.begin(), sc.end(), scenario) == sc.end())
        throw ConfigError("scenario " + std::to_string(scenario) + " is not part of the study");

    auto kind_cost = [](const CellResult& c, UpgradeKind k) {
        auto it = c.costs.by_kind.find(k);
        return it != c.costs.by_kind.end() ? it->second : 0.0;
    };
    std::vector<TableRow> rows;
    for (const std::string& fid : result.feeder_ids)
        for (Strategy s : result.config.strategies) {
            const CellResult* base = result.find(fid, s, baseline_scenario);
            const CellResult* cell = result.find(fid, s, scenario);
            if (!base || !cell)
                throw ConfigError("study result is missing cells for feeder " + fid);
            TableRow row;
            row.feeder_id = fid;
            row.strategy = s;
            row.baseline_scenario = baseline_scenario;
            row.scenario = scenario;
            row.peak_load_reduction_pct =
                reduction_pct(base->years.back().peak_load_kw, cell->years.back().peak_load_kw);
            row.overload_reduction_pct = reduction_pct(base->years.back().overloaded_tx_cum,
                                                       cell->years.back().overloaded_tx_cum);
            row.transformer_cost_reduction_pct =
                reduction_pct(kind_cost(*base, UpgradeKind::resize_transformer),
                              kind_cost(*cell, UpgradeKind::resize_transformer));
            row.line_cost_reduction_pct = reduction_pct(kind_cost(*base, UpgradeKind::resize_line),
                                                        kind_cost(*cell, UpgradeKind::resize_line));
            row.npv_reduction_pct = reduction_pct(base->npv_usd, cell->npv_usd);
            rows.push_back(std::move(row));
        }
    return rows;
}

void save_table(const std::vector<TableRow>& rows, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"feeder", "strategy", "baseline_scenario", "scenario", "peak_load_reduction_pct",
           "overload_reduction_pct", "transformer_cost_reduction_pct", "line_cost_reduction_pct",
           "npv_reduction_pct"});
    for (const TableRow& r : rows)
        w.row({r.feeder_id, to_string(r.strategy), std::to_string(r.baseline_scenario),
               std::to_string(r.scenario), pct_field(r.peak_load_reduction_pct),
               pct_field(r.overload_reduction_pct), pct_field(r.transformer_cost_reduction_pct),
               pct_field(r.line_cost_reduction_pct), pct_field(r.npv_reduction_pct)});
}

std::vector<std::string> emit_plot_data(const StudyResult& result,
                                        const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto open = [&](const std::string& name) {
        written.push_back(name);
        return dir / name;
    };
    const int final_year = result.config.years.last;
    {
        CsvWriter w(open("load_profiles.csv"));
        w.row({"feeder", "strategy", "scenario", "day_type", "hour", "base_kw", "ev_kw",
               "head_kw"});
        for (const CellResult& c : result.cells)
            for (const HourPoint& p : c.profile) {
                if (p.year != final_year) continue;
                w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                       to_string(p.day), std::to_string(p.hour), fmt_double(p.base_kw),
                       fmt_double(p.ev_kw), fmt_double(p.head_kw)});
            }
    }
    {
        CsvWriter w(open("upgrade_capacity.csv"));
        w.row({"feeder", "strategy", "scenario", "kind", "quantity", "unit"});
        for (const CellResult& c : result.cells) {
            w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                   to_string(UpgradeKind::resize_transformer),
                   fmt_double(c.transformer_upgrade_kva), "kva"});
            w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                   to_string(UpgradeKind::resize_line), fmt_double(c.line_upgrade_mi), "mi"});
            w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                   to_string(UpgradeKind::add_capacitor), fmt_double(c.capacitor_kvar), "kvar"});
        }
    }
    {
        CsvWriter w(open("overload_trend.csv"));
        w.row({"feeder", "strategy", "scenario", "year", "overloaded_share_cum_pct"});
        for (const CellResult& c : result.cells)
            for (const YearMetrics& m : c.years)
                w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                       std::to_string(m.year), fmt_double(m.overloaded_share_cum_pct)});
    }
    {
        CsvWriter w(open("voltage_profiles.csv"));
        w.row({"feeder", "strategy", "scenario", "bus", "distance_mi", "v_min_pu_before",
               "v_min_pu_after"});
        for (const CellResult& c : result.cells)
            for (const BusVoltagePoint& p : c.voltage)
                w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario), p.bus,
                       fmt_double(p.distance_mi), fmt_double(p.v_before_pu),
                       fmt_double(p.v_after_pu)});
    }
    {
        CsvWriter w(open("npv.csv"));
        w.row({"feeder", "strategy", "scenario", "npv_usd"});
        for (const CellResult& c : result.cells)
            w.row({c.feeder_id, to_string(c.strategy), std::to_string(c.scenario),
                   fmt_double(c.npv_usd)});
    }
    return written;
}

namespace {

void write_failure_manifest(const std::filesystem::path& out_dir, const StudyConfig& cfg,
                            const std::string& error) {
    json m;
    m["schema_version"] = kSchemaVersion;
    m["tool"] = kToolVersion;
    m["name"] = cfg.name;
    m["seed"] = cfg.seed;
    m["complete"] = false;
    m["error"] = error;
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "manifest.json");
    out << m.dump(2) << "\n";
}

} // namespace

StudyResult run_study(const StudyInputs& inputs, const StudyConfig& config,
                      const std::filesystem::path& out_dir) {
    config.validate();
    StudyResult result;
    result.config = config;

    try {
        std::set<std::string> ids;
        for (const Feeder& f : inputs.feeders) {
            if (f.id.empty() || f.id.find('/') != std::string::npos ||
                f.id.find('\\') != std::string::npos)
                throw ConfigError("feeder id '" + f.id + "' cannot name an artifact directory");
            if (!ids.insert(f.id).second) throw ConfigError("duplicate feeder id " + f.id);
            result.feeder_ids.push_back(f.id);
        }
        for (const auto& [id, s] : config.fleet_scale)
            if (!ids.count(id)) throw ConfigError("fleet_scale names unknown feeder " + id);

        // Static per-feeder work shared by all that feeder's cells.
        std::vector<FeederContext> contexts;
        contexts.reserve(inputs.feeders.size());
        for (const Feeder& f : inputs.feeders) {
            try {
                contexts.push_back(build_context(f, inputs.profiles, config));
            } catch (const ConfigError& e) {
                throw ConfigError("feeder " + f.id + ": " + e.what());
            }
        }

        struct CellJob {
            const FeederContext* ctx;
            Strategy strategy;
            int scenario;
        };
        std::vector<CellJob> jobs;
        for (const FeederContext& ctx : contexts)
            for (Strategy s : config.strategies)
                for (int sc : config.scenarios) jobs.push_back({&ctx, s, sc});
        result.cells.resize(jobs.size());

        // the study grid is embarrassingly parallel; each worker fills
        // disjoint slots, so the outcome is independent of scheduling
        std::vector<std::string> errors(jobs.size());
        std::vector<int> error_kind(jobs.size(), -1); // 0 parse, 1 config, 2 solve, 3 other
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                const CellJob& job = jobs[i];
                std::string ctx_tag = "feeder " + job.ctx->feeder->id + " / " +
                                      to_string(job.strategy) + " / scenario " +
                                      std::to_string(job.scenario) + ": ";
                try {
                    result.cells[i] = run_cell(inputs, config, *job.ctx, job.strategy,
                                               job.scenario);
                } catch (const ParseError& e) {
                    errors[i] = ctx_tag + e.what();
                    error_kind[i] = 0;
                } catch (const ConfigError& e) {
                    errors[i] = ctx_tag + e.what();
                    error_kind[i] = 1;
                } catch (const SolveError& e) {
                    errors[i] = ctx_tag + e.what();
                    error_kind[i] = 2;
                } catch (const std::exception& e) {
                    errors[i] = ctx_tag + e.what();
                    error_kind[i] = 3;
                }
            }
        };
        unsigned hw = std::thread::hardware_concurrency();
        std::size_t n_threads = config.jobs > 0 ? static_cast<std::size_t>(config.jobs)
                                                : std::max(1u, hw);
        n_threads = std::max<std::size_t>(1, std::min(n_threads, jobs.size()));
        std::vector<std::thread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (std::thread& t : pool) t.join();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            switch (error_kind[i]) {
            case 0: throw ParseError(errors[i]);
            case 1: throw ConfigError(errors[i]);
            case 2: throw SolveError(errors[i]);
            case 3: throw ConfigError(errors[i]);
            default: break;
            }
        }

        if (out_dir.empty()) return result;

        ArtifactLog log(out_dir);
        {
            std::ofstream cfg_out(log.at("config.json"));
            cfg_out << study_config_to_json(config).dump(2) << "\n";
        }
        for (const FeederContext& ctx : contexts)
            for (DayType d : kAllDays)
                save_sessions(ctx.sessions.at(d),
                              log.at("sessions/" + ctx.feeder->id + "-" + to_string(d) + ".csv"));
        for (const CellResult& cell : result.cells)
            write_cell_artifacts(cell, log, cell_dir(cell));
        {
            int baseline = *std::min_element(config.scenarios.begin(), config.scenarios.end());
            int compare = *std::max_element(config.scenarios.begin(), config.scenarios.end());
            save_table(compute_table(result, baseline, compare), log.at("table.csv"));
        }
        for (const std::string& rel : emit_plot_data(result, out_dir / "plots"))
            log.at("plots/" + rel); // record (emit wrote the bytes already)

        json manifest;
        manifest["schema_version"] = kSchemaVersion;
        manifest["tool"] = kToolVersion;
        manifest["name"] = config.name;
        manifest["seed"] = config.seed;
        manifest["complete"] = true;
        manifest["config_digest"] = hex64(digest_file(out_dir / "config.json"));
        json inputs_json = json::object();
        auto add_input = [&](const std::string& rel) {
            if (rel.empty()) return;
            std::filesystem::path p = config.resolve(rel);
            if (std::filesystem::exists(p)) inputs_json[rel] = hex64(digest_file(p));
        };
        for (const std::string& f : config.feeder_files) add_input(f);
        add_input(config.profiles_file);
        add_input(config.cost_table_file);
        manifest["inputs"] = inputs_json;
        std::vector<std::string> rels = log.rel_paths();
        std::sort(rels.begin(), rels.end());
        json artifacts = json::array();
        for (const std::string& rel : rels)
            artifacts.push_back(json{{"path", rel}, {"digest", hex64(digest_file(out_dir / rel))}});
        manifest["artifacts"] = artifacts;
        {
            std::ofstream m_out(out_dir / "manifest.json");
            m_out << manifest.dump(2) << "\n";
        }
        result.manifest_digest = hex64(digest_file(out_dir / "manifest.json"));
    } catch (const std::exception& e) {
        if (!out_dir.empty()) write_failure_manifest(out_dir, config, e.what());
        throw;
    }
    return result;
}

StudyResult run_study(const StudyConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    if (config.feeder_files.empty()) throw ConfigError("config lists no feeder files");
    StudyInputs in;
    for (const std::string& f : config.feeder_files)
        in.feeders.push_back(load_feeder(config.resolve(f)));
    in.profiles = config.profiles_file.empty() ? ProfileStore::builtin()
                                               : load_profiles(config.resolve(config.profiles_file));
    in.costs = config.cost_table_file.empty()
                   ? CostTable::builtin()
                   : load_cost_table(config.resolve(config.cost_table_file));
    return run_study(in, config, out_dir);
}

EvHorizon build_cell_horizon(const StudyInputs& inputs, const StudyConfig& config,
                             const std::string& feeder_id, Strategy strategy, int scenario) {
    config.validate();
    for (const Feeder& f : inputs.feeders)
        if (f.id == feeder_id) {
            FeederContext ctx = build_context(f, inputs.profiles, config);
            return build_horizon(config, ctx, strategy, scenario).ev;
        }
    throw ConfigError("no feeder " + feeder_id + " among the study inputs");
}

namespace {

int need_col(const CsvTable& t, const std::string& name, const std::filesystem::path& p) {
    int i = t.column(name);
    if (i < 0) throw ParseError(p.string() + ": missing column " + name);
    return i;
}

double num_at(const std::vector<std::string>& row, int i, const std::filesystem::path& p) {
    try {
        return std::stod(row.at(static_cast<std::size_t>(i)));
    } catch (const std::exception&) {
        throw ParseError(p.string() + ": bad numeric field");
    }
}

} // namespace

StudyResult load_study_artifacts(const std::filesystem::path& run_dir) {
    StudyResult r;
    r.config = load_study_config(run_dir / "config.json");
    std::filesystem::path cells_dir = run_dir / "cells";
    if (!std::filesystem::is_directory(cells_dir))
        throw ParseError(cells_dir.string() + ": missing artifact directory");
    for (const auto& e : std::filesystem::directory_iterator(cells_dir))
        if (e.is_directory()) r.feeder_ids.push_back(e.path().filename().string());
    std::sort(r.feeder_ids.begin(), r.feeder_ids.end());
    if (r.feeder_ids.empty()) throw ParseError(cells_dir.string() + ": no feeder directories");

    for (const std::string& fid : r.feeder_ids)
        for (Strategy s : r.config.strategies)
            for (int sc : r.config.scenarios) {
                std::filesystem::path dir =
                    cells_dir / fid / to_string(s) / ("scenario-" + std::to_string(sc));
                CellResult c;
                c.feeder_id = fid;
                c.strategy = s;
                c.scenario = sc;
                {
                    std::filesystem::path p = dir / "metrics.csv";
                    CsvTable t = read_csv(p);
                    int year = need_col(t, "year", p), peak = need_col(t, "peak_load_kw", p),
                        del = need_col(t, "ev_delivered_kwh", p),
                        un = need_col(t, "ev_unmet_kwh", p), vmin = need_col(t, "min_v_pu", p),
                        ld = need_col(t, "max_loading", p),
                        cum = need_col(t, "overloaded_tx_cum", p),
                        share = need_col(t, "overloaded_share_cum_pct", p),
                        spend = need_col(t, "spend_usd", p);
                    for (const auto& row : t.rows) {
                        YearMetrics m;
                        m.year = static_cast<int>(num_at(row, year, p));
                        m.peak_load_kw = num_at(row, peak, p);
                        m.ev_delivered_kwh = num_at(row, del, p);
                        m.ev_unmet_kwh = num_at(row, un, p);
                        m.min_v_pu = num_at(row, vmin, p);
                        m.max_loading = num_at(row, ld, p);
                        m.overloaded_tx_cum = static_cast<int>(num_at(row, cum, p));
                        m.overloaded_share_cum_pct = num_at(row, share, p);
                        m.spend_usd = num_at(row, spend, p);
                        if (m.spend_usd != 0.0) c.costs.by_year[m.year] = m.spend_usd;
                        c.years.push_back(m);
                    }
                }
                {
                    std::filesystem::path p = dir / "summary.csv";
                    CsvTable t = read_csv(p);
                    if (t.rows.size() != 1)
                        throw ParseError(p.string() + ": expected exactly one row");
                    const auto& row = t.rows[0];
                    auto get = [&](const char* name) {
                        return num_at(row, need_col(t, name, p), p);
                    };
                    c.transformer_total = static_cast<int>(get("transformer_total"));
                    c.transformer_upgrade_kva = get("transformer_upgrade_kva");
                    c.line_upgrade_mi = get("line_upgrade_mi");
                    c.capacitor_kvar = get("capacitor_kvar");
                    auto put_kind = [&](UpgradeKind k, const char* name) {
                        double v = get(name);
                        if (v != 0.0) c.costs.by_kind[k] = v;
                    };
                    put_kind(UpgradeKind::resize_transformer, "transformer_cost_usd");
                    put_kind(UpgradeKind::resize_line, "line_cost_usd");
                    put_kind(UpgradeKind::add_capacitor, "capacitor_cost_usd");
                    c.npv_usd = get("npv_usd");
                    c.max_balance_error = get("max_balance_error");
                    c.tou_window_max_kw = get("tou_window_max_kw");
                    c.max_energy_residual_kwh = get("max_energy_residual_kwh");
                }
                {
                    std::filesystem::path p = dir / "load_profile.csv";
                    CsvTable t = read_csv(p);
                    int year = need_col(t, "year", p), day = need_col(t, "day_type", p),
                        hour = need_col(t, "hour", p), base = need_col(t, "base_kw", p),
                        evc = need_col(t, "ev_kw", p), head = need_col(t, "head_kw", p),
                        loss = need_col(t, "losses_kw", p);
                    for (const auto& row : t.rows) {
                        HourPoint pt;
                        pt.year = static_cast<int>(num_at(row, year, p));
                        pt.day = day_type_from_string(row.at(static_cast<std::size_t>(day)));
                        pt.hour = static_cast<int>(num_at(row, hour, p));
                        pt.base_kw = num_at(row, base, p);
                        pt.ev_kw = num_at(row, evc, p);
                        pt.head_kw = num_at(row, head, p);
                        pt.losses_kw = num_at(row, loss, p);
                        c.profile.push_back(pt);
                    }
                }
                {
                    std::filesystem::path p = dir / "voltage_profile.csv";
                    CsvTable t = read_csv(p);
                    int bus = need_col(t, "bus", p), dist = need_col(t, "distance_mi", p),
                        before = need_col(t, "v_min_pu_before", p),
                        after = need_col(t, "v_min_pu_after", p);
                    for (const auto& row : t.rows) {
                        BusVoltagePoint bp;
                        bp.bus = row.at(static_cast<std::size_t>(bus));
                        bp.distance_mi = num_at(row, dist, p);
                        bp.v_before_pu = num_at(row, before, p);
                        bp.v_after_pu = num_at(row, after, p);
                        c.voltage.push_back(std::move(bp));
                    }
                }
                c.plan = load_plan(dir / "plan.csv");
                c.violations = load_violations(dir / "violations.csv");
                c.residual = load_violations(dir / "residual.csv");
                r.cells.push_back(std::move(c));
            }
    if (std::filesystem::exists(run_dir / "manifest.json"))
        r.manifest_digest = hex64(digest_file(run_dir / "manifest.json"));
    return r;
}

} // namespace evgrid
