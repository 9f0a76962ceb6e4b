#include "evgrid/charging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "evgrid/csv.hpp"
#include "evgrid/rng.hpp"

namespace evgrid {

double ChargingSchedule::delivered_kwh() const {
    return std::accumulate(power_kw.begin(), power_kw.end(), 0.0);
}

std::array<double, 24> ChargingSchedule::folded_kw() const {
    std::array<double, 24> out{};
    for (int t = 0; t < kHorizonSlots; ++t) out[t % 24] += power_kw[t];
    return out;
}

int LbResult::breach_count() const {
    int n = 0;
    for (bool b : breach_hours)
        if (b) ++n;
    return n;
}

ChargingSchedule unmanaged_schedule(const EVSession& s) {
    ChargingSchedule out;
    out.session_id = s.session_id;
    double remaining = s.energy_kwh;
    for (int t = s.plugin_hour; t < s.depart_slot() && remaining > 0.0; ++t) {
        double p = std::min(s.max_power_kw, remaining); // 1 h slots: kW == kWh
        out.power_kw[t] = p;
        remaining -= p;
    }
    out.unmet_kwh = std::max(remaining, 0.0);
    return out;
}

ChargingSchedule tou_schedule(const EVSession& s) {
    if (!s.enrolled) return unmanaged_schedule(s);
    ChargingSchedule out;
    out.session_id = s.session_id;
    double remaining = s.energy_kwh;
    for (int t = s.plugin_hour; t < s.depart_slot() && remaining > 0.0; ++t) {
        int hour = t % 24;
        if (hour >= kTouStartHour && hour < kTouEndHour) continue; // paused
        double p = std::min(s.max_power_kw, remaining);
        out.power_kw[t] = p;
        remaining -= p;
    }
    out.unmet_kwh = std::max(remaining, 0.0);
    return out;
}

LbResult lb_schedule(const std::vector<EVSession>& sessions, double rating_kva,
                     const std::array<double, 24>& base_kw, double threshold) {
    const std::size_t n = sessions.size();
    LbResult out;
    out.schedules.resize(n);
    const double cap = threshold * rating_kva;

    // Sessions in the fallback set charge unmanaged and count as base load:
    // non-enrolled vehicles from the start, plus any enrolled vehicle whose
    // energy the headroom cannot carry (energy-need priority: it charges
    // like an unmanaged one instead of being stranded). Demoting a vehicle
    // frees/steals headroom, so balance again until the set is stable. The
    // fallback load never exceeds what full-unmanaged operation would draw,
    // and balanced allocations stay under the cap, so balancing can only
    // remove breach hours relative to unmanaged, never add them.
    std::vector<bool> fallback(n, false);
    for (std::size_t i = 0; i < n; ++i) fallback[i] = !sessions[i].enrolled;

    std::vector<double> remaining(n, 0.0);
    std::vector<int> active;
    for (;;) {
        std::array<double, 24> used = base_kw;
        for (std::size_t i = 0; i < n; ++i) {
            if (fallback[i]) {
                out.schedules[i] = unmanaged_schedule(sessions[i]);
                auto f = out.schedules[i].folded_kw();
                for (int h = 0; h < 24; ++h) used[h] += f[h];
            } else {
                out.schedules[i] = ChargingSchedule{};
                out.schedules[i].session_id = sessions[i].session_id;
                remaining[i] = sessions[i].energy_kwh;
            }
        }

        // chronological sweep; inside a slot, earliest departure drinks first
        for (int t = 0; t < kHorizonSlots; ++t) {
            active.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (!fallback[i] && remaining[i] > 1e-12 &&
                    t >= sessions[i].plugin_hour && t < sessions[i].depart_slot())
                    active.push_back(static_cast<int>(i));
            std::sort(active.begin(), active.end(), [&](int a, int b) {
                if (sessions[a].depart_slot() != sessions[b].depart_slot())
                    return sessions[a].depart_slot() < sessions[b].depart_slot();
                return a < b;
            });
            double headroom = cap - used[t % 24];
            for (int i : active) {
                if (headroom <= 0.0) break;
                double take = std::min({sessions[i].max_power_kw, remaining[i], headroom});
                if (take <= 0.0) continue;
                out.schedules[i].power_kw[t] += take;
                remaining[i] -= take;
                used[t % 24] += take;
                headroom -= take;
            }
        }

        bool demoted = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (fallback[i]) continue;
            if (remaining[i] > 1e-9) {
                fallback[i] = true;
                demoted = true;
            } else {
                out.schedules[i].unmet_kwh = std::max(remaining[i], 0.0);
            }
        }
        if (!demoted) {
            for (int h = 0; h < 24; ++h) out.breach_hours[h] = used[h] > cap + 1e-9;
            return out;
        }
    }
}

EnrollmentTrajectory EnrollmentTrajectory::for_scenario(int scenario) {
    double target;
    switch (scenario) {
        case 1: target = 0.0; break;
        case 2: target = 0.10; break;
        case 3: target = 0.30; break;
        case 4: target = 0.50; break;
        default: throw ConfigError("scenario must be 1..4, got " + std::to_string(scenario));
    }
    EnrollmentTrajectory t;
    t.scenario = scenario;
    t.target_rate_2035 = target;
    for (int year = 2022; year <= 2035; ++year)
        t.rate_by_year[year] = target * (year - 2022) / 13.0;
    return t;
}

double EnrollmentTrajectory::rate(int year) const {
    if (rate_by_year.empty()) return 0.0;
    if (year <= rate_by_year.begin()->first) return rate_by_year.begin()->second;
    if (year >= rate_by_year.rbegin()->first) return rate_by_year.rbegin()->second;
    return rate_by_year.at(year);
}

void apply_enrollment(std::vector<EVSession>& sessions, const EnrollmentTrajectory& t,
                      int year, std::uint64_t seed) {
    double r = t.rate(year);
    for (auto& s : sessions) s.enrolled = hash_unit(seed, s.session_id) < r;
}

std::map<std::string, std::array<double, 24>> aggregate_ev_load(
    const std::vector<EVSession>& sessions, const std::vector<ChargingSchedule>& schedules) {
    std::unordered_map<std::string, const std::string*> bus_of;
    for (const auto& s : sessions) bus_of[s.session_id] = &s.bus;
    std::map<std::string, std::array<double, 24>> out;
    for (const auto& sch : schedules) {
        auto it = bus_of.find(sch.session_id);
        if (it == bus_of.end())
            throw ConfigError("schedule for unknown session " + sch.session_id);
        auto& slot = out[*it->second];
        auto f = sch.folded_kw();
        for (int h = 0; h < 24; ++h) slot[h] += f[h];
    }
    return out;
}

namespace {

int wrap_hour(double x) {
    int h = static_cast<int>(std::lround(x)) % 24;
    return h < 0 ? h + 24 : h;
}

void check_behavior(const BehaviorSpec& b) {
    if (b.residential_weight < 0.0 || b.residential_weight > 1.0)
        throw ConfigError("residential_weight must lie in [0,1]");
    for (const auto* c : {&b.residential, &b.commercial})
        if (c->plugin_sd < 0.0 || c->duration_sd < 0.0)
            throw ConfigError("behavior spec standard deviations must be >= 0");
    if (b.energy_sd_kwh < 0.0 || b.energy_min_kwh < 0.0 || b.energy_max_kwh < b.energy_min_kwh)
        throw ConfigError("behavior spec energy bounds are inconsistent");
    double share = 0.0;
    for (double w : b.charger_share) {
        if (w < 0.0) throw ConfigError("charger_share has a negative weight");
        share += w;
    }
    if (std::abs(share - 1.0) > 1e-9) throw ConfigError("charger_share must sum to 1");
    for (double kw : b.charger_kw)
        if (kw <= 0.0) throw ConfigError("charger_kw entries must be positive");
}

} // namespace

std::vector<EVSession> generate_sessions(const Feeder& feeder, int count,
                                         const BehaviorSpec& spec, std::uint64_t seed) {
    if (count < 0) throw ConfigError("session count must be >= 0");
    check_behavior(spec);
    std::vector<EVSession> out;
    if (count == 0) return out;

    std::vector<std::string> res_buses, com_buses;
    for (const auto& ld : feeder.loads) {
        std::vector<std::string>* list;
        if (ld.customer_class == CustomerClass::residential) list = &res_buses;
        else if (ld.customer_class == CustomerClass::commercial) list = &com_buses;
        else continue;
        if (std::find(list->begin(), list->end(), ld.bus) == list->end())
            list->push_back(ld.bus);
    }
    if (res_buses.empty() && com_buses.empty())
        throw ConfigError("feeder " + feeder.id + " has no residential or commercial load buses");

    Rng rng(seed);
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        bool residential = rng.uniform() < spec.residential_weight;
        if (residential && res_buses.empty()) residential = false;
        if (!residential && com_buses.empty()) residential = true;
        const auto& buses = residential ? res_buses : com_buses;
        const SessionClassSpec& cs = residential ? spec.residential : spec.commercial;

        EVSession s;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "-s%04d", i);
        s.session_id = feeder.id + idbuf;
        s.bus = buses[rng.uniform_int(0, static_cast<int>(buses.size()) - 1)];
        s.plugin_hour = wrap_hour(rng.normal(cs.plugin_mean, cs.plugin_sd));
        s.duration_h = std::clamp(
            static_cast<int>(std::lround(rng.normal(cs.duration_mean, cs.duration_sd))), 1, 24);
        s.energy_kwh = std::clamp(rng.normal(spec.energy_mean_kwh, spec.energy_sd_kwh),
                                  spec.energy_min_kwh, spec.energy_max_kwh);
        s.max_power_kw = spec.charger_kw[rng.pick_weighted(spec.charger_share)];
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<EVSession> load_sessions(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const char* names[] = {"session_id", "bus", "plugin_hour", "duration_h",
                           "energy_kwh", "max_power_kw"};
    int col[6];
    for (int i = 0; i < 6; ++i) {
        col[i] = t.column(names[i]);
        if (col[i] < 0)
            throw ParseError(path.string() + ": session CSV missing column " + names[i]);
    }
    std::vector<EVSession> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path.string() + ": row " + std::to_string(r + 2);
        EVSession s;
        s.session_id = row[col[0]];
        s.bus = row[col[1]];
        try {
            s.plugin_hour = std::stoi(row[col[2]]);
            s.duration_h = std::stoi(row[col[3]]);
            s.energy_kwh = std::stod(row[col[4]]);
            s.max_power_kw = std::stod(row[col[5]]);
        } catch (const std::exception&) {
            throw ParseError(where + ": non-numeric session field");
        }
        if (s.plugin_hour < 0 || s.plugin_hour > 23)
            throw ParseError(where + ": plugin_hour must lie in 0..23");
        if (s.duration_h < 1 || s.duration_h > 24)
            throw ParseError(where + ": duration_h must lie in 1..24");
        if (s.energy_kwh < 0.0) throw ParseError(where + ": energy_kwh must be >= 0");
        if (s.max_power_kw <= 0.0) throw ParseError(where + ": max_power_kw must be > 0");
        out.push_back(std::move(s));
    }
    return out;
}

void save_sessions(const std::vector<EVSession>& sessions, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"session_id", "bus", "plugin_hour", "duration_h", "energy_kwh", "max_power_kw"});
    for (const auto& s : sessions)
        w.row({s.session_id, s.bus, std::to_string(s.plugin_hour), std::to_string(s.duration_h),
               fmt_double(s.energy_kwh), fmt_double(s.max_power_kw)});
}

} // namespace evgrid
