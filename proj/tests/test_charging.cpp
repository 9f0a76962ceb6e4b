#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "evgrid/charging.hpp"
#include "evgrid/rng.hpp"
#include "evgrid/synthetic.hpp"

using namespace evgrid;

namespace {

EVSession make_session(const std::string& id, int plugin, int duration, double energy,
                       double power, bool enrolled = true) {
    EVSession s;
    s.session_id = id;
    s.bus = "b1";
    s.plugin_hour = plugin;
    s.duration_h = duration;
    s.energy_kwh = energy;
    s.max_power_kw = power;
    s.enrolled = enrolled;
    return s;
}

double delivered_plus_unmet(const ChargingSchedule& c) {
    return c.delivered_kwh() + c.unmet_kwh;
}

// Exhaustive feasibility oracle for small balancing instances: can every
// session be given energy/max_power full-power hours inside its window with
// no hour exceeding cap? Searches all integral hour assignments; a hit means
// a zero-breach allocation certainly exists.
bool integral_assignment_exists(const std::vector<EVSession>& sessions,
                                const std::array<double, 24>& base, double cap) {
    std::vector<int> need;
    std::vector<std::vector<int>> window;
    for (const auto& s : sessions) {
        need.push_back(static_cast<int>(std::lround(s.energy_kwh / s.max_power_kw)));
        std::vector<int> w;
        for (int t = s.plugin_hour; t < s.depart_slot(); ++t) w.push_back(t);
        window.push_back(w);
    }
    std::array<double, 48> alloc{}; // per slot; hours fold by % 24
    std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
        if (i == sessions.size()) {
            for (int h = 0; h < 24; ++h)
                if (base[h] + alloc[h] + alloc[h + 24] > cap + 1e-9) return false;
            return true;
        }
        const auto& w = window[i];
        int k = need[i];
        if (k == 0) return rec(i + 1);
        std::vector<int> pick(k);
        std::function<bool(int, int)> choose = [&](int start, int depth) -> bool {
            if (depth == k) {
                for (int j = 0; j < k; ++j) alloc[pick[j]] += sessions[i].max_power_kw;
                bool ok = rec(i + 1);
                for (int j = 0; j < k; ++j) alloc[pick[j]] -= sessions[i].max_power_kw;
                return ok;
            }
            for (int p = start; p < static_cast<int>(w.size()); ++p) {
                pick[depth] = w[p];
                if (choose(p + 1, depth + 1)) return true;
            }
            return false;
        };
        return choose(0, 0);
    };
    return rec(0);
}

} // namespace

TEST_CASE("unmanaged charges at max power from plug-in") {
    auto c = unmanaged_schedule(make_session("s", 16, 7, 14.0, 7.0));
    CHECK(c.power_kw[16] == 7.0);
    CHECK(c.power_kw[17] == 7.0);
    for (int t = 18; t < kHorizonSlots; ++t) CHECK(c.power_kw[t] == 0.0);
    CHECK(c.power_kw[15] == 0.0);
    CHECK(c.unmet_kwh == 0.0);
}

TEST_CASE("unmanaged final hour throttles to the remaining energy") {
    auto c = unmanaged_schedule(make_session("s", 8, 6, 10.0, 7.0));
    CHECK(c.power_kw[8] == 7.0);
    CHECK(c.power_kw[9] == 3.0);
    CHECK(c.power_kw[10] == 0.0);
    CHECK(delivered_plus_unmet(c) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("zero energy charges nothing") {
    auto c = unmanaged_schedule(make_session("s", 10, 5, 0.0, 7.0));
    for (double p : c.power_kw) CHECK(p == 0.0);
    CHECK(c.unmet_kwh == 0.0);
}

TEST_CASE("too-short window leaves energy unmet") {
    auto c = unmanaged_schedule(make_session("s", 18, 1, 20.0, 7.0));
    CHECK(c.power_kw[18] == 7.0);
    CHECK(c.unmet_kwh == doctest::Approx(13.0));
}

TEST_CASE("tou pauses through the window and resumes at nine") {
    auto c = tou_schedule(make_session("s", 16, 7, 14.0, 7.0));
    CHECK(c.power_kw[16] == 7.0);
    for (int t = 17; t <= 20; ++t) CHECK(c.power_kw[t] == 0.0);
    CHECK(c.power_kw[21] == 7.0);
    CHECK(c.power_kw[22] == 0.0);
    CHECK(c.unmet_kwh == 0.0);
}

TEST_CASE("tou leaves overnight sessions untouched") {
    EVSession s = make_session("s", 22, 8, 30.0, 7.2);
    auto tou = tou_schedule(s);
    s.enrolled = false;
    auto plain = unmanaged_schedule(s);
    CHECK(tou.power_kw == plain.power_kw);
    CHECK(tou.unmet_kwh == plain.unmet_kwh);
}

TEST_CASE("session living entirely inside the tou window is fully unmet") {
    auto c = tou_schedule(make_session("s", 17, 4, 10.0, 7.0));
    for (double p : c.power_kw) CHECK(p == 0.0);
    CHECK(c.unmet_kwh == doctest::Approx(10.0));
}

TEST_CASE("non-enrolled sessions ignore tou") {
    auto c = tou_schedule(make_session("s", 16, 7, 14.0, 7.0, false));
    CHECK(c.power_kw[17] == 7.0);
}

TEST_CASE("tou never allocates inside the window for any enrolled session") {
    Rng rng(77);
    for (int i = 0; i < 300; ++i) {
        auto s = make_session("s", rng.uniform_int(0, 23), rng.uniform_int(1, 24),
                              rng.uniform(0.0, 60.0), rng.uniform(3.0, 19.0));
        auto c = tou_schedule(s);
        auto folded = c.folded_kw();
        for (int h = kTouStartHour; h < kTouEndHour; ++h) CHECK(folded[h] == 0.0);
        CHECK(delivered_plus_unmet(c) == doctest::Approx(s.energy_kwh).epsilon(1e-9));
        // tou matches unmanaged when the unmanaged schedule misses the window
        auto plain = unmanaged_schedule(s);
        bool window_untouched = true;
        for (int t = 0; t < kHorizonSlots; ++t)
            if (plain.power_kw[t] > 0.0 && t % 24 >= kTouStartHour && t % 24 < kTouEndHour)
                window_untouched = false;
        if (window_untouched) CHECK(tou_schedule(s).power_kw == plain.power_kw);
    }
}

TEST_CASE("lb with ample headroom reproduces unmanaged") {
    std::vector<EVSession> group = {make_session("a", 18, 8, 21.0, 7.0)};
    std::array<double, 24> base{};
    auto res = lb_schedule(group, 1000.0, base);
    auto plain = unmanaged_schedule(group[0]);
    CHECK(res.schedules[0].power_kw == plain.power_kw);
    CHECK(res.breach_count() == 0);
}

TEST_CASE("lb serializes two sessions through a one-charger bottleneck") {
    // cap = 0.9 * 16 = 14.4 kW; each charger pulls 7.2 kW, base uses 7.2,
    // so exactly one vehicle fits at a time
    std::vector<EVSession> group = {make_session("a", 18, 4, 14.4, 7.2),
                                    make_session("b", 18, 4, 14.4, 7.2)};
    std::array<double, 24> base{};
    base.fill(7.2);
    auto res = lb_schedule(group, 16.0, base);
    CHECK(res.breach_count() == 0);
    for (int t = 18; t < 22; ++t) {
        double total = res.schedules[0].power_kw[t] + res.schedules[1].power_kw[t];
        CHECK(total == doctest::Approx(7.2).epsilon(1e-9));
    }
    CHECK(res.schedules[0].unmet_kwh == 0.0);
    CHECK(res.schedules[1].unmet_kwh == 0.0);
}

TEST_CASE("lb delivers infeasible demand anyway and flags the breach") {
    std::vector<EVSession> group = {make_session("a", 18, 2, 14.0, 7.0),
                                    make_session("b", 18, 2, 14.0, 7.0)};
    std::array<double, 24> base{};
    base.fill(5.0);
    auto res = lb_schedule(group, 10.0, base); // cap 9, base 5 -> headroom 4 kW
    CHECK(res.breach_count() > 0);
    CHECK(res.schedules[0].unmet_kwh == 0.0);
    CHECK(res.schedules[1].unmet_kwh == 0.0);
    CHECK(res.schedules[0].delivered_kwh() == doctest::Approx(14.0));
    CHECK(res.schedules[1].delivered_kwh() == doctest::Approx(14.0));
    CHECK(res.breach_hours[18]);
}

TEST_CASE("lb finds the zero-breach schedule whenever integral search does") {
    Rng rng(2024);
    int feasible_seen = 0;
    for (int trial = 0; trial < 400; ++trial) {
        int n = rng.uniform_int(1, 3);
        std::vector<EVSession> group;
        for (int i = 0; i < n; ++i) {
            int plugin = rng.uniform_int(0, 6);
            int dur = rng.uniform_int(1, 5);
            double power = 7.0;
            int k = rng.uniform_int(0, std::min(dur, 3));
            group.push_back(make_session("s" + std::to_string(i), plugin, dur,
                                         k * power, power));
        }
        std::array<double, 24> base{};
        for (int h = 0; h < 24; ++h) base[h] = rng.uniform(0.0, 6.0);
        double cap = rng.uniform(6.0, 18.0);
        bool feasible = integral_assignment_exists(group, base, cap);
        auto res = lb_schedule(group, cap / 0.9, base);
        CAPTURE(trial);
        if (feasible) {
            ++feasible_seen;
            CHECK(res.breach_count() == 0);
        }
        // conservation and bounds hold regardless
        for (std::size_t i = 0; i < group.size(); ++i) {
            const auto& c = res.schedules[i];
            CHECK(delivered_plus_unmet(c) ==
                  doctest::Approx(group[i].energy_kwh).epsilon(1e-9));
            for (int t = 0; t < kHorizonSlots; ++t) {
                CHECK(c.power_kw[t] <= group[i].max_power_kw + 1e-12);
                if (t < group[i].plugin_hour || t >= group[i].depart_slot())
                    CHECK(c.power_kw[t] == 0.0);
            }
        }
    }
    CHECK(feasible_seen > 100); // the instance generator must exercise both sides
}

TEST_CASE("lb never breaches more hours than unmanaged") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        int n = rng.uniform_int(1, 6);
        std::vector<EVSession> group;
        for (int i = 0; i < n; ++i)
            group.push_back(make_session("s" + std::to_string(i), rng.uniform_int(0, 23),
                                         rng.uniform_int(1, 14), rng.uniform(0.0, 40.0),
                                         rng.uniform(3.0, 11.0)));
        std::array<double, 24> base{};
        for (int h = 0; h < 24; ++h) base[h] = rng.uniform(0.0, 10.0);
        double rating = rng.uniform(10.0, 40.0);
        double cap = 0.9 * rating;

        auto res = lb_schedule(group, rating, base);

        std::array<double, 24> unmanaged_total = base;
        for (const auto& s : group) {
            auto f = unmanaged_schedule(s).folded_kw();
            for (int h = 0; h < 24; ++h) unmanaged_total[h] += f[h];
        }
        int unmanaged_breaches = 0;
        for (int h = 0; h < 24; ++h)
            if (unmanaged_total[h] > cap + 1e-9) ++unmanaged_breaches;
        CAPTURE(trial);
        CHECK(res.breach_count() <= unmanaged_breaches);
    }
}

TEST_CASE("enrollment scenarios ramp from zero to their target") {
    auto t1 = EnrollmentTrajectory::for_scenario(1);
    auto t4 = EnrollmentTrajectory::for_scenario(4);
    CHECK(t1.rate(2035) == 0.0);
    CHECK(t4.rate(2022) == 0.0);
    CHECK(t4.rate(2035) == doctest::Approx(0.50));
    double prev = -1.0;
    for (int y = 2022; y <= 2035; ++y) {
        CHECK(t4.rate(y) >= prev);
        prev = t4.rate(y);
    }
    CHECK(EnrollmentTrajectory::for_scenario(2).target_rate_2035 == doctest::Approx(0.10));
    CHECK(EnrollmentTrajectory::for_scenario(3).target_rate_2035 == doctest::Approx(0.30));
    CHECK_THROWS_AS(EnrollmentTrajectory::for_scenario(5), ConfigError);
}

TEST_CASE("enrollment is approximately the target rate and monotone over years") {
    std::vector<EVSession> sessions;
    for (int i = 0; i < 1000; ++i)
        sessions.push_back(make_session("v" + std::to_string(i), 18, 8, 10.0, 7.0, false));

    auto t = EnrollmentTrajectory::for_scenario(4);
    apply_enrollment(sessions, t, 2035, 99);
    int enrolled = 0;
    for (const auto& s : sessions)
        if (s.enrolled) ++enrolled;
    CHECK(enrolled > 450);
    CHECK(enrolled < 550);

    auto t1 = EnrollmentTrajectory::for_scenario(1);
    apply_enrollment(sessions, t1, 2035, 99);
    for (const auto& s : sessions) CHECK(!s.enrolled);

    std::set<std::string> previous;
    for (int year = 2022; year <= 2035; ++year) {
        apply_enrollment(sessions, t, year, 99);
        std::set<std::string> now;
        for (const auto& s : sessions)
            if (s.enrolled) now.insert(s.session_id);
        CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
        previous = std::move(now);
    }
}

TEST_CASE("aggregation preserves energy and bus identity") {
    std::vector<EVSession> sessions = {make_session("a", 18, 6, 14.0, 7.0),
                                       make_session("b", 9, 4, 10.0, 7.0)};
    sessions[0].bus = "x";
    sessions[1].bus = "y";
    std::vector<ChargingSchedule> schedules = {unmanaged_schedule(sessions[0]),
                                               unmanaged_schedule(sessions[1])};
    auto agg = aggregate_ev_load(sessions, schedules);
    REQUIRE(agg.size() == 2);
    CHECK(agg.at("x") == schedules[0].folded_kw());
    CHECK(agg.at("y") == schedules[1].folded_kw());

    // conservation across a pile of random schedules
    Rng rng(5);
    sessions.clear();
    schedules.clear();
    for (int i = 0; i < 100; ++i) {
        auto s = make_session("r" + std::to_string(i), rng.uniform_int(0, 23),
                              rng.uniform_int(1, 24), rng.uniform(0.0, 50.0),
                              rng.uniform(3.0, 19.0));
        s.bus = "bus" + std::to_string(rng.uniform_int(0, 5));
        schedules.push_back(unmanaged_schedule(s));
        sessions.push_back(std::move(s));
    }
    double total_delivered = 0.0;
    for (const auto& c : schedules) total_delivered += c.delivered_kwh();
    auto agg2 = aggregate_ev_load(sessions, schedules);
    double total_agg = 0.0;
    for (const auto& [bus, kw] : agg2)
        for (double p : kw) total_agg += p;
    CHECK(total_agg == doctest::Approx(total_delivered).epsilon(1e-9));
}

TEST_CASE("session generator is deterministic and honors the class weighting") {
    SyntheticFeederSpec fs;
    fs.bus_count = 60;
    fs.class_mix = {0.6, 0.3, 0.05, 0.05};
    fs.seed = 21;
    Feeder f = generate_synthetic_feeder(fs);

    BehaviorSpec spec;
    auto a = generate_sessions(f, 500, spec, 9);
    auto b = generate_sessions(f, 500, spec, 9);
    CHECK(a == b);
    CHECK(!(generate_sessions(f, 500, spec, 10) == a));
    CHECK(generate_sessions(f, 0, spec, 9).empty());

    std::set<std::string> res_buses;
    for (const auto& ld : f.loads)
        if (ld.customer_class == CustomerClass::residential) res_buses.insert(ld.bus);
    int on_res = 0;
    for (const auto& s : a) {
        CHECK(s.plugin_hour >= 0);
        CHECK(s.plugin_hour <= 23);
        CHECK(s.duration_h >= 1);
        CHECK(s.duration_h <= 24);
        CHECK(s.energy_kwh >= spec.energy_min_kwh);
        CHECK(s.energy_kwh <= spec.energy_max_kwh);
        if (res_buses.count(s.bus)) ++on_res;
    }
    CHECK(on_res >= 375); // 0.8 weighting with multinomial slack
}

TEST_CASE("session generator rejects bad specs") {
    SyntheticFeederSpec fs;
    fs.bus_count = 20;
    fs.seed = 3;
    Feeder f = generate_synthetic_feeder(fs);
    BehaviorSpec bad;
    bad.charger_share = {0.5, 0.2, 0.2};
    CHECK_THROWS_AS(generate_sessions(f, 10, bad, 1), ConfigError);
    BehaviorSpec neg;
    neg.energy_min_kwh = 10.0;
    neg.energy_max_kwh = 5.0;
    CHECK_THROWS_AS(generate_sessions(f, 10, neg, 1), ConfigError);
}

TEST_CASE("session csv round trip and validation") {
    SyntheticFeederSpec fs;
    fs.bus_count = 30;
    fs.seed = 8;
    Feeder f = generate_synthetic_feeder(fs);
    auto sessions = generate_sessions(f, 40, BehaviorSpec{}, 17);
    auto path = std::filesystem::temp_directory_path() / "evgrid_sessions.csv";
    save_sessions(sessions, path);
    auto loaded = load_sessions(path);
    REQUIRE(loaded.size() == sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        CHECK(loaded[i].session_id == sessions[i].session_id);
        CHECK(loaded[i].bus == sessions[i].bus);
        CHECK(loaded[i].plugin_hour == sessions[i].plugin_hour);
        CHECK(loaded[i].duration_h == sessions[i].duration_h);
        CHECK(loaded[i].energy_kwh == doctest::Approx(sessions[i].energy_kwh).epsilon(1e-12));
        CHECK(loaded[i].max_power_kw == sessions[i].max_power_kw);
    }

    std::ofstream bad(std::filesystem::temp_directory_path() / "evgrid_badsess.csv");
    bad << "session_id,bus,plugin_hour,duration_h,energy_kwh,max_power_kw\n";
    bad << "s1,b1,25,4,10,7\n";
    bad.close();
    CHECK_THROWS_AS(load_sessions(std::filesystem::temp_directory_path() / "evgrid_badsess.csv"),
                    ParseError);
}
