#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evgrid/common.hpp"
#include "evgrid/feeder.hpp"

namespace evgrid {

// Sessions are daily templates on a 48-slot wrapped horizon: slot s is
// hour-of-day s % 24, so a session plugging in at 22:00 for 8 hours occupies
// slots 22..29. Folding by % 24 recovers the steady-state daily shape.
inline constexpr int kHorizonSlots = 48;

// TOU curtailment window, hours-of-day [start, end)
inline constexpr int kTouStartHour = 17;
inline constexpr int kTouEndHour = 21;

struct EVSession {
    std::string session_id;
    std::string bus;
    int plugin_hour = 0; // 0..23
    int duration_h = 1;  // 1..24; departure slot = plugin_hour + duration_h
    double energy_kwh = 0.0;
    double max_power_kw = 7.2;
    bool enrolled = false;

    int depart_slot() const { return plugin_hour + duration_h; }
    bool operator==(const EVSession&) const = default;
};

struct ChargingSchedule {
    std::string session_id;
    std::array<double, kHorizonSlots> power_kw{};
    double unmet_kwh = 0.0; // energy the strategy could not deliver by departure

    double delivered_kwh() const;
    std::array<double, 24> folded_kw() const; // per hour-of-day
};

// Charge at max power from plug-in until the need is met (reduced power in
// the final fractional hour) or the vehicle departs; shortfall becomes unmet.
ChargingSchedule unmanaged_schedule(const EVSession& s);

// Enrolled sessions pause during the TOU window and resume at max power at
// the window end; non-enrolled sessions fall through to unmanaged.
ChargingSchedule tou_schedule(const EVSession& s);

// Load-balancing result for one asset group. breach_hours marks hours of day
// where aggregate base + EV exceeds threshold * rating even after balancing
// (only possible when some window's demand is infeasible and vehicles had to
// drop back to unmanaged charging).
struct LbResult {
    std::vector<ChargingSchedule> schedules; // parallel to the input sessions
    std::array<bool, 24> breach_hours{};
    int breach_count() const;
};

// Balance the enrolled sessions of one asset (service transformer) against
// its hourly headroom threshold*rating_kva - base - already-allocated EV.
// Slots are visited chronologically; within a slot, sessions take headroom in
// earliest-departure-first order. A session whose window the headroom cannot
// carry drops out of balancing entirely (it charges unmanaged like a
// non-enrolled vehicle) and any hours it pushes past the threshold are
// flagged; removal repeats until the balanced set is feasible. Non-enrolled
// sessions charge unmanaged and count toward the base.
LbResult lb_schedule(const std::vector<EVSession>& sessions, double rating_kva,
                     const std::array<double, 24>& base_kw, double threshold = 0.9);

// Scenario enrollment ramps: 0 in 2022 rising linearly to the 2035 target.
struct EnrollmentTrajectory {
    int scenario = 1;
    double target_rate_2035 = 0.0;
    std::map<int, double> rate_by_year;

    static EnrollmentTrajectory for_scenario(int scenario); // 1..4
    double rate(int year) const; // clamped to the 2022..2035 ramp
};

// Deterministic enrollment: a session joins once its per-id hash falls under
// rate(year). Hashes are fixed per (seed, session_id), so enrollment only
// grows as the rate ramps (vehicles never un-enroll).
void apply_enrollment(std::vector<EVSession>& sessions, const EnrollmentTrajectory& t,
                      int year, std::uint64_t seed);

// Sum session power by bus and hour-of-day. Total energy is preserved.
std::map<std::string, std::array<double, 24>> aggregate_ev_load(
    const std::vector<EVSession>& sessions, const std::vector<ChargingSchedule>& schedules);

// Plug-in/dwell/energy/charger-mix parameters for the session generator.
struct SessionClassSpec {
    double plugin_mean = 18.0;
    double plugin_sd = 2.5;
    double duration_mean = 13.0;
    double duration_sd = 3.0;
};

struct BehaviorSpec {
    double residential_weight = 0.8; // share of sessions on residential buses
    SessionClassSpec residential{18.0, 2.5, 13.0, 3.0};
    SessionClassSpec commercial{9.0, 3.0, 6.0, 2.0};
    double energy_mean_kwh = 13.5;
    double energy_sd_kwh = 6.0;
    double energy_min_kwh = 2.0;
    double energy_max_kwh = 80.0;
    std::array<double, 3> charger_share{0.70, 0.20, 0.10};
    std::array<double, 3> charger_kw{7.2, 11.5, 19.2};
};

// Deterministic per (feeder, spec, seed). Sessions land on buses that carry
// residential or commercial loads; ids embed the feeder id so enrollment
// hashes stay decorrelated across feeders.
std::vector<EVSession> generate_sessions(const Feeder& feeder, int count,
                                         const BehaviorSpec& spec, std::uint64_t seed);

// CSV: session_id, bus, plugin_hour, duration_h, energy_kwh, max_power_kw
std::vector<EVSession> load_sessions(const std::filesystem::path& path);
void save_sessions(const std::vector<EVSession>& sessions, const std::filesystem::path& path);

} // namespace evgrid
