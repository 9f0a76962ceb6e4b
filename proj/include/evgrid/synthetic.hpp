#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "evgrid/feeder.hpp"

namespace evgrid {

// Parameters for the synthetic feeder generator. bus_count is the total bus
// count of the result (primary buses plus one secondary bus per service
// transformer). Weights need not be normalized per entry but each mix must
// sum to 1 within 1e-9.
struct SyntheticFeederSpec {
    std::string id = "feeder";
    int bus_count = 30;
    // weights over {residential, commercial, industrial, mixed}
    std::array<double, 4> class_mix{0.70, 0.15, 0.05, 0.10};
    // weights over transformer size bands {small 1ph, medium 3ph, large 3ph};
    // bands needing three phases fall back to the single-phase ladder when the
    // host bus has fewer than three phases
    std::array<double, 3> size_mix{0.60, 0.30, 0.10};
    double primary_voltage_kv = 7.2; // line-to-neutral
    // if > 0, appends a three-segment high-X express lateral of this total
    // length to the trunk tail with a service transformer at the far end
    double long_lateral_mi = 0.0;
    // transformer peak loading (kVA / rating) at the base year is drawn
    // uniformly from this band
    double min_utilization = 0.55;
    double max_utilization = 0.85;
    std::uint64_t seed = 0;
};

// Deterministic per (spec, seed); the result always passes validate().
// Throws ConfigError on an invalid spec.
Feeder generate_synthetic_feeder(const SyntheticFeederSpec& spec);

} // namespace evgrid
