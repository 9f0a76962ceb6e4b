#pragma once

#include "evgrid/common.hpp"

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

namespace evgrid {

/// Subset of phases {A,B,C} as a 3-bit mask.
class PhaseSet {
  public:
    PhaseSet() = default;
    static PhaseSet abc() { return PhaseSet(0b111); }
    static PhaseSet single(int phase) { return PhaseSet(1u << phase); }
    static PhaseSet from_string(const std::string& s); // e.g. "ABC", "B"

    std::string str() const;
    int count() const;
    bool empty() const { return mask_ == 0; }
    bool has(int phase) const { return (mask_ >> phase) & 1u; }
    bool subset_of(PhaseSet other) const { return (mask_ & ~other.mask_) == 0; }
    PhaseSet intersect(PhaseSet other) const { return PhaseSet(mask_ & other.mask_); }
    PhaseSet without(int phase) const { return PhaseSet(mask_ & ~(1u << phase)); }
    std::vector<int> list() const; // present phase indices, ascending
    bool operator==(const PhaseSet&) const = default;

  private:
    explicit PhaseSet(unsigned mask) : mask_(mask) {}
    unsigned mask_ = 0;
};

struct Bus {
    std::string id;
    PhaseSet phases;
    double nominal_voltage_kv = 0.0; // line-to-neutral
    bool is_source = false;

    bool operator==(const Bus&) const = default;
};

struct LineSegment {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    PhaseSet phases;
    double resistance_ohm_per_mi = 0.0; // per phase
    double reactance_ohm_per_mi = 0.0;  // per phase
    double length_mi = 0.0;
    double ampacity_a = 0.0;

    bool operator==(const LineSegment&) const = default;
};

struct Transformer {
    std::string id;
    std::string from_bus; // primary
    std::string to_bus;   // secondary
    int phase_count = 1;  // 1|2|3
    double rating_kva = 0.0;
    double impedance_pct = 0.0; // magnitude on own base
    double secondary_voltage_kv = 0.0; // line-to-neutral

    bool operator==(const Transformer&) const = default;
};

struct LoadPoint {
    std::string id;
    std::string bus;
    CustomerClass customer_class = CustomerClass::residential;
    double peak_kw = 0.0;
    double power_factor = 1.0;
    std::string profile_id;

    bool operator==(const LoadPoint&) const = default;
};

struct Feeder {
    std::string id;
    std::vector<Bus> buses;
    std::vector<LineSegment> lines;
    std::vector<Transformer> transformers;
    std::vector<LoadPoint> loads;

    bool operator==(const Feeder&) const = default;

    const Bus* find_bus(const std::string& id) const;
    const Bus* source_bus() const;
    int bus_index(const std::string& id) const; // -1 if absent
    std::unordered_map<std::string, int> bus_index_map() const;
};

/// One invariant breach found by validate(). Violations are data, not errors.
struct FeederViolation {
    std::string component_id;
    std::string code; // e.g. "non-radial", "dangling-reference"
    std::string message;
};

/// Checks every feeder invariant: exactly one source, positive ratings,
/// phase consistency, dangling references, connectivity and radiality
/// (edge count == bus count - 1, all buses and phases reachable from the
/// source). Returns every breach; empty means valid.
std::vector<FeederViolation> validate(const Feeder& feeder);

} // namespace evgrid
