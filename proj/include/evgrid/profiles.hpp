#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evgrid/common.hpp"

namespace evgrid {

// Normalized 24-hour load shape. Values are multipliers applied to a load's
// peak_kw; by convention the largest entry across a profile's day types is 1.0.
struct TimeSeriesProfile {
    std::string profile_id;
    DayType day_type = DayType::shoulder;
    std::array<double, 24> shape{};

    bool operator==(const TimeSeriesProfile&) const = default;
};

// Profiles keyed by (profile_id, day_type). A load references a profile_id;
// the study picks the day type.
class ProfileStore {
public:
    void add(TimeSeriesProfile p);
    bool contains(const std::string& profile_id, DayType day) const;
    // Throws ConfigError if the (id, day) pair is absent.
    const TimeSeriesProfile& get(const std::string& profile_id, DayType day) const;

    std::vector<const TimeSeriesProfile*> all() const;
    std::size_t size() const { return table_.size(); }

    // Default shapes for the four customer classes across all three day
    // types, ids "residential", "commercial", "industrial", "mixed".
    static ProfileStore builtin();

private:
    std::map<std::pair<std::string, DayType>, TimeSeriesProfile> table_;
};

// CSV columns: profile_id, day_type, h0..h23.
ProfileStore load_profiles(const std::filesystem::path& path);
void save_profiles(const ProfileStore& store, const std::filesystem::path& path);

} // namespace evgrid
