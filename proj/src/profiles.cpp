#include "evgrid/profiles.hpp"

#include "evgrid/csv.hpp"

namespace evgrid {

void ProfileStore::add(TimeSeriesProfile p) {
    auto key = std::make_pair(p.profile_id, p.day_type);
    table_[key] = std::move(p);
}

bool ProfileStore::contains(const std::string& profile_id, DayType day) const {
    return table_.count({profile_id, day}) != 0;
}

const TimeSeriesProfile& ProfileStore::get(const std::string& profile_id, DayType day) const {
    auto it = table_.find({profile_id, day});
    if (it == table_.end())
        throw ConfigError("no profile \"" + profile_id + "\" for day type " + to_string(day));
    return it->second;
}

std::vector<const TimeSeriesProfile*> ProfileStore::all() const {
    std::vector<const TimeSeriesProfile*> out;
    out.reserve(table_.size());
    for (const auto& [k, v] : table_) out.push_back(&v);
    return out;
}

namespace {

TimeSeriesProfile make(const char* id, DayType day, std::array<double, 24> shape) {
    TimeSeriesProfile p;
    p.profile_id = id;
    p.day_type = day;
    p.shape = shape;
    return p;
}

} // namespace

ProfileStore ProfileStore::builtin() {
    ProfileStore s;
    // Residential: overnight trough, morning shoulder, evening peak at 18:00.
    // Summer runs hotter through the afternoon; winter adds a morning bump.
    s.add(make("residential", DayType::summer, {
        0.42, 0.38, 0.36, 0.35, 0.36, 0.40, 0.48, 0.56, 0.58, 0.60, 0.63, 0.66,
        0.70, 0.74, 0.78, 0.82, 0.88, 0.95, 1.00, 0.97, 0.90, 0.80, 0.65, 0.50}));
    s.add(make("residential", DayType::winter, {
        0.40, 0.37, 0.36, 0.36, 0.38, 0.46, 0.60, 0.68, 0.64, 0.58, 0.55, 0.54,
        0.54, 0.55, 0.57, 0.62, 0.72, 0.86, 0.94, 0.90, 0.82, 0.70, 0.56, 0.45}));
    s.add(make("residential", DayType::shoulder, {
        0.36, 0.33, 0.32, 0.31, 0.32, 0.37, 0.46, 0.53, 0.52, 0.50, 0.50, 0.51,
        0.52, 0.53, 0.55, 0.59, 0.66, 0.78, 0.85, 0.82, 0.74, 0.62, 0.50, 0.41}));

    // Commercial: business hours, early-afternoon peak, quiet nights.
    s.add(make("commercial", DayType::summer, {
        0.30, 0.28, 0.27, 0.27, 0.28, 0.32, 0.45, 0.65, 0.82, 0.92, 0.97, 0.99,
        0.99, 1.00, 0.99, 0.96, 0.90, 0.78, 0.62, 0.50, 0.42, 0.37, 0.34, 0.31}));
    s.add(make("commercial", DayType::winter, {
        0.28, 0.27, 0.26, 0.26, 0.28, 0.33, 0.48, 0.66, 0.80, 0.86, 0.88, 0.89,
        0.88, 0.88, 0.87, 0.84, 0.80, 0.72, 0.58, 0.46, 0.38, 0.33, 0.30, 0.28}));
    s.add(make("commercial", DayType::shoulder, {
        0.26, 0.25, 0.24, 0.24, 0.25, 0.30, 0.43, 0.60, 0.74, 0.81, 0.84, 0.85,
        0.85, 0.85, 0.84, 0.81, 0.76, 0.67, 0.54, 0.43, 0.35, 0.31, 0.28, 0.26}));

    // Industrial: near-flat around-the-clock process load, slight day-shift lift.
    s.add(make("industrial", DayType::summer, {
        0.78, 0.77, 0.77, 0.77, 0.78, 0.82, 0.90, 0.96, 0.99, 1.00, 1.00, 0.99,
        0.98, 0.99, 0.99, 0.98, 0.96, 0.92, 0.87, 0.84, 0.82, 0.80, 0.79, 0.78}));
    s.add(make("industrial", DayType::winter, {
        0.76, 0.75, 0.75, 0.75, 0.76, 0.80, 0.88, 0.94, 0.96, 0.97, 0.97, 0.96,
        0.95, 0.96, 0.96, 0.95, 0.93, 0.89, 0.84, 0.81, 0.79, 0.78, 0.77, 0.76}));
    s.add(make("industrial", DayType::shoulder, {
        0.74, 0.73, 0.73, 0.73, 0.74, 0.78, 0.86, 0.92, 0.94, 0.95, 0.95, 0.94,
        0.93, 0.94, 0.94, 0.93, 0.91, 0.87, 0.82, 0.79, 0.77, 0.76, 0.75, 0.74}));

    // Mixed-use: residential/commercial blend, broad late-afternoon peak.
    s.add(make("mixed", DayType::summer, {
        0.38, 0.35, 0.34, 0.33, 0.34, 0.38, 0.50, 0.63, 0.72, 0.78, 0.81, 0.84,
        0.86, 0.88, 0.90, 0.93, 0.97, 1.00, 0.95, 0.85, 0.73, 0.61, 0.50, 0.42}));
    s.add(make("mixed", DayType::winter, {
        0.36, 0.34, 0.33, 0.33, 0.34, 0.40, 0.54, 0.66, 0.70, 0.70, 0.69, 0.69,
        0.69, 0.70, 0.71, 0.74, 0.80, 0.88, 0.85, 0.77, 0.66, 0.55, 0.45, 0.38}));
    s.add(make("mixed", DayType::shoulder, {
        0.33, 0.31, 0.30, 0.30, 0.31, 0.36, 0.49, 0.60, 0.64, 0.64, 0.64, 0.64,
        0.64, 0.65, 0.66, 0.69, 0.74, 0.82, 0.79, 0.71, 0.61, 0.51, 0.41, 0.35}));
    return s;
}

ProfileStore load_profiles(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("profile_id");
    int c_day = t.column("day_type");
    if (c_id < 0 || c_day < 0)
        throw ParseError(path.string() + ": profile CSV needs profile_id and day_type columns");
    std::array<int, 24> c_h{};
    for (int h = 0; h < 24; ++h) {
        c_h[h] = t.column("h" + std::to_string(h));
        if (c_h[h] < 0)
            throw ParseError(path.string() + ": profile CSV missing column h" + std::to_string(h));
    }
    ProfileStore s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        TimeSeriesProfile p;
        p.profile_id = row[c_id];
        p.day_type = day_type_from_string(row[c_day]);
        for (int h = 0; h < 24; ++h) {
            try {
                p.shape[h] = std::stod(row[c_h[h]]);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": row " + std::to_string(r + 2) +
                                 ": h" + std::to_string(h) + " is not a number");
            }
            if (p.shape[h] < 0.0)
                throw ParseError(path.string() + ": row " + std::to_string(r + 2) +
                                 ": negative shape value");
        }
        s.add(std::move(p));
    }
    return s;
}

void save_profiles(const ProfileStore& store, const std::filesystem::path& path) {
    CsvWriter w(path);
    std::vector<std::string> header = {"profile_id", "day_type"};
    for (int h = 0; h < 24; ++h) header.push_back("h" + std::to_string(h));
    w.row(header);
    for (const TimeSeriesProfile* p : store.all()) {
        std::vector<std::string> row = {p->profile_id, to_string(p->day_type)};
        for (double v : p->shape) row.push_back(fmt_double(v));
        w.row(row);
    }
}

} // namespace evgrid
