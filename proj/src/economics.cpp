#include "evgrid/economics.hpp"

#include "evgrid/csv.hpp"
#include "evgrid/ladders.hpp"

#include <cmath>
#include <span>

namespace evgrid {

void CostTable::add(UpgradeKind kind, double size, double unit_cost_usd, bool per_mile) {
    if (unit_cost_usd <= 0.0)
        throw ConfigError("cost for " + to_string(kind) + " size " + fmt_double(size) +
                          " must be positive");
    table_[{static_cast<int>(kind), size}] = Entry{unit_cost_usd, per_mile};
}

bool CostTable::contains(UpgradeKind kind, double size) const {
    return table_.count({static_cast<int>(kind), size}) > 0;
}

double CostTable::cost_of(const UpgradeAction& a) const {
    auto it = table_.find({static_cast<int>(a.kind), a.unit_size});
    if (it == table_.end())
        throw ConfigError("no cost entry for " + to_string(a.kind) + " size " +
                          fmt_double(a.unit_size));
    double cost = it->second.unit_cost_usd * a.parallel_units;
    if (it->second.per_mile) cost *= a.length_mi;
    return cost;
}

CostTable CostTable::builtin() {
    // Placeholder magnitudes only: shaped like utility planning figures but
    // not sourced from any cost study. Real analyses should load a CSV.
    CostTable t;
    for (double kva : ladders::xfmr_1ph_kva)
        t.add(UpgradeKind::resize_transformer, kva, 1200.0 + 55.0 * kva);
    for (double kva : ladders::xfmr_3ph_kva)
        if (!t.contains(UpgradeKind::resize_transformer, kva))
            t.add(UpgradeKind::resize_transformer, kva, 1200.0 + 55.0 * kva);
    for (double amps : ladders::line_ampacity_a)
        t.add(UpgradeKind::resize_line, amps, 40000.0 + 320.0 * amps, true);
    for (double kvar : ladders::capacitor_kvar)
        t.add(UpgradeKind::add_capacitor, kvar, 3000.0 + 42.0 * kvar);
    return t;
}

CostTable load_cost_table(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int c_kind = t.column("kind");
    int c_size = t.column("size");
    int c_cost = t.column("unit_cost_usd");
    int c_mile = t.column("per_mile"); // optional
    if (c_kind < 0 || c_size < 0 || c_cost < 0)
        throw ParseError(path.string() + ": cost table needs kind, size, unit_cost_usd");
    CostTable out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::string ctx = path.string() + " row " + std::to_string(i + 1);
        UpgradeKind kind = upgrade_kind_from_string(row[c_kind]);
        double size, cost;
        try {
            size = std::stod(row[c_size]);
            cost = std::stod(row[c_cost]);
        } catch (const std::exception&) {
            throw ParseError(ctx + ": bad numeric field");
        }
        if (cost <= 0.0) throw ParseError(ctx + ": unit_cost_usd must be positive");
        bool per_mile = c_mile >= 0 && !row[c_mile].empty() && row[c_mile] != "0";
        out.add(kind, size, cost, per_mile);
    }
    return out;
}

void save_cost_table(const CostTable& table, const std::filesystem::path& path) {
    // rebuild rows through the public surface to keep the writer honest
    CsvWriter w(path);
    w.comment("placeholder unit costs; not sourced from any published study");
    w.row({"kind", "size", "unit_cost_usd", "per_mile"});
    auto dump = [&](UpgradeKind kind, std::span<const double> sizes) {
        for (double size : sizes) {
            if (!table.contains(kind, size)) continue;
            UpgradeAction probe;
            probe.kind = kind;
            probe.unit_size = size;
            probe.parallel_units = 1;
            probe.length_mi = 1.0;
            w.row({to_string(kind), fmt_double(size), fmt_double(table.cost_of(probe)),
                   kind == UpgradeKind::resize_line ? "1" : "0"});
        }
    };
    dump(UpgradeKind::resize_transformer, ladders::xfmr_1ph_kva);
    dump(UpgradeKind::resize_transformer, ladders::xfmr_3ph_kva);
    dump(UpgradeKind::resize_line, ladders::line_ampacity_a);
    dump(UpgradeKind::add_capacitor, ladders::capacitor_kvar);
}

double CostStream::total() const {
    double s = 0.0;
    for (const auto& [y, c] : by_year) s += c;
    return s;
}

CostStream& CostStream::operator+=(const CostStream& o) {
    for (const auto& [y, c] : o.by_year) by_year[y] += c;
    for (const auto& [k, c] : o.by_kind) by_kind[k] += c;
    return *this;
}

CostStream cost_plan(const std::vector<UpgradeAction>& plan, const CostTable& table) {
    CostStream out;
    for (const auto& a : plan) {
        double c = table.cost_of(a);
        out.by_year[a.year] += c;
        out.by_kind[a.kind] += c;
    }
    return out;
}

std::vector<UpgradeAction> price_plan(const std::vector<UpgradeAction>& plan,
                                      const CostTable& table) {
    std::vector<UpgradeAction> out = plan;
    for (auto& a : out) a.unit_cost_usd = table.cost_of(a);
    return out;
}

double npv(const CostStream& stream, double discount_rate, int base_year) {
    if (discount_rate <= -1.0) throw ConfigError("discount rate must exceed -1");
    if (!stream.by_year.empty() && base_year > stream.by_year.begin()->first)
        throw ConfigError("npv base year " + std::to_string(base_year) +
                          " postdates the first cost year " +
                          std::to_string(stream.by_year.begin()->first));
    double value = 0.0;
    for (const auto& [year, cost] : stream.by_year)
        value += cost / std::pow(1.0 + discount_rate, year - base_year);
    return value;
}

} // namespace evgrid
