#pragma once

#include "evgrid/common.hpp"
#include "evgrid/planner.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace evgrid {

/// Unit costs keyed by (upgrade kind, equipment size). Line entries are
/// priced per mile and scale with conductor length. The builtin table is a
/// placeholder with plausible magnitudes — swap in real prices via CSV for
/// any study that will be quoted.
class CostTable {
public:
    struct Entry {
        double unit_cost_usd = 0.0;
        bool per_mile = false;
    };

    void add(UpgradeKind kind, double size, double unit_cost_usd, bool per_mile = false);
    bool contains(UpgradeKind kind, double size) const;

    /// Cost of one action: unit cost x parallel units, x length for per-mile
    /// entries. Lookup is by unit_size. ConfigError names kind and size when
    /// the table has no bucket.
    double cost_of(const UpgradeAction& action) const;

    std::size_t size() const { return table_.size(); }

    /// Covers every ladder size the planner can emit.
    static CostTable builtin();

private:
    std::map<std::pair<int, double>, Entry> table_;
};

/// CSV columns: kind, size, unit_cost_usd, per_mile (0/1; optional column,
/// default 0).
CostTable load_cost_table(const std::filesystem::path& path);
void save_cost_table(const CostTable& table, const std::filesystem::path& path);

struct CostStream {
    std::map<int, double> by_year;                 // USD per year
    std::map<UpgradeKind, double> by_kind;         // undiscounted subtotals

    double total() const;
    CostStream& operator+=(const CostStream& o);
};

/// Per-year action costs. Every action must have a bucket in the table.
CostStream cost_plan(const std::vector<UpgradeAction>& plan, const CostTable& table);

/// Copy of the plan with unit_cost_usd filled in from the table.
std::vector<UpgradeAction> price_plan(const std::vector<UpgradeAction>& plan,
                                      const CostTable& table);

/// Present value at base_year: sum of cost(y) / (1 + r)^(y - base_year).
/// base_year must not postdate the earliest cost.
double npv(const CostStream& stream, double discount_rate = 0.03, int base_year = 2022);

} // namespace evgrid
