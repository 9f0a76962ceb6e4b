#pragma once

#include <array>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "evgrid/common.hpp"
#include "evgrid/feeder.hpp"
#include "evgrid/profiles.hpp"

namespace evgrid {

// Per-phase system power base. All solver math is per-unit on this base with
// each bus's nominal line-to-neutral voltage as its voltage base; transformer
// nameplates match the bus bases (validation enforces it), so branches reduce
// to series impedances.
inline constexpr double S_BASE_1PH_KVA = 100.0;

struct SolveOptions {
    double tolerance = 1e-10; // max |dV| per iteration, pu
    int max_iterations = 200;
};

// Converged state for one hour. Buses and branches are indexed as in the
// Circuit (buses follow feeder order; branches are lines then transformers).
// Phase entries are zero where a bus or branch lacks the phase. Angles are
// relative to each phase's own source reference.
struct SnapshotResult {
    int iterations = 0;
    std::vector<std::array<double, 3>> v_mag_pu;
    std::vector<std::array<double, 3>> v_angle_rad;
    std::vector<std::array<double, 3>> branch_current_a; // at the to-side voltage base
    std::vector<double> branch_kva; // from-side apparent power, phases summed

    double losses_kw = 0.0;
    double losses_kvar = 0.0;
    double source_kw = 0.0;
    double source_kvar = 0.0;
    // load power realized at the final voltages (V · conj(I)); with
    // constant-power loads this telescopes against the source injection, so
    // source = load + losses holds to roughly machine precision
    double load_kw = 0.0;
    double load_kvar = 0.0;
    double shunt_kvar = 0.0; // capacitor injection, positive = supplying

    double power_balance_error() const; // relative, against source magnitude
};

// Per-load and per-bus demand for one snapshot, physical units.
struct SnapshotInput {
    std::vector<PQ> load_pq;      // by feeder load index, kW / kvar
    std::vector<PQ> bus_extra_pq; // by bus index (EV aggregate); may be empty
};

// Immutable solve-ready view of a feeder: topological order, per-unit branch
// impedances, per-phase load attachment. Safe for concurrent solve() calls.
class Circuit {
public:
    explicit Circuit(const Feeder& feeder); // ConfigError on zero-impedance branch etc.

    // Shunt capacitor bank, kvar split evenly over the bus's phases. Banks
    // are constant-impedance: injection scales with |V|^2.
    void add_capacitor(const std::string& bus_id, double q_kvar);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int branch_count() const { return static_cast<int>(branches_.size()); }
    int node_of(const std::string& bus_id) const; // -1 if absent

    const std::string& branch_id(int b) const { return branches_[b].id; }
    bool branch_is_transformer(int b) const { return branches_[b].is_transformer; }
    double branch_rating_kva(int b) const { return branches_[b].rating_kva; }
    double branch_ampacity_a(int b) const { return branches_[b].ampacity_a; }
    const std::string& bus_id(int n) const { return nodes_[n].id; }
    int parent_node(int n) const { return nodes_[n].parent; }
    int parent_branch(int n) const { return nodes_[n].parent_branch; } // -1 at the source

    // Loading fraction of one branch in one snapshot: observed kVA / rating
    // for transformers, worst per-phase current / ampacity for lines.
    double loading_fraction(const SnapshotResult& r, int b) const;

    SnapshotResult solve(const SnapshotInput& in, const SolveOptions& opt = {}) const;

private:
    struct Node {
        std::string id;
        PhaseSet phases;
        double v_base_kv = 0.0;
        int parent = -1;        // node index
        int parent_branch = -1; // branch index
        bool is_source = false;
    };
    struct Branch {
        std::string id;
        int from = -1, to = -1;
        PhaseSet phases;
        std::complex<double> z_pu; // per phase, system base
        bool is_transformer = false;
        double rating_kva = 0.0; // transformers
        double ampacity_a = 0.0; // lines
    };

    std::vector<Node> nodes_;
    std::vector<Branch> branches_;
    std::vector<int> bfs_order_; // source first
    std::vector<std::array<double, 3>> shunt_b_pu_; // capacitor susceptance per node/phase
    // load attachment: (node, per-phase complex power scale) per feeder load
    struct LoadSlot {
        int node = -1;
        PhaseSet phases;
    };
    std::vector<LoadSlot> load_slots_;
    int source_ = -1;
};

// One-shot convenience wrapper matching the snapshot operation.
SnapshotResult solve_snapshot(const Feeder& feeder, const SnapshotInput& in,
                              const SolveOptions& opt = {});

struct TimeSeriesResult {
    std::vector<SnapshotResult> hours;  // 24
    std::vector<double> max_loading;    // per branch, over the day
    std::vector<double> min_v_pu;       // per bus, over phases present and hours
};

// Snapshot at hour h uses peak_kw * profile[h] per load (constant power
// factor) plus the per-bus EV aggregate at unity power factor.
// SolveError on any non-converged hour names the hour.
TimeSeriesResult solve_timeseries(const Circuit& circuit, const Feeder& feeder,
                                  const ProfileStore& profiles, DayType day,
                                  const std::map<std::string, std::array<double, 24>>& ev_kw_by_bus,
                                  const SolveOptions& opt = {});

} // namespace evgrid
