#include "evgrid/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evgrid {

namespace {

using cplx = std::complex<double>;

double z_base_ohm(double v_base_kv) {
    // Z = V^2 / S with V in kV line-to-neutral and S in kVA per phase
    return v_base_kv * v_base_kv * 1000.0 / S_BASE_1PH_KVA;
}

} // namespace

double SnapshotResult::power_balance_error() const {
    double sp = std::hypot(source_kw, source_kvar);
    if (sp == 0.0) sp = 1.0;
    double dp = source_kw - (load_kw + losses_kw);
    double dq = source_kvar + shunt_kvar - (load_kvar + losses_kvar);
    return std::hypot(dp, dq) / sp;
}

Circuit::Circuit(const Feeder& f) {
    auto idx = f.bus_index_map();
    nodes_.reserve(f.buses.size());
    for (const auto& b : f.buses) {
        Node n;
        n.id = b.id;
        n.phases = b.phases;
        n.v_base_kv = b.nominal_voltage_kv;
        n.is_source = b.is_source;
        nodes_.push_back(std::move(n));
        if (b.is_source) source_ = static_cast<int>(nodes_.size()) - 1;
    }
    if (source_ < 0) throw ConfigError("feeder has no source bus");

    branches_.reserve(f.lines.size() + f.transformers.size());
    for (const auto& ln : f.lines) {
        Branch br;
        br.id = ln.id;
        br.from = idx.at(ln.from_bus);
        br.to = idx.at(ln.to_bus);
        br.phases = ln.phases;
        double zb = z_base_ohm(nodes_[br.to].v_base_kv);
        br.z_pu = cplx(ln.resistance_ohm_per_mi, ln.reactance_ohm_per_mi) * ln.length_mi / zb;
        br.ampacity_a = ln.ampacity_a;
        if (std::abs(br.z_pu) == 0.0)
            throw ConfigError("line " + ln.id + " has zero impedance");
        branches_.push_back(std::move(br));
    }
    for (const auto& tx : f.transformers) {
        Branch br;
        br.id = tx.id;
        br.from = idx.at(tx.from_bus);
        br.to = idx.at(tx.to_bus);
        br.phases = nodes_[br.to].phases; // secondary phases, subset of primary
        // nameplate impedance re-based from the unit's own rating to the
        // system base; bus voltage bases match the nameplate ratio, so no
        // ratio correction is needed. X/R fixed at 5.
        double z_own = tx.impedance_pct / 100.0;
        double z_sys = z_own * S_BASE_1PH_KVA / (tx.rating_kva / tx.phase_count);
        if (z_sys == 0.0) throw ConfigError("transformer " + tx.id + " has zero impedance");
        const double xr = 5.0;
        double r = z_sys / std::sqrt(1.0 + xr * xr);
        br.z_pu = cplx(r, xr * r);
        br.is_transformer = true;
        br.rating_kva = tx.rating_kva;
        branches_.push_back(std::move(br));
    }

    // BFS from the source to orient the tree
    std::vector<std::vector<int>> touching(nodes_.size());
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        touching[branches_[b].from].push_back(static_cast<int>(b));
        touching[branches_[b].to].push_back(static_cast<int>(b));
    }
    std::vector<bool> seen(nodes_.size(), false);
    bfs_order_.clear();
    bfs_order_.push_back(source_);
    seen[source_] = true;
    for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
        int n = bfs_order_[head];
        for (int bi : touching[n]) {
            Branch& br = branches_[bi];
            int other = br.from == n ? br.to : br.from;
            if (seen[other]) continue;
            if (br.to != other) std::swap(br.from, br.to); // orient away from source
            nodes_[other].parent = n;
            nodes_[other].parent_branch = bi;
            seen[other] = true;
            bfs_order_.push_back(other);
        }
    }
    if (bfs_order_.size() != nodes_.size())
        throw ConfigError("feeder is not fully connected from the source");

    shunt_b_pu_.assign(nodes_.size(), {0.0, 0.0, 0.0});

    load_slots_.reserve(f.loads.size());
    for (const auto& ld : f.loads) {
        LoadSlot slot;
        slot.node = idx.at(ld.bus);
        slot.phases = nodes_[slot.node].phases;
        load_slots_.push_back(slot);
    }
}

int Circuit::node_of(const std::string& bus_id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == bus_id) return static_cast<int>(i);
    return -1;
}

void Circuit::add_capacitor(const std::string& bus_id, double q_kvar) {
    int n = node_of(bus_id);
    if (n < 0) throw ConfigError("capacitor references unknown bus " + bus_id);
    auto phases = nodes_[n].phases.list();
    double b_per_phase = q_kvar / phases.size() / S_BASE_1PH_KVA;
    for (int ph : phases) shunt_b_pu_[n][ph] += b_per_phase;
}

SnapshotResult Circuit::solve(const SnapshotInput& in, const SolveOptions& opt) const {
    const std::size_t nn = nodes_.size();
    const std::size_t nb = branches_.size();

    // per-node per-phase constant-power demand, pu
    std::vector<std::array<cplx, 3>> s_node(nn, {cplx{}, cplx{}, cplx{}});
    if (in.load_pq.size() > load_slots_.size())
        throw ConfigError("snapshot input has more load entries than the feeder has loads");
    for (std::size_t i = 0; i < in.load_pq.size(); ++i) {
        const LoadSlot& slot = load_slots_[i];
        auto phases = slot.phases.list();
        cplx s(in.load_pq[i].p_kw, in.load_pq[i].q_kvar);
        s /= static_cast<double>(phases.size()) * S_BASE_1PH_KVA;
        for (int ph : phases) s_node[slot.node][ph] += s;
    }
    if (!in.bus_extra_pq.empty()) {
        if (in.bus_extra_pq.size() != nn)
            throw ConfigError("bus_extra_pq must have one entry per bus");
        for (std::size_t n = 0; n < nn; ++n) {
            const PQ& pq = in.bus_extra_pq[n];
            if (pq.p_kw == 0.0 && pq.q_kvar == 0.0) continue;
            auto phases = nodes_[n].phases.list();
            cplx s(pq.p_kw, pq.q_kvar);
            s /= static_cast<double>(phases.size()) * S_BASE_1PH_KVA;
            for (int ph : phases) s_node[n][ph] += s;
        }
    }

    std::vector<std::array<cplx, 3>> v(nn, {cplx{}, cplx{}, cplx{}});
    for (std::size_t n = 0; n < nn; ++n)
        for (int ph : nodes_[n].phases.list()) v[n][ph] = cplx(1.0, 0.0);

    std::vector<std::array<cplx, 3>> i_br(nb, {cplx{}, cplx{}, cplx{}});
    std::vector<std::array<cplx, 3>> i_load(nn, {cplx{}, cplx{}, cplx{}});
    std::vector<std::array<cplx, 3>> i_shunt(nn, {cplx{}, cplx{}, cplx{}});
    std::vector<std::array<cplx, 3>> i_acc(nn, {cplx{}, cplx{}, cplx{}});

    int iter = 0;
    double dv = 0.0;
    int worst = -1;
    for (iter = 1; iter <= opt.max_iterations; ++iter) {
        for (auto& a : i_acc) a = {cplx{}, cplx{}, cplx{}};

        // backward: aggregate injection currents toward the source
        for (std::size_t k = nn; k-- > 1;) {
            int n = bfs_order_[k];
            const Node& node = nodes_[n];
            for (int ph : node.phases.list()) {
                cplx il = s_node[n][ph] == cplx{} ? cplx{}
                                                  : std::conj(s_node[n][ph] / v[n][ph]);
                cplx is = cplx(0.0, shunt_b_pu_[n][ph]) * v[n][ph];
                i_load[n][ph] = il;
                i_shunt[n][ph] = is;
                cplx total = il + is + i_acc[n][ph];
                i_br[node.parent_branch][ph] = total;
                i_acc[node.parent][ph] += total;
            }
        }
        // source injections (loads directly on the source bus)
        {
            int n = bfs_order_[0];
            for (int ph : nodes_[n].phases.list()) {
                cplx il = s_node[n][ph] == cplx{} ? cplx{}
                                                  : std::conj(s_node[n][ph] / v[n][ph]);
                cplx is = cplx(0.0, shunt_b_pu_[n][ph]) * v[n][ph];
                i_load[n][ph] = il;
                i_shunt[n][ph] = is;
                i_acc[n][ph] += il + is;
            }
        }

        // forward: propagate voltage drops from the source
        dv = 0.0;
        worst = -1;
        for (std::size_t k = 1; k < nn; ++k) {
            int n = bfs_order_[k];
            const Node& node = nodes_[n];
            const Branch& br = branches_[node.parent_branch];
            for (int ph : node.phases.list()) {
                cplx vn = v[node.parent][ph] - br.z_pu * i_br[node.parent_branch][ph];
                double d = std::abs(vn - v[n][ph]);
                if (d > dv) { dv = d; worst = n; }
                v[n][ph] = vn;
            }
        }
        if (dv < opt.tolerance) break;
    }
    if (dv >= opt.tolerance)
        throw SolveError("power flow did not converge after " +
                         std::to_string(opt.max_iterations) + " iterations; worst bus " +
                         (worst >= 0 ? nodes_[worst].id : std::string("?")) +
                         " dV=" + std::to_string(dv));

    SnapshotResult r;
    r.iterations = iter;
    r.v_mag_pu.assign(nn, {0.0, 0.0, 0.0});
    r.v_angle_rad.assign(nn, {0.0, 0.0, 0.0});
    r.branch_current_a.assign(nb, {0.0, 0.0, 0.0});
    r.branch_kva.assign(nb, 0.0);

    for (std::size_t n = 0; n < nn; ++n)
        for (int ph : nodes_[n].phases.list()) {
            r.v_mag_pu[n][ph] = std::abs(v[n][ph]);
            r.v_angle_rad[n][ph] = std::arg(v[n][ph]);
        }

    cplx s_drop{};
    for (std::size_t b = 0; b < nb; ++b) {
        const Branch& br = branches_[b];
        double i_base = S_BASE_1PH_KVA / nodes_[br.to].v_base_kv;
        double kva = 0.0;
        for (int ph : br.phases.list()) {
            cplx ib = i_br[b][ph];
            r.branch_current_a[b][ph] = std::abs(ib) * i_base;
            kva += std::abs(v[br.from][ph] * std::conj(ib)) * S_BASE_1PH_KVA;
            s_drop += (v[br.from][ph] - v[br.to][ph]) * std::conj(ib);
        }
        r.branch_kva[b] = kva;
    }
    r.losses_kw = s_drop.real() * S_BASE_1PH_KVA;
    r.losses_kvar = s_drop.imag() * S_BASE_1PH_KVA;

    cplx s_load{}, s_shunt{};
    for (std::size_t n = 0; n < nn; ++n)
        for (int ph : nodes_[n].phases.list()) {
            s_load += v[n][ph] * std::conj(i_load[n][ph]);
            s_shunt += v[n][ph] * std::conj(i_shunt[n][ph]);
        }
    r.load_kw = s_load.real() * S_BASE_1PH_KVA;
    r.load_kvar = s_load.imag() * S_BASE_1PH_KVA;
    r.shunt_kvar = -s_shunt.imag() * S_BASE_1PH_KVA; // drawn -> injected

    cplx s_src{};
    for (int ph : nodes_[source_].phases.list())
        s_src += v[source_][ph] * std::conj(i_acc[source_][ph]);
    r.source_kw = s_src.real() * S_BASE_1PH_KVA;
    r.source_kvar = s_src.imag() * S_BASE_1PH_KVA;
    return r;
}

double Circuit::loading_fraction(const SnapshotResult& r, int b) const {
    const Branch& br = branches_[b];
    if (br.is_transformer) return r.branch_kva[b] / br.rating_kva;
    double worst = 0.0;
    for (int ph = 0; ph < 3; ++ph)
        worst = std::max(worst, r.branch_current_a[b][ph]);
    return worst / br.ampacity_a;
}

SnapshotResult solve_snapshot(const Feeder& feeder, const SnapshotInput& in,
                              const SolveOptions& opt) {
    return Circuit(feeder).solve(in, opt);
}

TimeSeriesResult solve_timeseries(const Circuit& circuit, const Feeder& feeder,
                                  const ProfileStore& profiles, DayType day,
                                  const std::map<std::string, std::array<double, 24>>& ev_kw_by_bus,
                                  const SolveOptions& opt) {
    TimeSeriesResult out;
    out.hours.reserve(24);
    out.max_loading.assign(circuit.branch_count(), 0.0);
    out.min_v_pu.assign(circuit.node_count(), std::numeric_limits<double>::infinity());

    // resolve EV buses once
    std::vector<std::pair<int, const std::array<double, 24>*>> ev_nodes;
    ev_nodes.reserve(ev_kw_by_bus.size());
    for (const auto& [bus, sched] : ev_kw_by_bus) {
        int n = circuit.node_of(bus);
        if (n < 0) throw ConfigError("EV schedule references unknown bus " + bus);
        ev_nodes.emplace_back(n, &sched);
    }

    for (int h = 0; h < 24; ++h) {
        SnapshotInput in;
        in.load_pq.reserve(feeder.loads.size());
        for (const auto& ld : feeder.loads) {
            const auto& prof = profiles.get(ld.profile_id, day);
            double p = ld.peak_kw * prof.shape[h];
            double q = p * std::sqrt(1.0 - ld.power_factor * ld.power_factor) / ld.power_factor;
            in.load_pq.push_back({p, q});
        }
        if (!ev_nodes.empty()) {
            in.bus_extra_pq.assign(circuit.node_count(), PQ{});
            for (const auto& [n, sched] : ev_nodes) in.bus_extra_pq[n].p_kw += (*sched)[h];
        }
        SnapshotResult snap;
        try {
            snap = circuit.solve(in, opt);
        } catch (const SolveError& e) {
            throw SolveError("hour " + std::to_string(h) + ": " + e.what());
        }
        for (int b = 0; b < circuit.branch_count(); ++b)
            out.max_loading[b] = std::max(out.max_loading[b], circuit.loading_fraction(snap, b));
        for (int n = 0; n < circuit.node_count(); ++n)
            for (int ph = 0; ph < 3; ++ph)
                if (snap.v_mag_pu[n][ph] > 0.0)
                    out.min_v_pu[n] = std::min(out.min_v_pu[n], snap.v_mag_pu[n][ph]);
        out.hours.push_back(std::move(snap));
    }
    return out;
}

} // namespace evgrid
