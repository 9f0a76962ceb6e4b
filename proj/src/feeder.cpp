#include "evgrid/feeder.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace evgrid {

PhaseSet PhaseSet::from_string(const std::string& s) {
    unsigned mask = 0;
    for (char c : s) {
        switch (c) {
            case 'A': case 'a': mask |= 1u; break;
            case 'B': case 'b': mask |= 2u; break;
            case 'C': case 'c': mask |= 4u; break;
            default: throw ParseError(std::string("invalid phase character '") + c + "'");
        }
    }
    return PhaseSet(mask);
}

std::string PhaseSet::str() const {
    std::string s;
    if (mask_ & 1u) s += 'A';
    if (mask_ & 2u) s += 'B';
    if (mask_ & 4u) s += 'C';
    return s;
}

int PhaseSet::count() const {
    return static_cast<int>((mask_ & 1u) + ((mask_ >> 1) & 1u) + ((mask_ >> 2) & 1u));
}

std::vector<int> PhaseSet::list() const {
    std::vector<int> out;
    for (int ph = 0; ph < 3; ++ph)
        if (has(ph)) out.push_back(ph);
    return out;
}

const Bus* Feeder::find_bus(const std::string& bus_id) const {
    for (const auto& b : buses)
        if (b.id == bus_id) return &b;
    return nullptr;
}

const Bus* Feeder::source_bus() const {
    for (const auto& b : buses)
        if (b.is_source) return &b;
    return nullptr;
}

int Feeder::bus_index(const std::string& bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == bus_id) return static_cast<int>(i);
    return -1;
}

std::unordered_map<std::string, int> Feeder::bus_index_map() const {
    std::unordered_map<std::string, int> m;
    m.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) m.emplace(buses[i].id, static_cast<int>(i));
    return m;
}

namespace {

struct Edge {
    int from;
    int to;
    PhaseSet phases;
};

void check_duplicate_ids(const Feeder& f, std::vector<FeederViolation>& out) {
    std::set<std::string> seen;
    auto check = [&](const std::string& id, const char* what) {
        if (!seen.insert(id).second)
            out.push_back({id, "duplicate-id", std::string(what) + " id '" + id + "' appears more than once"});
    };
    for (const auto& b : f.buses) check(b.id, "bus");
    for (const auto& l : f.lines) check(l.id, "line");
    for (const auto& t : f.transformers) check(t.id, "transformer");
    for (const auto& d : f.loads) check(d.id, "load");
}

} // namespace

std::vector<FeederViolation> validate(const Feeder& f) {
    std::vector<FeederViolation> out;
    check_duplicate_ids(f, out);

    const auto idx = f.bus_index_map();
    auto bus_exists = [&](const std::string& id) { return idx.find(id) != idx.end(); };

    int source_count = 0;
    for (const auto& b : f.buses) {
        if (b.is_source) ++source_count;
        if (b.phases.empty())
            out.push_back({b.id, "empty-phases", "bus '" + b.id + "' has no phases"});
        if (b.nominal_voltage_kv <= 0.0)
            out.push_back({b.id, "bad-voltage", "bus '" + b.id + "' nominal_voltage_kv must be > 0"});
    }
    if (source_count != 1)
        out.push_back({f.id, "source-count",
                       "feeder must have exactly one source bus, found " + std::to_string(source_count)});

    std::vector<Edge> edges;
    for (const auto& l : f.lines) {
        bool ok = true;
        for (const std::string* end : {&l.from_bus, &l.to_bus}) {
            if (!bus_exists(*end)) {
                out.push_back({l.id, "dangling-reference",
                               "line '" + l.id + "' references missing bus '" + *end + "'"});
                ok = false;
            }
        }
        if (l.ampacity_a <= 0.0)
            out.push_back({l.id, "bad-rating", "line '" + l.id + "' ampacity_a must be > 0"});
        if (l.length_mi <= 0.0)
            out.push_back({l.id, "bad-length", "line '" + l.id + "' length_mi must be > 0"});
        if (l.phases.empty())
            out.push_back({l.id, "empty-phases", "line '" + l.id + "' has no phases"});
        if (ok) {
            const Bus& a = f.buses[idx.at(l.from_bus)];
            const Bus& b = f.buses[idx.at(l.to_bus)];
            if (!l.phases.subset_of(a.phases) || !l.phases.subset_of(b.phases))
                out.push_back({l.id, "phase-mismatch",
                               "line '" + l.id + "' phases " + l.phases.str() +
                                   " are not a subset of both endpoint buses"});
            if (a.nominal_voltage_kv != b.nominal_voltage_kv)
                out.push_back({l.id, "voltage-mismatch",
                               "line '" + l.id + "' connects buses at different nominal voltages"});
            edges.push_back({idx.at(l.from_bus), idx.at(l.to_bus), l.phases});
        }
    }

    for (const auto& t : f.transformers) {
        bool ok = true;
        for (const std::string* end : {&t.from_bus, &t.to_bus}) {
            if (!bus_exists(*end)) {
                out.push_back({t.id, "dangling-reference",
                               "transformer '" + t.id + "' references missing bus '" + *end + "'"});
                ok = false;
            }
        }
        if (t.rating_kva <= 0.0)
            out.push_back({t.id, "bad-rating", "transformer '" + t.id + "' rating_kva must be > 0"});
        if (t.impedance_pct <= 0.0 || t.impedance_pct >= 20.0)
            out.push_back({t.id, "bad-impedance",
                           "transformer '" + t.id + "' impedance_pct must be in (0, 20)"});
        if (t.phase_count < 1 || t.phase_count > 3)
            out.push_back({t.id, "bad-phase-count", "transformer '" + t.id + "' phase_count must be 1, 2 or 3"});
        if (ok) {
            const Bus& hi = f.buses[idx.at(t.from_bus)];
            const Bus& lo = f.buses[idx.at(t.to_bus)];
            if (t.secondary_voltage_kv >= hi.nominal_voltage_kv)
                out.push_back({t.id, "bad-secondary-voltage",
                               "transformer '" + t.id + "' secondary voltage must be below the primary bus voltage"});
            if (t.secondary_voltage_kv != lo.nominal_voltage_kv)
                out.push_back({t.id, "secondary-voltage-mismatch",
                               "transformer '" + t.id +
                                   "' secondary_voltage_kv must equal the secondary bus nominal voltage"});
            if (!lo.phases.subset_of(hi.phases))
                out.push_back({t.id, "phase-mismatch",
                               "transformer '" + t.id + "' secondary phases are not served by the primary bus"});
            if (lo.phases.count() != t.phase_count)
                out.push_back({t.id, "phase-mismatch",
                               "transformer '" + t.id + "' phase_count " + std::to_string(t.phase_count) +
                                   " does not match secondary bus phases " + lo.phases.str()});
            edges.push_back({idx.at(t.from_bus), idx.at(t.to_bus), lo.phases});
        }
    }

    for (const auto& d : f.loads) {
        if (!bus_exists(d.bus))
            out.push_back({d.id, "dangling-reference",
                           "load '" + d.id + "' references missing bus '" + d.bus + "'"});
        if (d.peak_kw < 0.0)
            out.push_back({d.id, "bad-load", "load '" + d.id + "' peak_kw must be >= 0"});
        if (d.power_factor <= 0.0 || d.power_factor > 1.0)
            out.push_back({d.id, "bad-power-factor", "load '" + d.id + "' power_factor must be in (0, 1]"});
    }

    // Topology checks only make sense once references resolve.
    const std::size_t edge_count = f.lines.size() + f.transformers.size();
    if (edge_count != 0 || f.buses.size() > 1) {
        if (edge_count != f.buses.size() - 1)
            out.push_back({f.id, "non-radial",
                           "radial feeder requires edge count == bus count - 1 (" +
                               std::to_string(edge_count) + " edges, " + std::to_string(f.buses.size()) +
                               " buses)"});
    }

    if (source_count == 1) {
        // Whole-graph reachability from the source.
        std::vector<std::vector<int>> adj(f.buses.size());
        for (const auto& e : edges) {
            adj[e.from].push_back(e.to);
            adj[e.to].push_back(e.from);
        }
        int src = -1;
        for (std::size_t i = 0; i < f.buses.size(); ++i)
            if (f.buses[i].is_source) src = static_cast<int>(i);
        std::vector<bool> seen(f.buses.size(), false);
        std::queue<int> q;
        q.push(src);
        seen[src] = true;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
        }
        for (std::size_t i = 0; i < f.buses.size(); ++i)
            if (!seen[i])
                out.push_back({f.buses[i].id, "unreachable",
                               "bus '" + f.buses[i].id + "' is not connected to the source"});

        // Per-phase reachability: every phase a bus declares must be fed
        // through branches carrying that phase.
        for (int ph = 0; ph < 3; ++ph) {
            std::vector<bool> pseen(f.buses.size(), false);
            std::queue<int> pq;
            if (f.buses[src].phases.has(ph)) {
                pq.push(src);
                pseen[src] = true;
            }
            while (!pq.empty()) {
                int u = pq.front();
                pq.pop();
                for (const auto& e : edges) {
                    if (!e.phases.has(ph)) continue;
                    int v = -1;
                    if (e.from == u) v = e.to;
                    else if (e.to == u) v = e.from;
                    if (v >= 0 && !pseen[v]) {
                        pseen[v] = true;
                        pq.push(v);
                    }
                }
            }
            for (std::size_t i = 0; i < f.buses.size(); ++i)
                if (seen[i] && !pseen[i] && f.buses[i].phases.has(ph))
                    out.push_back({f.buses[i].id, "phase-unreachable",
                                   "bus '" + f.buses[i].id + "' declares phase " +
                                       PhaseSet::single(ph).str() + " but no path carries it"});
        }
    }

    return out;
}

} // namespace evgrid
