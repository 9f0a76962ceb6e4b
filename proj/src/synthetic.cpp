#include "evgrid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <unordered_map>

#include "evgrid/ladders.hpp"
#include "evgrid/rng.hpp"

namespace evgrid {

namespace {

std::string tag(const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, i);
    return buf;
}

void check_mix(const double* w, std::size_t n, const char* name) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] < 0.0) throw ConfigError(std::string(name) + " has a negative weight");
        sum += w[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError(std::string(name) + " must sum to 1 (got " + std::to_string(sum) + ")");
}

constexpr CustomerClass kClasses[4] = {
    CustomerClass::residential, CustomerClass::commercial,
    CustomerClass::industrial, CustomerClass::mixed};

// size bands index the ladders: small single-phase, medium/large three-phase
constexpr double kSmall[] = {25, 37.5, 50};
constexpr double kMedium[] = {75, 150, 225, 300};
constexpr double kLarge[] = {500, 750, 1000};

} // namespace

Feeder generate_synthetic_feeder(const SyntheticFeederSpec& spec) {
    if (spec.bus_count < 2) throw ConfigError("bus_count must be at least 2");
    check_mix(spec.class_mix.data(), spec.class_mix.size(), "class_mix");
    check_mix(spec.size_mix.data(), spec.size_mix.size(), "size_mix");
    if (spec.primary_voltage_kv <= 0.3)
        throw ConfigError("primary_voltage_kv must exceed 0.3 kV (service secondaries are 0.24/0.277 kV)");
    if (!(spec.min_utilization > 0.0 && spec.min_utilization <= spec.max_utilization &&
          spec.max_utilization <= 1.5))
        throw ConfigError("utilization band must satisfy 0 < min <= max <= 1.5");
    if (spec.long_lateral_mi < 0.0) throw ConfigError("long_lateral_mi must be >= 0");

    Rng rng(spec.seed);
    Feeder f;
    f.id = spec.id;

    const int n = spec.bus_count;
    const int tx_count = std::clamp(static_cast<int>(std::lround(n * 0.35)), 1, n - 1);
    const int primary_count = n - tx_count;
    const double vp = spec.primary_voltage_kv;

    int trunk_len = std::max(1, (primary_count + 1) / 2); // includes the source
    int sag_len = 0;
    if (spec.long_lateral_mi > 0.0 && primary_count >= 5) {
        sag_len = 3;
        trunk_len = std::min(trunk_len, primary_count - sag_len);
    }
    const int lateral_count = primary_count - trunk_len - sag_len;

    // --- primary buses ---
    Bus src;
    src.id = tag("b", 0);
    src.phases = PhaseSet::abc();
    src.nominal_voltage_kv = vp;
    src.is_source = true;
    f.buses.push_back(src);

    int next_bus = 1;
    int next_line = 0;
    auto add_line = [&](const std::string& from, const std::string& to, PhaseSet ph,
                        double r, double x, double len) {
        LineSegment ln;
        ln.id = tag("ln", next_line++);
        ln.from_bus = from;
        ln.to_bus = to;
        ln.phases = ph;
        ln.resistance_ohm_per_mi = r;
        ln.reactance_ohm_per_mi = x;
        ln.length_mi = len;
        ln.ampacity_a = ladders::line_ampacity_a.back(); // sized after loads are known
        f.lines.push_back(std::move(ln));
    };
    auto add_primary_bus = [&](PhaseSet ph) -> int {
        Bus b;
        b.id = tag("b", next_bus);
        b.phases = ph;
        b.nominal_voltage_kv = vp;
        f.buses.push_back(std::move(b));
        return next_bus++;
    };

    for (int i = 1; i < trunk_len; ++i) {
        int bi = add_primary_bus(PhaseSet::abc());
        add_line(f.buses[bi - 1].id, f.buses[bi].id, PhaseSet::abc(),
                 rng.uniform(0.25, 0.40), rng.uniform(0.55, 0.75), rng.uniform(0.15, 0.45));
    }

    for (int i = 0; i < lateral_count; ++i) {
        int parent = rng.uniform_int(0, next_bus - 1);
        PhaseSet pp = f.buses[parent].phases;
        PhaseSet ph;
        if (pp.count() == 3) {
            double roll = rng.uniform();
            if (roll < 0.50) {
                ph = PhaseSet::abc();
            } else if (roll < 0.85) {
                ph = PhaseSet::single(rng.uniform_int(0, 2));
            } else {
                int skip = rng.uniform_int(0, 2); // drop one phase of three
                ph = PhaseSet::abc();
                ph = ph.without(skip);
            }
        } else if (pp.count() == 2) {
            if (rng.uniform() < 0.6) {
                ph = pp;
            } else {
                auto phases = pp.list();
                ph = PhaseSet::single(phases[rng.uniform_int(0, 1)]);
            }
        } else {
            ph = pp;
        }
        int bi = add_primary_bus(ph);
        add_line(f.buses[parent].id, f.buses[bi].id, ph,
                 rng.uniform(0.35, 0.70), rng.uniform(0.45, 0.85), rng.uniform(0.20, 0.80));
    }

    // express lateral: a few long high-X segments so voltage sag shows up at
    // the tail before any conductor runs out of thermal headroom
    int sag_tail = -1;
    if (sag_len > 0) {
        int parent = trunk_len - 1;
        double seg = spec.long_lateral_mi / sag_len;
        for (int i = 0; i < sag_len; ++i) {
            int bi = add_primary_bus(PhaseSet::abc());
            double r = rng.uniform(0.30, 0.45);
            add_line(f.buses[parent].id, f.buses[bi].id, PhaseSet::abc(),
                     r, r * rng.uniform(1.6, 2.2), seg);
            parent = bi;
        }
        sag_tail = parent;
    }

    // --- service transformers, one secondary bus + aggregate load each ---
    for (int i = 0; i < tx_count; ++i) {
        int host;
        if (sag_tail >= 0 && i == 0) {
            host = sag_tail; // guarantee load at the end of the express lateral
        } else if (primary_count > 1) {
            host = rng.uniform_int(1, primary_count - 1);
        } else {
            host = 0;
        }
        // copies: f.buses reallocates when the secondary bus is appended
        const std::string host_id = f.buses[host].id;
        const PhaseSet host_phases = f.buses[host].phases;

        int band = static_cast<int>(rng.pick_weighted(spec.size_mix));
        if (host_phases.count() < 3) band = 0;
        if (sag_tail >= 0 && i == 0 && band == 0) band = 1;

        double rating;
        double z_pct;
        int phase_count;
        if (band == 0) {
            rating = kSmall[rng.uniform_int(0, 2)];
            z_pct = rng.uniform(1.8, 2.8);
            phase_count = 1;
        } else if (band == 1) {
            rating = kMedium[rng.uniform_int(0, 3)];
            z_pct = rng.uniform(4.0, 5.5);
            phase_count = 3;
        } else {
            rating = kLarge[rng.uniform_int(0, 2)];
            z_pct = rng.uniform(5.0, 6.5);
            phase_count = 3;
        }

        Bus sec;
        sec.id = tag("b", next_bus++);
        if (phase_count == 3) {
            sec.phases = PhaseSet::abc();
            sec.nominal_voltage_kv = 0.277;
        } else {
            auto avail = host_phases.list();
            sec.phases = PhaseSet::single(avail[rng.uniform_int(0, static_cast<int>(avail.size()) - 1)]);
            sec.nominal_voltage_kv = 0.24;
        }
        f.buses.push_back(sec);

        Transformer tx;
        tx.id = tag("tx", i);
        tx.from_bus = host_id;
        tx.to_bus = sec.id;
        tx.phase_count = phase_count;
        tx.rating_kva = rating;
        tx.impedance_pct = z_pct;
        tx.secondary_voltage_kv = sec.nominal_voltage_kv;
        f.transformers.push_back(std::move(tx));

        CustomerClass cls = kClasses[rng.pick_weighted(spec.class_mix)];
        double pf;
        switch (cls) {
            case CustomerClass::residential: pf = rng.uniform(0.93, 0.97); break;
            case CustomerClass::commercial:  pf = rng.uniform(0.90, 0.95); break;
            case CustomerClass::industrial:  pf = rng.uniform(0.86, 0.92); break;
            default:                         pf = rng.uniform(0.91, 0.96); break;
        }
        double util = rng.uniform(spec.min_utilization, spec.max_utilization);

        LoadPoint ld;
        ld.id = tag("ld", i);
        ld.bus = sec.id;
        ld.customer_class = cls;
        ld.peak_kw = rating * util * pf;
        ld.power_factor = pf;
        ld.profile_id = to_string(cls);
        f.loads.push_back(std::move(ld));
    }

    // --- size conductors against aggregate downstream kVA with a margin ---
    std::unordered_map<std::string, double> direct_kva;
    for (const auto& tx : f.transformers) {
        const auto& ld = f.loads[&tx - f.transformers.data()];
        direct_kva[tx.from_bus] += ld.peak_kw / ld.power_factor;
    }
    std::unordered_map<std::string, std::vector<const LineSegment*>> kids;
    for (const auto& ln : f.lines) kids[ln.from_bus].push_back(&ln);
    std::function<double(const std::string&)> subtree = [&](const std::string& b) {
        double s = 0.0;
        auto it = direct_kva.find(b);
        if (it != direct_kva.end()) s = it->second;
        auto kt = kids.find(b);
        if (kt != kids.end())
            for (const LineSegment* ln : kt->second) s += subtree(ln->to_bus);
        return s;
    };
    const int trunk_lines = trunk_len - 1;
    const int sag_first = trunk_lines + lateral_count;
    for (std::size_t li = 0; li < f.lines.size(); ++li) {
        auto& ln = f.lines[li];
        double amps = subtree(ln.to_bus) / (ln.phases.count() * vp);
        double margin;
        if (static_cast<int>(li) >= sag_first) {
            margin = rng.uniform(1.08, 1.20); // express lateral runs close to its limit
        } else if (static_cast<int>(li) < trunk_lines) {
            margin = rng.uniform(1.50, 2.00);
        } else {
            margin = rng.uniform(1.35, 1.80);
        }
        double need = std::max(amps, 1.0) * margin;
        double pick = ladders::line_ampacity_a.back();
        for (double a : ladders::line_ampacity_a)
            if (a >= need) { pick = a; break; }
        ln.ampacity_a = pick;
    }

    return f;
}

} // namespace evgrid
