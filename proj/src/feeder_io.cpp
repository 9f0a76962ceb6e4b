#include "evgrid/feeder_io.hpp"

#include <fstream>

namespace evgrid {

using nlohmann::ordered_json;

namespace {

const ordered_json& require(const ordered_json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw ParseError(where + ": missing required field \"" + field + "\"");
    return *it;
}

double require_num(const ordered_json& obj, const char* field, const std::string& where) {
    const auto& v = require(obj, field, where);
    if (!v.is_number())
        throw ParseError(where + ": field \"" + field + "\" must be a number");
    return v.get<double>();
}

std::string require_str(const ordered_json& obj, const char* field, const std::string& where) {
    const auto& v = require(obj, field, where);
    if (!v.is_string())
        throw ParseError(where + ": field \"" + field + "\" must be a string");
    return v.get<std::string>();
}

std::string elem(const std::string& key, std::size_t i) {
    return key + "[" + std::to_string(i) + "]";
}

} // namespace

Feeder feeder_from_json(const ordered_json& j, const std::string& context) {
    if (!j.is_object()) throw ParseError(context + ": feeder file must be a JSON object");
    Feeder f;
    f.id = j.value("id", std::string("feeder"));

    for (const char* key : {"buses", "lines", "transformers", "loads"}) {
        const auto& arr = require(j, key, context);
        if (!arr.is_array())
            throw ParseError(context + ": \"" + std::string(key) + "\" must be an array");
    }

    std::size_t i = 0;
    for (const auto& b : j.at("buses")) {
        const std::string where = context + ": " + elem("buses", i++);
        Bus bus;
        bus.id = require_str(b, "id", where);
        bus.phases = PhaseSet::from_string(require_str(b, "phases", where));
        bus.nominal_voltage_kv = require_num(b, "nominal_voltage_kv", where);
        bus.is_source = require(b, "is_source", where).get<bool>();
        f.buses.push_back(std::move(bus));
    }
    i = 0;
    for (const auto& l : j.at("lines")) {
        const std::string where = context + ": " + elem("lines", i++);
        LineSegment ln;
        ln.id = require_str(l, "id", where);
        ln.from_bus = require_str(l, "from_bus", where);
        ln.to_bus = require_str(l, "to_bus", where);
        ln.phases = PhaseSet::from_string(require_str(l, "phases", where));
        ln.resistance_ohm_per_mi = require_num(l, "resistance_ohm_per_mi", where);
        ln.reactance_ohm_per_mi = require_num(l, "reactance_ohm_per_mi", where);
        ln.length_mi = require_num(l, "length_mi", where);
        ln.ampacity_a = require_num(l, "ampacity_a", where);
        f.lines.push_back(std::move(ln));
    }
    i = 0;
    for (const auto& t : j.at("transformers")) {
        const std::string where = context + ": " + elem("transformers", i++);
        Transformer tx;
        tx.id = require_str(t, "id", where);
        tx.from_bus = require_str(t, "from_bus", where);
        tx.to_bus = require_str(t, "to_bus", where);
        tx.phase_count = static_cast<int>(require_num(t, "phase_count", where));
        tx.rating_kva = require_num(t, "rating_kva", where);
        tx.impedance_pct = require_num(t, "impedance_pct", where);
        tx.secondary_voltage_kv = require_num(t, "secondary_voltage_kv", where);
        f.transformers.push_back(std::move(tx));
    }
    i = 0;
    for (const auto& d : j.at("loads")) {
        const std::string where = context + ": " + elem("loads", i++);
        LoadPoint ld;
        ld.id = require_str(d, "id", where);
        ld.bus = require_str(d, "bus", where);
        ld.customer_class = customer_class_from_string(require_str(d, "customer_class", where));
        ld.peak_kw = require_num(d, "peak_kw", where);
        ld.power_factor = require_num(d, "power_factor", where);
        ld.profile_id = require_str(d, "profile_id", where);
        f.loads.push_back(std::move(ld));
    }
    return f;
}

ordered_json feeder_to_json(const Feeder& f) {
    ordered_json j;
    j["id"] = f.id;
    j["buses"] = ordered_json::array();
    for (const auto& b : f.buses) {
        ordered_json o;
        o["id"] = b.id;
        o["phases"] = b.phases.str();
        o["nominal_voltage_kv"] = b.nominal_voltage_kv;
        o["is_source"] = b.is_source;
        j["buses"].push_back(std::move(o));
    }
    j["lines"] = ordered_json::array();
    for (const auto& l : f.lines) {
        ordered_json o;
        o["id"] = l.id;
        o["from_bus"] = l.from_bus;
        o["to_bus"] = l.to_bus;
        o["phases"] = l.phases.str();
        o["resistance_ohm_per_mi"] = l.resistance_ohm_per_mi;
        o["reactance_ohm_per_mi"] = l.reactance_ohm_per_mi;
        o["length_mi"] = l.length_mi;
        o["ampacity_a"] = l.ampacity_a;
        j["lines"].push_back(std::move(o));
    }
    j["transformers"] = ordered_json::array();
    for (const auto& t : f.transformers) {
        ordered_json o;
        o["id"] = t.id;
        o["from_bus"] = t.from_bus;
        o["to_bus"] = t.to_bus;
        o["phase_count"] = t.phase_count;
        o["rating_kva"] = t.rating_kva;
        o["impedance_pct"] = t.impedance_pct;
        o["secondary_voltage_kv"] = t.secondary_voltage_kv;
        j["transformers"].push_back(std::move(o));
    }
    j["loads"] = ordered_json::array();
    for (const auto& d : f.loads) {
        ordered_json o;
        o["id"] = d.id;
        o["bus"] = d.bus;
        o["customer_class"] = to_string(d.customer_class);
        o["peak_kw"] = d.peak_kw;
        o["power_factor"] = d.power_factor;
        o["profile_id"] = d.profile_id;
        j["loads"].push_back(std::move(o));
    }
    return j;
}

Feeder load_feeder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    Feeder f = feeder_from_json(j, path.string());
    auto violations = validate(f);
    if (!violations.empty()) {
        std::string msg = path.string() + ": feeder fails validation:";
        for (const auto& v : violations) msg += "\n  [" + v.code + "] " + v.message;
        throw ConfigError(msg);
    }
    return f;
}

void save_feeder(const Feeder& f, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << feeder_to_json(f).dump(2) << '\n';
}

} // namespace evgrid
