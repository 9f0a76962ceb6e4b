// Python bindings for the evgrid core. Mirrors the C++ API one to one:
// domain structs are plain attribute bags, operations are free functions,
// and the three error types map to distinct Python exceptions. Functions
// that take a container by mutable reference in C++ (apply_enrollment)
// return the updated value here instead, since the argument crosses the
// boundary as a copy.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "evgrid/charging.hpp"
#include "evgrid/clustering.hpp"
#include "evgrid/common.hpp"
#include "evgrid/economics.hpp"
#include "evgrid/feeder.hpp"
#include "evgrid/feeder_io.hpp"
#include "evgrid/planner.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/profiles.hpp"
#include "evgrid/study.hpp"
#include "evgrid/synthetic.hpp"

namespace py = pybind11;
using namespace evgrid;

namespace {

template <typename T>
std::string id_repr(const char* type, const T& v) {
    return std::string("<") + type + " '" + v.id + "'>";
}

} // namespace

PYBIND11_MODULE(_evgrid, m) {
    m.doc() = "Distribution-grid EV charging impact toolkit (core bindings)";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ParseError>(m, "ParseError");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<SolveError>(m, "SolveError");

    // ------------------------------------------------------------- common
    py::enum_<DayType>(m, "DayType")
        .value("winter", DayType::winter)
        .value("summer", DayType::summer)
        .value("shoulder", DayType::shoulder);
    py::enum_<CustomerClass>(m, "CustomerClass")
        .value("residential", CustomerClass::residential)
        .value("commercial", CustomerClass::commercial)
        .value("industrial", CustomerClass::industrial)
        .value("mixed", CustomerClass::mixed);

    py::class_<PQ>(m, "PQ")
        .def(py::init<>())
        .def(py::init([](double p, double q) { return PQ{p, q}; }), py::arg("p_kw"),
             py::arg("q_kvar"))
        .def_readwrite("p_kw", &PQ::p_kw)
        .def_readwrite("q_kvar", &PQ::q_kvar)
        .def("__repr__",
             [](const PQ& v) { return "PQ(" + std::to_string(v.p_kw) + " kW, " +
                                      std::to_string(v.q_kvar) + " kvar)"; });

    // ------------------------------------------------------------- feeder
    py::class_<PhaseSet>(m, "PhaseSet")
        .def(py::init<>())
        .def_static("abc", &PhaseSet::abc)
        .def_static("single", &PhaseSet::single, py::arg("phase"))
        .def_static("from_string", &PhaseSet::from_string, py::arg("s"))
        .def("__str__", &PhaseSet::str)
        .def("__repr__", [](const PhaseSet& p) { return "PhaseSet('" + p.str() + "')"; })
        .def("count", &PhaseSet::count)
        .def("has", &PhaseSet::has, py::arg("phase"))
        .def("list", &PhaseSet::list)
        .def(py::self == py::self);

    py::class_<Bus>(m, "Bus")
        .def(py::init<>())
        .def_readwrite("id", &Bus::id)
        .def_readwrite("phases", &Bus::phases)
        .def_readwrite("nominal_voltage_kv", &Bus::nominal_voltage_kv)
        .def_readwrite("is_source", &Bus::is_source)
        .def("__repr__", [](const Bus& b) { return id_repr("Bus", b); });

    py::class_<LineSegment>(m, "LineSegment")
        .def(py::init<>())
        .def_readwrite("id", &LineSegment::id)
        .def_readwrite("from_bus", &LineSegment::from_bus)
        .def_readwrite("to_bus", &LineSegment::to_bus)
        .def_readwrite("phases", &LineSegment::phases)
        .def_readwrite("resistance_ohm_per_mi", &LineSegment::resistance_ohm_per_mi)
        .def_readwrite("reactance_ohm_per_mi", &LineSegment::reactance_ohm_per_mi)
        .def_readwrite("length_mi", &LineSegment::length_mi)
        .def_readwrite("ampacity_a", &LineSegment::ampacity_a)
        .def("__repr__", [](const LineSegment& l) { return id_repr("LineSegment", l); });

    py::class_<Transformer>(m, "Transformer")
        .def(py::init<>())
        .def_readwrite("id", &Transformer::id)
        .def_readwrite("from_bus", &Transformer::from_bus)
        .def_readwrite("to_bus", &Transformer::to_bus)
        .def_readwrite("phase_count", &Transformer::phase_count)
        .def_readwrite("rating_kva", &Transformer::rating_kva)
        .def_readwrite("impedance_pct", &Transformer::impedance_pct)
        .def_readwrite("secondary_voltage_kv", &Transformer::secondary_voltage_kv)
        .def("__repr__", [](const Transformer& t) { return id_repr("Transformer", t); });

    py::class_<LoadPoint>(m, "LoadPoint")
        .def(py::init<>())
        .def_readwrite("id", &LoadPoint::id)
        .def_readwrite("bus", &LoadPoint::bus)
        .def_readwrite("customer_class", &LoadPoint::customer_class)
        .def_readwrite("peak_kw", &LoadPoint::peak_kw)
        .def_readwrite("power_factor", &LoadPoint::power_factor)
        .def_readwrite("profile_id", &LoadPoint::profile_id)
        .def("__repr__", [](const LoadPoint& l) { return id_repr("LoadPoint", l); });

    py::class_<FeederViolation>(m, "FeederViolation")
        .def_readonly("component_id", &FeederViolation::component_id)
        .def_readonly("code", &FeederViolation::code)
        .def_readonly("message", &FeederViolation::message)
        .def("__repr__", [](const FeederViolation& v) {
            return "<FeederViolation [" + v.code + "] " + v.component_id + ">";
        });

    py::class_<Feeder>(m, "Feeder")
        .def(py::init<>())
        .def_readwrite("id", &Feeder::id)
        .def_readwrite("buses", &Feeder::buses)
        .def_readwrite("lines", &Feeder::lines)
        .def_readwrite("transformers", &Feeder::transformers)
        .def_readwrite("loads", &Feeder::loads)
        .def("bus_index", &Feeder::bus_index, py::arg("id"))
        .def("__repr__", [](const Feeder& f) {
            return "<Feeder '" + f.id + "': " + std::to_string(f.buses.size()) + " buses, " +
                   std::to_string(f.lines.size()) + " lines, " +
                   std::to_string(f.transformers.size()) + " transformers, " +
                   std::to_string(f.loads.size()) + " loads>";
        });

    m.def("validate_feeder", [](const Feeder& f) { return validate(f); }, py::arg("feeder"),
          "Invariant check; violations are returned as data, not raised.");
    m.def("load_feeder", &load_feeder, py::arg("path"));
    m.def("save_feeder", &save_feeder, py::arg("feeder"), py::arg("path"));
    m.def("feeder_to_json_string",
          [](const Feeder& f) { return feeder_to_json(f).dump(2) + "\n"; }, py::arg("feeder"));
    m.def("feeder_from_json_string",
          [](const std::string& text, const std::string& context) {
              nlohmann::ordered_json j;
              try {
                  j = nlohmann::ordered_json::parse(text);
              } catch (const nlohmann::json::exception& e) {
                  throw ParseError(context + ": " + e.what());
              }
              return feeder_from_json(j, context);
          },
          py::arg("text"), py::arg("context") = "feeder");

    py::class_<SyntheticFeederSpec>(m, "SyntheticFeederSpec")
        .def(py::init<>())
        .def_readwrite("id", &SyntheticFeederSpec::id)
        .def_readwrite("bus_count", &SyntheticFeederSpec::bus_count)
        .def_readwrite("class_mix", &SyntheticFeederSpec::class_mix)
        .def_readwrite("size_mix", &SyntheticFeederSpec::size_mix)
        .def_readwrite("primary_voltage_kv", &SyntheticFeederSpec::primary_voltage_kv)
        .def_readwrite("long_lateral_mi", &SyntheticFeederSpec::long_lateral_mi)
        .def_readwrite("min_utilization", &SyntheticFeederSpec::min_utilization)
        .def_readwrite("max_utilization", &SyntheticFeederSpec::max_utilization)
        .def_readwrite("seed", &SyntheticFeederSpec::seed);
    m.def("generate_synthetic_feeder", &generate_synthetic_feeder, py::arg("spec"));

    // ----------------------------------------------------------- profiles
    py::class_<TimeSeriesProfile>(m, "TimeSeriesProfile")
        .def(py::init<>())
        .def_readwrite("profile_id", &TimeSeriesProfile::profile_id)
        .def_readwrite("day_type", &TimeSeriesProfile::day_type)
        .def_readwrite("shape", &TimeSeriesProfile::shape);

    py::class_<ProfileStore>(m, "ProfileStore")
        .def(py::init<>())
        .def_static("builtin", &ProfileStore::builtin)
        .def("add", &ProfileStore::add, py::arg("profile"))
        .def("contains", &ProfileStore::contains, py::arg("profile_id"), py::arg("day"))
        .def("get", &ProfileStore::get, py::arg("profile_id"), py::arg("day"),
             py::return_value_policy::copy)
        .def("__len__", &ProfileStore::size);
    m.def("load_profiles", &load_profiles, py::arg("path"));
    m.def("save_profiles", &save_profiles, py::arg("store"), py::arg("path"));

    // ---------------------------------------------------------- powerflow
    py::class_<SolveOptions>(m, "SolveOptions")
        .def(py::init<>())
        .def_readwrite("tolerance", &SolveOptions::tolerance)
        .def_readwrite("max_iterations", &SolveOptions::max_iterations);

    py::class_<SnapshotInput>(m, "SnapshotInput")
        .def(py::init<>())
        .def_readwrite("load_pq", &SnapshotInput::load_pq)
        .def_readwrite("bus_extra_pq", &SnapshotInput::bus_extra_pq);

    py::class_<SnapshotResult>(m, "SnapshotResult")
        .def_readonly("iterations", &SnapshotResult::iterations)
        .def_readonly("v_mag_pu", &SnapshotResult::v_mag_pu)
        .def_readonly("v_angle_rad", &SnapshotResult::v_angle_rad)
        .def_readonly("branch_current_a", &SnapshotResult::branch_current_a)
        .def_readonly("branch_kva", &SnapshotResult::branch_kva)
        .def_readonly("losses_kw", &SnapshotResult::losses_kw)
        .def_readonly("losses_kvar", &SnapshotResult::losses_kvar)
        .def_readonly("source_kw", &SnapshotResult::source_kw)
        .def_readonly("source_kvar", &SnapshotResult::source_kvar)
        .def("power_balance_error", &SnapshotResult::power_balance_error);

    m.def("solve_snapshot", &solve_snapshot, py::arg("feeder"), py::arg("input"),
          py::arg("options") = SolveOptions{}, py::call_guard<py::gil_scoped_release>());

    // ----------------------------------------------------------- charging
    m.attr("HORIZON_SLOTS") = kHorizonSlots;
    m.attr("TOU_START_HOUR") = kTouStartHour;
    m.attr("TOU_END_HOUR") = kTouEndHour;

    py::class_<EVSession>(m, "EVSession")
        .def(py::init<>())
        .def_readwrite("session_id", &EVSession::session_id)
        .def_readwrite("bus", &EVSession::bus)
        .def_readwrite("plugin_hour", &EVSession::plugin_hour)
        .def_readwrite("duration_h", &EVSession::duration_h)
        .def_readwrite("energy_kwh", &EVSession::energy_kwh)
        .def_readwrite("max_power_kw", &EVSession::max_power_kw)
        .def_readwrite("enrolled", &EVSession::enrolled)
        .def("depart_slot", &EVSession::depart_slot)
        .def(py::self == py::self)
        .def("__repr__", [](const EVSession& s) {
            return "<EVSession '" + s.session_id + "' @" + s.bus + " h" +
                   std::to_string(s.plugin_hour) + "+" + std::to_string(s.duration_h) + ">";
        });

    py::class_<ChargingSchedule>(m, "ChargingSchedule")
        .def_readonly("session_id", &ChargingSchedule::session_id)
        .def_readonly("power_kw", &ChargingSchedule::power_kw)
        .def_readonly("unmet_kwh", &ChargingSchedule::unmet_kwh)
        .def("delivered_kwh", &ChargingSchedule::delivered_kwh)
        .def("folded_kw", &ChargingSchedule::folded_kw);

    py::class_<LbResult>(m, "LbResult")
        .def_readonly("schedules", &LbResult::schedules)
        .def_readonly("breach_hours", &LbResult::breach_hours)
        .def("breach_count", &LbResult::breach_count);

    m.def("unmanaged_schedule", &unmanaged_schedule, py::arg("session"));
    m.def("tou_schedule", &tou_schedule, py::arg("session"));
    m.def("lb_schedule", &lb_schedule, py::arg("sessions"), py::arg("rating_kva"),
          py::arg("base_kw"), py::arg("threshold") = 0.9);

    py::class_<EnrollmentTrajectory>(m, "EnrollmentTrajectory")
        .def(py::init<>())
        .def_static("for_scenario", &EnrollmentTrajectory::for_scenario, py::arg("scenario"))
        .def_readwrite("scenario", &EnrollmentTrajectory::scenario)
        .def_readwrite("target_rate_2035", &EnrollmentTrajectory::target_rate_2035)
        .def_readwrite("rate_by_year", &EnrollmentTrajectory::rate_by_year)
        .def("rate", &EnrollmentTrajectory::rate, py::arg("year"));

    m.def("apply_enrollment",
          [](std::vector<EVSession> sessions, const EnrollmentTrajectory& t, int year,
             std::uint64_t seed) {
              apply_enrollment(sessions, t, year, seed);
              return sessions;
          },
          py::arg("sessions"), py::arg("trajectory"), py::arg("year"), py::arg("seed"),
          "Returns the sessions with `enrolled` set; the input list is not modified.");
    m.def("aggregate_ev_load", &aggregate_ev_load, py::arg("sessions"), py::arg("schedules"));

    py::class_<SessionClassSpec>(m, "SessionClassSpec")
        .def(py::init<>())
        .def_readwrite("plugin_mean", &SessionClassSpec::plugin_mean)
        .def_readwrite("plugin_sd", &SessionClassSpec::plugin_sd)
        .def_readwrite("duration_mean", &SessionClassSpec::duration_mean)
        .def_readwrite("duration_sd", &SessionClassSpec::duration_sd);

    py::class_<BehaviorSpec>(m, "BehaviorSpec")
        .def(py::init<>())
        .def_readwrite("residential_weight", &BehaviorSpec::residential_weight)
        .def_readwrite("residential", &BehaviorSpec::residential)
        .def_readwrite("commercial", &BehaviorSpec::commercial)
        .def_readwrite("energy_mean_kwh", &BehaviorSpec::energy_mean_kwh)
        .def_readwrite("energy_sd_kwh", &BehaviorSpec::energy_sd_kwh)
        .def_readwrite("energy_min_kwh", &BehaviorSpec::energy_min_kwh)
        .def_readwrite("energy_max_kwh", &BehaviorSpec::energy_max_kwh)
        .def_readwrite("charger_share", &BehaviorSpec::charger_share)
        .def_readwrite("charger_kw", &BehaviorSpec::charger_kw);

    m.def("generate_sessions", &generate_sessions, py::arg("feeder"), py::arg("count"),
          py::arg("spec") = BehaviorSpec{}, py::arg("seed") = 1);
    m.def("load_sessions", &load_sessions, py::arg("path"));
    m.def("save_sessions", &save_sessions, py::arg("sessions"), py::arg("path"));

    // --------------------------------------------------------- clustering
    py::class_<FeederFeatures>(m, "FeederFeatures")
        .def(py::init<>())
        .def_readonly_static("DIM", &FeederFeatures::kDim)
        .def_readwrite("feeder_id", &FeederFeatures::feeder_id)
        .def_readwrite("voltage_level_kv", &FeederFeatures::voltage_level_kv)
        .def_readwrite("peak_base_load_kw", &FeederFeatures::peak_base_load_kw)
        .def_readwrite("peak_ev_load_kw", &FeederFeatures::peak_ev_load_kw)
        .def_readwrite("total_transformer_capacity_kva",
                       &FeederFeatures::total_transformer_capacity_kva)
        .def_readwrite("transformer_phase_counts", &FeederFeatures::transformer_phase_counts)
        .def_readwrite("line_phase_counts", &FeederFeatures::line_phase_counts)
        .def_readwrite("class_load_kw", &FeederFeatures::class_load_kw)
        .def("flatten", &FeederFeatures::flatten)
        .def_static("field_names", [] { return FeederFeatures::field_names(); });

    m.def("extract_features", &extract_features, py::arg("feeder"), py::arg("profiles"),
          py::arg("unmanaged_ev_kw"));
    m.def("load_features", &load_features, py::arg("path"));
    m.def("save_features", &save_features, py::arg("rows"), py::arg("path"));

    py::class_<PcaModel>(m, "PcaModel")
        .def_readonly("mean", &PcaModel::mean)
        .def_readonly("scale", &PcaModel::scale)
        .def_readonly("kept", &PcaModel::kept)
        .def_readonly("dropped", &PcaModel::dropped)
        .def_readonly("components", &PcaModel::components)
        .def_readonly("explained_variance_ratio", &PcaModel::explained_variance_ratio)
        .def_readonly("all_variance_ratio", &PcaModel::all_variance_ratio)
        .def("input_dim", &PcaModel::input_dim)
        .def("reduced_dim", &PcaModel::reduced_dim)
        .def("transform", &PcaModel::transform, py::arg("raw"))
        .def("inverse_transform", &PcaModel::inverse_transform, py::arg("reduced"));
    m.def("fit_pca", &fit_pca, py::arg("rows"), py::arg("variance_target") = 0.95);

    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("k", &ClusterModel::k)
        .def_readonly("seed", &ClusterModel::seed)
        .def_readonly("wcss", &ClusterModel::wcss)
        .def_readonly("wcss_trace", &ClusterModel::wcss_trace)
        .def_readonly("centroids", &ClusterModel::centroids)
        .def_readonly("assignment", &ClusterModel::assignment)
        .def_readonly("ids", &ClusterModel::ids)
        .def("assignments", &ClusterModel::assignments);
    m.def("kmeans", &kmeans, py::arg("points"), py::arg("k"), py::arg("seed"),
          py::arg("restarts") = 10, py::call_guard<py::gil_scoped_release>());

    py::class_<ElbowResult>(m, "ElbowResult")
        .def_readonly("k", &ElbowResult::k)
        .def_readonly("k_values", &ElbowResult::k_values)
        .def_readonly("wcss", &ElbowResult::wcss);
    m.def("elbow_select", &elbow_select, py::arg("points"), py::arg("k_range"), py::arg("seed"),
          py::arg("restarts") = 10, py::call_guard<py::gil_scoped_release>());

    m.def("select_representatives", &select_representatives, py::arg("model"),
          py::arg("points"));

    py::class_<ClusterReportRow>(m, "ClusterReportRow")
        .def_readonly("feeder_id", &ClusterReportRow::feeder_id)
        .def_readonly("cluster", &ClusterReportRow::cluster)
        .def_readonly("distance_to_centroid", &ClusterReportRow::distance_to_centroid)
        .def_readonly("is_representative", &ClusterReportRow::is_representative);

    py::class_<ClusteringRun>(m, "ClusteringRun")
        .def_readonly("pca", &ClusteringRun::pca)
        .def_readonly("elbow", &ClusteringRun::elbow)
        .def_readonly("model", &ClusteringRun::model)
        .def_readonly("points", &ClusteringRun::points)
        .def_readonly("representatives", &ClusteringRun::representatives)
        .def("report", &ClusteringRun::report);
    m.def("cluster_feeders", &cluster_feeders, py::arg("features"), py::arg("k_range"),
          py::arg("seed"), py::arg("variance_target") = 0.95, py::arg("restarts") = 10,
          py::call_guard<py::gil_scoped_release>());
    m.def("load_cluster_report", &load_cluster_report, py::arg("path"));
    m.def("save_cluster_report", &save_cluster_report, py::arg("rows"), py::arg("path"));

    // ------------------------------------------------------------ planner
    py::enum_<ViolationKind>(m, "ViolationKind")
        .value("transformer_overload", ViolationKind::transformer_overload)
        .value("line_overload", ViolationKind::line_overload)
        .value("undervoltage", ViolationKind::undervoltage);
    py::enum_<UpgradeKind>(m, "UpgradeKind")
        .value("resize_transformer", UpgradeKind::resize_transformer)
        .value("resize_line", UpgradeKind::resize_line)
        .value("add_capacitor", UpgradeKind::add_capacitor);

    py::class_<ViolationRecord>(m, "ViolationRecord")
        .def(py::init<>())
        .def_readwrite("component_id", &ViolationRecord::component_id)
        .def_readwrite("year", &ViolationRecord::year)
        .def_readwrite("day_type", &ViolationRecord::day_type)
        .def_readwrite("hour", &ViolationRecord::hour)
        .def_readwrite("kind", &ViolationRecord::kind)
        .def_readwrite("magnitude", &ViolationRecord::magnitude)
        .def("__repr__", [](const ViolationRecord& v) {
            return "<ViolationRecord " + to_string(v.kind) + " " + v.component_id + " " +
                   std::to_string(v.year) + "/" + to_string(v.day_type) + "/h" +
                   std::to_string(v.hour) + ">";
        });

    py::class_<UpgradeAction>(m, "UpgradeAction")
        .def(py::init<>())
        .def_readwrite("component_id", &UpgradeAction::component_id)
        .def_readwrite("kind", &UpgradeAction::kind)
        .def_readwrite("year", &UpgradeAction::year)
        .def_readwrite("old_rating", &UpgradeAction::old_rating)
        .def_readwrite("new_rating", &UpgradeAction::new_rating)
        .def_readwrite("unit_size", &UpgradeAction::unit_size)
        .def_readwrite("parallel_units", &UpgradeAction::parallel_units)
        .def_readwrite("length_mi", &UpgradeAction::length_mi)
        .def_readwrite("unit_cost_usd", &UpgradeAction::unit_cost_usd)
        .def("__repr__", [](const UpgradeAction& a) {
            return "<UpgradeAction " + to_string(a.kind) + " " + a.component_id + " @" +
                   std::to_string(a.year) + ">";
        });

    py::class_<StudyYears>(m, "StudyYears")
        .def(py::init<>())
        .def(py::init([](int first, int last) { return StudyYears{first, last}; }),
             py::arg("first"), py::arg("last"))
        .def_readwrite("first", &StudyYears::first)
        .def_readwrite("last", &StudyYears::last)
        .def("count", &StudyYears::count);

    py::class_<VoltageLimits>(m, "VoltageLimits")
        .def(py::init<>())
        .def_readwrite("min_pu", &VoltageLimits::min_pu)
        .def_readwrite("max_pu", &VoltageLimits::max_pu);

    py::class_<SizeLadders>(m, "SizeLadders")
        .def(py::init<>())
        .def_static("standard", &SizeLadders::standard)
        .def_readwrite("xfmr_1ph_kva", &SizeLadders::xfmr_1ph_kva)
        .def_readwrite("xfmr_3ph_kva", &SizeLadders::xfmr_3ph_kva)
        .def_readwrite("line_ampacity_a", &SizeLadders::line_ampacity_a)
        .def_readwrite("capacitor_kvar", &SizeLadders::capacitor_kvar);

    py::class_<TimeSeriesResult>(m, "TimeSeriesResult")
        .def_readonly("hours", &TimeSeriesResult::hours)
        .def_readonly("max_loading", &TimeSeriesResult::max_loading)
        .def_readonly("min_v_pu", &TimeSeriesResult::min_v_pu);

    py::class_<YearResults>(m, "YearResults")
        .def_readonly("feeder", &YearResults::feeder)
        .def_readonly("days", &YearResults::days);

    py::class_<HorizonResults>(m, "HorizonResults")
        .def_readonly("years", &HorizonResults::years);

    m.def("simulate_horizon", &simulate_horizon, py::arg("feeder"), py::arg("profiles"),
          py::arg("ev"), py::arg("years"), py::arg("plan") = std::vector<UpgradeAction>{},
          py::arg("options") = SolveOptions{}, py::call_guard<py::gil_scoped_release>());
    m.def("detect_violations", &detect_violations, py::arg("results"),
          py::arg("limits") = VoltageLimits{});
    m.def("plan_thermal_upgrades", &plan_thermal_upgrades, py::arg("results"),
          py::arg("ladders") = SizeLadders::standard());

    py::class_<VoltagePlanResult>(m, "VoltagePlanResult")
        .def_readonly("actions", &VoltagePlanResult::actions)
        .def_readonly("residual", &VoltagePlanResult::residual);
    m.def("plan_voltage_support", &plan_voltage_support, py::arg("feeder"), py::arg("profiles"),
          py::arg("ev"), py::arg("years"), py::arg("thermal_plan"),
          py::arg("ladders") = SizeLadders::standard(), py::arg("limits") = VoltageLimits{},
          py::arg("options") = SolveOptions{}, py::arg("max_banks_per_year") = 10,
          py::call_guard<py::gil_scoped_release>());

    py::class_<VerifyReport>(m, "VerifyReport")
        .def_readonly("residual", &VerifyReport::residual)
        .def("clean", &VerifyReport::clean);
    m.def("verify_plan", &verify_plan, py::arg("feeder"), py::arg("profiles"), py::arg("ev"),
          py::arg("years"), py::arg("plan"), py::arg("limits") = VoltageLimits{},
          py::arg("options") = SolveOptions{}, py::call_guard<py::gil_scoped_release>());
    m.def("prune_plan", &prune_plan, py::arg("feeder"), py::arg("profiles"), py::arg("ev"),
          py::arg("years"), py::arg("plan"), py::arg("limits") = VoltageLimits{},
          py::arg("options") = SolveOptions{}, py::call_guard<py::gil_scoped_release>());

    m.def("load_plan", &load_plan, py::arg("path"));
    m.def("save_plan", &save_plan, py::arg("plan"), py::arg("path"));
    m.def("load_violations", &load_violations, py::arg("path"));
    m.def("save_violations", &save_violations, py::arg("violations"), py::arg("path"));

    // ---------------------------------------------------------- economics
    py::class_<CostTable>(m, "CostTable")
        .def(py::init<>())
        .def_static("builtin", &CostTable::builtin)
        .def("add", &CostTable::add, py::arg("kind"), py::arg("size"),
             py::arg("unit_cost_usd"), py::arg("per_mile") = false)
        .def("contains", &CostTable::contains, py::arg("kind"), py::arg("size"))
        .def("cost_of", &CostTable::cost_of, py::arg("action"))
        .def("__len__", &CostTable::size);
    m.def("load_cost_table", &load_cost_table, py::arg("path"));
    m.def("save_cost_table", &save_cost_table, py::arg("table"), py::arg("path"));

    py::class_<CostStream>(m, "CostStream")
        .def(py::init<>())
        .def_readwrite("by_year", &CostStream::by_year)
        .def_readwrite("by_kind", &CostStream::by_kind)
        .def("total", &CostStream::total)
        .def("__iadd__", [](CostStream& a, const CostStream& b) -> CostStream& {
            return a += b;
        });
    m.def("cost_plan", &cost_plan, py::arg("plan"), py::arg("table"));
    m.def("price_plan", &price_plan, py::arg("plan"), py::arg("table"));
    m.def("npv", &npv, py::arg("stream"), py::arg("discount_rate") = 0.03,
          py::arg("base_year") = 2022);

    // -------------------------------------------------------------- study
    py::enum_<Strategy>(m, "Strategy")
        .value("unmanaged", Strategy::unmanaged)
        .value("tou", Strategy::tou)
        .value("lb", Strategy::lb);

    py::class_<StudyConfig>(m, "StudyConfig")
        .def(py::init<>())
        .def_readwrite("name", &StudyConfig::name)
        .def_readwrite("years", &StudyConfig::years)
        .def_readwrite("strategies", &StudyConfig::strategies)
        .def_readwrite("scenarios", &StudyConfig::scenarios)
        .def_readwrite("seed", &StudyConfig::seed)
        .def_readwrite("jobs", &StudyConfig::jobs)
        .def_readwrite("discount_rate", &StudyConfig::discount_rate)
        .def_readwrite("lb_threshold", &StudyConfig::lb_threshold)
        .def_readwrite("behavior", &StudyConfig::behavior)
        .def_readwrite("fleet_by_year", &StudyConfig::fleet_by_year)
        .def_readwrite("fleet_scale", &StudyConfig::fleet_scale)
        .def_readwrite("solver", &StudyConfig::solver)
        .def_readwrite("limits", &StudyConfig::limits)
        .def_readwrite("feeder_files", &StudyConfig::feeder_files)
        .def_readwrite("profiles_file", &StudyConfig::profiles_file)
        .def_readwrite("cost_table_file", &StudyConfig::cost_table_file)
        .def_readwrite("base_dir", &StudyConfig::base_dir)
        .def("resolve", &StudyConfig::resolve, py::arg("rel"))
        .def("validate", &StudyConfig::validate);
    m.def("load_study_config", &load_study_config, py::arg("path"));
    m.def("config_to_json_string",
          [](const StudyConfig& c) { return study_config_to_json(c).dump(2) + "\n"; },
          py::arg("config"));

    py::class_<HourPoint>(m, "HourPoint")
        .def_readonly("year", &HourPoint::year)
        .def_readonly("day", &HourPoint::day)
        .def_readonly("hour", &HourPoint::hour)
        .def_readonly("base_kw", &HourPoint::base_kw)
        .def_readonly("ev_kw", &HourPoint::ev_kw)
        .def_readonly("head_kw", &HourPoint::head_kw)
        .def_readonly("losses_kw", &HourPoint::losses_kw);

    py::class_<BusVoltagePoint>(m, "BusVoltagePoint")
        .def_readonly("bus", &BusVoltagePoint::bus)
        .def_readonly("distance_mi", &BusVoltagePoint::distance_mi)
        .def_readonly("v_before_pu", &BusVoltagePoint::v_before_pu)
        .def_readonly("v_after_pu", &BusVoltagePoint::v_after_pu);

    py::class_<YearMetrics>(m, "YearMetrics")
        .def_readonly("year", &YearMetrics::year)
        .def_readonly("peak_load_kw", &YearMetrics::peak_load_kw)
        .def_readonly("ev_delivered_kwh", &YearMetrics::ev_delivered_kwh)
        .def_readonly("ev_unmet_kwh", &YearMetrics::ev_unmet_kwh)
        .def_readonly("min_v_pu", &YearMetrics::min_v_pu)
        .def_readonly("max_loading", &YearMetrics::max_loading)
        .def_readonly("overloaded_tx_cum", &YearMetrics::overloaded_tx_cum)
        .def_readonly("overloaded_share_cum_pct", &YearMetrics::overloaded_share_cum_pct)
        .def_readonly("spend_usd", &YearMetrics::spend_usd);

    py::class_<CellResult>(m, "CellResult")
        .def_readonly("feeder_id", &CellResult::feeder_id)
        .def_readonly("strategy", &CellResult::strategy)
        .def_readonly("scenario", &CellResult::scenario)
        .def_readonly("years", &CellResult::years)
        .def_readonly("profile", &CellResult::profile)
        .def_readonly("voltage", &CellResult::voltage)
        .def_readonly("plan", &CellResult::plan)
        .def_readonly("violations", &CellResult::violations)
        .def_readonly("residual", &CellResult::residual)
        .def_readonly("costs", &CellResult::costs)
        .def_readonly("npv_usd", &CellResult::npv_usd)
        .def_readonly("transformer_total", &CellResult::transformer_total)
        .def_readonly("transformer_upgrade_kva", &CellResult::transformer_upgrade_kva)
        .def_readonly("line_upgrade_mi", &CellResult::line_upgrade_mi)
        .def_readonly("capacitor_kvar", &CellResult::capacitor_kvar)
        .def_readonly("max_balance_error", &CellResult::max_balance_error)
        .def_readonly("tou_window_max_kw", &CellResult::tou_window_max_kw)
        .def_readonly("max_energy_residual_kwh", &CellResult::max_energy_residual_kwh)
        .def("__repr__", [](const CellResult& c) {
            return "<CellResult " + c.feeder_id + "/" + to_string(c.strategy) + "/scenario-" +
                   std::to_string(c.scenario) + ">";
        });

    py::class_<StudyInputs>(m, "StudyInputs")
        .def(py::init<>())
        .def_readwrite("feeders", &StudyInputs::feeders)
        .def_readwrite("profiles", &StudyInputs::profiles)
        .def_readwrite("costs", &StudyInputs::costs);

    py::class_<StudyResult>(m, "StudyResult")
        .def_readonly("config", &StudyResult::config)
        .def_readonly("feeder_ids", &StudyResult::feeder_ids)
        .def_readonly("cells", &StudyResult::cells)
        .def_readonly("manifest_digest", &StudyResult::manifest_digest)
        .def("find",
             [](const StudyResult& r, const std::string& feeder_id, Strategy s, int scenario)
                 -> std::optional<CellResult> {
                 const CellResult* c = r.find(feeder_id, s, scenario);
                 if (!c) return std::nullopt;
                 return *c;
             },
             py::arg("feeder_id"), py::arg("strategy"), py::arg("scenario"));

    m.def("run_study",
          py::overload_cast<const StudyInputs&, const StudyConfig&,
                            const std::filesystem::path&>(&run_study),
          py::arg("inputs"), py::arg("config"),
          py::arg("out_dir") = std::filesystem::path{},
          py::call_guard<py::gil_scoped_release>());
    m.def("run_study_from_files",
          py::overload_cast<const StudyConfig&, const std::filesystem::path&>(&run_study),
          py::arg("config"), py::arg("out_dir") = std::filesystem::path{},
          py::call_guard<py::gil_scoped_release>());
    m.def("build_cell_horizon", &build_cell_horizon, py::arg("inputs"), py::arg("config"),
          py::arg("feeder_id"), py::arg("strategy"), py::arg("scenario"),
          py::call_guard<py::gil_scoped_release>());
    m.def("load_study_artifacts", &load_study_artifacts, py::arg("run_dir"));

    py::class_<TableRow>(m, "TableRow")
        .def_readonly("feeder_id", &TableRow::feeder_id)
        .def_readonly("strategy", &TableRow::strategy)
        .def_readonly("baseline_scenario", &TableRow::baseline_scenario)
        .def_readonly("scenario", &TableRow::scenario)
        .def_readonly("peak_load_reduction_pct", &TableRow::peak_load_reduction_pct)
        .def_readonly("overload_reduction_pct", &TableRow::overload_reduction_pct)
        .def_readonly("transformer_cost_reduction_pct",
                      &TableRow::transformer_cost_reduction_pct)
        .def_readonly("line_cost_reduction_pct", &TableRow::line_cost_reduction_pct)
        .def_readonly("npv_reduction_pct", &TableRow::npv_reduction_pct);

    m.def("compute_table", &compute_table, py::arg("result"),
          py::arg("baseline_scenario") = 1, py::arg("scenario") = 4);
    m.def("save_table", &save_table, py::arg("rows"), py::arg("path"));
    m.def("emit_plot_data", &emit_plot_data, py::arg("result"), py::arg("dir"));
}
