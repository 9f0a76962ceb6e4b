#pragma once

#include <stdexcept>
#include <string>

namespace evgrid {

/// Real/reactive power pair. kW / kvar everywhere in this codebase.
struct PQ {
    double p_kw = 0.0;
    double q_kvar = 0.0;

    PQ& operator+=(const PQ& o) {
        p_kw += o.p_kw;
        q_kvar += o.q_kvar;
        return *this;
    }
};

enum class DayType { winter, summer, shoulder };
enum class CustomerClass { residential, commercial, industrial, mixed };

constexpr int kDayTypeCount = 3;
constexpr int kCustomerClassCount = 4;

std::string to_string(DayType d);
std::string to_string(CustomerClass c);
DayType day_type_from_string(const std::string& s);
CustomerClass customer_class_from_string(const std::string& s);

/// Input could not be parsed (file format, missing field, bad value).
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Inputs are well-formed but the requested computation is misconfigured
/// (missing profile, zero-impedance branch, cost entry absent, ...).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure, e.g. load flow non-convergence.
class SolveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace evgrid
