#include "evgrid/common.hpp"

namespace evgrid {

std::string to_string(DayType d) {
    switch (d) {
        case DayType::winter: return "winter";
        case DayType::summer: return "summer";
        case DayType::shoulder: return "shoulder";
    }
    return "?";
}

std::string to_string(CustomerClass c) {
    switch (c) {
        case CustomerClass::residential: return "residential";
        case CustomerClass::commercial: return "commercial";
        case CustomerClass::industrial: return "industrial";
        case CustomerClass::mixed: return "mixed";
    }
    return "?";
}

DayType day_type_from_string(const std::string& s) {
    if (s == "winter") return DayType::winter;
    if (s == "summer") return DayType::summer;
    if (s == "shoulder") return DayType::shoulder;
    throw ParseError("unknown day_type '" + s + "'");
}

CustomerClass customer_class_from_string(const std::string& s) {
    if (s == "residential") return CustomerClass::residential;
    if (s == "commercial") return CustomerClass::commercial;
    if (s == "industrial") return CustomerClass::industrial;
    if (s == "mixed") return CustomerClass::mixed;
    throw ParseError("unknown customer_class '" + s + "'");
}

} // namespace evgrid
