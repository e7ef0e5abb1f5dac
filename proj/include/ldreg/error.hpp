#pragma once

#include <stdexcept>
#include <string>

namespace ldreg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& msg, std::string field_, long line_ = -1)
        : Error(msg), field(std::move(field_)), line(line_) {}
    std::string field;
    long line;
};

// combinatorial or size guard tripped
struct GuardExceeded : Error {
    using Error::Error;
};

struct ConstructionError : Error {
    ConstructionError(const std::string& msg, double worst_point_ = 0.0)
        : Error(msg), worst_point(worst_point_) {}
    double worst_point;
};

struct NotNonnegative : Error {
    NotNonnegative(const std::string& msg, double witness_, double value_)
        : Error(msg), witness(witness_), value(value_) {}
    double witness;
    double value;
};

struct CertificationFailed : Error {
    CertificationFailed(const std::string& msg, double worst_s_, double margin_)
        : Error(msg), worst_s(worst_s_), margin(margin_) {}
    double worst_s;
    double margin;
};

struct SolverError : Error {
    using Error::Error;
};

}  // namespace ldreg
