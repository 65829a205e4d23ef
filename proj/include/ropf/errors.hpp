#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace ropf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- case file parsing --------------------------------------------------

struct MissingTableError : Error {
    explicit MissingTableError(const std::string& name)
        : Error("case file is missing required table: " + name), table(name) {}
    std::string table;
};

struct MalformedRowError : Error {
    MalformedRowError(int line_number, const std::string& detail)
        : Error("malformed row at line " + std::to_string(line_number) + ": " + detail),
          line(line_number) {}
    int line;
};

struct UnsupportedCostModelError : Error {
    explicit UnsupportedCostModelError(int model_id, const std::string& detail = "")
        : Error("unsupported generator cost model " + std::to_string(model_id) +
                (detail.empty() ? "" : ": " + detail)),
          model(model_id) {}
    int model;
};

/// Semantic problems in otherwise parseable case data.
struct CaseFormatError : Error {
    using Error::Error;
};

// -- network construction ------------------------------------------------

struct IslandedBusError : Error {
    explicit IslandedBusError(int id)
        : Error("bus " + std::to_string(id) + " is marked isolated (type 4)"), bus_id(id) {}
    int bus_id;
};

struct NoReferenceBusError : Error {
    NoReferenceBusError() : Error("case has no reference (type 3) bus") {}
};

struct DisconnectedGraphError : Error {
    using Error::Error;
};

struct ZeroTapError : Error {
    ZeroTapError() : Error("line tap ratio has zero magnitude") {}
};

struct ZeroAdmittanceError : Error {
    ZeroAdmittanceError() : Error("line series admittance is zero") {}
};

// -- partitioning ---------------------------------------------------------

struct EmptyGraphError : Error {
    EmptyGraphError() : Error("cannot partition an empty graph") {}
};

// -- problem assembly -----------------------------------------------------

struct InconsistentConsensusKeysError : Error {
    using Error::Error;
};

struct DivisionByZeroError : Error {
    using Error::Error;
};

// -- i/o --------------------------------------------------------------------

struct IoError : Error {
    using Error::Error;
};

}  // namespace ropf
