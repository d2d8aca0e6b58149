#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace morphguard {

/// Broad error families. The CLI maps each family to a process exit code.
enum class ErrorKind {
    Config,    // invalid parameters, empty inputs
    Protocol,  // label / subset / dimension contract violations
    Numeric,   // non-finite or out-of-domain numbers, degenerate geometry
    Io,        // filesystem and file-format problems
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

struct EmptyBatchError : ConfigError {
    explicit EmptyBatchError(const std::string& w) : ConfigError(w) {}
};

struct ProtocolError : Error {
    explicit ProtocolError(const std::string& w) : Error(ErrorKind::Protocol, w) {}
};

struct IndexError : ProtocolError {
    explicit IndexError(const std::string& w) : ProtocolError(w) {}
};

/// A pool of distinct pairs/samples is too small for the requested count.
struct CapacityError : ProtocolError {
    explicit CapacityError(const std::string& w) : ProtocolError(w) {}
};

struct NumericInputError : Error {
    explicit NumericInputError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

struct DegenerateWeightError : NumericInputError {
    explicit DegenerateWeightError(const std::string& w) : NumericInputError(w) {}
};

struct DegenerateEmbeddingError : NumericInputError {
    explicit DegenerateEmbeddingError(const std::string& w) : NumericInputError(w) {}
};

struct DegenerateAnchorError : NumericInputError {
    explicit DegenerateAnchorError(const std::string& w) : NumericInputError(w) {}
};

struct DegenerateCovarianceError : NumericInputError {
    explicit DegenerateCovarianceError(const std::string& w) : NumericInputError(w) {}
};

/// No threshold on the curve reaches the requested rate. `closest` is the
/// achievable value nearest to the target.
struct UnattainableOperatingPointError : NumericInputError {
    UnattainableOperatingPointError(const std::string& w, double closest_value)
        : NumericInputError(w), closest(closest_value) {}
    double closest;
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

/// Malformed binary or text file; `offset` is the byte (or line) position.
struct FormatError : IoError {
    FormatError(const std::string& w, std::uint64_t at)
        : IoError(w + " (at offset " + std::to_string(at) + ")"), offset(at) {}
    std::uint64_t offset;
};

}  // namespace morphguard
