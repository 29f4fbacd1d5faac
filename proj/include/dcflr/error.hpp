#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcflr {

/// Failure categories surfaced by the library.
enum class Errc {
    invalid_argument,
    grid_mismatch,
    parse_error,
    numerical_failure,
    source_condition_unsatisfiable,
    invalid_partition,
    method_unavailable,
    packing_not_found,
    insufficient_data,
    assumption_violated,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::grid_mismatch: return "grid-mismatch";
    case Errc::parse_error: return "parse-error";
    case Errc::numerical_failure: return "numerical-failure";
    case Errc::source_condition_unsatisfiable: return "source-condition-unsatisfiable";
    case Errc::invalid_partition: return "invalid-partition";
    case Errc::method_unavailable: return "method-unavailable";
    case Errc::packing_not_found: return "packing-not-found";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::assumption_violated: return "assumption-violated";
    }
    return "unknown";
}

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace dcflr
