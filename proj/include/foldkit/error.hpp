#pragma once

#include <stdexcept>
#include <string>

namespace foldkit {

enum class ErrorKind {
    format,                  // malformed file or manifest
    unsupported_shape,       // non-2-D array or non-float dtype
    invalid_value,           // NaN/Inf entry
    write_failure,
    not_found,
    manifest_inconsistency,  // declared shape differs from file
    topology,                // broken adjacency
    shape,                   // dimension mismatch between operands
    invalid_k,
    invalid_budget,
    instance_too_large,
    nothing_pruned,
    invalid_config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::format: return "format error";
        case ErrorKind::unsupported_shape: return "unsupported shape";
        case ErrorKind::invalid_value: return "invalid value";
        case ErrorKind::write_failure: return "write error";
        case ErrorKind::not_found: return "not found";
        case ErrorKind::manifest_inconsistency: return "manifest inconsistency";
        case ErrorKind::topology: return "topology error";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::invalid_k: return "invalid k";
        case ErrorKind::invalid_budget: return "invalid budget";
        case ErrorKind::instance_too_large: return "instance too large";
        case ErrorKind::nothing_pruned: return "nothing pruned";
        case ErrorKind::invalid_config: return "invalid configuration";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace foldkit
