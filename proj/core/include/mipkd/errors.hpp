#pragma once

#include <stdexcept>
#include <string>

namespace mipkd {

// Invalid specs, missing adapters, unsupported scales, bad weights.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / width mismatches.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mipkd
