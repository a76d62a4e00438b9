#pragma once

#include <array>
#include <string_view>
#include <utility>

namespace nucspin {

inline constexpr std::string_view kVersion = "0.1.0";

// Per-module versions, recorded in JSON report provenance blocks.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 6> kModuleVersions{{
    {"spin", "0.1.0"},
    {"readout", "0.1.0"},
    {"tomography", "0.1.0"},
    {"fitting", "0.1.0"},
    {"experiments", "0.1.0"},
    {"cli", "0.1.0"},
}};

}  // namespace nucspin
