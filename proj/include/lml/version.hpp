#pragma once

namespace lml {

inline constexpr const char* version_string = "0.1.0";
inline constexpr int config_schema_version = 1;

}  // namespace lml
