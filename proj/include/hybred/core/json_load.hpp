#pragma once

#include "json.hpp"

#include "hybred/core/types.hpp"

namespace hybred {

// Build a hybrid system from a JSON description using the builtin registry of
// named pieces:
//   fields      "linear" {matrix}, "affine" {matrix, offset},
//               "constant" {value}, "rotation2d" {omega}
//   faces       affine level functions {normal, offset}, positive inside
//   predicates  "always" (or omitted), "affine_positive" {normal, offset}
//   resets      "affine" {matrix, offset}
// Malformed input is reported as InvalidConfig.
HybridSystem load_system_json(const nlohmann::json& j);

}  // namespace hybred
