#pragma once

// JSON encoding of pmf tables:
//   JointPMF:       {"axes":[{"name":..,"size":..},...], "table":[row-major doubles]}
//   ConditionalPMF: {"given_axes":[...], "out_axes":[...], "table":[...]}
// Doubles are written in shortest round-trip form, so finite values survive
// a write/read cycle bit for bit.

#include <json.hpp>

#include "coordsim/prob.hpp"

namespace coordsim::prob {

nlohmann::json to_json(const JointPMF& p);
nlohmann::json to_json(const ConditionalPMF& c);
JointPMF joint_from_json(const nlohmann::json& j);
ConditionalPMF conditional_from_json(const nlohmann::json& j);

}  // namespace coordsim::prob
