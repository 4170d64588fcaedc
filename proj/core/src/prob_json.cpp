#include "coordsim/prob_json.hpp"

namespace coordsim::prob {
namespace {

nlohmann::json axes_to_json(const std::vector<Alphabet>& axes) {
  auto arr = nlohmann::json::array();
  for (const auto& a : axes) arr.push_back({{"name", a.name}, {"size", a.size}});
  return arr;
}

std::vector<Alphabet> axes_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ProbError(std::string("missing array '") + key + "'");
  std::vector<Alphabet> axes;
  for (const auto& a : j.at(key)) {
    if (!a.is_object() || !a.contains("name") || !a.contains("size"))
      throw ProbError(std::string("axis entries in '") + key + "' need 'name' and 'size'");
    const auto size = a.at("size").get<long long>();
    if (size < 1) throw ProbError("axis '" + a.at("name").get<std::string>() + "' must have positive size");
    axes.push_back({a.at("name").get<std::string>(), static_cast<std::size_t>(size)});
  }
  return axes;
}

std::vector<double> table_from_json(const nlohmann::json& j) {
  if (!j.contains("table") || !j.at("table").is_array()) throw ProbError("missing array 'table'");
  std::vector<double> t;
  t.reserve(j.at("table").size());
  for (const auto& v : j.at("table")) {
    if (!v.is_number()) throw ProbError("table entries must be numbers");
    t.push_back(v.get<double>());
  }
  return t;
}

}  // namespace

nlohmann::json to_json(const JointPMF& p) {
  return {{"axes", axes_to_json(p.axes())},
          {"table", std::vector<double>(p.table().begin(), p.table().end())}};
}

nlohmann::json to_json(const ConditionalPMF& c) {
  return {{"given_axes", axes_to_json(c.given_axes())},
          {"out_axes", axes_to_json(c.out_axes())},
          {"table", std::vector<double>(c.table().begin(), c.table().end())}};
}

JointPMF joint_from_json(const nlohmann::json& j) {
  return JointPMF(axes_from_json(j, "axes"), table_from_json(j));
}

ConditionalPMF conditional_from_json(const nlohmann::json& j) {
  return ConditionalPMF(axes_from_json(j, "given_axes"), axes_from_json(j, "out_axes"), table_from_json(j));
}

}  // namespace coordsim::prob
