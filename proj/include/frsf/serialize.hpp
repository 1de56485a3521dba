#pragma once

#include "json.hpp"

#include <string>

#include "frsf/basisfit.hpp"
#include "frsf/error.hpp"
#include "frsf/forest.hpp"
#include "frsf/pace.hpp"

namespace frsf {

using Json = nlohmann::ordered_json;

Json to_json(const CfdCurve& curve);
CfdCurve curve_from_json(const Json& j);

Json to_json(const FpcaModel& model);
FpcaModel fpca_from_json(const Json& j);

Json to_json(const SurvivalTree& tree);
SurvivalTree tree_from_json(const Json& j, const std::vector<std::string>& feature_names);

Json to_json(const Forest& forest);
Forest forest_from_json(const Json& j);

Json to_json(const FeatureFrame& frame);
FeatureFrame frame_from_json(const Json& j);

/// Reads a required member; schema error naming the key when missing or mistyped.
template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::schema, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::schema, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace frsf
