#include "vvgen/feature.hpp"

namespace vvgen {

std::string request_sentence(const FeatureSpec& feature) {
  return "Write a code in " + std::string(to_string(feature.base_language)) +
         " to verify compiler implementation of the OpenACC specification of " + feature.name + ".";
}

Json to_json(const FeatureSpec& feature) {
  Json j = {{"name", feature.name},
            {"section_key", feature.section_key},
            {"base_language", to_string(feature.base_language)}};
  j["permutation_of"] = feature.permutation_of ? Json(*feature.permutation_of) : Json(nullptr);
  return j;
}

FeatureSpec feature_from_json(const Json& j) {
  FeatureSpec f;
  f.name = j.at("name").get<std::string>();
  f.section_key = j.at("section_key").get<std::string>();
  f.base_language = parse_language(j.at("base_language").get<std::string>());
  if (j.contains("permutation_of") && !j["permutation_of"].is_null()) {
    f.permutation_of = j["permutation_of"].get<std::string>();
  }
  return f;
}

}  // namespace vvgen
