#pragma once

#include <optional>
#include <string>

#include "vvgen/common.hpp"

namespace vvgen {

/// One OpenACC feature to request a test for, in one base language.
struct FeatureSpec {
  std::string name;         // "parallel construct num_gangs clause"
  std::string section_key;  // "2.5.10"
  Language base_language = Language::C;
  std::optional<std::string> permutation_of;  // construct substituted in, if permuted

  bool operator==(const FeatureSpec&) const = default;
};

/// The one-sentence request every prompt frame is built around.
std::string request_sentence(const FeatureSpec& feature);

Json to_json(const FeatureSpec& feature);
FeatureSpec feature_from_json(const Json& j);

}  // namespace vvgen
