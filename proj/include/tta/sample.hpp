#pragma once

#include <optional>
#include <string>

#include "tta/models.hpp"

namespace tta {

/// One test case: model input plus the optional ground-truth stress path.
struct Sample {
  std::string id;
  ModelInput input;
  std::optional<TensorPath> target;
};

}  // namespace tta
