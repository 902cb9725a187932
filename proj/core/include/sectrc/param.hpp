#pragma once

#include <string>
#include <vector>

#include "sectrc/linalg.hpp"

namespace sectrc {

// Named view over one parameter tensor and its gradient accumulator.
// When `frozen` points at a flag that is true, optimizers must skip the
// parameter entirely.
struct ParamRef {
  std::string name;
  Vec* value = nullptr;
  Vec* grad = nullptr;
  std::vector<int> shape;
  const bool* frozen = nullptr;

  bool is_frozen() const { return frozen != nullptr && *frozen; }
};

inline void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params)
    for (double& g : *p.grad) g = 0.0;
}

}  // namespace sectrc
