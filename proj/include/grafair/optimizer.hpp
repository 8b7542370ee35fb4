#pragma once

#include "grafair/graph.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace grafair {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, one pair per parameter matrix.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update applied in place.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options);

}  // namespace grafair
