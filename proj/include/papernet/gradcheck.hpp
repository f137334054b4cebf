// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "papernet/tensor.hpp"

namespace papernet {

struct GradcheckOptions {
  double eps = 1e-4;
  /// 0 checks every coordinate; otherwise a seeded random subset per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Multiplies the analytic gradient before comparison. Only the harness
  /// self-test sets this to something other than 1.
  double analytic_scale = 1.0;
  /// Coordinates whose error exceeds `retry_above` are re-probed with eps/10
  /// up to this many times; the narrower estimate is kept only when it moves by far more than
  /// roundoff, which is what a ReLU/max kink inside the window looks like.
  std::size_t kink_retries = 2;
  double retry_above = 1e-7;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t kink_retries = 0;
};

/// Compares tape gradients of `loss_fn()` with respect to `wrt` against
/// central differences (f(x+eps) - f(x-eps)) / (2 eps). Relative error is
/// |a - n| / max(1e-8, |a| + |n|).
GradcheckResult gradcheck(const std::function<Tensor<double>()>& loss_fn,
                          std::vector<Tensor<double>> wrt,
                          const GradcheckOptions& options = {});

/// Single-input form. Non-scalar outputs are contracted with a fixed random
/// projection so every output coordinate contributes.
double gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& op,
                 Tensor<double> point, double eps = 1e-4);

}  // namespace papernet
