// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace papernet {

struct LayerCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

struct GradcheckSuiteOptions {
  double tolerance = 1e-5;
  double eps = 1e-5;
  std::uint64_t seed = 7;
  /// Coordinates sampled per parameter tensor in the full-model checks.
  std::size_t model_coords_per_tensor = 12;
  /// Name of a check whose analytic gradient is deliberately scaled, to
  /// confirm the harness reports failures. Empty for a normal run.
  std::string inject_fault;
};

struct GradcheckSuiteReport {
  double tolerance = 0.0;
  std::vector<LayerCheck> checks;
  bool passed() const;
  std::vector<std::string> failures() const;
};

/// Names of every check in the suite, in run order.
std::vector<std::string> gradcheck_suite_names();

/// 64-bit finite-difference checks of every layer, the loss, and the full
/// model of each variant (4-sample batch, train mode, fixed dropout mask).
GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace papernet
