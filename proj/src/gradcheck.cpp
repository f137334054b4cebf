// SPDX-License-Identifier: Apache-2.0
#include "papernet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "papernet/ops.hpp"

namespace papernet {

namespace {

double evaluate(const std::function<Tensor<double>()>& loss_fn) {
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite loss evaluation");
  return v;
}

}  // namespace

GradcheckResult gradcheck(const std::function<Tensor<double>()>& loss_fn,
                          std::vector<Tensor<double>> wrt,
                          const GradcheckOptions& options) {
  for (auto& t : wrt) t.set_requires_grad(true);

  std::vector<std::vector<double>> analytic;
  double base = 0.0;
  {
    Tape<double> tape;
    Tensor<double> loss;
    {
      auto rec = tape.record();
      loss = loss_fn();
    }
    if (!std::isfinite(loss.item())) throw NumericError("gradcheck: non-finite loss");
    base = loss.item();
    tape.backward(loss);
    for (auto& t : wrt) {
      std::vector<double> g(t.size(), 0.0);
      if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.begin());
      for (double& v : g) v *= options.analytic_scale;
      analytic.push_back(std::move(g));
    }
  }

  std::mt19937_64 rng(options.seed);
  GradcheckResult result;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    Tensor<double>& t = wrt[ti];
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      auto central = [&](double eps) {
        const double saved = t[i];
        t[i] = saved + eps;
        const double up = evaluate(loss_fn);
        t[i] = saved - eps;
        const double down = evaluate(loss_fn);
        t[i] = saved;
        return (up - down) / (2.0 * eps);
      };
      const double a = analytic[ti][i];
      auto relative = [a](double n) { return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)); };
      // Roundoff in a central difference is about ulp(loss) / eps.
      auto noise = [&](double eps) {
        return 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base)) / eps;
      };
      double eps = options.eps;
      double numeric = central(eps);
      double rel = relative(numeric);
      // A suspicious coordinate is re-probed with a narrower window. The
      // narrower estimate replaces the first only when the two differ by far
      // more than roundoff, i.e. a ReLU or max kink sat inside the window.
      for (std::size_t r = 0; r < options.kink_retries && rel > options.retry_above; ++r) {
        const double narrow = central(eps * 0.1);
        if (std::abs(narrow - numeric) < 10.0 * noise(eps * 0.1)) break;
        eps *= 0.1;
        ++result.kink_retries;
        numeric = narrow;
        rel = relative(numeric);
      }
      result.max_relative_error = std::max(result.max_relative_error, rel);
      ++result.coordinates_checked;
    }
  }
  return result;
}

double gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& op,
                 Tensor<double> point, double eps) {
  // Probe the output shape once to build the projection.
  const Tensor<double> probe = op(point);
  Tensor<double> projection(probe.shape());
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : projection.data()) v = u(rng);

  auto loss = [&]() {
    Tensor<double> y = op(point);
    if (y.size() == 1) return ops::reshape(y, Shape{});
    return ops::sum_all(ops::mul(y, projection));
  };
  GradcheckOptions options;
  options.eps = eps;
  return gradcheck(loss, {point}, options).max_relative_error;
}

}  // namespace papernet
