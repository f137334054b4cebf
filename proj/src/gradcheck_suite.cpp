// SPDX-License-Identifier: Apache-2.0
#include "papernet/gradcheck_suite.hpp"

#include <functional>
#include <random>

#include "papernet/gradcheck.hpp"
#include "papernet/layers.hpp"
#include "papernet/model.hpp"
#include "papernet/training.hpp"

namespace papernet {

namespace {

using TensorD = Tensor<double>;

struct Check {
  std::string name;
  std::function<GradcheckResult(const GradcheckOptions&)> run;
};

TensorD random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  TensorD t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.data()) v = n(rng);
  return t;
}

/// Values bounded away from zero so finite differences do not straddle a kink.
TensorD away_from_zero(Shape shape, std::mt19937_64& rng) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

/// Contracts an arbitrary output with a fixed random tensor of its shape.
std::function<TensorD()> projected(std::function<TensorD()> f, std::uint64_t seed) {
  const TensorD probe = f();
  std::mt19937_64 rng(seed);
  TensorD projection = random_tensor(probe.shape(), rng);
  return [f, projection]() { return ops::sum_all(ops::mul(f(), projection)); };
}

std::vector<Check> build_checks(const GradcheckSuiteOptions& opt) {
  std::vector<Check> checks;
  std::mt19937_64 rng(opt.seed);
  const std::uint64_t pseed = opt.seed * 31 + 1;

  auto add = [&](std::string name, std::function<TensorD()> f, std::vector<TensorD> wrt) {
    auto loss = projected(std::move(f), pseed + checks.size());
    checks.push_back({std::move(name), [loss, wrt](const GradcheckOptions& o) {
                        return gradcheck(loss, wrt, o);
                      }});
  };

  {
    TensorD a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    add("matmul", [=] { return ops::matmul(a, b); }, {a, b});
  }
  {
    TensorD x = away_from_zero({4, 6}, rng);
    add("relu", [=] { return ops::relu(x); }, {x});
  }
  {
    TensorD x = random_tensor({4, 6}, rng, 2.0);
    add("sigmoid", [=] { return ops::sigmoid(x); }, {x});
  }
  {
    TensorD x = random_tensor({4, 6}, rng);
    add("tanh", [=] { return ops::tanh(x); }, {x});
  }
  {
    TensorD x = random_tensor({3, 5}, rng, 2.0);
    add("softmax", [=] { return ops::softmax(x); }, {x});
  }
  {
    TensorD x = random_tensor({2, 5, 3}, rng);
    add("reduce_mean", [=] { return ops::reduce(x, ops::Reduction::mean, 1); }, {x});
    TensorD y = random_tensor({2, 5, 3}, rng);
    add("reduce_max", [=] { return ops::reduce(y, ops::Reduction::max, 1); }, {y});
  }
  {
    TensorD x = random_tensor({2, 7, 3}, rng);
    TensorD k = random_tensor({5, 3, 4}, rng, 0.5), b = random_tensor({4}, rng);
    add("conv1d", [=] { return conv1d_same(x, k, b); }, {x, k, b});
  }
  {
    TensorD x = random_tensor({3, 5, 4}, rng, 2.0);
    BatchNormParams<double> p{random_tensor({4}, rng), random_tensor({4}, rng),
                              TensorD({4}, 0.0), TensorD({4}, 1.0)};
    add("batchnorm", [=]() mutable { return batchnorm(x, p, Mode::train); },
        {x, p.gamma, p.beta});
  }
  {
    TensorD x = random_tensor({2, 6, 3}, rng);
    add("maxpool", [=] { return maxpool1d(x); }, {x});
  }
  {
    TensorD x = random_tensor({3, 6}, rng), w = random_tensor({6, 4}, rng), b = random_tensor({4}, rng);
    add("dense", [=] { return dense(x, w, b); }, {x, w, b});
  }
  for (bool residual : {true, false}) {
    TensorD f = random_tensor({2, 5, 6}, rng);
    SeParams<double> p{random_tensor({6, 3}, rng), random_tensor({3}, rng),
                       random_tensor({3, 6}, rng), random_tensor({6}, rng)};
    add(residual ? "se_residual" : "se_plain",
        [=] { return se_residual_attention(f, p, residual).features; },
        {f, p.w1, p.b1, p.w2, p.b2});
  }
  for (bool reverse : {false, true}) {
    TensorD x = random_tensor({2, 4, 3}, rng);
    LstmParams<double> p{random_tensor({8, 5}, rng, 0.5), random_tensor({8}, rng, 0.5)};
    add(reverse ? "lstm_reverse" : "lstm_forward", [=] { return lstm(x, p, reverse); },
        {x, p.weight, p.bias});
  }
  {
    TensorD x = random_tensor({2, 4, 3}, rng);
    BiLstmParams<double> p{{random_tensor({8, 5}, rng, 0.5), random_tensor({8}, rng, 0.5)},
                           {random_tensor({8, 5}, rng, 0.5), random_tensor({8}, rng, 0.5)}};
    add("bilstm", [=] { return bilstm(x, p); },
        {x, p.forward.weight, p.forward.bias, p.backward.weight, p.backward.bias});
  }
  {
    TensorD x = random_tensor({4, 6}, rng);
    const std::uint64_t mask_seed = opt.seed + 99;
    add("dropout",
        [=] {
          std::mt19937_64 mask(mask_seed);
          return ops::dropout(x, 0.3, true, mask);
        },
        {x});
  }
  {
    TensorD logits = random_tensor({5, 4}, rng);
    const std::vector<int> labels{0, 3, 1, 1, 2};
    const std::vector<double> weights{1.5, 0.75, 1.0, 2.0};
    auto f = [=] { return ops::weighted_nll(ops::softmax(logits), labels, weights); };
    checks.push_back({"weighted_nll", [f, logits](const GradcheckOptions& o) {
                        return gradcheck(f, {logits}, o);
                      }});
  }

  for (Variant v : kAllVariants) {
    auto model = std::make_shared<Model<double>>(v, 4, 16, opt.seed);
    TensorD x = random_tensor({4, 16, 1}, rng);
    const std::vector<int> labels{0, 1, 2, 3};
    const std::vector<double> weights{1.25, 0.8, 1.0, 1.1};
    std::vector<TensorD> wrt{x};
    for (const auto& p : model->trainable_parameters()) wrt.push_back(p.tensor);
    const std::uint64_t mask_seed = opt.seed + 1234;
    auto f = [=] {
      std::mt19937_64 mask(mask_seed);
      TensorD probs = model->forward(x, Mode::train, &mask);
      return weighted_cross_entropy(probs, std::span<const int>(labels), weights, *model, 1e-4);
    };
    const std::size_t coords = opt.model_coords_per_tensor;
    checks.push_back({"model_" + std::string(to_string(v)),
                      [f, wrt, coords](GradcheckOptions o) {
                        o.max_coords_per_tensor = coords;
                        return gradcheck(f, wrt, o);
                      }});
  }
  return checks;
}

}  // namespace

bool GradcheckSuiteReport::passed() const { return failures().empty(); }

std::vector<std::string> GradcheckSuiteReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.passed) out.push_back(c.name);
  return out;
}

std::vector<std::string> gradcheck_suite_names() {
  std::vector<std::string> names;
  for (const auto& c : build_checks({})) names.push_back(c.name);
  return names;
}

GradcheckSuiteReport run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  const auto checks = build_checks(options);
  if (!options.inject_fault.empty()) {
    bool known = false;
    for (const auto& c : checks) known = known || c.name == options.inject_fault;
    if (!known) throw std::invalid_argument("unknown gradcheck layer '" + options.inject_fault + "'");
  }
  GradcheckSuiteReport report;
  report.tolerance = options.tolerance;
  for (const auto& c : checks) {
    GradcheckOptions o;
    o.eps = options.eps;
    o.seed = options.seed;
    if (c.name == options.inject_fault) o.analytic_scale = 1.01;
    const GradcheckResult r = c.run(o);
    report.checks.push_back({c.name, r.max_relative_error, r.coordinates_checked,
                             r.max_relative_error < options.tolerance});
  }
  return report;
}

}  // namespace papernet
