// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "papernet/layers.hpp"
#include "test_util.hpp"

using namespace papernet;
using testutil::random_tensor;
using TD = Tensor<double>;

namespace {

std::vector<double> values(const TD& t) { return {t.data().begin(), t.data().end()}; }

// Direct-form convolution used as the oracle for the im2col path.
TD conv_oracle(const TD& x, const TD& k, const TD& b) {
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), K = k.dim(0), O = k.dim(2);
  TD y({B, T, O});
  const long half = static_cast<long>(K / 2);
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < K; ++i) {
          const long src = static_cast<long>(t) + static_cast<long>(i) - half;
          if (src < 0 || src >= static_cast<long>(T)) continue;
          for (std::size_t c = 0; c < C; ++c) s += x[(n * T + src) * C + c] * k[(i * C + c) * O + o];
        }
        y[(n * T + t) * O + o] = s;
      }
  return y;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("conv1d_same examples") {
  SUBCASE("center delta is the identity") {
    std::mt19937_64 rng(1);
    const TD x = random_tensor<double>({2, 6, 3}, rng);
    TD k({5, 3, 3}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) k[(2 * 3 + c) * 3 + c] = 1.0;
    CHECK(values(conv1d_same(x, k, TD({3}, 0.0))) == values(x));
  }
  SUBCASE("box kernel on a ramp") {
    CHECK(values(conv1d_same(TD({1, 3, 1}, {1, 2, 3}), TD({3, 1, 1}, {1, 1, 1}), TD({1}, 0.0))) ==
          std::vector<double>{3, 6, 5});
  }
  SUBCASE("zero kernel leaves the bias") {
    std::mt19937_64 rng(2);
    const auto out = conv1d_same(random_tensor<double>({2, 5, 4}, rng), TD({3, 4, 2}, 0.0), TD({2}, 7.0));
    for (double v : out.data()) CHECK(v == 7.0);
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(conv1d_same(TD({1, 4, 2}), TD({3, 3, 1}), TD({1})), ShapeError);
    CHECK_THROWS_AS(conv1d_same(TD({1, 4, 2}), TD({4, 2, 1}), TD({1})), ShapeError);
  }
}

TEST_CASE("conv1d_same matches the direct-form oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t T = 1 + trial % 9, C = 1 + trial % 4, O = 1 + trial % 5, K = trial % 2 ? 5 : 3;
    const TD x = random_tensor<double>({2, T, C}, rng), k = random_tensor<double>({K, C, O}, rng),
             b = random_tensor<double>({O}, rng);
    const auto got = values(conv1d_same(x, k, b)), want = values(conv_oracle(x, k, b));
    for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm examples") {
  SUBCASE("two values normalize to -1 and +1") {
    BatchNormParams<double> p{TD({1}, 1.0), TD({1}, 0.0), TD({1}, 0.0), TD({1}, 1.0)};
    const TD y = batchnorm(TD({2, 1, 1}, {0, 2}), p, Mode::train);
    CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("affine law") {
    std::mt19937_64 rng(4);
    TD x = random_tensor<double>({8, 5, 1}, rng);
    double m = 0, v = 0;
    for (double a : x.data()) m += a;
    m /= 40;
    for (double a : x.data()) v += (a - m) * (a - m);
    v /= 40;
    for (double& a : x.data()) a = (a - m) / std::sqrt(v);
    BatchNormParams<double> p{TD({1}, 3.0), TD({1}, 5.0), TD({1}, 0.0), TD({1}, 1.0)};
    const TD y = batchnorm(x, p, Mode::train);
    double ym = 0, yv = 0;
    for (double a : y.data()) ym += a;
    ym /= 40;
    for (double a : y.data()) yv += (a - ym) * (a - ym);
    CHECK(ym == doctest::Approx(5.0));
    CHECK(std::sqrt(yv / 40) == doctest::Approx(3.0).epsilon(1e-3));
  }
  SUBCASE("infer mode with unit running stats is the identity") {
    BatchNormParams<double> p{TD({2}, 1.0), TD({2}, 0.0), TD({2}, 0.0), TD({2}, 1.0)};
    const TD x({1, 3, 2}, {1, -2, 3, 0.5, -1, 4});
    const TD y = batchnorm(x, p, Mode::infer);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-3));
  }
  SUBCASE("batch of one in train mode is rejected") {
    BatchNormParams<double> p{TD({1}, 1.0), TD({1}, 0.0), TD({1}, 0.0), TD({1}, 1.0)};
    CHECK_THROWS(batchnorm(TD({1, 4, 1}, {1, 2, 3, 4}), p, Mode::train));
  }
  SUBCASE("running statistics update with momentum") {
    BatchNormParams<double> p{TD({1}, 1.0), TD({1}, 0.0), TD({1}, 0.5), TD({1}, 2.0)};
    batchnorm(TD({2, 2, 1}, {1, 2, 3, 6}), p, Mode::train);
    // batch mean 3, biased variance (4 + 1 + 0 + 9) / 4 = 3.5
    CHECK(p.running_mean[0] == doctest::Approx(0.99 * 0.5 + 0.01 * 3.0));
    CHECK(p.running_var[0] == doctest::Approx(0.99 * 2.0 + 0.01 * 3.5));
    CHECK(p.running_var[0] > 0.0);
  }
}

TEST_CASE("maxpool1d examples") {
  CHECK(values(maxpool1d(TD({1, 4, 1}, {1, 3, 2, 5}))) == std::vector<double>{3, 5});
  CHECK(maxpool1d(TD({2, 16, 3})).shape() == Shape{2, 8, 3});
  CHECK(maxpool1d(TD({1, 5, 1}, {1, 2, 3, 4, 9})).shape() == Shape{1, 2, 1});
  const auto pooled = maxpool1d(TD({1, 6, 2}, -4.0));
  for (double v : pooled.data()) CHECK(v == -4.0);
  CHECK_THROWS(maxpool1d(TD({1, 1, 2})));
}

TEST_CASE("dense layer") {
  const TD y = dense(TD({1, 2}, {1, 2}), TD({2, 2}, {1, 2, 3, 4}), TD({2}, {10, 20}));
  CHECK(values(y) == std::vector<double>{17, 30});
  CHECK_THROWS_AS(dense(TD({1, 3}), TD({2, 2}), TD({2})), ShapeError);
}

TEST_CASE("squeeze-excitation examples") {
  std::mt19937_64 rng(6);
  const TD f = random_tensor<double>({2, 4, 6}, rng);
  auto params = [](double b2) {
    return SeParams<double>{TD({6, 3}, 0.0), TD({3}, 0.0), TD({3, 6}, 0.0), TD({6}, b2)};
  };
  SUBCASE("zero parameters give a = 0.5 and F' = 1.5 F") {
    const auto out = se_residual_attention(f, params(0.0), true);
    for (double a : out.attention.data()) CHECK(a == 0.5);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.features[i] == doctest::Approx(1.5 * f[i]));
    const auto plain = se_residual_attention(f, params(0.0), false);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(plain.features[i] == doctest::Approx(0.5 * f[i]));
  }
  SUBCASE("saturated attention limits") {
    const auto low = se_residual_attention(f, params(-40.0), true);
    const auto high = se_residual_attention(f, params(40.0), true);
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(low.features[i] == doctest::Approx(f[i]).epsilon(1e-12));
      CHECK(high.features[i] == doctest::Approx(2.0 * f[i]).epsilon(1e-12));
    }
  }
  SUBCASE("sandwich bound with random parameters") {
    const SeParams<double> p{random_tensor<double>({6, 3}, rng), random_tensor<double>({3}, rng),
                             random_tensor<double>({3, 6}, rng), random_tensor<double>({6}, rng)};
    const auto out = se_residual_attention(f, p, true);
    for (double a : out.attention.data()) {
      CHECK(a > 0.0);
      CHECK(a < 1.0);
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double x = f[i], y = out.features[i];
      CHECK(std::signbit(x) == std::signbit(y));
      CHECK(std::abs(x) <= std::abs(y));
      CHECK(std::abs(y) <= 2.0 * std::abs(x));
    }
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(se_residual_attention(random_tensor<double>({2, 4, 5}, rng), params(0.0), true), ShapeError);
  }
}

TEST_CASE("lstm examples") {
  SUBCASE("zero parameters give zero outputs") {
    std::mt19937_64 rng(7);
    const BiLstmParams<double> p{{TD({8, 5}, 0.0), TD({8}, 0.0)}, {TD({8, 5}, 0.0), TD({8}, 0.0)}};
    const auto out = bilstm(random_tensor<double>({2, 4, 3}, rng), p);
    for (double v : out.data()) CHECK(v == 0.0);
  }
  SUBCASE("scalar cell matches a hand computation") {
    // H = 1, D = 1; weight rows are the i, f, g, o gates over [x, h].
    const LstmParams<double> p{TD({4, 2}, {0.5, -0.3, 0.8, 0.2, -0.6, 0.4, 1.1, 0.7}),
                               TD({4}, {0.1, 1.0, -0.2, 0.05})};
    const std::vector<double> xs{0.7, -1.2};
    double h = 0, c = 0;
    std::vector<double> want;
    for (double x : xs) {
      const double i = sigmoid(0.5 * x - 0.3 * h + 0.1);
      const double f = sigmoid(0.8 * x + 0.2 * h + 1.0);
      const double g = std::tanh(-0.6 * x + 0.4 * h - 0.2);
      const double o = sigmoid(1.1 * x + 0.7 * h + 0.05);
      c = f * c + i * g;
      h = o * std::tanh(c);
      want.push_back(h);
    }
    const TD got = lstm(TD({1, 2, 1}, xs), p, false);
    CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-14));
    CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-14));
    // Reverse direction consumes x[1] first and stores it at t = 1.
    const TD rev = lstm(TD({1, 2, 1}, {xs[1], xs[0]}), p, true);
    CHECK(rev[1] == doctest::Approx(want[0]).epsilon(1e-14));
    CHECK(rev[0] == doctest::Approx(want[1]).epsilon(1e-14));
  }
  SUBCASE("time reversal with swapped directions") {
    std::mt19937_64 rng(8);
    const std::size_t B = 2, T = 5, D = 3, H = 4;
    const TD x = random_tensor<double>({B, T, D}, rng);
    const auto make = [&] {
      return LstmParams<double>{random_tensor<double>({4 * H, D + H}, rng, 0.5), random_tensor<double>({4 * H}, rng, 0.5)};
    };
    const BiLstmParams<double> p{make(), make()};
    const BiLstmParams<double> swapped{p.backward, p.forward};
    TD xr({B, T, D});
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t d = 0; d < D; ++d) xr[(n * T + t) * D + d] = x[(n * T + (T - 1 - t)) * D + d];
    const TD y = bilstm(x, p), yr = bilstm(xr, swapped);
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < H; ++j) {
          const std::size_t tr = T - 1 - t;
          REQUIRE(yr[(n * T + tr) * 2 * H + j] == doctest::Approx(y[(n * T + t) * 2 * H + H + j]).epsilon(1e-12));
          REQUIRE(yr[(n * T + tr) * 2 * H + H + j] == doctest::Approx(y[(n * T + t) * 2 * H + j]).epsilon(1e-12));
        }
  }
  SUBCASE("width mismatch") {
    const LstmParams<double> p{TD({8, 5}, 0.0), TD({8}, 0.0)};
    CHECK_THROWS_AS(lstm(TD({1, 2, 4}), p, false), ShapeError);
    CHECK_THROWS_AS(lstm(TD({1, 2, 3}), LstmParams<double>{TD({8, 5}), TD({7})}, false), ShapeError);
  }
}

TEST_CASE("dropout layer is the identity in infer mode") {
  std::mt19937_64 rng(9);
  const TD x = random_tensor<double>({4, 5}, rng);
  CHECK(values(dropout(x, 0.3, Mode::infer, rng)) == values(x));
}
