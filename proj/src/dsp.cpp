// SPDX-License-Identifier: Apache-2.0
#include "papernet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "papernet/kernels.hpp"

namespace papernet::dsp {

using cplx = std::complex<double>;

std::vector<cplx> BiquadCascade::poles() const {
  std::vector<cplx> out;
  for (const auto& s : sections) {
    // z^2 + a1 z + a2 = 0
    const cplx disc = std::sqrt(cplx(s.a[0] * s.a[0] - 4.0 * s.a[1], 0.0));
    out.push_back((-s.a[0] + disc) / 2.0);
    out.push_back((-s.a[0] - disc) / 2.0);
  }
  return out;
}

bool BiquadCascade::stable() const {
  for (const cplx& p : poles())
    if (std::abs(p) >= 1.0) return false;
  return true;
}

namespace {

cplx section_response(const Biquad& s, cplx zinv) {
  const cplx num = s.b[0] + zinv * (s.b[1] + zinv * s.b[2]);
  const cplx den = 1.0 + zinv * (s.a[0] + zinv * s.a[1]);
  return num / den;
}

double magnitude(const std::vector<Biquad>& sections, double f_hz, double fs) {
  const double w = 2.0 * std::numbers::pi * f_hz / fs;
  const cplx zinv = std::polar(1.0, -w);
  cplx h = 1.0;
  for (const auto& s : sections) h *= section_response(s, zinv);
  return std::abs(h);
}

}  // namespace

BiquadCascade butter_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz) {
  if (order < 1) throw std::invalid_argument("butter_bandpass: order must be >= 1");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist)) {
    throw std::invalid_argument("butter_bandpass: need 0 < low < high < fs/2, got low=" +
                                std::to_string(low_hz) + " high=" + std::to_string(high_hz) +
                                " fs=" + std::to_string(sample_rate_hz));
  }
  const double fs2 = 2.0 * sample_rate_hz;
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / sample_rate_hz);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / sample_rate_hz);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Band-pass poles from each prototype pole p: s^2 - p*bw*s + w0^2 = 0,
  // then bilinear z = (2fs + s) / (2fs - s). Keep the upper half plane
  // members of each conjugate pair and pair real poles with each other.
  std::vector<cplx> upper, real;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const cplx p = std::polar(1.0, theta);
    const cplx pb = p * bw;
    const cplx disc = std::sqrt(pb * pb - 4.0 * w0sq);
    for (const cplx s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
      const cplx z = (fs2 + s) / (fs2 - s);
      if (std::abs(z.imag()) < 1e-12) {
        real.push_back({z.real(), 0.0});
      } else if (z.imag() > 0.0) {
        upper.push_back(z);
      }
    }
  }
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });

  BiquadCascade out;
  out.order = order;
  out.low_hz = low_hz;
  out.high_hz = high_hz;
  out.sample_rate_hz = sample_rate_hz;
  // Every section gets one zero at z = 1 and one at z = -1.
  for (const cplx& z : upper) {
    Biquad s;
    s.b = {1.0, 0.0, -1.0};
    s.a = {-2.0 * z.real(), std::norm(z)};
    out.sections.push_back(s);
  }
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) {
    Biquad s;
    s.b = {1.0, 0.0, -1.0};
    s.a = {-(real[i].real() + real[i + 1].real()), real[i].real() * real[i + 1].real()};
    out.sections.push_back(s);
  }
  if (out.sections.size() != static_cast<std::size_t>(order)) {
    throw std::logic_error("butter_bandpass: pole pairing failed");
  }

  // Analog response is exactly 1 at w0; its digital image is
  // f_c = (fs/pi) * atan(w0 / 2fs).
  const double f_center =
      sample_rate_hz / std::numbers::pi * std::atan(std::sqrt(w0sq) / fs2);
  const double gain = 1.0 / magnitude(out.sections, f_center, sample_rate_hz);
  const double per_section = std::pow(gain, 1.0 / order);
  for (auto& s : out.sections)
    for (double& b : s.b) b *= per_section;
  return out;
}

double frequency_response(const BiquadCascade& filter, double f_hz) {
  return magnitude(filter.sections, f_hz, filter.sample_rate_hz);
}

std::vector<double> step_initial_state(const BiquadCascade& filter) {
  std::vector<double> zi;
  double input_level = 1.0;
  for (const auto& s : filter.sections) {
    const double dc = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
    const double y = dc * input_level;
    const double z1 = s.b[2] * input_level - s.a[1] * y;
    const double z0 = s.b[1] * input_level - s.a[0] * y + z1;
    zi.push_back(z0);
    zi.push_back(z1);
    input_level = y;
  }
  return zi;
}

std::size_t filtfilt_padding(const BiquadCascade& filter) {
  return 3 * (2 * static_cast<std::size_t>(filter.order) + 1);
}

std::vector<double> filtfilt(const BiquadCascade& filter, std::span<const double> signal) {
  const std::size_t pad = filtfilt_padding(filter);
  const std::size_t n = signal.size();
  if (n <= pad) {
    throw std::invalid_argument("filtfilt: signal of length " + std::to_string(n) +
                                " must be longer than the edge padding " + std::to_string(pad));
  }
  std::vector<double> ext(n + 2 * pad);
  const double first = signal.front(), last = signal.back();
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * first - signal[pad - i];
    ext[pad + n + i] = 2.0 * last - signal[n - 2 - i];
  }
  std::copy(signal.begin(), signal.end(), ext.begin() + pad);

  std::vector<double> coeffs;
  for (const auto& s : filter.sections)
    coeffs.insert(coeffs.end(), {s.b[0], s.b[1], s.b[2], 1.0, s.a[0], s.a[1]});
  const std::vector<double> zi = step_initial_state(filter);

  auto pass = [&](std::vector<double>& x) {
    std::vector<double> state(zi);
    for (double& z : state) z *= x.front();
    kernels::serial::sosfilt(coeffs, state, x);
  };
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + pad, ext.begin() + pad + n};
}

Channels filter_channels(const BiquadCascade& filter, const Channels& channels, bool parallel) {
  Channels out(channels.size());
  const long count = static_cast<long>(channels.size());
  if (parallel) {
    // Channels are independent; each thread owns whole channels.
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < count; ++c) out[c] = filtfilt(filter, channels[c]);
  } else {
    for (long c = 0; c < count; ++c) out[c] = filtfilt(filter, channels[c]);
  }
  return out;
}

Standardizer fit_standardizer(std::span<const double> matrix, std::size_t channels,
                              std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_standardizer: no training rows");
  if (channels == 0 || matrix.size() % channels != 0) {
    throw std::invalid_argument("fit_standardizer: matrix is not [N x channels]");
  }
  const std::size_t n_rows = matrix.size() / channels;
  Standardizer s;
  s.mean.assign(channels, 0.0);
  s.stddev.assign(channels, 0.0);
  for (std::size_t r : rows) {
    if (r >= n_rows) throw std::out_of_range("fit_standardizer: row index out of range");
    for (std::size_t c = 0; c < channels; ++c) s.mean[c] += matrix[r * channels + c];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : s.mean) m /= n;
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = matrix[r * channels + c] - s.mean[c];
      s.stddev[c] += d * d;
    }
  for (std::size_t c = 0; c < channels; ++c) {
    s.stddev[c] = std::sqrt(s.stddev[c] / n);
    if (s.stddev[c] < kStdFloor) {
      s.stddev[c] = kStdFloor;
      s.floored_channels.push_back(c);
    }
  }
  return s;
}

void apply_standardizer(const Standardizer& s, std::span<double> matrix) {
  const std::size_t channels = s.mean.size();
  if (channels == 0 || matrix.size() % channels != 0) {
    throw std::invalid_argument("apply_standardizer: matrix width does not match");
  }
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    const std::size_t c = i % channels;
    matrix[i] = (matrix[i] - s.mean[c]) / s.stddev[c];
  }
}

}  // namespace papernet::dsp
