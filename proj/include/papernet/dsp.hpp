// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace papernet::dsp {

struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};  // numerator
  std::array<double, 2> a{0.0, 0.0};       // denominator a1, a2 (a0 == 1)
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  int order = 0;  // analog prototype order
  double low_hz = 0.0;
  double high_hz = 0.0;
  double sample_rate_hz = 0.0;

  /// All pole locations in the z-plane (two per section).
  std::vector<std::complex<double>> poles() const;
  bool stable() const;
};

/// Butterworth band-pass: analog prototype of `order` poles, low-pass to
/// band-pass transform, bilinear map with pre-warped edges. Produces
/// `order` second-order sections (2*order poles), normalized to unit gain
/// at the geometric band center.
BiquadCascade butter_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz);

/// |H(e^{jw})| with w = 2*pi*f/fs.
double frequency_response(const BiquadCascade& filter, double f_hz);

/// Steady-state section states for a unit step, per section (z0, z1).
std::vector<double> step_initial_state(const BiquadCascade& filter);

/// Edge padding used by filtfilt: 3 * (2*order + 1) samples.
std::size_t filtfilt_padding(const BiquadCascade& filter);

/// Zero-phase forward-backward filtering with odd-reflection edge padding
/// and step-response initial conditions at both passes.
std::vector<double> filtfilt(const BiquadCascade& filter, std::span<const double> signal);

/// Column-major channels; each inner vector is one channel's full series.
using Channels = std::vector<std::vector<double>>;

/// Filters every channel independently. Runs channels on OpenMP threads
/// when `parallel` is set; the result is identical either way.
Channels filter_channels(const BiquadCascade& filter, const Channels& channels,
                         bool parallel = true);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::string fitted_on = "train";
  std::vector<std::size_t> floored_channels;  // channels whose std hit the floor
};

inline constexpr double kStdFloor = 1e-8;

/// Per-channel population mean/std over `rows` of a row-major [N x C]
/// matrix. Only those rows are read.
Standardizer fit_standardizer(std::span<const double> matrix, std::size_t channels,
                              std::span<const std::size_t> rows);

/// (x - mean) / std applied in place to a row-major [n x C] matrix.
void apply_standardizer(const Standardizer& s, std::span<double> matrix);

}  // namespace papernet::dsp
