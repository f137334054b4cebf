// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "papernet/dsp.hpp"
#include "papernet/tensor.hpp"

namespace papernet {

inline constexpr std::size_t kNumChannels = 16;

/// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawDataset {
  std::vector<double> features;  // row-major [N x 16]
  std::vector<int> labels;       // [N]
  std::vector<std::string> channel_names;

  std::size_t rows() const { return labels.size(); }
  double at(std::size_t row, std::size_t channel) const {
    return features[row * kNumChannels + channel];
  }
  /// Channel-major copy of the features.
  dsp::Channels channels() const;
  void set_channels(const dsp::Channels& channels);
};

/// Parses a header + comma-separated rows. Feature columns are X1..X16 (or
/// the first 16 non-label columns); the label column is "y", falling back
/// to the last column. Labels must lie in [0, num_classes).
RawDataset load_csv(const std::filesystem::path& path, int num_classes = 4);

void write_csv(const RawDataset& data, const std::filesystem::path& path);

/// Band-pass filters each channel over the full series (before splitting).
RawDataset preprocess_recording(const RawDataset& raw, double sample_rate_hz,
                                double low_hz = 0.5, double high_hz = 45.0, int order = 4);

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;
  SplitRatios ratios;

  /// FNV-1a over the three index lists; identical splits hash equal.
  std::uint64_t fingerprint() const;
};

/// Per class: shuffle that class's indices with a generator seeded from
/// (seed, class), cut at floor(train*n) and floor((train+val)*n), remainder
/// to test. Each output list is sorted ascending.
SplitIndices stratified_split(const std::vector<int>& labels, std::uint64_t seed,
                              SplitRatios ratios = {});

/// w_k = N / (K * count_k): inverse frequency normalized to mean 1.
std::vector<double> class_weights(const std::vector<int>& labels, int num_classes);

/// Gathers standardized rows into a model batch [n x 16 x 1].
template <class T>
Tensor<T> make_batch(const std::vector<double>& features, const std::vector<std::size_t>& rows);

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& rows);

}  // namespace papernet
