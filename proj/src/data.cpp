// SPDX-License-Identifier: Apache-2.0
#include "papernet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace papernet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), out);
  return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace

dsp::Channels RawDataset::channels() const {
  dsp::Channels out(kNumChannels, std::vector<double>(rows()));
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < kNumChannels; ++c) out[c][r] = at(r, c);
  return out;
}

void RawDataset::set_channels(const dsp::Channels& channels) {
  if (channels.size() != kNumChannels) throw DataError("expected 16 channels");
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (channels[c].size() != rows()) throw DataError("channel length mismatch");
    for (std::size_t r = 0; r < rows(); ++r) features[r * kNumChannels + c] = channels[c][r];
  }
}

RawDataset load_csv(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw DataError(path.string() + ": empty file");

  std::size_t label_col = header.size() - 1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "y") label_col = i;

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 1; c <= kNumChannels; ++c) {
    const auto it = std::find(header.begin(), header.end(), "X" + std::to_string(c));
    if (it == header.end()) break;
    feature_cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  if (feature_cols.size() != kNumChannels) {
    feature_cols.clear();
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != label_col) feature_cols.push_back(i);
  }
  if (feature_cols.size() != kNumChannels || header.size() != kNumChannels + 1) {
    throw DataError(path.string() + ": expected 16 feature columns and one label column, header has " +
                    std::to_string(header.size()) + " columns");
  }

  RawDataset data;
  for (std::size_t c : feature_cols) data.channel_names.push_back(header[c]);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value '" +
                        cells[c] + "' in column " + header[c]);
      }
      data.features.push_back(v);
    }
    double label = 0.0;
    if (!parse_double(cells[label_col], label) || label != std::floor(label)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid label '" +
                      cells[label_col] + "'");
    }
    if (label < 0 || label >= num_classes) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown label " +
                      cells[label_col] + " (expected 0.." + std::to_string(num_classes - 1) + ")");
    }
    data.labels.push_back(static_cast<int>(label));
  }
  if (data.labels.empty()) throw DataError(path.string() + ": no data rows");
  return data;
}

void write_csv(const RawDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < kNumChannels; ++c) out << "X" << (c + 1) << ",";
  out << "y\n";
  char buf[32];
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, data.at(r, c));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << data.labels[r] << '\n';
  }
}

RawDataset preprocess_recording(const RawDataset& raw, double sample_rate_hz, double low_hz,
                                double high_hz, int order) {
  if (raw.features.size() != raw.rows() * kNumChannels) {
    throw DataError("preprocess: dataset does not have 16 channel columns");
  }
  const auto filter = dsp::butter_bandpass(order, low_hz, high_hz, sample_rate_hz);
  RawDataset out = raw;
  out.set_channels(dsp::filter_channels(filter, raw.channels()));
  return out;
}

std::uint64_t SplitIndices::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const auto* list : {&train, &val, &test}) {
    mix(list->size());
    for (std::size_t i : *list) mix(i);
  }
  return h;
}

SplitIndices stratified_split(const std::vector<int>& labels, std::uint64_t seed,
                              SplitRatios ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("stratified_split: ratios must be non-negative and sum to 1");
  }
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("stratified_split: negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  SplitIndices out;
  out.seed = seed;
  out.ratios = ratios;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    if (idx.empty()) continue;
    if (idx.size() < 3) {
      throw std::invalid_argument("stratified_split: class " + std::to_string(k) + " has only " +
                                  std::to_string(idx.size()) + " samples (need >= 3)");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    const auto cut1 = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
    const auto cut2 = static_cast<std::size_t>(std::floor((ratios.train + ratios.val) * n + 1e-9));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + cut1);
    out.val.insert(out.val.end(), idx.begin() + cut1, idx.begin() + cut2);
    out.test.insert(out.test.end(), idx.begin() + cut2, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<double> class_weights(const std::vector<int>& labels, int num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::out_of_range("class_weights: label out of range");
    ++counts[y];
  }
  std::vector<double> w(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) {
      throw std::invalid_argument("class_weights: class " + std::to_string(k) +
                                  " has no training samples");
    }
    w[k] = static_cast<double>(labels.size()) /
           (static_cast<double>(num_classes) * static_cast<double>(counts[k]));
  }
  return w;
}

template <class T>
Tensor<T> make_batch(const std::vector<double>& features, const std::vector<std::size_t>& rows) {
  Tensor<T> out({rows.size(), kNumChannels, 1});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < kNumChannels; ++c)
      out[i * kNumChannels + c] = static_cast<T>(features.at(rows[i] * kNumChannels + c));
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

template Tensor<float> make_batch<float>(const std::vector<double>&, const std::vector<std::size_t>&);
template Tensor<double> make_batch<double>(const std::vector<double>&, const std::vector<std::size_t>&);

}  // namespace papernet
