// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "papernet/model.hpp"

namespace papernet {

/// Raised on a malformed, truncated or mismatched weight file.
class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
std::uint64_t crc64(std::span<const unsigned char> bytes);

// Weight file layout:
//   "PNW1" | u64le header_len | JSON header | f32le tensor data | u64le crc64
// The JSON header is {"version":1,"variant":..,"tensors":[{"name","shape",
// "offset","len"}..]}; offset/len count bytes from the start of the data block.

std::vector<unsigned char> serialize_weights(const Model<float>& model);
void save_weights(const Model<float>& model, const std::filesystem::path& path);

struct WeightFile {
  Variant variant = Variant::full;
  std::size_t num_classes = 0;
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<float> values;
  };
  std::vector<Entry> tensors;
};

/// Parses and verifies (magic, checksum, bounds) without touching a model.
WeightFile parse_weights(std::span<const unsigned char> bytes);
WeightFile read_weights(const std::filesystem::path& path);

/// Copies tensors into `model`. Nothing is written unless every name and
/// shape matches; the error names the first offending tensor.
void load_weights(Model<float>& model, const WeightFile& file);
void load_weights(Model<float>& model, const std::filesystem::path& path);

/// Builds a model of the recorded variant and class count and loads it.
Model<float> load_model(const std::filesystem::path& path, std::size_t input_length = 16);

struct AttentionExport {
  std::vector<std::vector<double>> per_sample;  // [n x 128]
  std::vector<double> mean;                     // [128]
};

/// Infer-mode attention vectors for each row of `batch` [n x T x 1].
AttentionExport export_attention(Model<float>& model, const Tensor<float>& batch,
                                 std::size_t chunk = 256);

/// Columns a_000..a_127 plus a leading "sample" column; the last row is tagged MEAN.
void write_attention_csv(const AttentionExport& att, const std::filesystem::path& path);

}  // namespace papernet
