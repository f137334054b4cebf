// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "papernet/io.hpp"

namespace papernet {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'W', '1'};
constexpr int kVersion = 1;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const unsigned char> in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t crc64(std::span<const unsigned char> bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<unsigned char> serialize_weights(const Model<float>& model) {
  const auto params = model.parameters();
  nlohmann::ordered_json header;
  header["version"] = kVersion;
  header["variant"] = std::string(to_string(model.variant()));
  header["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& p : params) {
    const std::size_t len = p.tensor.size() * sizeof(float);
    header["tensors"].push_back(
        {{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}, {"len", len}});
    offset += len;
  }
  const std::string text = header.dump();

  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : params) {
    for (float v : p.tensor.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
  }
  put_u64(out, crc64(out));
  return out;
}

void save_weights(const Model<float>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightFileError("cannot write weight file '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightFileError("short write to '" + path.string() + "'");
}

WeightFile parse_weights(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw WeightFileError("not a weight file (bad magic)");
  }
  const std::uint64_t stored_crc = get_u64(bytes.subspan(bytes.size() - 8));
  if (crc64(bytes.first(bytes.size() - 8)) != stored_crc) {
    throw WeightFileError("weight file checksum mismatch (truncated or corrupted)");
  }
  const std::uint64_t header_len = get_u64(bytes.subspan(4));
  if (header_len > bytes.size() - 20) throw WeightFileError("weight file header overruns file");
  const auto header_bytes = bytes.subspan(12, header_len);
  const auto data = bytes.subspan(12 + header_len, bytes.size() - 20 - header_len);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw WeightFileError(std::string("weight file header is not valid JSON: ") + e.what());
  }
  WeightFile file;
  try {
    if (header.at("version").get<int>() != kVersion) {
      throw WeightFileError("unsupported weight file version " + header.at("version").dump());
    }
    file.variant = parse_variant(header.at("variant").get<std::string>());
    for (const auto& t : header.at("tensors")) {
      WeightFile::Entry e;
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto len = t.at("len").get<std::size_t>();
      if (len != numel(e.shape) * sizeof(float) || offset > data.size() ||
          len > data.size() - offset) {
        throw WeightFileError("tensor '" + e.name + "' has inconsistent extent");
      }
      e.values.resize(len / sizeof(float));
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<std::uint32_t>(data[offset + 4 * i + b]) << (8 * b);
        e.values[i] = std::bit_cast<float>(bits);
      }
      if (e.name == "dense2.bias" && e.shape.size() == 1) file.num_classes = e.shape[0];
      file.tensors.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw WeightFileError(std::string("weight file header is malformed: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw WeightFileError(e.what());
  }
  return file;
}

WeightFile read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError("cannot open weight file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_weights(bytes);
}

void load_weights(Model<float>& model, const WeightFile& file) {
  auto params = model.parameters();
  const std::size_t n = std::max(params.size(), file.tensors.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= params.size()) {
      throw WeightFileError("tensor mismatch: file has extra tensor '" + file.tensors[i].name +
                            "' not present in a " + std::string(to_string(model.variant())) +
                            " model");
    }
    if (i >= file.tensors.size()) {
      throw WeightFileError("tensor mismatch: file is missing '" + params[i].name + "'");
    }
    const auto& e = file.tensors[i];
    if (e.name != params[i].name) {
      throw WeightFileError("tensor mismatch: expected '" + params[i].name + "', file has '" +
                            e.name + "'");
    }
    if (e.shape != params[i].tensor.shape()) {
      throw WeightFileError("shape mismatch for '" + e.name + "': file " + shape_str(e.shape) +
                            ", model " + shape_str(params[i].tensor.shape()));
    }
  }
  if (file.variant != model.variant()) {
    throw WeightFileError("variant mismatch: file is " + std::string(to_string(file.variant)) +
                          ", model is " + std::string(to_string(model.variant())));
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(file.tensors[i].values.begin(), file.tensors[i].values.end(),
              params[i].tensor.data().begin());
}

void load_weights(Model<float>& model, const std::filesystem::path& path) {
  load_weights(model, read_weights(path));
}

Model<float> load_model(const std::filesystem::path& path, std::size_t input_length) {
  const WeightFile file = read_weights(path);
  if (file.num_classes < 2) throw WeightFileError("weight file lacks a dense2.bias tensor");
  Model<float> model(file.variant, file.num_classes, input_length);
  load_weights(model, file);
  return model;
}

AttentionExport export_attention(Model<float>& model, const Tensor<float>& batch,
                                 std::size_t chunk) {
  if (!model.has_attention()) {
    throw std::invalid_argument("export_attention: variant " +
                                std::string(to_string(model.variant())) + " has no attention block");
  }
  if (batch.rank() != 3 || batch.dim(0) == 0) {
    throw ShapeError("export_attention: expected a non-empty [n x T x 1] batch");
  }
  const std::size_t n = batch.dim(0), row = batch.size() / n;
  AttentionExport out;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    Tensor<float> part({m, batch.dim(1), batch.dim(2)});
    std::copy_n(batch.data().begin() + start * row, m * row, part.data().begin());
    ForwardTrace<float> trace;
    model.forward(part, Mode::infer, nullptr, &trace);
    const std::size_t width = trace.attention.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
      out.per_sample.emplace_back(trace.attention.data().begin() + i * width,
                                  trace.attention.data().begin() + (i + 1) * width);
    }
  }
  const std::size_t width = out.per_sample.front().size();
  out.mean.assign(width, 0.0);
  for (const auto& a : out.per_sample)
    for (std::size_t j = 0; j < width; ++j) out.mean[j] += a[j];
  for (double& m : out.mean) m /= static_cast<double>(out.per_sample.size());
  return out;
}

void write_attention_csv(const AttentionExport& att, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const std::size_t width = att.mean.size();
  out << "sample";
  for (std::size_t j = 0; j < width; ++j) {
    std::ostringstream name;
    name << "a_" << std::setw(3) << std::setfill('0') << j;
    out << ',' << name.str();
  }
  out << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < att.per_sample.size(); ++i) {
    out << i;
    for (double v : att.per_sample[i]) out << ',' << v;
    out << '\n';
  }
  out << "MEAN";
  for (double v : att.mean) out << ',' << v;
  out << '\n';
}

}  // namespace papernet
