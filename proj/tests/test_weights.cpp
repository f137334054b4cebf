// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "papernet/io.hpp"
#include "test_util.hpp"

using namespace papernet;

namespace {

std::string load_error(Model<float>& model, const std::filesystem::path& p) {
  try {
    load_weights(model, p);
  } catch (const WeightFileError& e) {
    return e.what();
  }
  return {};
}

std::vector<std::vector<float>> snapshot(const Model<float>& m) {
  std::vector<std::vector<float>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_CASE("crc64 check value") {
  const std::string s = "123456789";
  CHECK(crc64({reinterpret_cast<const unsigned char*>(s.data()), s.size()}) == 0x995DC9BBDF1939FAULL);
  CHECK(crc64({}) == 0ULL);
}

TEST_CASE("weights round trip is bitwise") {
  testutil::TempDir dir("weights");
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    auto model = build_papernet<float>(4, 16, v, 21);
    // Push running stats away from their defaults so they are exercised too.
    std::mt19937_64 rng(3);
    auto batch = testutil::random_tensor<float>({8, 16, 1}, rng);
    model.forward(batch, Mode::train, &rng);
    const auto path = dir / (std::string(to_string(v)) + ".pnw");
    save_weights(model, path);
    auto restored = load_model(path);
    CHECK(restored.variant() == v);
    CHECK(restored.num_classes() == 4);
    CHECK(snapshot(restored) == snapshot(model));
    const auto a = model.forward(batch, Mode::infer);
    const auto b = restored.forward(batch, Mode::infer);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK(serialize_weights(restored) == testutil::read_bytes(path));
  }
}

TEST_CASE("weights file errors") {
  testutil::TempDir dir("weights_err");
  auto full = build_papernet<float>(4, 16, Variant::full, 1);
  save_weights(full, dir / "full.pnw");
  const auto bytes = testutil::read_bytes(dir / "full.pnw");

  SUBCASE("wrong variant names the tensor and writes nothing") {
    auto other = build_papernet<float>(4, 16, Variant::no_lstm, 2);
    const auto before = snapshot(other);
    const auto msg = load_error(other, dir / "full.pnw");
    CHECK(msg.find("lstm") != std::string::npos);
    CHECK(snapshot(other) == before);
  }
  SUBCASE("wrong class count names the tensor") {
    auto k3 = build_papernet<float>(3, 16, Variant::full, 2);
    CHECK(load_error(k3, dir / "full.pnw").find("dense2") != std::string::npos);
  }
  SUBCASE("no_residual and full share tensors but the variant is checked") {
    auto nr = build_papernet<float>(4, 16, Variant::no_residual, 2);
    const auto before = snapshot(nr);
    CHECK(load_error(nr, dir / "full.pnw").find("variant") != std::string::npos);
    CHECK(snapshot(nr) == before);
  }
  SUBCASE("truncation and corruption fail the checksum") {
    auto target = build_papernet<float>(4, 16, Variant::full, 9);
    const auto before = snapshot(target);
    auto cut = bytes;
    cut.resize(cut.size() - 100);
    std::ofstream(dir / "cut.pnw", std::ios::binary).write(reinterpret_cast<const char*>(cut.data()),
                                                           static_cast<std::streamsize>(cut.size()));
    CHECK(load_error(target, dir / "cut.pnw").find("checksum") != std::string::npos);
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x10;
    CHECK_THROWS_WITH_AS(parse_weights(flipped), doctest::Contains("checksum"), WeightFileError);
    CHECK(snapshot(target) == before);
  }
  SUBCASE("magic") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(parse_weights(bad), doctest::Contains("magic"), WeightFileError);
    CHECK_THROWS_AS(parse_weights(std::vector<unsigned char>(5, 0)), WeightFileError);
    CHECK_THROWS_AS(read_weights(dir / "none.pnw"), WeightFileError);
  }
}

TEST_CASE("attention export") {
  testutil::TempDir dir("attention");
  auto model = build_papernet<float>(4, 16, Variant::full, 5);
  std::mt19937_64 rng(2);
  auto batch = testutil::random_tensor<float>({10, 16, 1}, rng);
  // Duplicate row 0 into row 9.
  std::copy_n(batch.data().begin(), 16, batch.data().begin() + 9 * 16);
  const auto att = export_attention(model, batch, 4);
  REQUIRE(att.per_sample.size() == 10);
  CHECK(att.mean.size() == 128);
  CHECK(att.per_sample[0] == att.per_sample[9]);
  for (const auto& row : att.per_sample) {
    CHECK(row.size() == 128);
    for (double a : row) {
      CHECK(a > 0.0);
      CHECK(a < 1.0);
    }
  }
  for (std::size_t j = 0; j < 128; ++j) {
    double m = 0;
    for (const auto& row : att.per_sample) m += row[j];
    CHECK(att.mean[j] == doctest::Approx(m / 10.0).epsilon(1e-12));
  }
  // Chunking does not change values.
  CHECK(export_attention(model, batch, 256).per_sample == att.per_sample);

  write_attention_csv(att, dir / "att.csv");
  std::ifstream in(dir / "att.csv");
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("sample,a_000,a_001", 0) == 0);
  CHECK(header.substr(header.size() - 5) == "a_127");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
    CHECK(std::count(line.begin(), line.end(), ',') == 128);
  }
  CHECK(rows == 11);
  CHECK(last.rfind("MEAN,", 0) == 0);

  auto plain = build_papernet<float>(4, 16, Variant::no_attention, 5);
  CHECK_THROWS_AS(export_attention(plain, batch), std::invalid_argument);
}
