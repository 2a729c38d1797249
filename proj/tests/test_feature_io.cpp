#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <random>

#include "reconpatch/feature_io.hpp"
#include "support.hpp"

namespace rp = reconpatch;
namespace ts = testing_support;
using nlohmann::json;

namespace {

rp::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const rp::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return rp::ErrorCode::ConfigError;
}

// Hand-built NPY v1.0 file with the given header dict and raw payload.
std::string npy_bytes(const std::string& dict, const std::string& payload, char major = 1) {
  std::string header = dict;
  const std::size_t base = 10;
  while ((base + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::string out = "\x93NUMPY";
  out += major;
  out += '\0';
  const auto len = static_cast<std::uint16_t>(header.size());
  out += static_cast<char>(len & 0xff);
  out += static_cast<char>(len >> 8);
  return out + header + payload;
}

std::string floats(std::initializer_list<float> v) {
  std::string s(v.size() * 4, '\0');
  std::memcpy(s.data(), std::data(v), s.size());
  return s;
}

}  // namespace

TEST(FeatureIo, RoundTripPreservesShapeAndValues) {
  std::mt19937_64 rng(1);
  ts::TempDir dir("npy");
  for (const std::vector<std::size_t>& shape : {std::vector<std::size_t>{3}, {2, 5}, {4, 3, 2}, {1, 1, 1}}) {
    auto t = rp::TensorF32::zeros(shape);
    std::normal_distribution<float> g;
    for (auto& v : t.data) v = g(rng);
    rp::write_tensor(dir / "t.npy", t);
    EXPECT_EQ(rp::read_tensor(dir / "t.npy"), t);
  }
}

TEST(FeatureIo, ReadsNumpyStyleHeader) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy", npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }",
                                          floats({1.0f, 2.0f, 3.0f, 4.0f})));
  const auto t = rp::read_tensor(dir / "a.npy");
  EXPECT_EQ(t.shape, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(t.data, (std::vector<float>{1, 2, 3, 4}));
}

TEST(FeatureIo, HeaderIsPaddedTo64Bytes) {
  ts::TempDir dir("npy");
  rp::write_tensor(dir / "a.npy", rp::TensorF32::zeros({3, 7}));
  const auto bytes = ts::read_bytes(dir / "a.npy");
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  EXPECT_EQ(bytes.size(), 10 + header_len + 3 * 7 * 4);
}

TEST(FeatureIo, RejectsFloat64) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy",
                  npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }", std::string(16, '\0')));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "a.npy"); }), rp::ErrorCode::DTypeMismatch);
}

TEST(FeatureIo, RejectsTruncatedPayload) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy", npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }", floats({1, 2})));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "a.npy"); }), rp::ErrorCode::TruncatedPayload);
}

TEST(FeatureIo, RejectsBadMagicVersionAndFortranOrder) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy", "NOTNUMPY" + std::string(60, ' '));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "a.npy"); }), rp::ErrorCode::MalformedHeader);
  ts::write_bytes(dir / "b.npy", npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", floats({1}), 2));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "b.npy"); }), rp::ErrorCode::MalformedHeader);
  ts::write_bytes(dir / "c.npy", npy_bytes("{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }", floats({1})));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "c.npy"); }), rp::ErrorCode::MalformedHeader);
}

TEST(FeatureIo, RejectsNonFiniteValues) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy", npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }",
                                          floats({1.0f, std::numeric_limits<float>::quiet_NaN()})));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "a.npy"); }), rp::ErrorCode::NonFiniteValue);
}

TEST(FeatureIo, RejectsEmptyShape) {
  ts::TempDir dir("npy");
  ts::write_bytes(dir / "a.npy", npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (0, 3), }", ""));
  EXPECT_EQ(code_of([&] { rp::read_tensor(dir / "a.npy"); }), rp::ErrorCode::InvalidShape);
  EXPECT_EQ(code_of([&] { rp::write_tensor(dir / "b.npy", rp::TensorF32{{}, {}}); }), rp::ErrorCode::InvalidShape);
}

// ---------------------------------------------------------------------------

namespace {

json sample(const std::string& id, const std::string& split, const std::string& label) {
  return {{"id", id},
          {"split", split},
          {"label", label},
          {"features", {{"2", id + "_2.npy"}, {"3", id + "_3.npy"}}},
          {"image_size", {32, 32}}};
}

json manifest(json samples) { return {{"category", "bottle"}, {"levels", {"2", 3}}, {"samples", std::move(samples)}}; }

}  // namespace

TEST(Manifest, ParsesSplitsAndResolvesRelativePaths) {
  auto test_sample = sample("t0", "test", "abnormal");
  test_sample["mask"] = "masks/t0.npy";
  const auto m = rp::parse_manifest(manifest({sample("a", "train", "normal"), test_sample}), "/data/set");
  EXPECT_EQ(m.category, "bottle");
  EXPECT_EQ(m.levels, (std::vector<std::string>{"2", "3"}));
  ASSERT_EQ(m.split(rp::Split::Train).size(), 1u);
  ASSERT_EQ(m.split(rp::Split::Test).size(), 1u);
  EXPECT_EQ(m.samples[0].feature_paths.at("3"), std::filesystem::path("/data/set/a_3.npy"));
  EXPECT_EQ(*m.samples[1].mask_path, std::filesystem::path("/data/set/masks/t0.npy"));
  EXPECT_EQ(m.samples[1].image_size.height, 32u);
}

TEST(Manifest, Errors) {
  auto parse = [](const json& doc) { return [doc] { rp::parse_manifest(doc, "."); }; };
  EXPECT_EQ(code_of(parse(manifest({sample("a", "train", "normal"), sample("a", "test", "normal")}))),
            rp::ErrorCode::DuplicateSampleId);
  EXPECT_EQ(code_of(parse(manifest({sample("a", "train", "abnormal")}))), rp::ErrorCode::InvariantViolation);

  auto masked = sample("a", "train", "normal");
  masked["mask"] = "m.npy";
  EXPECT_EQ(code_of(parse(manifest({masked}))), rp::ErrorCode::InvariantViolation);

  auto missing = sample("a", "test", "normal");
  missing["features"].erase("3");
  EXPECT_EQ(code_of(parse(manifest({missing}))), rp::ErrorCode::MissingLevelPath);

  EXPECT_EQ(code_of(parse(json::array())), rp::ErrorCode::ParseError);
  EXPECT_EQ(code_of(parse(manifest({sample("a", "val", "normal")}))), rp::ErrorCode::ParseError);
}
