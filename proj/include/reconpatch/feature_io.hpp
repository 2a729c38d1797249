#pragma once

// Feature tensors (NPY v1.0, little-endian float32, C order) and the JSON
// dataset manifest that ties samples to their per-level feature files.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reconpatch/error.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

static_assert(std::endian::native == std::endian::little, "float32 payloads are written in host order");

namespace npy_detail {

inline constexpr char kMagic[] = "\x93NUMPY";

inline void skip_space(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

// Value text that follows `'key':` inside the header dict.
inline std::string dict_value(const std::string& header, const std::string& key) {
  const std::string needle = "'" + key + "'";
  std::size_t pos = header.find(needle);
  if (pos == std::string::npos) fail(ErrorCode::MalformedHeader, "header lacks key " + key);
  pos += needle.size();
  skip_space(header, pos);
  if (pos >= header.size() || header[pos] != ':') fail(ErrorCode::MalformedHeader, "expected ':' after " + key);
  ++pos;
  skip_space(header, pos);
  if (pos >= header.size()) fail(ErrorCode::MalformedHeader, "missing value for " + key);
  std::size_t end = pos;
  if (header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string::npos) fail(ErrorCode::MalformedHeader, "unterminated string for " + key);
    return header.substr(pos + 1, end - pos - 1);
  }
  if (header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos) fail(ErrorCode::MalformedHeader, "unterminated tuple for " + key);
    return header.substr(pos, end - pos + 1);
  }
  while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  std::string v = header.substr(pos, end - pos);
  while (!v.empty() && v.back() == ' ') v.pop_back();
  return v;
}

inline std::vector<std::size_t> parse_shape(const std::string& tuple) {
  std::vector<std::size_t> shape;
  std::string body = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    std::size_t e = item.find_last_not_of(' ');
    item = item.substr(b, e - b + 1);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      fail(ErrorCode::MalformedHeader, "bad shape entry '" + item + "'");
    shape.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shape;
}

inline std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
    if (i + 1 < shape.size()) s += " ";
  }
  return s + ")";
}

}  // namespace npy_detail

inline TensorF32 read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());

  char prefix[10];
  in.read(prefix, sizeof(prefix));
  if (in.gcount() != sizeof(prefix) || std::memcmp(prefix, npy_detail::kMagic, 6) != 0)
    fail(ErrorCode::MalformedHeader, path.string() + ": not an NPY file");
  if (prefix[6] != 1 || prefix[7] != 0) fail(ErrorCode::MalformedHeader, path.string() + ": only NPY v1.0 is supported");
  const std::uint16_t header_len =
      static_cast<std::uint16_t>(static_cast<unsigned char>(prefix[8]) | (static_cast<unsigned char>(prefix[9]) << 8));

  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (in.gcount() != header_len) fail(ErrorCode::MalformedHeader, path.string() + ": truncated header");
  if (header.find('{') == std::string::npos || header.find('}') == std::string::npos)
    fail(ErrorCode::MalformedHeader, path.string() + ": header is not a dict");

  const std::string descr = npy_detail::dict_value(header, "descr");
  if (descr != "<f4") fail(ErrorCode::DTypeMismatch, path.string() + ": expected '<f4', found '" + descr + "'");
  if (npy_detail::dict_value(header, "fortran_order") != "False")
    fail(ErrorCode::MalformedHeader, path.string() + ": fortran_order must be False");
  const std::string shape_str = npy_detail::dict_value(header, "shape");
  if (shape_str.empty() || shape_str.front() != '(') fail(ErrorCode::MalformedHeader, path.string() + ": bad shape");

  TensorF32 t;
  t.shape = npy_detail::parse_shape(shape_str);
  validate_shape(t.shape);
  const std::size_t count = TensorF32::element_count(t.shape);
  t.data.resize(count);
  const auto bytes = static_cast<std::streamsize>(count * sizeof(float));
  in.read(reinterpret_cast<char*>(t.data.data()), bytes);
  if (in.gcount() != bytes)
    fail(ErrorCode::TruncatedPayload, path.string() + ": expected " + std::to_string(count) + " float32 values");

  for (float v : t.data)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, path.string() + ": contains NaN or Inf");
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const TensorF32& t) {
  validate_tensor(t);
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + npy_detail::shape_text(t.shape) + ", }";
  // Pad so that magic + version + length + header is a multiple of 64 bytes, newline terminated.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(npy_detail::kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

enum class Split { Train, Test };
enum class Label { Normal, Abnormal, Unknown };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }
inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::Normal: return "normal";
    case Label::Abnormal: return "abnormal";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

struct ImageSize {
  std::size_t height = 0;
  std::size_t width = 0;
};

struct SampleEntry {
  std::string id;
  Split split = Split::Train;
  Label label = Label::Normal;
  std::map<std::string, std::filesystem::path> feature_paths;
  std::optional<std::filesystem::path> mask_path;
  ImageSize image_size;
};

struct DatasetManifest {
  std::string category;
  std::vector<std::string> levels;
  std::vector<SampleEntry> samples;

  std::vector<const SampleEntry*> split(Split s) const {
    std::vector<const SampleEntry*> out;
    for (const auto& e : samples)
      if (e.split == s) out.push_back(&e);
    return out;
  }
};

namespace manifest_detail {

inline std::string level_key(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(ErrorCode::ParseError, "level identifiers must be strings or integers");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace manifest_detail

inline DatasetManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  using nlohmann::json;
  DatasetManifest m;
  try {
    if (!doc.is_object()) fail(ErrorCode::ParseError, "manifest must be a JSON object");
    m.category = doc.at("category").get<std::string>();
    for (const auto& lv : doc.at("levels")) m.levels.push_back(manifest_detail::level_key(lv));
    if (m.levels.empty()) fail(ErrorCode::ParseError, "manifest declares no levels");

    std::set<std::string> seen;
    for (const auto& js : doc.at("samples")) {
      SampleEntry e;
      e.id = js.at("id").get<std::string>();
      if (!seen.insert(e.id).second) fail(ErrorCode::DuplicateSampleId, "sample id '" + e.id + "' appears twice");

      const auto split = js.at("split").get<std::string>();
      if (split == "train") e.split = Split::Train;
      else if (split == "test") e.split = Split::Test;
      else fail(ErrorCode::ParseError, "sample '" + e.id + "': unknown split '" + split + "'");

      const auto label = js.at("label").get<std::string>();
      if (label == "normal") e.label = Label::Normal;
      else if (label == "abnormal") e.label = Label::Abnormal;
      else if (label == "unknown") e.label = Label::Unknown;
      else fail(ErrorCode::ParseError, "sample '" + e.id + "': unknown label '" + label + "'");

      if (e.split == Split::Train && e.label != Label::Normal)
        fail(ErrorCode::InvariantViolation, "train sample '" + e.id + "' must be labelled normal");

      const auto& feats = js.at("features");
      if (!feats.is_object()) fail(ErrorCode::ParseError, "sample '" + e.id + "': features must be an object");
      for (const auto& level : m.levels) {
        auto it = feats.find(level);
        if (it == feats.end() || !it->is_string() || it->get<std::string>().empty())
          fail(ErrorCode::MissingLevelPath, "sample '" + e.id + "' has no feature path for level " + level);
        e.feature_paths[level] = manifest_detail::resolve(base_dir, it->get<std::string>());
      }

      if (auto it = js.find("mask"); it != js.end() && !it->is_null()) {
        if (e.split == Split::Train)
          fail(ErrorCode::InvariantViolation, "train sample '" + e.id + "' must not carry a mask");
        e.mask_path = manifest_detail::resolve(base_dir, it->get<std::string>());
      }

      const auto& size = js.at("image_size");
      if (!size.is_array() || size.size() != 2) fail(ErrorCode::ParseError, "sample '" + e.id + "': image_size must be [h, w]");
      const auto h = size[0].get<long long>();
      const auto w = size[1].get<long long>();
      if (h <= 0 || w <= 0) fail(ErrorCode::ParseError, "sample '" + e.id + "': image_size must be positive");
      e.image_size = {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};

      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::ParseError, std::string("manifest: ") + ex.what());
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
  return parse_manifest(doc, path.parent_path());
}

}  // namespace reconpatch
