#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/io_util.hpp"

namespace cfp {

enum class Footwear { barefoot, cloth, sport, leather };
enum class FootSide { left, right };

inline constexpr Footwear kAllFootwear[] = {Footwear::barefoot, Footwear::cloth, Footwear::sport,
                                            Footwear::leather};

inline std::string_view to_string(Footwear f) {
  switch (f) {
    case Footwear::barefoot: return "barefoot";
    case Footwear::cloth: return "cloth";
    case Footwear::sport: return "sport";
    case Footwear::leather: return "leather";
  }
  return "barefoot";
}

inline std::string_view to_string(FootSide s) { return s == FootSide::left ? "left" : "right"; }

inline Footwear parse_footwear(std::string_view s) {
  for (auto f : kAllFootwear)
    if (to_string(f) == s) return f;
  throw DataError("unknown footwear: " + std::string(s));
}

inline FootSide parse_foot_side(std::string_view s) {
  if (s == "left") return FootSide::left;
  if (s == "right") return FootSide::right;
  throw DataError("unknown foot side: " + std::string(s));
}

inline constexpr int kMinImageSide = 16;

/// Cumulative foot pressure grid, row-major, in unitless sensor counts.
struct PressureImage {
  int width = 0;
  int height = 0;
  std::vector<double> pressure;
  std::string subject_id;
  Footwear footwear = Footwear::barefoot;
  FootSide foot_side = FootSide::left;
  int session = 0;

  PressureImage() = default;
  PressureImage(int w, int h) : width(w), height(h), pressure(static_cast<std::size_t>(w) * h, 0.0) {}

  double& at(int x, int y) { return pressure[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pressure[static_cast<std::size_t>(y) * width + x]; }

  double max_value() const {
    return pressure.empty() ? 0.0 : *std::max_element(pressure.begin(), pressure.end());
  }

  /// Throws DataError when a type invariant is broken.
  void validate() const {
    if (width < kMinImageSide || height < kMinImageSide)
      throw DataError("pressure image must be at least 16x16, got " + std::to_string(width) + "x" +
                      std::to_string(height));
    if (pressure.size() != static_cast<std::size_t>(width) * height)
      throw DataError("pressure grid length does not match width*height");
    for (double v : pressure)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("pressure values must be finite and >= 0");
  }
};

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  std::string subject_id;
  Footwear footwear = Footwear::barefoot;
  FootSide foot_side = FootSide::left;
  int session = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;

  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }

  /// Finds the entry whose resolved path names the same file as `path`.
  const ManifestEntry* find(const std::filesystem::path& path) const {
    const auto want = std::filesystem::weakly_canonical(path);
    for (const auto& e : entries)
      if (std::filesystem::weakly_canonical(resolve(e)) == want) return &e;
    return nullptr;
  }

  void validate() const {
    std::vector<std::string> paths;
    std::vector<std::string> ids;
    for (const auto& e : entries) {
      paths.push_back(e.path);
      ids.push_back(e.subject_id);
    }
    std::sort(paths.begin(), paths.end());
    if (std::adjacent_find(paths.begin(), paths.end()) != paths.end())
      throw DataError("manifest paths must be unique");
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size();) {
      std::size_t j = i;
      while (j < ids.size() && ids[j] == ids[i]) ++j;
      if (j - i < 2) throw DataError("subject " + ids[i] + " has fewer than 2 manifest entries");
      i = j;
    }
  }
};

// ---------------------------------------------------------------------------
// PGM P5, 16-bit big-endian samples.

struct PgmData {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

namespace detail {

inline void skip_pgm_space(std::string_view s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r') {
      ++pos;
    } else {
      break;
    }
  }
}

inline int read_pgm_int(std::string_view s, std::size_t& pos, const std::string& what) {
  skip_pgm_space(s, pos);
  const std::size_t start = pos;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  int v = 0;
  if (start == pos || !parse_int(s.substr(start, pos - start), v))
    throw DataError("malformed PGM header (" + what + ")");
  return v;
}

}  // namespace detail

inline PgmData parse_pgm16(std::string_view bytes) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw DataError("malformed PGM header (magic)");
  std::size_t pos = 2;
  PgmData out;
  out.width = detail::read_pgm_int(bytes, pos, "width");
  out.height = detail::read_pgm_int(bytes, pos, "height");
  out.maxval = detail::read_pgm_int(bytes, pos, "maxval");
  if (out.width <= 0 || out.height <= 0) throw DataError("malformed PGM header (dimensions)");
  if (out.maxval < 256 || out.maxval > 65535)
    throw DataError("expected a 16-bit PGM (maxval in [256, 65535])");
  if (pos >= bytes.size() || !(bytes[pos] == ' ' || bytes[pos] == '\n' || bytes[pos] == '\r' || bytes[pos] == '\t'))
    throw DataError("malformed PGM header (separator)");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  if (bytes.size() - pos != 2 * n) throw DataError("PGM payload size does not match header");
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    out.samples[i] = static_cast<std::uint16_t>((hi << 8) | lo);
    if (out.samples[i] > out.maxval) throw DataError("PGM sample exceeds maxval");
  }
  return out;
}

inline PgmData read_pgm16(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  return parse_pgm16(read_file(path));
}

/// Encodes a grid as PGM P5 with maxval 65535; values are rounded and clamped to [0, 65535].
inline std::string encode_pgm16(int width, int height, const std::vector<double>& values) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  const std::size_t header = out.size();
  out.resize(header + 2 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? std::clamp(std::round(values[i]), 0.0, 65535.0) : 0.0;
    const auto s = static_cast<std::uint16_t>(v);
    out[header + 2 * i] = static_cast<char>(s >> 8);
    out[header + 2 * i + 1] = static_cast<char>(s & 0xff);
  }
  return out;
}

inline void save_image(const PressureImage& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm16(image.width, image.height, image.pressure));
}

/// Loads the raw grid without metadata.
inline PressureImage load_pgm_image(const std::filesystem::path& path) {
  const auto pgm = read_pgm16(path);
  PressureImage img(pgm.width, pgm.height);
  for (std::size_t i = 0; i < pgm.samples.size(); ++i) img.pressure[i] = pgm.samples[i];
  return img;
}

inline PressureImage load_image(const std::filesystem::path& path, const ManifestEntry& entry) {
  auto img = load_pgm_image(path);
  img.subject_id = entry.subject_id;
  img.footwear = entry.footwear;
  img.foot_side = entry.foot_side;
  img.session = entry.session;
  return img;
}

/// Loads `path` and fills metadata from its manifest entry.
inline PressureImage load_image(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const auto* entry = manifest.find(path);
  if (entry == nullptr) throw DataError("no manifest entry for " + path.string());
  return load_image(path, *entry);
}

inline PressureImage load_entry(const DatasetManifest& manifest, const ManifestEntry& entry) {
  return load_image(manifest.resolve(entry), entry);
}

// ---------------------------------------------------------------------------
// Manifest CSV: header `path,subject_id,footwear,foot_side,session`, LF endings.

inline constexpr std::string_view kManifestHeader = "path,subject_id,footwear,foot_side,session";

inline std::string format_manifest(const DatasetManifest& m) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& e : m.entries) {
    for (const auto* field : {&e.path, &e.subject_id})
      if (field->find_first_of(",\n\r\"") != std::string::npos)
        throw DataError("manifest field contains a reserved character: " + *field);
    out += e.path + ',' + e.subject_id + ',' + std::string(to_string(e.footwear)) + ',' +
           std::string(to_string(e.foot_side)) + ',' + std::to_string(e.session) + '\n';
  }
  return out;
}

inline DatasetManifest parse_manifest(std::string_view text, std::filesystem::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  std::size_t pos = 0;
  bool header_seen = false;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kManifestHeader) throw DataError("manifest header mismatch");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 5) throw DataError("manifest line " + std::to_string(line_no) + ": expected 5 fields");
    ManifestEntry e;
    e.path = std::string(fields[0]);
    e.subject_id = std::string(fields[1]);
    e.footwear = parse_footwear(fields[2]);
    e.foot_side = parse_foot_side(fields[3]);
    if (!parse_int(fields[4], e.session))
      throw DataError("manifest line " + std::to_string(line_no) + ": bad session");
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw DataError("empty manifest");
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& csv_path) {
  if (!std::filesystem::exists(csv_path)) throw DataError("missing manifest: " + csv_path.string());
  auto m = parse_manifest(read_file(csv_path), csv_path.parent_path());
  m.validate();
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& csv_path) {
  write_file_atomic(csv_path, format_manifest(m));
}

}  // namespace cfp
