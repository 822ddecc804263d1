#pragma once

// Synthetic cumulative foot pressure generator.
//
// A subject is a set of anisotropic Gaussian blobs (heel, arch, metatarsal
// band, five toes). Footwear is modelled as a fixed image operator applied to
// the barefoot rendering. Coordinates are normalized to [0, 1] with the toes
// at the top of the image (small y).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/pressure_image.hpp"
#include "cfp/random.hpp"

namespace cfp {

inline constexpr int kSyntheticWidth = 64;
inline constexpr int kSyntheticHeight = 96;
inline constexpr int kMaxJitter = 4;
/// Gaussian blobs are truncated at this many standard deviations.
inline constexpr double kBlobSupport = 3.0;
/// Sensor noise used by generate_dataset, in counts.
inline constexpr double kDatasetNoiseSigma = 4.0;

struct Blob {
  double center_x = 0.5;
  double center_y = 0.5;
  double radius_x = 0.05;  // standard deviation, normalized by width
  double radius_y = 0.05;  // standard deviation, normalized by height
  double peak_pressure = 1000.0;

  bool operator==(const Blob&) const = default;
};

struct SubjectTemplate {
  Blob heel;
  Blob arch;
  Blob metatarsal;
  std::array<Blob, 5> toes;
  double foot_length_scale = 1.0;

  bool operator==(const SubjectTemplate&) const = default;

  std::vector<Blob> blobs() const {
    std::vector<Blob> out{heel, arch, metatarsal};
    out.insert(out.end(), toes.begin(), toes.end());
    return out;
  }

  /// Positive radii and peaks; heel below metatarsal below every toe.
  bool satisfies_invariants() const {
    for (const auto& b : blobs())
      if (!(b.radius_x > 0 && b.radius_y > 0 && b.peak_pressure > 0)) return false;
    if (!(foot_length_scale > 0)) return false;
    if (!(heel.center_y > metatarsal.center_y)) return false;
    for (const auto& t : toes)
      if (!(metatarsal.center_y > t.center_y)) return false;
    return true;
  }
};

/// Parameter ranges (all uniform). Horizontal extents keep every blob's
/// support inside x in [16, 47] px at zero jitter.
inline SubjectTemplate generate_subject_template(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5eb1ec7));
  SubjectTemplate t;
  t.heel = {rng.uniform(0.47, 0.53), rng.uniform(0.76, 0.80), rng.uniform(0.050, 0.065),
            rng.uniform(0.040, 0.050), rng.uniform(1500.0, 3000.0)};
  t.arch = {rng.uniform(0.55, 0.60), rng.uniform(0.52, 0.60), rng.uniform(0.025, 0.040),
            rng.uniform(0.060, 0.090), rng.uniform(300.0, 900.0)};
  t.metatarsal = {rng.uniform(0.47, 0.53), rng.uniform(0.30, 0.36), rng.uniform(0.050, 0.065),
                  rng.uniform(0.035, 0.050), rng.uniform(1800.0, 3200.0)};
  const double toe_x0 = rng.uniform(0.38, 0.41);
  const double toe_dx = rng.uniform(0.045, 0.055);
  const double toe_y0 = rng.uniform(0.10, 0.14);
  for (int k = 0; k < 5; ++k) {
    const double big = k == 0 ? 1.5 : 1.0;
    t.toes[k] = {toe_x0 + k * toe_dx, toe_y0 + 0.012 * k + rng.uniform(-0.01, 0.01),
                 big * rng.uniform(0.018, 0.026), big * rng.uniform(0.015, 0.022),
                 (k == 0 ? 1.4 : 1.0) * rng.uniform(600.0, 1600.0)};
  }
  t.foot_length_scale = rng.uniform(0.92, 1.04);
  return t;
}

namespace detail {

inline PressureImage render_blobs(const SubjectTemplate& t, int w, int h) {
  PressureImage img(w, h);
  for (const auto& b : t.blobs()) {
    const double cx = b.center_x * w;
    const double cy = (0.5 + (b.center_y - 0.5) * t.foot_length_scale) * h;
    const double sx = b.radius_x * w;
    const double sy = b.radius_y * h * t.foot_length_scale;
    for (int y = 0; y < h; ++y) {
      const double v = (y + 0.5 - cy) / sy;
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5 - cx) / sx;
        const double r2 = u * u + v * v;
        if (r2 > kBlobSupport * kBlobSupport) continue;
        img.at(x, y) += b.peak_pressure * std::exp(-0.5 * r2);
      }
    }
  }
  return img;
}

/// Separable Gaussian blur, truncated at 3 sigma, zero outside the frame.
inline PressureImage gaussian_blur(const PressureImage& src, double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * half + 1);
  double total = 0;
  for (int i = -half; i <= half; ++i) total += kernel[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= total;

  PressureImage tmp = src;
  PressureImage out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < src.width) acc += kernel[i + half] * src.at(xx, y);
      }
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < src.height) acc += kernel[i + half] * tmp.at(x, yy);
      }
      out.at(x, y) = acc;
    }
  return out;
}

inline PressureImage apply_footwear(const SubjectTemplate& t, const PressureImage& bare, Footwear f) {
  switch (f) {
    case Footwear::barefoot:
      return bare;
    case Footwear::cloth:
      return gaussian_blur(bare, 2.0);
    case Footwear::sport: {
      auto out = gaussian_blur(bare, 4.0);
      // Flat midsole: a pedestal of 10% of the barefoot peak under the whole
      // footprint outline.
      const double peak = bare.max_value();
      for (auto& v : out.pressure)
        if (v >= 0.02 * peak) v += 0.1 * peak;
      return out;
    }
    case Footwear::leather: {
      auto out = gaussian_blur(bare, 3.0);
      // Rigid shank: the arch never touches the floor.
      const auto& a = t.arch;
      const double cx = a.center_x * out.width;
      const double cy = (0.5 + (a.center_y - 0.5) * t.foot_length_scale) * out.height;
      const double sx = a.radius_x * out.width;
      const double sy = a.radius_y * out.height * t.foot_length_scale;
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          const double u = (x + 0.5 - cx) / sx;
          const double v = (y + 0.5 - cy) / sy;
          if (u * u + v * v <= 4.0) out.at(x, y) = 0.0;
        }
      return out;
    }
  }
  return bare;
}

}  // namespace detail

struct Jitter {
  int dx = 0;
  int dy = 0;
};

/// Renders one 64x96 sample: blob sum, footwear operator, integer translation,
/// additive Gaussian noise, then clamping to [0, 65535] and rounding to counts.
inline PressureImage render_sample(const SubjectTemplate& t, Footwear footwear, double noise_sigma,
                                   Jitter jitter, std::uint64_t seed) {
  if (!(noise_sigma >= 0)) throw UsageError("noise_sigma must be >= 0");
  constexpr int w = kSyntheticWidth;
  constexpr int h = kSyntheticHeight;
  if (std::abs(jitter.dx) >= w || std::abs(jitter.dy) >= h)
    throw UsageError("jitter moves the foot entirely out of frame");

  const auto shaped = detail::apply_footwear(t, detail::render_blobs(t, w, h), footwear);
  PressureImage img(w, h);
  bool any = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = x - jitter.dx;
      const int sy = y - jitter.dy;
      if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
      img.at(x, y) = shaped.at(sx, sy);
      any = any || img.at(x, y) > 0.5;
    }
  if (!any) throw UsageError("jitter moves the foot entirely out of frame");

  Rng rng(derive_seed(seed, 0x7015e));
  for (auto& v : img.pressure) {
    if (noise_sigma > 0) v += noise_sigma * rng.normal();
    v = std::round(std::clamp(v, 0.0, 65535.0));
  }
  img.footwear = footwear;
  return img;
}

inline std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%03d", index);
  return buf;
}

/// Writes n_subjects x 4 footwear x samples_per_condition images plus
/// manifest.csv into out_dir. Output depends only on the arguments.
inline DatasetManifest generate_dataset(int n_subjects, int samples_per_condition, std::uint64_t seed,
                                        const std::filesystem::path& out_dir,
                                        double noise_sigma = kDatasetNoiseSigma) {
  if (n_subjects < 2) throw UsageError("n_subjects must be >= 2");
  if (samples_per_condition < 1) throw UsageError("samples_per_condition must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw DataError("cannot create output directory: " + out_dir.string());

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (int s = 0; s < n_subjects; ++s) {
    const auto tmpl = generate_subject_template(derive_seed(seed, 1, s));
    const auto id = subject_name(s);
    for (auto f : kAllFootwear) {
      for (int k = 0; k < samples_per_condition; ++k) {
        const auto stream = derive_seed(seed, 2, s, static_cast<int>(f), k);
        Rng jr(stream);
        const Jitter j{static_cast<int>(jr.uniform_int(-kMaxJitter, kMaxJitter)),
                       static_cast<int>(jr.uniform_int(-kMaxJitter, kMaxJitter))};
        auto img = render_sample(tmpl, f, noise_sigma, j, derive_seed(stream, 3));
        img.subject_id = id;
        img.session = k;
        ManifestEntry e{id + "_" + std::string(to_string(f)) + "_" + std::to_string(k) + ".pgm", id, f,
                        FootSide::left, k};
        save_image(img, out_dir / e.path);
        manifest.entries.push_back(std::move(e));
      }
    }
  }
  save_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace cfp
