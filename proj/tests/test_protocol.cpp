#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "cfp/bundle.hpp"
#include "cfp/protocol.hpp"
#include "cfp/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cfp;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.coder = Coder::SC;
  c.n_atoms = 12;
  c.dict_samples = 400;
  c.dict_iterations = 2;
  c.dict_init_iterations = 5;
  c.svm_epochs = 20;
  return c;
}

// One shared small dataset: 6 subjects, 3 sessions per condition.
const DatasetManifest& small_dataset() {
  static const DatasetManifest m = [] {
    const auto dir = fs::temp_directory_path() / "cfp_test_protocol_data";
    fs::remove_all(dir);
    return generate_dataset(6, 3, 5, dir, 2.0);
  }();
  return m;
}

std::string bundle_text(const ModelBundle& b, const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cfp_test_protocol_" + name);
  fs::remove_all(dir);
  save_bundle(b, dir);
  std::string out;
  for (const char* f : {"config.txt", "subjects.txt", "dictionary.txt", "lda.txt", "svm.txt"}) out += read_file(dir / f);
  return out;
}

}  // namespace

TEST(Protocol, SplitKeepsSidesApart) {
  const auto& m = small_dataset();
  for (auto p : {Protocol::bare_bare, Protocol::bare_shoe, Protocol::shoe_shoe}) {
    const auto s = split_protocol(m, p, 42);
    EXPECT_EQ(s.gallery_sessions.size(), 2u);
    std::set<std::string> gallery_paths;
    for (const auto& e : s.gallery) {
      gallery_paths.insert(e.path);
      EXPECT_EQ(is_shoe(e.footwear), p == Protocol::shoe_shoe);
      EXPECT_TRUE(std::count(s.gallery_sessions.begin(), s.gallery_sessions.end(), e.session));
    }
    for (const auto& e : s.probes) {
      EXPECT_EQ(gallery_paths.count(e.path), 0u);
      EXPECT_EQ(is_shoe(e.footwear), p != Protocol::bare_bare);
      EXPECT_FALSE(std::count(s.gallery_sessions.begin(), s.gallery_sessions.end(), e.session));
    }
    const std::size_t shoe = p == Protocol::shoe_shoe ? 3 : 1;
    EXPECT_EQ(s.gallery.size(), 6 * 2 * shoe);
    EXPECT_EQ(s.probes.size(), 6 * 1 * (p == Protocol::bare_bare ? 1u : 3u));
  }
  EXPECT_EQ(split_protocol(m, Protocol::bare_bare, 1).gallery_sessions,
            split_protocol(m, Protocol::bare_bare, 1).gallery_sessions);
}

TEST(Protocol, SplitErrors) {
  DatasetManifest m = small_dataset();
  for (auto& e : m.entries) e.session = 0;
  EXPECT_THROW(split_protocol(m, Protocol::bare_bare, 1), DataError);
}

TEST(Protocol, TagsAndDeterminism) {
  const auto& m = small_dataset();
  const auto a = run_protocol(m, tiny_config(), Protocol::bare_shoe, 42);
  const auto b = run_protocol(m, tiny_config(), Protocol::bare_shoe, 42);
  EXPECT_EQ(a.report.protocol, Protocol::bare_shoe);
  EXPECT_EQ(a.report.method, "SC+LDA");
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(bundle_text(a.bundle, "a"), bundle_text(b.bundle, "b"));
  EXPECT_TRUE(a.report.identification_accuracy.has_value());
  EXPECT_EQ(a.bundle.config.seed, 42u);
}

TEST(Protocol, ReusedGalleryFeaturesMatchRecomputed) {
  const auto& m = small_dataset();
  const auto res = run_protocol(m, tiny_config(), Protocol::bare_bare, 3);
  const auto split = split_protocol(m, Protocol::bare_bare, 3);
  const auto recomputed =
      evaluate_bundle(res.bundle, load_entries(m, split.gallery), load_entries(m, split.probes), Protocol::bare_bare);
  EXPECT_EQ(recomputed, res.report);
}

TEST(Protocol, ProbeDataNeverReachesModels) {
  // Canary: overwrite every probe image with different content; the fitted
  // models must not change.
  const auto src = small_dataset();
  const auto dir = fs::temp_directory_path() / "cfp_test_protocol_canary";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const auto& e : src.entries) fs::copy_file(src.root / e.path, dir / e.path);
  DatasetManifest poisoned = src;
  poisoned.root = dir;
  const auto split = split_protocol(src, Protocol::bare_bare, 42);
  for (const auto& e : split.probes) {
    auto img = render_sample(generate_subject_template(999), Footwear::sport, 50.0, {3, 3}, 1);
    save_image(img, dir / e.path);
  }
  const auto clean = run_protocol(src, tiny_config(), Protocol::bare_bare, 42);
  const auto dirty = run_protocol(poisoned, tiny_config(), Protocol::bare_bare, 42);
  EXPECT_EQ(bundle_text(clean.bundle, "clean"), bundle_text(dirty.bundle, "dirty"));
  EXPECT_NE(clean.report, dirty.report);
}

TEST(Protocol, PcaBaselineRuns) {
  auto cfg = tiny_config();
  cfg.method = Method::pca_lda;
  const auto r = run_protocol(small_dataset(), cfg, Protocol::shoe_shoe, 1).report;
  EXPECT_EQ(r.method, "PCA+LDA");
  EXPECT_GE(r.eer, 0.0);
  EXPECT_LE(r.eer, 1.0);
}
