// cfp: command-line front end.
//
//   cfp gen-data  --subjects 30 --samples 5 --out data/
//   cfp train     --manifest data/manifest.csv --out model/
//   cfp encode    --bundle model/ --out reps.txt img1.pgm img2.pgm
//   cfp evaluate  --bundle model/ --manifest data/manifest.csv --protocol bare-shoe --out report.csv
//   cfp visualize --bundle model/ --image img.pgm --out heat.pgm
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cfp/cfp.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Globals {
  std::uint64_t seed = 42;
  std::string config_path;
};

cfp::PipelineConfig load_pipeline_config(const Globals& g) {
  cfp::PipelineConfig c;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path)) throw cfp::DataError("missing config file: " + g.config_path);
    c = cfp::load_config(g.config_path);
  }
  c.seed = g.seed;
  return c;
}

int gen_data(const Globals& g, int subjects, int samples, double noise, const std::string& out) {
  const auto m = cfp::generate_dataset(subjects, samples, g.seed, out, noise);
  std::cout << "wrote " << m.entries.size() << " images and manifest.csv to " << out << "\n";
  return kOk;
}

int train(const Globals& g, const std::string& manifest_path, const std::string& protocol, const std::string& out) {
  const auto config = load_pipeline_config(g);
  const auto manifest = cfp::load_manifest(manifest_path);
  const auto split = cfp::split_protocol(manifest, cfp::parse_protocol(protocol), config.seed);
  const auto bundle = cfp::train_bundle(cfp::load_entries(manifest, split.gallery), config);
  cfp::save_bundle(bundle, out);
  std::cout << "trained " << cfp::method_tag(config) << " on " << split.gallery.size() << " gallery images ("
            << bundle.subjects.size() << " subjects); bundle in " << out << "\n";
  if (bundle.lda.clamped)
    std::cerr << "note: LDA output reduced to " << bundle.lda.output_dim() << " (classes - 1)\n";
  if (bundle.dictionary && bundle.dictionary->not_overcomplete())
    std::cerr << "note: dictionary is not overcomplete\n";
  return kOk;
}

int encode(const std::string& bundle_dir, const std::vector<std::string>& images, const std::string& out) {
  const auto bundle = cfp::load_bundle(bundle_dir);
  std::vector<cfp::PressureImage> loaded;
  for (const auto& p : images) loaded.push_back(cfp::load_pgm_image(p));
  cfp::save_matrix(out, cfp::image_features(bundle, loaded));
  std::cout << "wrote " << loaded.size() << " x " << bundle.feature_dim() << " to " << out << "\n";
  return kOk;
}

int evaluate(const std::string& bundle_dir, const std::string& manifest_path, const std::string& protocol_name,
             const std::string& out, int n_thresholds) {
  const auto bundle = cfp::load_bundle(bundle_dir);
  const auto manifest = cfp::load_manifest(manifest_path);
  const auto protocol = cfp::parse_protocol(protocol_name);
  const auto split = cfp::split_protocol(manifest, protocol, bundle.config.seed);
  auto report = cfp::evaluate_bundle(bundle, cfp::load_entries(manifest, split.gallery),
                                     cfp::load_entries(manifest, split.probes), protocol);
  // Thinning only affects the stored curve; the EER comes from the full sweep.
  report.points = cfp::thin_curve(report.points, n_thresholds);
  cfp::write_file_atomic(out, cfp::format_report_csv(report));
  std::cout << cfp::format_report_table(report);
  return kOk;
}

int visualize(const std::string& bundle_dir, const std::string& image, const std::string& out) {
  const auto bundle = cfp::load_bundle(bundle_dir);
  if (bundle.config.method != cfp::Method::dhsc) throw cfp::UsageError("visualize needs a dhsc bundle");
  const auto img = cfp::load_pgm_image(image);
  const auto map = cfp::important_components(bundle.lda, *bundle.dictionary, bundle.config.pyramid, img, bundle.config,
                                             bundle.centers);
  cfp::save_image(map.image, out);
  std::cout << "wrote heat map (" << map.grid_w << " x " << map.grid_h << " patches) to " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cumulative foot pressure recognition"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed / --config may follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "Seed for data generation and training")->capture_default_str();
  app.add_option("--config", g.config_path, "key=value pipeline configuration file");

  int subjects = 30;
  int samples = 5;
  double noise = cfp::kDatasetNoiseSigma;
  std::string out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset and its manifest");
  gen->add_option("--subjects", subjects)->capture_default_str();
  gen->add_option("--samples", samples, "Samples per subject and footwear condition")->capture_default_str();
  gen->add_option("--noise", noise, "Sensor noise sigma in counts")->capture_default_str();
  gen->add_option("--out", out)->required();

  std::string manifest;
  std::string protocol = "bare-bare";
  auto* tr = app.add_subcommand("train", "Fit dictionary, LDA and SVM on the gallery side of a protocol");
  tr->add_option("--manifest", manifest)->required();
  tr->add_option("--protocol", protocol, "Protocol whose gallery side is used")->capture_default_str();
  tr->add_option("--out", out, "Bundle directory")->required();

  std::string bundle;
  std::vector<std::string> images;
  auto* enc = app.add_subcommand("encode", "Pooled representation of images, one row each");
  enc->add_option("--bundle", bundle)->required();
  enc->add_option("--out", out)->required();
  enc->add_option("images", images, "16-bit PGM files")->required();

  int n_thresholds = 0;
  auto* ev = app.add_subcommand("evaluate", "FAR/FRR curve and EER for a protocol");
  ev->add_option("--bundle", bundle)->required();
  ev->add_option("--manifest", manifest)->required();
  ev->add_option("--protocol", protocol)->required();
  ev->add_option("--out", out, "Report CSV")->required();
  ev->add_option("--thresholds", n_thresholds, "Curve points to keep (0 = all)")->capture_default_str();

  std::string image;
  auto* vis = app.add_subcommand("visualize", "Discriminative-patch heat map");
  vis->add_option("--bundle", bundle)->required();
  vis->add_option("--image", image)->required();
  vis->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) return gen_data(g, subjects, samples, noise, out);
    if (*tr) return train(g, manifest, protocol, out);
    if (*enc) return encode(bundle, images, out);
    if (*ev) return evaluate(bundle, manifest, protocol, out, n_thresholds);
    if (*vis) return visualize(bundle, image, out);
  } catch (const cfp::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const cfp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const cfp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
