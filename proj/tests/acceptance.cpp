// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "cfp/cfp.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cfp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cfp_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 --------------------------------------------------------------------------
Outcome llc_closed_form() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  const double lambdas[] = {0, 0.15, 1, 100};
  double worst = 0;
  double worst_sum = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = static_cast<int>(rng.uniform_int(5, 16));
    const int n = static_cast<int>(rng.uniform_int(8, 32));
    const Dictionary dict(oracle::random_atoms(rng, m, n));
    const auto x = oracle::random_vector(rng, m);
    const double lambda = lambdas[trial % 4];
    const auto z = llc_encode(x, dict, lambda);
    worst = std::max(worst, (z - oracle::llc_kkt(dict.atoms(), x, lambda)).cwiseAbs().maxCoeff());
    worst_sum = std::max(worst_sum, std::abs(z.sum() - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && worst_sum <= 1e-8 && secs < 5,
          "max err " + fmt("%.2e", worst) + ", max |sum-1| " + fmt("%.2e", worst_sum) + ", " + fmt("%.2f s", secs)};
}

// 2 --------------------------------------------------------------------------
Outcome sparse_coding_optimality() {
  const auto t0 = Clock::now();
  Rng rng(1002);
  double worst_obj = 0;
  double worst_kkt = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Dictionary dict(oracle::random_atoms(rng, 5, 8));
    const auto x = oracle::random_vector(rng, 5);
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(8, 0.15);
    const auto z = sparse_encode(x, dict, 0.15);
    const auto best = oracle::brute_force_lasso(dict.atoms(), x, t, 8);
    worst_obj = std::max(worst_obj, std::abs(lasso_objective(x, dict, z, 0.15) - best.objective));
    worst_kkt = std::max(worst_kkt, oracle::lasso_kkt_residual(dict.atoms(), x, t, z));
  }
  const double secs = seconds_since(t0);
  return {worst_obj <= 1e-6 && worst_kkt <= 1e-6 && secs < 30,
          "objective gap " + fmt("%.2e", worst_obj) + ", KKT " + fmt("%.2e", worst_kkt) + ", " + fmt("%.2f s", secs)};
}

// 3 --------------------------------------------------------------------------
// A single center at z0 + c puts every weight at c + floor, so the weighted
// problem is plain sparse coding at lambda * (c + floor).
Outcome weighted_lasso_reduction() {
  Rng rng(1003);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Dictionary dict(oracle::random_atoms(rng, 5, 8));
    const auto x = oracle::random_vector(rng, 5);
    const double c = rng.uniform(0.5, 3.0);
    const auto z0 = llc_encode(x, dict, 0.15);
    GaussianCenters centers{Eigen::MatrixXd(8, 1)};
    centers.centers.col(0) = z0.array() + c;
    const auto z = hlsc_encode(x, dict, 0.15, centers);
    worst = std::max(worst, (z - sparse_encode(x, dict, 0.15 * (c + kHlscWeightFloor))).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, "max err " + fmt("%.2e", worst)};
}

// 4 --------------------------------------------------------------------------
double worst_angle(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& found) {
  double worst = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const double best = (found.transpose() * truth.col(j)).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::acos(std::min(1.0, best)));
  }
  return worst;
}

Outcome dictionary_learning() {
  std::vector<PressureImage> images;
  for (int s = 0; s < 6; ++s)
    images.push_back(render_sample(generate_subject_template(derive_seed(7, s)), kAllFootwear[s % 4], 4.0, {}, s));
  PipelineConfig cfg;
  const Eigen::MatrixXd samples = sample_columns(collect_descriptors(images, cfg), 1500, 7);
  DictionaryLearningOptions opt;
  opt.n_atoms = 64;
  opt.max_outer = 20;
  opt.relative_tolerance = 0;
  const auto res = learn_dictionary(samples, opt);
  int rises = 0;
  for (std::size_t i = 0; i < res.objective_after_update.size(); ++i) {
    if (res.objective_after_update[i] > res.objective_after_encode[i] * (1 + 1e-12)) ++rises;
    if (i + 1 < res.objective_after_encode.size() &&
        res.objective_after_encode[i + 1] > res.objective_after_update[i] * (1 + 1e-12))
      ++rises;
  }
  const bool ran_all = res.objective_after_encode.size() == 20;

  Rng rng(1004);
  double angle = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto q = oracle::random_orthonormal(rng, 8);
    Eigen::MatrixXd x(8, 80);
    for (int j = 0; j < 8; ++j)
      for (int c = 0; c < 10; ++c) x.col(j * 10 + c) = q.col(j);
    DictionaryLearningOptions p;
    p.n_atoms = 8;
    p.max_outer = 20;
    p.seed = static_cast<std::uint64_t>(trial);
    angle = std::max(angle, worst_angle(q, learn_dictionary(x, p).dictionary.atoms()));
  }
  return {ran_all && rises == 0 && angle < 1e-3,
          std::to_string(res.objective_after_encode.size()) + " iterations, " + std::to_string(rises) +
              " increases, objective " + fmt("%.4g", res.objective_after_encode.front()) + " -> " +
              fmt("%.4g", res.objective_after_encode.back()) + ", planted angle " + fmt("%.2e rad", angle)};
}

// 5 --------------------------------------------------------------------------
Outcome lda_closed_form() {
  Rng rng(1005);
  double worst = 1;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd a = oracle::random_matrix(rng, 30, 10);
    Eigen::MatrixXd b = oracle::random_matrix(rng, 25, 10);
    b.rowwise() += oracle::random_vector(rng, 10).transpose();
    Eigen::MatrixXd x(55, 10);
    x << a, b;
    std::vector<int> y(30, 0);
    y.resize(55, 1);
    const auto m = fit_lda(x, y, 1);
    worst = std::min(worst, oracle::abs_cosine(m.projection.col(0), oracle::fisher_two_class(a, b)));
  }
  return {worst >= 0.999, "min |cosine| " + fmt("%.9f", worst)};
}

// 6 --------------------------------------------------------------------------
// Barefoot only: the shoe blurs spread pressure into the outermost patch
// columns, so those renders do not have flat borders.
Outcome translation_invariance() {
  const PipelineConfig cfg;  // HLSC, 128 atoms, 1x1 + 2x2
  std::vector<PressureImage> base;
  std::vector<PressureImage> moved;
  for (int s = 0; s < 20; ++s) {
    const auto t = generate_subject_template(derive_seed(42, 1, s));
    base.push_back(render_sample(t, Footwear::barefoot, 0.0, {0, 0}, s));
    moved.push_back(render_sample(t, Footwear::barefoot, 0.0, {4, 0}, s));
  }
  DictionaryLearningOptions opt;
  opt.n_atoms = cfg.n_atoms;
  opt.lambda = cfg.lambda;
  opt.max_outer = cfg.dict_iterations;
  opt.init_iterations = cfg.dict_init_iterations;
  const auto dict =
      learn_dictionary(sample_columns(collect_descriptors(base, cfg), cfg.dict_samples, cfg.seed), opt).dictionary;

  const auto global = static_cast<Eigen::Index>(cfg.n_atoms);
  double worst_global = 0;
  double worst_full = 0;
  double mean_full = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto a = build_representation(base[i], dict, cfg).feature;
    const auto b = build_representation(moved[i], dict, cfg).feature;
    worst_global = std::max(worst_global, (a.head(global) - b.head(global)).norm() / a.head(global).norm());
    worst_full = std::max(worst_full, (a - b).norm() / a.norm());
    mean_full += (a - b).norm() / a.norm() / static_cast<double>(base.size());
  }
  return {worst_global <= 1e-6 && worst_full <= 0.05,
          "1x1 rel change " + fmt("%.2e", worst_global) + ", full rel change max " + fmt("%.4f", worst_full) +
              " mean " + fmt("%.4f", mean_full) + " over 20 images"};
}

// 7 --------------------------------------------------------------------------
Outcome metric_exactness() {
  Rng rng(1007);
  long checked = 0;
  long mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 1000));
    std::vector<ScoredPair> pairs;
    std::vector<double> genuine;
    std::vector<double> impostor;
    for (int i = 0; i < n; ++i) {
      const bool g = i == 0 || (i != 1 && rng.uniform() < 0.3);
      const double s = std::round(rng.uniform(-1.0, 1.0) * 20) / 20 + (g ? 0.2 : 0.0);
      pairs.push_back({s, g});
      (g ? genuine : impostor).push_back(s);
    }
    for (const auto& p : far_frr_curve(pairs).points) {
      const auto r = oracle::count_rates(genuine, impostor, p.threshold);
      ++checked;
      if (p.far != r.far || p.frr != r.frr) ++mismatches;
    }
  }
  int non_monotone = 0;
  for (int set = 0; set < 1000; ++set) {
    const int n = static_cast<int>(rng.uniform_int(2, 400));
    std::vector<ScoredPair> pairs;
    for (int i = 0; i < n; ++i) pairs.push_back({rng.normal() + (i % 3 == 0 ? 1.0 : 0.0), i % 3 == 0});
    const auto pts = far_frr_curve(pairs).points;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (pts[i].far > pts[i - 1].far || pts[i].frr < pts[i - 1].frr) {
        ++non_monotone;
        break;
      }
  }
  return {mismatches == 0 && non_monotone == 0,
          std::to_string(checked) + " thresholds, " + std::to_string(mismatches) + " mismatches; " +
              std::to_string(non_monotone) + " of 1000 sets non-monotone"};
}

// 8 and 9 --------------------------------------------------------------------
using EerTable = std::map<Protocol, double>;

const Protocol kProtocols[] = {Protocol::bare_bare, Protocol::bare_shoe, Protocol::shoe_shoe};

EerTable run_coder(const DatasetManifest& manifest, Coder coder, double& secs) {
  PipelineConfig cfg;
  cfg.coder = coder;
  const auto t0 = Clock::now();
  EerTable eer;
  for (auto p : kProtocols) {
    const auto r = run_protocol(manifest, cfg, p, 42).report;
    eer[p] = r.eer;
    std::cout << "  " << to_string(coder) << " " << cli_name(p) << ": " << format_report_row(r, balanced_point(r))
              << "\n"
              << std::flush;
  }
  secs = seconds_since(t0);
  return eer;
}

std::string eer_line(const EerTable& e) {
  return "bare/bare " + format_percent(e.at(Protocol::bare_bare)) + ", bare/shoe " +
         format_percent(e.at(Protocol::bare_shoe)) + ", shoe/shoe " + format_percent(e.at(Protocol::shoe_shoe));
}

Outcome end_to_end(const EerTable& hlsc, double secs) {
  const double bb = hlsc.at(Protocol::bare_bare);
  const double bs = hlsc.at(Protocol::bare_shoe);
  const double ss = hlsc.at(Protocol::shoe_shoe);
  const bool order1 = bb <= ss + 0.05;
  const bool order2 = bs >= bb;
  const bool level = bb <= 0.10;
  const bool fast = secs < 600;
  std::string detail = "HLSC " + eer_line(hlsc) + "; bb<=ss+0.05 " + (order1 ? "yes" : "no") + ", bs>=bb " +
                       (order2 ? "yes" : "no") + ", bb<=10% " + (level ? "yes" : "no") + ", " + fmt("%.0f s", secs);
  return {order1 && order2 && level && fast, detail};
}

Outcome coder_ranking(const EerTable& hlsc, const EerTable& llc, const EerTable& sc) {
  bool ok = true;
  std::string detail;
  for (auto p : kProtocols) {
    const double limit = sc.at(p) + 0.02;
    const bool h = hlsc.at(p) <= limit;
    const bool l = llc.at(p) <= limit;
    ok = ok && h && l;
    detail += std::string(detail.empty() ? "" : "; ") + cli_name(p) + " SC " + format_percent(sc.at(p)) + " HLSC " +
              format_percent(hlsc.at(p)) + (h ? "" : "(over)") + " LLC " + format_percent(llc.at(p)) +
              (l ? "" : "(over)");
  }
  return {ok, detail};
}

// 10 -------------------------------------------------------------------------
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CFP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tree_contents(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += f.string() + "\n" + read_file(dir / f);
  return out;
}

Outcome cli_determinism() {
  std::string bundle[2];
  std::string report[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = scratch("cli_run" + std::to_string(run));
    const auto log = dir / "log.txt";
    const auto data = (dir / "data").string();
    const auto manifest = data + "/manifest.csv";
    const auto model = (dir / "model").string();
    const auto csv = (dir / "report.csv").string();
    if (run_cli("--seed 42 gen-data --subjects 10 --samples 3 --out " + data, log) != 0 ||
        run_cli("--seed 42 train --manifest " + manifest + " --out " + model, log) != 0 ||
        run_cli("--seed 42 evaluate --bundle " + model + " --manifest " + manifest + " --protocol bare-bare --out " + csv,
                log) != 0)
      return {false, "CLI run " + std::to_string(run) + " failed: " + read_file(log)};
    bundle[run] = tree_contents(model);
    report[run] = read_file(csv);
  }
  const bool same_bundle = bundle[0] == bundle[1];
  const bool same_report = report[0] == report[1];
  return {same_bundle && same_report, std::string("bundles ") + (same_bundle ? "identical" : "differ") + " (" +
                                          std::to_string(bundle[0].size()) + " bytes), reports " +
                                          (same_report ? "identical" : "differ")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << "\n" << std::flush;
  };
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "LLC closed form", guarded(llc_closed_form));
  report(2, "sparse coding optimality", guarded(sparse_coding_optimality));
  report(3, "weighted LASSO reduction", guarded(weighted_lasso_reduction));
  report(4, "dictionary learning descent and recovery", guarded(dictionary_learning));
  report(5, "LDA closed form", guarded(lda_closed_form));
  report(6, "translation invariance", guarded(translation_invariance));
  report(7, "metric exactness", guarded(metric_exactness));

  Outcome e2e;
  Outcome ranking;
  try {
    const auto data = scratch("dataset");
    const auto manifest = generate_dataset(30, 5, 42, data);
    double hlsc_secs = 0;
    double other_secs = 0;
    const auto hlsc = run_coder(manifest, Coder::HLSC, hlsc_secs);
    e2e = end_to_end(hlsc, hlsc_secs);
    const auto llc = run_coder(manifest, Coder::LLC, other_secs);
    const auto sc = run_coder(manifest, Coder::SC, other_secs);
    ranking = coder_ranking(hlsc, llc, sc);
  } catch (const std::exception& e) {
    e2e = {false, std::string("exception: ") + e.what()};
    ranking = e2e;
  }
  report(8, "end-to-end trends", e2e);
  report(9, "coder ranking", ranking);
  report(10, "CLI determinism", guarded(cli_determinism));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
