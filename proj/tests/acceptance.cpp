// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance run. Prints one PASS/FAIL/WARN line per criterion and
// exits non-zero if any criterion fails. Trained models and reports are kept
// under --workdir; --reuse loads existing models from there instead of
// retraining (runtime limits are then not checked). The verdict lines are
// also written to summary.txt in the workdir.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "remreg/checkpoint.hpp"
#include "remreg/cli.hpp"
#include "remreg/error.hpp"
#include "remreg/gradcheck.hpp"
#include "remreg/losses.hpp"
#include "remreg/metrics.hpp"
#include "remreg/phantom.hpp"
#include "remreg/report.hpp"
#include "remreg/trainer.hpp"

namespace fs = std::filesystem;
using namespace remreg;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Verdict {
  enum Kind { pass, warn, fail } kind = fail;
  std::string detail;
};

const char* label(Verdict::Kind k) { return k == Verdict::pass ? "PASS" : k == Verdict::warn ? "WARN" : "FAIL"; }

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(prec);
  ss << v;
  return ss.str();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Shared experiment state: datasets, trained models and their CPU cost.

class Lab {
 public:
  Lab(fs::path dir, bool reuse) : dir_(std::move(dir)), reuse_(reuse) { fs::create_directories(dir_); }

  bool reuse() const { return reuse_; }
  const fs::path& dir() const { return dir_; }
  double cpu_cost(const std::string& key) const { return cost_.contains(key) ? cost_.at(key) : 0.0; }

  const std::vector<VolumeSample>& data(std::uint64_t seed) {
    auto it = data_.find(seed);
    if (it == data_.end()) it = data_.emplace(seed, make_dataset(seed, 12, PhantomCfg{})).first;
    return it->second;
  }
  DatasetSplit split() const { return split_dataset(12); }

  /// Variant at `scale` with k=8, n=4 and the CLI's REM training defaults.
  const RemModel<float>& rem(std::uint64_t seed, int scale, RemVariant variant) {
    const std::string key = "rem_" + to_string(variant) + "_x" + std::to_string(scale) + "_s" + std::to_string(seed);
    if (auto it = rems_.find(key); it != rems_.end()) return it->second;
    const fs::path path = dir_ / (key + ".ckpt");
    if (reuse_ && fs::exists(path)) return rems_.emplace(key, rem_from_checkpoint(load_checkpoint(path))).first->second;
    TrainCfg tc = rem_train_defaults();
    tc.seed = seed;
    tc.scale = scale;
    const double t0 = cpu_seconds();
    RemTrainResult r = train_rem(data(seed), split(), RemConfig{variant, 8, 4}, tc);
    cost_[key] = cpu_seconds() - t0;
    save_checkpoint(path, checkpoint_of(r.model));
    return rems_.emplace(key, std::move(r.model)).first->second;
  }

  /// Best-validation registration net of one arm, CLI cascade defaults.
  const RegModel<float>& reg(std::uint64_t seed, int scale, RegMethod method, double lambda1 = 10.0) {
    std::string key = to_string(method) + "_x" + std::to_string(scale) + "_s" + std::to_string(seed);
    if (lambda1 != 10.0) key += "_l" + fmt(lambda1, 1);
    if (auto it = regs_.find(key); it != regs_.end()) return it->second;
    const fs::path path = dir_ / (key + ".ckpt");
    if (reuse_ && fs::exists(path)) return regs_.emplace(key, reg_from_checkpoint(load_checkpoint(path))).first->second;
    const RemModel<float>* r = method == RegMethod::rereg_down_up ? &rem(seed, scale, RemVariant::I) : nullptr;
    TrainCfg tc = cascade_train_defaults();
    tc.seed = seed;
    tc.scale = scale;
    tc.weights.aux = lambda1;
    const double t0 = cpu_seconds();
    CascadeTrainResult res = train_cascade(data(seed), split(), method, r, RegConfig{3, 8, seed}, tc);
    cost_[key] = cpu_seconds() - t0;
    save_checkpoint(path, checkpoint_of(res.model));
    return regs_.emplace(key, std::move(res.model)).first->second;
  }

  const RemModel<float>* rem_for(std::uint64_t seed, int scale, RegMethod method) {
    return method == RegMethod::rereg_down_up ? &rem(seed, scale, RemVariant::I) : nullptr;
  }

  /// Test-split report row for one arm.
  MetricReportRow evaluate(std::uint64_t seed, int scale, RegMethod method, double lambda1 = 10.0) {
    ArmModels arm{method, nullptr, rem_for(seed, scale, method), ""};
    if (method != RegMethod::identity) arm.reg = &reg(seed, scale, method, lambda1);
    return evaluate_suite(data(seed), split().test, scale, {arm}).front();
  }

 private:
  fs::path dir_;
  bool reuse_;
  std::map<std::uint64_t, std::vector<VolumeSample>> data_;
  std::map<std::string, RemModel<float>> rems_;
  std::map<std::string, RegModel<float>> regs_;
  std::map<std::string, double> cost_;
};

// ---------------------------------------------------------------------------
// Criteria

Verdict parameter_counts() {
  const double t0 = cpu_seconds();
  struct Row {
    int k, n;
    std::int64_t expected;
    const char* rounded;
  };
  const Row rows[] = {{8, 8, 14329, "14.3"},     {16, 8, 56305, "56.3"},     {16, 16, 111729, "111.7"},
                      {32, 8, 223201, "223.2"},  {32, 16, 444641, "444.6"},  {64, 8, 888769, "888.8"},
                      {64, 16, 1774017, "1774.0"}};
  std::string detail;
  bool ok = true;
  for (const Row& r : rows) {
    const std::int64_t got = rem_param_count(RemConfig{RemVariant::I, r.k, r.n});
    const Index built = build_rem<float>(RemConfig{RemVariant::I, r.k, r.n}, 0).num_scalars();
    const std::string k = fmt(static_cast<double>(got) / 1000.0, 1);
    ok = ok && got == r.expected && built == got && k == r.rounded;
    detail += k + "K ";
  }
  const double dt = cpu_seconds() - t0;
  ok = ok && dt < 1.0;
  return {ok ? Verdict::pass : Verdict::fail, detail + "in " + fmt(dt, 3) + " s"};
}

Verdict gradient_suite() {
  const double t0 = cpu_seconds();
  GradCheckCfg cfg;
  cfg.instances = 10;
  const std::set<std::string> required{"conv3d", "relu",  "add",        "trilinear_resize", "warp_trilinear",
                                       "lncc",   "huber", "smoothness", "cascade"};
  std::set<std::string> seen;
  std::string failed;
  double worst = 0.0;
  for (const GradCheckResult& r : gradcheck_all(cfg)) {
    seen.insert(r.op);
    worst = std::max(worst, r.worst);
    if (!r.passed() || r.instances < 10) failed += " " + r.op;
  }
  for (const auto& op : required)
    if (!seen.contains(op)) failed += " missing:" + op;
  const double dt = cpu_seconds() - t0;
  const bool ok = failed.empty() && dt < 120.0;
  return {ok ? Verdict::pass : Verdict::fail, std::to_string(seen.size()) + " ops x 10 instances, worst ratio " +
                                                  fmt(worst, 3) + ", " + fmt(dt, 1) + " s" +
                                                  (failed.empty() ? "" : ", failed:" + failed)};
}

struct SrStats {
  std::vector<double> base_psnr, base_ssim, psnr, ssim;
};

SrStats sr_stats(Lab& lab, RemVariant variant) {
  SrStats s;
  for (std::uint64_t seed : kSeeds) {
    const auto& rem = lab.rem(seed, 2, variant);
    const SrReportRow base = evaluate_rem(nullptr, lab.data(seed), lab.split().test, 2, "trilinear");
    const SrReportRow got = evaluate_rem(&rem, lab.data(seed), lab.split().test, 2, "rem-" + to_string(variant));
    s.base_psnr.push_back(base.psnr);
    s.base_ssim.push_back(base.ssim);
    s.psnr.push_back(got.psnr);
    s.ssim.push_back(got.ssim);
  }
  return s;
}

Verdict rem_efficacy(Lab& lab, SrStats& stats) {
  stats = sr_stats(lab, RemVariant::I);
  double cost = 0.0;
  for (std::uint64_t seed : kSeeds) cost += lab.cpu_cost("rem_I_x2_s" + std::to_string(seed));
  const double gain = mean(stats.psnr) - mean(stats.base_psnr);
  const bool ok = gain >= 1.0 && mean(stats.ssim) >= mean(stats.base_ssim) && (lab.reuse() || cost <= 1800.0);
  std::vector<SrReportRow> rows{{"trilinear", 2, mean(stats.base_psnr), mean(stats.base_ssim)},
                                {"rem-I", 2, mean(stats.psnr), mean(stats.ssim)}};
  sr_report_emit(rows, lab.dir() / "sr_2x.csv");
  return {ok ? Verdict::pass : Verdict::fail,
          "PSNR " + fmt(mean(stats.psnr), 2) + " vs trilinear " + fmt(mean(stats.base_psnr), 2) + " (+" +
              fmt(gain, 2) + " dB), SSIM " + fmt(mean(stats.ssim)) + " vs " + fmt(mean(stats.base_ssim)) +
              ", training " + (lab.reuse() ? "reused" : fmt(cost, 0) + " s CPU")};
}

Verdict variant_ordering(Lab& lab, const SrStats& variant1) {
  const SrStats v3 = sr_stats(lab, RemVariant::III);
  const double a = mean(variant1.psnr), b = mean(v3.psnr);
  return {a >= b - 0.2 ? Verdict::pass : Verdict::fail,
          "Variant I " + fmt(a, 2) + " dB, Variant III " + fmt(b, 2) + " dB"};
}

struct ArmMeans {
  std::vector<double> dice, ncc, psnr, ssim;
};

ArmMeans arm_results(Lab& lab, int scale, RegMethod method, std::vector<MetricReportRow>& rows,
                     double lambda1 = 10.0) {
  ArmMeans m;
  MetricReportRow avg{to_string(method), scale, 0, 0, 0, 0, std::nullopt};
  for (std::uint64_t seed : kSeeds) {
    const MetricReportRow r = lab.evaluate(seed, scale, method, lambda1);
    m.dice.push_back(r.dice);
    m.ncc.push_back(r.ncc);
    m.psnr.push_back(r.psnr);
    m.ssim.push_back(r.ssim);
    avg.dice += r.dice / std::size(kSeeds);
    avg.ncc += r.ncc / std::size(kSeeds);
    avg.psnr += r.psnr / std::size(kSeeds);
    avg.ssim += r.ssim / std::size(kSeeds);
  }
  rows.push_back(avg);
  return m;
}

Verdict cascade_efficacy(Lab& lab, std::map<std::string, ArmMeans>& arms) {
  std::vector<MetricReportRow> rows;
  arms["identity4"] = arm_results(lab, 4, RegMethod::identity, rows);
  arms["rdu4"] = arm_results(lab, 4, RegMethod::reg_down_up, rows);
  arms["rr4"] = arm_results(lab, 4, RegMethod::rereg_down_up, rows);
  arms["identity2"] = arm_results(lab, 2, RegMethod::identity, rows);
  arms["rdu2"] = arm_results(lab, 2, RegMethod::reg_down_up, rows);
  arms["rr2"] = arm_results(lab, 2, RegMethod::rereg_down_up, rows);
  report_emit(rows, lab.dir() / "registration.csv");

  double cost = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const std::string s = "_s" + std::to_string(seed);
    for (const char* k : {"rem_I_x2", "rem_I_x4", "reg_down_up_x4", "rereg_down_up_x4", "reg_down_up_x2",
                          "rereg_down_up_x2"})
      cost += lab.cpu_cost(k + s);
  }
  const double id = mean(arms["identity4"].dice), rdu = mean(arms["rdu4"].dice), rr = mean(arms["rr4"].dice);
  const double ncc_rdu2 = mean(arms["rdu2"].ncc), ncc_rr2 = mean(arms["rr2"].ncc);
  const bool ok = rr > rdu && rdu >= id + 0.05 && rr >= id + 0.05 && ncc_rr2 >= ncc_rdu2 &&
                  (lab.reuse() || cost <= 7200.0);
  return {ok ? Verdict::pass : Verdict::fail,
          "4x Dice rereg_down_up " + fmt(rr) + ", reg_down_up " + fmt(rdu) + ", identity " + fmt(id) +
              "; 2x NCC rereg_down_up " + fmt(ncc_rr2) + ", reg_down_up " + fmt(ncc_rdu2) + "; training " +
              (lab.reuse() ? "reused" : fmt(cost, 0) + " s CPU")};
}

Verdict dimension_effect(Lab& lab, std::map<std::string, ArmMeans>& arms) {
  std::vector<MetricReportRow> rows;
  const ArmMeans down = arm_results(lab, 4, RegMethod::reg_down, rows);
  const double a = mean(arms["rdu4"].dice), b = mean(down.dice);
  return {a > b ? Verdict::pass : Verdict::fail, "4x Dice reg_down_up " + fmt(a) + ", reg_down " + fmt(b)};
}

Verdict aux_ablation(Lab& lab, std::map<std::string, ArmMeans>& arms) {
  std::vector<MetricReportRow> rows;
  const ArmMeans off = arm_results(lab, 4, RegMethod::rereg_down_up, rows, 0.0);
  const ArmMeans& on = arms["rr4"];
  MetricReportRow r_on{"rereg_down_up", 4, mean(on.dice), mean(on.ncc), mean(on.psnr), mean(on.ssim), true};
  MetricReportRow r_off = rows.front();
  r_off.aux_loss = false;
  const std::vector<MetricReportRow> table{r_on, r_off};
  report_emit(table, lab.dir() / "ablation_aux.csv");

  std::vector<double> dd, dn;
  for (std::size_t i = 0; i < on.dice.size(); ++i) {
    dd.push_back(on.dice[i] - off.dice[i]);
    dn.push_back(on.ncc[i] - off.ncc[i]);
  }
  Verdict::Kind kind = Verdict::pass;
  for (const auto* d : {&dd, &dn}) {
    if (mean(*d) >= 0.0) continue;
    const Verdict::Kind k = -mean(*d) <= std_error(*d) ? Verdict::warn : Verdict::fail;
    kind = std::max(kind, k);
  }
  return {kind, "Dice on " + fmt(mean(on.dice)) + " off " + fmt(mean(off.dice)) + " (gap " + fmt(mean(dd)) +
                    " +- " + fmt(std_error(dd)) + "), NCC on " + fmt(mean(on.ncc)) + " off " + fmt(mean(off.ncc)) +
                    " (gap " + fmt(mean(dn)) + " +- " + fmt(std_error(dn)) + ")"};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  if (code != kExitOk) throw Error("command '" + args.front() + "' failed: " + err.str());
  return code;
}

Verdict determinism(const fs::path& root) {
  fs::remove_all(root);
  const std::vector<std::string> small{"--dims", "16", "--num_labels", "4", "--seed", "7"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), small.begin(), small.end());
    return a;
  };
  const std::vector<std::string> rem_args{"--k", "4", "--n", "2", "--steps_per_epoch", "5", "--patch", "8"};
  const std::vector<std::string> reg_args{"--scale", "2", "--levels", "2", "--base_channels", "4",
                                          "--lncc_window", "3"};
  auto plus = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };

  // Two complete pipelines in separate directories.
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string data = (d / "data").string(), rem = (d / "rem.ckpt").string();
    cli(with({"synth", "--out", data}));
    cli(with(plus({"train-rem", "--data", data, "--epochs", "2", "--out", rem, "--best_out",
                   (d / "rem_best.ckpt").string(), "--history", (d / "rem_hist.csv").string(), "--report",
                   (d / "sr.csv").string()},
                  rem_args)));
    for (const char* m : {"reg_down_up", "rereg_down_up"}) {
      const std::string mm(m);
      cli(with(plus({"train-cascade", "--data", data, "--method", mm, "--rem", rem, "--epochs", "2", "--out",
                     (d / (mm + ".ckpt")).string(), "--best_out", (d / (mm + "_best.ckpt")).string(), "--history",
                     (d / (mm + "_hist.csv")).string()},
                    reg_args)));
    }
    cli(with({"evaluate", "--data", data, "--scale", "2", "--reg_down_up", (d / "reg_down_up_best.ckpt").string(),
              "--rereg_down_up", (d / "rereg_down_up_best.ckpt").string(), "--rem", rem, "--out",
              (d / "eval.csv").string(), "--rem_out", (d / "eval_sr.csv").string()}));
  }
  std::vector<std::string> differ;
  long compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    ++compared;
    if (slurp(e.path()) != slurp(root / "b" / rel)) differ.push_back(rel.string());
  }

  // Interrupted runs continued from a checkpoint.
  const fs::path d = root / "a", r = root / "resume";
  fs::create_directories(r);
  const std::string data = (d / "data").string();
  cli(with(plus({"train-rem", "--data", data, "--epochs", "1", "--out", (r / "rem_half.ckpt").string()}, rem_args)));
  cli(with(plus({"train-rem", "--data", data, "--epochs", "2", "--resume", (r / "rem_half.ckpt").string(), "--out",
                 (r / "rem.ckpt").string()},
                rem_args)));
  if (slurp(r / "rem.ckpt") != slurp(d / "rem.ckpt")) differ.push_back("resumed rem.ckpt");
  const std::string rem = (d / "rem.ckpt").string();
  cli(with(plus({"train-cascade", "--data", data, "--method", "rereg_down_up", "--rem", rem, "--epochs", "1",
                 "--out", (r / "reg_half.ckpt").string()},
                reg_args)));
  cli(with(plus({"train-cascade", "--data", data, "--method", "rereg_down_up", "--rem", rem, "--epochs", "2",
                 "--resume", (r / "reg_half.ckpt").string(), "--out", (r / "reg.ckpt").string()},
                reg_args)));
  if (slurp(r / "reg.ckpt") != slurp(d / "rereg_down_up.ckpt")) differ.push_back("resumed rereg_down_up.ckpt");

  std::string detail = std::to_string(compared) + " files compared across two runs, 2 resumed checkpoints";
  for (const auto& f : differ) detail += "; differs: " + f;
  return {differ.empty() && compared > 0 ? Verdict::pass : Verdict::fail, detail};
}

LabelVolume random_labels(std::array<Index, 3> dims, int n, std::mt19937_64& rng) {
  LabelVolume v;
  v.dims = dims;
  v.data.resize(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
  std::uniform_int_distribution<int> u(0, n);
  for (auto& x : v.data) x = static_cast<decltype(v.data)::value_type>(u(rng));
  return v;
}

Verdict metric_oracles() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int instances = 0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::isfinite(a - b) ? std::abs(a - b) : 1.0); };
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 3;
    const Shape s(1, 1, n, n, 5);
    const auto a = oracle::random_volume(s, rng, 0, 1), b = oracle::random_volume(s, rng, 0, 1);
    track(*ncc_global(a, b), oracle::ncc(a, b));
    track(psnr(a, b), oracle::psnr(a, b));
    track(ssim3d(a, b), oracle::ssim(a, b));
    const auto la = random_labels({n, n, 5}, 4, rng), lb = random_labels({n, n, 5}, 4, rng);
    track(dice(la, lb, {1, 2, 3, 4}).mean, oracle::dice(la, lb, {1, 2, 3, 4}));
    for (int window : {3, 5}) {
      const auto x = oracle::random_volume(Shape(1, 1, n, n, 5), rng, 0, 1);
      const auto y = oracle::random_volume(Shape(1, 1, n, n, 5), rng, 0, 1);
      const double got = lncc(Var<double>::leaf(x, false), Var<double>::leaf(y, false), LnccCfg{window, 1e-5})
                             .value()[0];
      track(got, oracle::lncc(x, y, window, 1e-5));
    }
    const auto z = oracle::random_volume(Shape(1, 3, n, n, 5), rng);
    track(smoothness(Var<double>::leaf(z, false)).value()[0], oracle::smoothness(z));
    ++instances;
  }
  return {worst <= 1e-10 ? Verdict::pass : Verdict::fail,
          std::to_string(instances) + " instances per metric, max deviation " + [&] {
            std::ostringstream ss;
            ss << worst;
            return ss.str();
          }()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"remreg acceptance run"};
  std::string workdir = "acceptance";
  bool reuse = false;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "directory for trained models and reports");
  app.add_flag("--reuse", reuse, "load models trained by an earlier run from the workdir");
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Lab lab(workdir, reuse);
  SrStats variant1;
  std::map<std::string, ArmMeans> arms;
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, parameter_counts},
      {2, gradient_suite},
      {3, [&] { return rem_efficacy(lab, variant1); }},
      {4, [&] {
         if (variant1.psnr.empty()) variant1 = sr_stats(lab, RemVariant::I);
         return variant_ordering(lab, variant1);
       }},
      {5, [&] { return cascade_efficacy(lab, arms); }},
      {6, [&] {
         if (!arms.contains("rdu4")) {
           std::vector<MetricReportRow> rows;
           arms["rdu4"] = arm_results(lab, 4, RegMethod::reg_down_up, rows);
         }
         return dimension_effect(lab, arms);
       }},
      {7, [&] {
         if (!arms.contains("rr4")) {
           std::vector<MetricReportRow> rows;
           arms["rr4"] = arm_results(lab, 4, RegMethod::rereg_down_up, rows);
         }
         return aux_ablation(lab, arms);
       }},
      {8, [&] { return determinism(fs::path(workdir) / "pipeline"); }},
      {9, metric_oracles}};

  std::ofstream summary(fs::path(workdir) / "summary.txt");
  bool failed = false;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {Verdict::fail, std::string("error: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed = failed || v.kind == Verdict::fail;
    std::ostringstream line;
    line << "criterion " << id << ": " << label(v.kind) << "  " << v.detail << " [" << fmt(wall, 1) << " s wall]";
    std::cout << line.str() << std::endl;
    summary << line.str() << std::endl;
  }
  return failed ? 1 : 0;
}
