// SPDX-License-Identifier: Apache-2.0
#include "remreg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "remreg/checkpoint.hpp"
#include "remreg/gradcheck.hpp"
#include "remreg/phantom.hpp"
#include "remreg/report.hpp"
#include "remreg/trainer.hpp"
#include "remreg/volume_io.hpp"

namespace remreg {
namespace {

using Keys = std::vector<KeySpec>;

Keys phantom_keys() {
  return {{"seed", "0", "run seed; init, sampling and phantom streams derive from it"},
          {"data", "", "dataset directory written by synth (default: synthesise from seed)"},
          {"count", "12", "number of synthetic phantoms"},
          {"dims", "32", "volume extent, N or L,W,H"},
          {"num_labels", "6", "label regions per phantom"},
          {"deform_amplitude", "5", "max displacement of the per-subject deformation (voxels)"},
          {"smooth_sigma", "4", "smoothing of the per-subject deformation (voxels)"}};
}

Keys concat(Keys a, const Keys& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::map<std::string, Keys>& key_table() {
  static const std::map<std::string, Keys> table = [] {
    std::map<std::string, Keys> t;
    t["synth"] = concat(phantom_keys(), {{"out", "", "output directory"}});
    t["degrade"] = {{"input", "", "intensity volume (.rvol)"},
                    {"scale", "2", "downscaling factor, 2 or 4"},
                    {"out_lr", "", "downscaled volume path"},
                    {"out_up", "", "down-then-up volume path"}};
    t["train-rem"] = concat(phantom_keys(),
                            {{"variant", "I", "REM variant: I, II or III"},
                             {"k", "8", "filters per convolution"},
                             {"n", "4", "intermediate convolution layers"},
                             {"init", "kaiming", "weight init: kaiming or zero"},
                             {"scale", "2", "upscaling factor, 2 or 4"},
                             {"epochs", "20", "training epochs"},
                             {"steps_per_epoch", "100", "optimizer steps per epoch"},
                             {"batch", "2", "patches per step"},
                             {"patch", "16", "patch side"},
                             {"lr0", "0.001", "initial learning rate"},
                             {"decay", "0.95", "learning-rate decay factor"},
                             {"period", "200", "steps between decays"},
                             {"lr_floor", "0.0001", "learning-rate floor"},
                             {"huber_delta", "0.1", "Huber threshold"},
                             {"out", "", "training checkpoint (resumable)"},
                             {"best_out", "", "best-validation model checkpoint"},
                             {"resume", "", "checkpoint to continue from"},
                             {"checkpoint_every", "0", "also save `out` every N epochs (0: only at the end)"},
                             {"history", "", "per-epoch history CSV"},
                             {"report", "", "test-split PSNR/SSIM CSV (trilinear vs REM)"}});
    t["train-cascade"] = concat(phantom_keys(),
                                {{"method", "rereg_down_up", "reg_down_up, rereg_down_up or reg_down"},
                                 {"rem", "", "REM checkpoint (required for rereg_down_up)"},
                                 {"freeze_rem", "true", "keep REM parameters fixed"},
                                 {"scale", "4", "upscaling factor, 2 or 4"},
                                 {"epochs", "10", "epochs over all ordered training pairs"},
                                 {"levels", "3", "registration-net pyramid levels"},
                                 {"base_channels", "8", "registration-net width"},
                                 {"lambda1", "10", "auxiliary loss weight"},
                                 {"lambda2", "1e-8", "smoothness weight"},
                                 {"lncc_window", "5", "LNCC window side (odd)"},
                                 {"lncc_eps", "1e-5", "LNCC denominator stabiliser"},
                                 {"huber_delta", "0.1", "Huber threshold of the auxiliary loss"},
                                 {"lr0", "0.002", "initial learning rate"},
                                 {"decay", "0.9", "learning-rate decay factor"},
                                 {"period", "1000", "steps between decays"},
                                 {"lr_floor", "0.0001", "learning-rate floor"},
                                 {"out", "", "training checkpoint (resumable)"},
                                 {"best_out", "", "best-validation model checkpoint"},
                                 {"resume", "", "checkpoint to continue from"},
                                 {"checkpoint_every", "0", "also save `out` every N epochs (0: only at the end)"},
                                 {"history", "", "per-epoch history CSV"}});
    t["infer-rem"] = {{"rem", "", "REM checkpoint"},
                      {"input", "", "input volume (.rvol)"},
                      {"scale", "", "if set, the input is low resolution and is upsampled by this factor first"},
                      {"out", "", "enhanced volume path"}};
    t["register"] = {{"reg", "", "registration checkpoint"},
                     {"method", "", "arm (default: from the checkpoint)"},
                     {"rem", "", "REM checkpoint (default: the one bundled with reg)"},
                     {"fixed", "", "fixed volume (.rvol)"},
                     {"moving", "", "moving volume (.rvol)"},
                     {"moving_labels", "", "moving label volume to transport"},
                     {"out", "", "warped moving volume"},
                     {"out_labels", "", "warped label volume"},
                     {"out_dvf", "", "displacement field, stored as a checkpoint tensor 'dvf'"}};
    t["evaluate"] = concat(phantom_keys(),
                           {{"scale", "4", "upscaling factor, 2 or 4"},
                            {"methods", "", "comma-separated arms to report (default: identity plus every arm given a checkpoint)"},
                            {"reg_down_up", "", "checkpoint for the reg_down_up arm"},
                            {"rereg_down_up", "", "checkpoint for the rereg_down_up arm"},
                            {"reg_down", "", "checkpoint for the reg_down arm"},
                            {"rem", "", "REM checkpoint (SR report; fallback REM for rereg_down_up)"},
                            {"out", "", "registration report CSV"},
                            {"ablation_on", "", "rereg_down_up checkpoint trained with the auxiliary loss"},
                            {"ablation_off", "", "rereg_down_up checkpoint trained without it"},
                            {"ablation_out", "", "auxiliary-loss ablation CSV"},
                            {"rem_out", "", "SR report CSV (needs rem)"}});
    t["paramcount"] = {{"variant", "I", "REM variant"}, {"k", "16", "filters per convolution"},
                       {"n", "8", "intermediate convolution layers"}};
    t["gradcheck"] = {{"seed", "0", "random instance seed"},
                      {"instances", "10", "random instances per op"},
                      {"ops", "all", "comma-separated op names or 'all'"}};
    return t;
  }();
  return table;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string opt(const RunConfig& c, const std::string& key) { return c.get_optional(key).value_or(""); }

std::string write_text(const std::filesystem::path& p, const std::string& text) {
  write_file(p, std::vector<std::uint8_t>(text.begin(), text.end()));
  return text;
}

// ---------------------------------------------------------------------------
// Dataset plumbing

PhantomCfg phantom_cfg(const RunConfig& c) {
  PhantomCfg p;
  p.dims = c.get_dims("dims");
  p.num_labels = static_cast<int>(c.get_int("num_labels"));
  p.deform_amplitude = c.get_double("deform_amplitude");
  p.smooth_sigma = c.get_double("smooth_sigma");
  p.validate();
  return p;
}

std::vector<VolumeSample> load_dataset(const RunConfig& c) {
  const std::string dir = opt(c, "data");
  if (dir.empty()) {
    const long count = c.get_int("count");
    if (count < 3) throw ConfigError("count must be >= 3");
    return make_dataset(c.get_u64("seed"), static_cast<std::size_t>(count), phantom_cfg(c));
  }
  std::ifstream manifest(std::filesystem::path(dir) / "manifest.txt");
  if (!manifest) throw IoError("no manifest.txt in " + dir);
  std::vector<VolumeSample> out;
  std::string id;
  while (std::getline(manifest, id)) {
    if (id.empty()) continue;
    const auto base = std::filesystem::path(dir);
    out.push_back({id, read_intensity(base / (id + ".rvol")), read_labels(base / (id + "_labels.rvol"))});
  }
  if (out.size() < 3) throw ConfigError("dataset in " + dir + " has fewer than 3 samples");
  return out;
}

// ---------------------------------------------------------------------------
// Model loading

RemModel<float> load_rem(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  RemModel<float> rem = rem_from_checkpoint(ckpt);
  if (ckpt.has_tensor("best/rem/" + rem.params.front().name)) import_params(ckpt, rem.params, "best/rem/");
  return rem;
}

struct LoadedReg {
  RegModel<float> reg;
  std::optional<RemModel<float>> rem;
  std::optional<RegMethod> method;
};

LoadedReg load_reg(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedReg out{reg_from_checkpoint(ckpt), std::nullopt, std::nullopt};
  if (ckpt.has_tensor("best/reg/" + out.reg.params.front().name)) import_params(ckpt, out.reg.params, "best/reg/");
  if (ckpt.rem) out.rem = rem_from_checkpoint(ckpt);
  if (ckpt.extra.contains("method")) out.method = parse_method(ckpt.extra["method"].get<std::string>());
  return out;
}

Checkpoint cascade_model_checkpoint(const CascadeTrainer& t) {
  Checkpoint c = checkpoint_of(t.best_model());
  if (const RemModel<float>* rem = t.rem()) {
    c.rem = rem->config;
    export_params(c, rem->params, "rem/");
  }
  c.extra = {{"method", to_string(t.method())}};
  return c;
}

void write_history(const std::filesystem::path& path, const TrainHistory& h) {
  std::vector<std::string> keys;
  if (!h.epochs.empty()) {
    for (const auto& kv : h.epochs.front().val) keys.push_back(kv.first);
  }
  std::string text = "epoch,step,train_loss";
  for (const auto& k : keys) text += ",val_" + k;
  text += '\n';
  for (const auto& e : h.epochs) {
    text += std::to_string(e.epoch) + ',' + std::to_string(e.step) + ',' + format_fixed6(e.train_loss);
    for (const auto& k : keys) text += ',' + format_fixed6(e.val.at(k));
    text += '\n';
  }
  write_text(path, text);
}

TrainCfg schedule_from(const RunConfig& c, TrainCfg t) {
  t.seed = c.get_u64("seed");
  t.scale = static_cast<int>(c.get_int("scale"));
  t.epochs = static_cast<int>(c.get_int("epochs"));
  t.schedule = {c.get_double("lr0"), c.get_double("decay"), c.get_int("period"), c.get_double("lr_floor")};
  t.huber_delta = c.get_double("huber_delta");
  return t;
}

// Runs a trainer to completion, saving `out` every `every` epochs if asked.
template <typename Trainer>
void run_with_checkpoints(Trainer& t, long steps_per_epoch, const RunConfig& c, std::ostream& err) {
  const long every = c.get_int("checkpoint_every");
  const std::string out = c.get("out");
  while (!t.done()) {
    const long chunk = every > 0 ? every * steps_per_epoch : t.total_steps();
    t.run(t.step() + chunk);
    if (every > 0 && !t.done()) {
      save_checkpoint(out, t.checkpoint());
      err << "checkpoint at step " << t.step() << " -> " << out << '\n';
    }
  }
  save_checkpoint(out, t.checkpoint());
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(const RunConfig& c, std::ostream& out, std::ostream&) {
  c.require({"out"});
  const auto data = load_dataset(c);
  const std::filesystem::path dir = c.get("out");
  std::filesystem::create_directories(dir);
  std::string manifest;
  for (const auto& s : data) {
    write_volume(dir / (s.id + ".rvol"), s.intensity);
    write_volume(dir / (s.id + "_labels.rvol"), s.labels);
    manifest += s.id + '\n';
  }
  write_text(dir / "manifest.txt", manifest);
  const DatasetSplit split = split_dataset(data.size());
  out << "wrote " << data.size() << " phantoms to " << dir.string() << " (split " << split.train.size() << "/"
      << split.validation.size() << "/" << split.test.size() << ")\n";
  return kExitOk;
}

int cmd_degrade(const RunConfig& c, std::ostream& out, std::ostream&) {
  c.require({"input", "out_lr", "out_up"});
  const Degraded d = degrade(read_intensity(c.get("input")), static_cast<int>(c.get_int("scale")));
  write_volume(c.get("out_lr"), d.lr);
  write_volume(c.get("out_up"), d.lr_up);
  out << "lr " << d.lr.shape().str() << ", lr_up " << d.lr_up.shape().str() << '\n';
  return kExitOk;
}

int cmd_train_rem(const RunConfig& c, std::ostream& out, std::ostream& err) {
  c.require({"out"});
  const auto data = load_dataset(c);
  const DatasetSplit split = split_dataset(data.size());
  RemConfig rc{parse_variant(c.get("variant")), static_cast<int>(c.get_int("k")), static_cast<int>(c.get_int("n"))};
  rc.validate();
  TrainCfg tc = schedule_from(c, rem_train_defaults());
  tc.steps_per_epoch = static_cast<int>(c.get_int("steps_per_epoch"));
  tc.batch_size = static_cast<int>(c.get_int("batch"));
  tc.patch_size = static_cast<int>(c.get_int("patch"));
  const std::string init = c.get("init");
  if (init != "kaiming" && init != "zero") throw ConfigError("init must be kaiming or zero");
  RemTrainer t(data, split, rc, tc, init == "zero" ? RemInit::zero : RemInit::kaiming);
  if (const std::string r = opt(c, "resume"); !r.empty()) {
    t.restore(load_checkpoint(r));
    err << "resumed at step " << t.step() << '\n';
  }
  run_with_checkpoints(t, tc.steps_per_epoch, c, err);
  const RemModel<float> best = t.best_model();
  if (const std::string p = opt(c, "best_out"); !p.empty()) save_checkpoint(p, checkpoint_of(best));
  if (const std::string p = opt(c, "history"); !p.empty()) write_history(p, t.history());
  const auto& h = t.history();
  const auto& be = h.epochs[static_cast<std::size_t>(h.best_epoch)];
  out << "best epoch " << be.epoch << ": val psnr " << format_fixed6(be.val.at("psnr")) << " ssim "
      << format_fixed6(be.val.at("ssim")) << '\n';
  if (const std::string p = opt(c, "report"); !p.empty()) {
    const std::vector<SrReportRow> rows{evaluate_rem(nullptr, data, split.test, tc.scale, "trilinear"),
                                        evaluate_rem(&best, data, split.test, tc.scale, "rem-" + to_string(rc.variant))};
    sr_report_emit(rows, p);
    out << format_sr_report(rows);
  }
  return kExitOk;
}

int cmd_train_cascade(const RunConfig& c, std::ostream& out, std::ostream& err) {
  c.require({"out"});
  const auto data = load_dataset(c);
  const DatasetSplit split = split_dataset(data.size());
  const RegMethod method = parse_method(c.get("method"));
  std::optional<RemModel<float>> rem;
  if (method == RegMethod::rereg_down_up) {
    c.require({"rem"});
    rem = load_rem(c.get("rem"));
  }
  const RegConfig gc{static_cast<int>(c.get_int("levels")), static_cast<int>(c.get_int("base_channels")),
                     c.get_u64("seed")};
  TrainCfg tc = schedule_from(c, cascade_train_defaults());
  tc.weights = {c.get_double("lambda1"), c.get_double("lambda2")};
  tc.lncc = {static_cast<int>(c.get_int("lncc_window")), c.get_double("lncc_eps")};
  tc.freeze_rem = c.get_bool("freeze_rem");
  CascadeTrainer t(data, split, method, rem ? &*rem : nullptr, gc, tc);
  if (const std::string r = opt(c, "resume"); !r.empty()) {
    t.restore(load_checkpoint(r));
    err << "resumed at step " << t.step() << '\n';
  }
  run_with_checkpoints(t, t.steps_per_epoch(), c, err);
  if (const std::string p = opt(c, "best_out"); !p.empty()) save_checkpoint(p, cascade_model_checkpoint(t));
  if (const std::string p = opt(c, "history"); !p.empty()) write_history(p, t.history());
  const auto& h = t.history();
  const auto& be = h.epochs[static_cast<std::size_t>(h.best_epoch)];
  out << "best epoch " << be.epoch << ": val dice " << format_fixed6(be.val.at("dice")) << " ncc "
      << format_fixed6(be.val.at("ncc")) << '\n';
  return kExitOk;
}

int cmd_infer_rem(const RunConfig& c, std::ostream& out, std::ostream&) {
  c.require({"rem", "input", "out"});
  const RemModel<float> rem = load_rem(c.get("rem"));
  Tensor<float> x = read_intensity(c.get("input"));
  if (c.has("scale")) {
    const long s = c.get_int("scale");
    if (s < 1) throw ConfigError("scale must be positive");
    x = trilinear_resize(Var<float>::constant(x), static_cast<double>(s)).value();
  }
  const Tensor<float> y = rem_forward(rem, Var<float>::constant(x)).value();
  write_volume(c.get("out"), y);
  out << "enhanced " << y.shape().str() << '\n';
  return kExitOk;
}

int cmd_register(const RunConfig& c, std::ostream& out, std::ostream&) {
  c.require({"reg", "fixed", "moving"});
  LoadedReg lr = load_reg(c.get("reg"));
  if (c.has("rem")) lr.rem = load_rem(c.get("rem"));
  RegMethod method = lr.rem ? RegMethod::rereg_down_up : RegMethod::reg_down_up;
  if (lr.method) method = *lr.method;
  if (c.has("method")) method = parse_method(c.get("method"));
  const Tensor<float> fixed = read_intensity(c.get("fixed"));
  const Tensor<float> moving = read_intensity(c.get("moving"));
  const Tensor<float> dvf = predict_dvf(method, lr.rem ? &*lr.rem : nullptr, &lr.reg, fixed, moving);
  if (c.has("out")) {
    write_volume(c.get("out"),
                 warp_trilinear(Var<float>::constant(moving), Var<float>::constant(dvf)).value());
  }
  if (c.has("out_labels")) {
    c.require({"moving_labels"});
    write_volume(c.get("out_labels"), warp_nearest(read_labels(c.get("moving_labels")), dvf));
  }
  if (c.has("out_dvf")) {
    Checkpoint ck;
    ck.add_tensor("dvf", dvf);
    save_checkpoint(c.get("out_dvf"), ck);
  }
  double max_norm = 0.0;
  const Index vox = dvf.shape().spatial();
  for (Index i = 0; i < vox; ++i) {
    double s = 0.0;
    for (Index ch = 0; ch < 3; ++ch) s += double(dvf[ch * vox + i]) * dvf[ch * vox + i];
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  out << "method " << to_string(method) << ", max displacement " << format_fixed6(max_norm) << " voxels\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream&) {
  const auto data = load_dataset(c);
  const DatasetSplit split = split_dataset(data.size());
  const int scale = static_cast<int>(c.get_int("scale"));
  std::optional<RemModel<float>> rem;
  if (c.has("rem")) rem = load_rem(c.get("rem"));
  std::map<std::string, LoadedReg> loaded;

  auto arm_for = [&](RegMethod m, const std::string& key) {
    ArmModels a;
    a.method = m;
    if (m == RegMethod::identity) return a;
    if (!c.has(key)) throw ConfigError("missing model for requested cell " + to_string(m) + " (set " + key + ")");
    auto it = loaded.find(key);
    if (it == loaded.end()) it = loaded.emplace(key, load_reg(c.get(key))).first;
    a.reg = &it->second.reg;
    if (m == RegMethod::rereg_down_up) {
      if (it->second.rem) {
        a.rem = &*it->second.rem;
      } else if (rem) {
        a.rem = &*rem;
      } else {
        throw ConfigError("no REM for " + key + ": checkpoint has none and rem is unset");
      }
    }
    return a;
  };

  bool wrote = false;
  if (c.has("out")) {
    std::vector<ArmModels> arms;
    std::vector<std::string> names{"identity"};
    if (c.has("methods")) {
      names = split_list(c.get("methods"));
    } else {
      for (const char* key : {"reg_down_up", "rereg_down_up", "reg_down"}) {
        if (c.has(key)) names.emplace_back(key);
      }
    }
    for (const auto& name : names) {
      const RegMethod m = parse_method(name);
      arms.push_back(arm_for(m, to_string(m)));
    }
    if (arms.empty()) throw ConfigError("methods is empty");
    const auto rows = evaluate_suite(data, split.test, scale, arms);
    report_emit(rows, c.get("out"));
    out << format_report(rows);
    wrote = true;
  }
  if (c.has("ablation_out")) {
    c.require({"ablation_on", "ablation_off"});
    std::vector<MetricReportRow> rows;
    for (const auto& [key, on] : {std::pair{std::string("ablation_on"), true}, {std::string("ablation_off"), false}}) {
      for (MetricReportRow r : evaluate_suite(data, split.test, scale, {arm_for(RegMethod::rereg_down_up, key)})) {
        r.aux_loss = on;
        rows.push_back(r);
      }
    }
    report_emit(rows, c.get("ablation_out"));
    out << format_report(rows);
    wrote = true;
  }
  if (c.has("rem_out")) {
    if (!rem) throw ConfigError("rem_out needs rem");
    const std::vector<SrReportRow> rows{evaluate_rem(nullptr, data, split.test, scale, "trilinear"),
                                        evaluate_rem(&*rem, data, split.test, scale,
                                                     "rem-" + to_string(rem->config.variant))};
    sr_report_emit(rows, c.get("rem_out"));
    out << format_sr_report(rows);
    wrote = true;
  }
  if (!wrote) throw ConfigError("evaluate: set at least one of out, ablation_out, rem_out");
  return kExitOk;
}

int cmd_paramcount(const RunConfig& c, std::ostream& out, std::ostream&) {
  RemConfig rc{parse_variant(c.get("variant")), static_cast<int>(c.get_int("k")), static_cast<int>(c.get_int("n"))};
  rc.validate();
  out << rem_param_count(rc) << '\n';
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out, std::ostream&) {
  GradCheckCfg g;
  g.seed = c.get_u64("seed");
  g.instances = static_cast<int>(c.get_int("instances"));
  if (g.instances < 1) throw ConfigError("instances must be >= 1");
  std::vector<std::string> ops = c.get("ops") == "all" ? gradcheck_ops() : split_list(c.get("ops"));
  bool ok = true;
  out << std::left << std::setw(18) << "op" << std::setw(11) << "instances" << std::setw(9) << "checked"
      << std::setw(10) << "failures" << std::setw(12) << "worst" << "status\n";
  for (const auto& op : ops) {
    const GradCheckResult r = gradcheck_op(op, g);
    ok = ok && r.passed();
    out << std::setw(18) << r.op << std::setw(11) << r.instances << std::setw(9) << r.checked << std::setw(10)
        << r.failures << std::setw(12) << format_fixed6(r.worst) << (r.passed() ? "PASS" : "FAIL") << '\n';
  }
  return ok ? kExitOk : kExitFailure;
}

using Handler = std::function<int(const RunConfig&, std::ostream&, std::ostream&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"synth", cmd_synth},         {"degrade", cmd_degrade},   {"train-rem", cmd_train_rem},
      {"train-cascade", cmd_train_cascade}, {"infer-rem", cmd_infer_rem}, {"register", cmd_register},
      {"evaluate", cmd_evaluate},   {"paramcount", cmd_paramcount}, {"gradcheck", cmd_gradcheck}};
  return h;
}

std::string usage() {
  std::string u = "usage: remreg <subcommand> [--config FILE] [--key value ...]\n\nsubcommands:\n";
  for (const auto& s : cli_subcommands()) u += "  " + s + "\n";
  u += "\nrun `remreg <subcommand> --help` for its keys.\n";
  return u;
}

}  // namespace

std::vector<std::string> cli_subcommands() {
  return {"synth", "degrade", "train-rem", "train-cascade", "infer-rem", "register", "evaluate", "paramcount",
          "gradcheck"};
}

std::vector<KeySpec> cli_keys(const std::string& subcommand) {
  auto it = key_table().find(subcommand);
  if (it == key_table().end()) throw ConfigError("unknown subcommand '" + subcommand + "'");
  return it->second;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << usage();
    return kExitUsage;
  }
  const std::string& sub = args.front();
  if (sub == "--help" || sub == "-h" || sub == "help") {
    out << usage();
    return kExitOk;
  }
  const auto h = handlers().find(sub);
  if (h == handlers().end()) {
    err << "unknown subcommand '" << sub << "'\n" << usage();
    return kExitUsage;
  }

  const Keys keys = cli_keys(sub);
  CLI::App app("remreg " + sub, "remreg " + sub);
  std::string config_file;
  app.add_option("--config", config_file, "key=value file; command-line keys override it");
  std::map<std::string, std::string> given;
  std::map<std::string, CLI::Option*> options;
  for (const auto& k : keys) {
    std::string help = k.help;
    if (!k.default_value.empty()) help += " [default: " + k.default_value + "]";
    options[k.key] = app.add_option("--" + k.key, given[k.key], help);
  }
  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "remreg " << sub << ": " << e.what() << "\nrun `remreg " << sub << " --help` for accepted keys\n";
    return kExitUsage;
  }

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& k : keys) {
      if (options[k.key]->count() > 0) overrides.emplace_back(k.key, given[k.key]);
    }
    std::optional<std::filesystem::path> file;
    if (!config_file.empty()) file = config_file;
    const RunConfig cfg = parse_config(keys, file, overrides);
    err << "[" << sub << "] resolved config:\n" << cfg.resolved();
    return h->second(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "remreg " << sub << ": config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "remreg " << sub << ": error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "remreg " << sub << ": unexpected error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace remreg
