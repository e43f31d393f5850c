// SPDX-License-Identifier: Apache-2.0
#include "remreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "remreg/metrics.hpp"
#include "remreg/ops.hpp"
#include "remreg/random.hpp"

namespace remreg {

using nlohmann::json;

void TrainCfg::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (patch_size < 4) throw ConfigError("patch size must be >= 4");
  if (huber_delta <= 0.0) throw ConfigError("huber_delta must be positive");
  if (scale != 2 && scale != 4) throw ConfigError("scale must be 2 or 4");
  schedule.validate();
  weights.validate();
  lncc.validate();
}

TrainCfg rem_train_defaults() { return TrainCfg{}; }

TrainCfg cascade_train_defaults() {
  TrainCfg c;
  c.epochs = 10;
  c.batch_size = 1;
  c.schedule = cascade_schedule();
  return c;
}

double smoothed_loss(const std::vector<double>& step_loss, long step, int window) {
  if (step < 0 || step >= static_cast<long>(step_loss.size())) throw ConfigError("smoothed_loss: step out of range");
  const long first = std::max(0L, step - window + 1);
  double acc = 0.0;
  for (long i = first; i <= step; ++i) acc += step_loss[static_cast<std::size_t>(i)];
  return acc / static_cast<double>(step - first + 1);
}

namespace {

json cfg_json(const TrainCfg& c) {
  // Everything except the epoch budget, which a resumed run may extend.
  return {{"steps_per_epoch", c.steps_per_epoch},
          {"batch_size", c.batch_size},
          {"patch_size", c.patch_size},
          {"lr0", c.schedule.lr0},
          {"decay", c.schedule.decay},
          {"period", c.schedule.period},
          {"lr_floor", c.schedule.floor},
          {"lambda1", c.weights.aux},
          {"lambda2", c.weights.reg},
          {"lncc_window", c.lncc.window},
          {"lncc_eps", c.lncc.eps},
          {"huber_delta", c.huber_delta},
          {"seed", c.seed},
          {"freeze_rem", c.freeze_rem},
          {"scale", c.scale}};
}

json history_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"step", e.step}, {"train_loss", e.train_loss}, {"val", e.val}});
  }
  return {{"step_loss", h.step_loss}, {"epochs", epochs}, {"best_epoch", h.best_epoch}};
}

TrainHistory history_from_json(const json& j) {
  TrainHistory h;
  h.step_loss = j.at("step_loss").get<std::vector<double>>();
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at("epoch").get<int>(), e.at("step").get<long>(), e.at("train_loss").get<double>(),
                        e.at("val").get<std::map<std::string, double>>()});
  }
  h.best_epoch = j.at("best_epoch").get<int>();
  return h;
}

void check_resume(const Checkpoint& ckpt, const std::string& kind, const TrainCfg& cfg) {
  if (!ckpt.extra.contains("kind") || ckpt.extra["kind"] != kind) {
    throw ConfigError("checkpoint is not a " + kind + " training state");
  }
  if (ckpt.extra.at("train_cfg") != cfg_json(cfg)) {
    throw ConfigError("checkpoint training config differs from the requested one");
  }
}

std::vector<Tensor<float>> snapshot(const std::vector<Param<float>>& params) {
  std::vector<Tensor<float>> out;
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

void load_snapshot(std::vector<Param<float>>& params, const std::vector<Tensor<float>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].var.mutable_value() = values[i];
}

void export_snapshot(Checkpoint& ckpt, const std::vector<Param<float>>& params,
                     const std::vector<Tensor<float>>& values, const std::string& prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) ckpt.add_tensor(prefix + params[i].name, values[i]);
}

std::vector<Tensor<float>> import_snapshot(const Checkpoint& ckpt, const std::vector<Param<float>>& params,
                                           const std::string& prefix) {
  std::vector<Tensor<float>> out;
  for (const auto& p : params) {
    const Tensor<float>& t = ckpt.tensor(prefix + p.name);
    if (!(t.shape() == p.var.shape())) throw DimensionError("shape mismatch for '" + prefix + p.name + "'");
    out.push_back(t);
  }
  return out;
}

Tensor<float> crop(const Tensor<float>& vol, const std::array<Index, 3>& at, Index p) {
  Tensor<float> out(Shape(1, 1, p, p, p));
  float* dst = out.ptr();
  for (Index l = 0; l < p; ++l) {
    for (Index w = 0; w < p; ++w) {
      const float* src = vol.ptr() + vol.offset(0, 0, at[0] + l, at[1] + w, at[2]);
      dst = std::copy_n(src, p, dst);
    }
  }
  return out;
}

Var<float> constant(const Tensor<float>& t) { return Var<float>::constant(t); }

RemModel<float> clone_rem(const RemModel<float>& m) { return {m.config, clone_params(m.params)}; }

}  // namespace

// ---------------------------------------------------------------------------
// RemTrainer

RemTrainer::RemTrainer(const std::vector<VolumeSample>& data, const DatasetSplit& split, const RemConfig& rem_cfg,
                       const TrainCfg& cfg, RemInit init)
    : cfg_(cfg), model_(build_rem<float>(rem_cfg, cfg.seed, init)) {
  cfg_.validate();
  if (split.train.empty()) throw ConfigError("train_rem: empty training split");
  auto make_pair = [&](std::size_t i) {
    if (i >= data.size()) throw ConfigError("split index " + std::to_string(i) + " outside dataset");
    const Tensor<float>& gt = data[i].intensity;
    for (Index d : gt.shape().spatial_dims()) {
      if (cfg_.patch_size > d) throw DimensionError("patch size larger than volume " + gt.shape().str());
    }
    return Pair{degrade(gt, cfg_.scale).lr_up, gt};
  };
  for (std::size_t i : split.train) train_.push_back(make_pair(i));
  // Without a validation split the first training volume stands in.
  const auto& val_idx = split.validation.empty() ? std::vector<std::size_t>{split.train.front()} : split.validation;
  for (std::size_t i : val_idx) val_.push_back(make_pair(i));
  best_ = snapshot(model_.params);
  validate_epoch(0, 0.0);
}

double RemTrainer::train_step() {
  Rng rng(derive_seed(cfg_.seed, "sampling", static_cast<std::uint64_t>(step_)));
  const Index p = cfg_.patch_size;
  std::vector<Var<float>> xs, ys;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);
    const Pair& pr = train_[pick(rng)];
    std::array<Index, 3> at{};
    const auto dims = pr.gt.shape().spatial_dims();
    for (int a = 0; a < 3; ++a) at[a] = std::uniform_int_distribution<Index>(0, dims[a] - p)(rng);
    xs.push_back(constant(crop(pr.lr_up, at, p)));
    ys.push_back(constant(crop(pr.gt, at, p)));
  }
  const Var<float> out = rem_forward(model_, concat_batch(xs));
  const Var<float> loss = huber(out, concat_batch(ys), cfg_.huber_delta);
  backward(loss);
  adam_step(model_.params, adam_, lr_schedule(step_, cfg_.schedule));
  ++step_;
  return loss.item();
}

void RemTrainer::validate_epoch(int epoch, double train_loss) {
  double ps = 0.0, ss = 0.0;
  for (const Pair& pr : val_) {
    const Tensor<float> out = rem_forward(model_, constant(pr.lr_up)).value();
    ps += psnr(out, pr.gt);
    ss += ssim3d(out, pr.gt);
  }
  const double n = static_cast<double>(val_.size());
  EpochRecord rec{epoch, step_, train_loss, {{"psnr", ps / n}, {"ssim", ss / n}}};
  if (history_.epochs.empty() || rec.val["psnr"] > history_.epochs[history_.best_epoch].val.at("psnr")) {
    history_.best_epoch = epoch;
    best_ = snapshot(model_.params);
  }
  history_.epochs.push_back(std::move(rec));
}

void RemTrainer::run(long until) {
  until = std::min(until, total_steps());
  while (step_ < until) {
    history_.step_loss.push_back(train_step());
    if (step_ % cfg_.steps_per_epoch == 0) {
      const auto first = history_.step_loss.end() - cfg_.steps_per_epoch;
      const double mean = std::accumulate(first, history_.step_loss.end(), 0.0) / cfg_.steps_per_epoch;
      validate_epoch(static_cast<int>(step_ / cfg_.steps_per_epoch), mean);
    }
  }
}

RemModel<float> RemTrainer::best_model() const {
  RemModel<float> m = clone_rem(model_);
  load_snapshot(m.params, best_);
  return m;
}

Checkpoint RemTrainer::checkpoint() const {
  Checkpoint c;
  c.iteration = step_;
  c.rem = model_.config;
  export_params(c, model_.params, "rem/");
  export_snapshot(c, model_.params, best_, "best/rem/");
  export_adam(c, adam_, "adam/");
  c.extra = {{"kind", "rem"}, {"train_cfg", cfg_json(cfg_)}, {"history", history_json(history_)}};
  return c;
}

void RemTrainer::restore(const Checkpoint& ckpt) {
  check_resume(ckpt, "rem", cfg_);
  if (!ckpt.rem || !(*ckpt.rem == model_.config)) throw ConfigError("checkpoint REM config differs");
  import_params(ckpt, model_.params, "rem/");
  best_ = import_snapshot(ckpt, model_.params, "best/rem/");
  adam_ = import_adam(ckpt, "adam/");
  history_ = history_from_json(ckpt.extra.at("history"));
  step_ = ckpt.iteration;
}

RemTrainResult train_rem(const std::vector<VolumeSample>& data, const DatasetSplit& split, const RemConfig& rem_cfg,
                         const TrainCfg& cfg, RemInit init) {
  RemTrainer t(data, split, rem_cfg, cfg, init);
  t.run();
  return {t.best_model(), t.history()};
}

SrReportRow evaluate_rem(const RemModel<float>* rem, const std::vector<VolumeSample>& data,
                         const std::vector<std::size_t>& indices, int scale, const std::string& method) {
  if (indices.empty()) throw ConfigError("evaluate_rem: no samples");
  double ps = 0.0, ss = 0.0;
  for (std::size_t i : indices) {
    const Tensor<float>& gt = data.at(i).intensity;
    Tensor<float> pred = degrade(gt, scale).lr_up;
    if (rem) pred = rem_forward(*rem, constant(pred)).value();
    ps += psnr(pred, gt);
    ss += ssim3d(pred, gt);
  }
  const double n = static_cast<double>(indices.size());
  return {method, scale, ps / n, ss / n};
}

// ---------------------------------------------------------------------------
// Registration

std::string to_string(RegMethod m) {
  switch (m) {
    case RegMethod::identity: return "identity";
    case RegMethod::reg_down_up: return "reg_down_up";
    case RegMethod::rereg_down_up: return "rereg_down_up";
    case RegMethod::reg_down: return "reg_down";
  }
  return "?";
}

RegMethod parse_method(const std::string& s) {
  for (RegMethod m : {RegMethod::identity, RegMethod::reg_down_up, RegMethod::rereg_down_up, RegMethod::reg_down}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "' (identity, reg_down_up, rereg_down_up, reg_down)");
}

ArmData prepare_arm(const std::vector<VolumeSample>& data, RegMethod method, int scale) {
  ArmData arm;
  for (const auto& s : data) {
    Degraded d = degrade(s.intensity, scale);
    if (method == RegMethod::reg_down) {
      const auto lr_dims = d.lr.shape().spatial_dims();
      arm.labels.push_back(resize_labels(s.labels, lr_dims));
      arm.ref.push_back(d.lr);
      arm.input.push_back(std::move(d.lr));
    } else {
      arm.labels.push_back(s.labels);
      arm.ref.push_back(s.intensity);
      arm.input.push_back(std::move(d.lr_up));
    }
  }
  return arm;
}

std::vector<int> dataset_labels(const std::vector<VolumeSample>& data) {
  std::set<int> seen;
  for (const auto& s : data) {
    for (std::uint16_t v : s.labels.data) {
      if (v != 0) seen.insert(v);
    }
  }
  return {seen.begin(), seen.end()};
}

Tensor<float> predict_dvf(RegMethod method, const RemModel<float>* rem, const RegModel<float>* reg,
                          const Tensor<float>& fixed, const Tensor<float>& moving) {
  require_same_shape(fixed.shape(), moving.shape(), "predict_dvf");
  if (method == RegMethod::identity) {
    const auto d = fixed.shape().spatial_dims();
    return Tensor<float>(Shape(1, 3, d[0], d[1], d[2]));
  }
  if (!reg) throw ConfigError("missing registration model for " + to_string(method));
  if (method == RegMethod::rereg_down_up && !rem) throw ConfigError("missing REM for rereg_down_up");
  const RemModel<float>* r = method == RegMethod::rereg_down_up ? rem : nullptr;
  return cascade_forward(r, *reg, constant(fixed), constant(moving)).dvf.value();
}

PairMetrics pair_metrics(const ArmData& arm, std::size_t fixed, std::size_t moving, const Tensor<float>& dvf,
                         const std::vector<int>& labels) {
  PairMetrics m;
  const LabelVolume warped_labels = warp_nearest(arm.labels.at(moving), dvf);
  m.dice = dice(arm.labels.at(fixed), warped_labels, labels).mean;
  const Tensor<float> warped = warp_trilinear(constant(arm.ref.at(moving)), constant(dvf)).value();
  const Tensor<float>& ref = arm.ref.at(fixed);
  m.ncc = ncc_global(warped, ref).value_or(std::numeric_limits<double>::quiet_NaN());
  m.psnr = psnr(warped, ref);
  m.ssim = ssim3d(warped, ref);
  return m;
}

CascadeTrainer::CascadeTrainer(const std::vector<VolumeSample>& data, const DatasetSplit& split, RegMethod method,
                               const RemModel<float>* rem, const RegConfig& reg_cfg, const TrainCfg& cfg)
    : cfg_(cfg), method_(method), reg_(build_reg<float>(reg_cfg)) {
  cfg_.validate();
  if (method == RegMethod::identity) throw ConfigError("the identity arm has nothing to train");
  if (method == RegMethod::rereg_down_up) {
    if (!rem) throw ConfigError("rereg_down_up needs a REM");
    rem_ = std::make_unique<RemModel<float>>(clone_rem(*rem));
    rem_->set_frozen(cfg_.freeze_rem);
  } else if (rem) {
    throw ConfigError(to_string(method) + " does not use a REM");
  }
  if (split.train.size() < 2) throw ConfigError("train_cascade needs at least two training samples");
  for (auto idx : {split.train, split.validation}) {
    for (std::size_t i : idx) {
      if (i >= data.size()) throw ConfigError("split index " + std::to_string(i) + " outside dataset");
    }
  }
  arm_ = prepare_arm(data, method, cfg_.scale);
  const Index div = Index{1} << reg_cfg.levels;
  for (Index d : arm_.input.front().shape().spatial_dims()) {
    if (d % div != 0) {
      throw DimensionError("network grid " + arm_.input.front().shape().str() + " not divisible by 2^levels = " +
                           std::to_string(div));
    }
  }
  for (std::size_t f : split.train) {
    for (std::size_t m : split.train) {
      if (f != m) pairs_.emplace_back(f, m);
    }
  }
  const std::size_t anchor = split.train.front();
  if (split.validation.empty()) {
    val_pairs_ = {{anchor, split.train[1]}, {split.train[1], anchor}};
  } else {
    for (std::size_t v : split.validation) {
      val_pairs_.emplace_back(v, anchor);
      val_pairs_.emplace_back(anchor, v);
    }
  }
  labels_ = dataset_labels(data);
  if (rem_ && cfg_.freeze_rem) {
    sr_cache_.resize(data.size());
    std::set<std::size_t> used(split.train.begin(), split.train.end());
    used.insert(split.validation.begin(), split.validation.end());
    for (std::size_t i : used) sr_cache_[i] = rem_forward(*rem_, constant(arm_.input[i])).value();
  }
  best_ = snapshot(reg_.params);
  validate_epoch(0, 0.0);
}

CascadeTrainer::Forward CascadeTrainer::forward(std::size_t fixed, std::size_t moving) const {
  if (!sr_cache_.empty()) {
    Var<float> f = constant(sr_cache_[fixed]);
    Var<float> m = constant(sr_cache_[moving]);
    Dvf<float> dvf = reg_forward(reg_, rearrange_pair(concat_batch<float>({f, m})));
    return {f, m, dvf};
  }
  auto out = cascade_forward(rem_.get(), reg_, constant(arm_.input[fixed]), constant(arm_.input[moving]));
  return {out.fixed_sr, out.moving_sr, out.dvf};
}

double CascadeTrainer::train_step() {
  const long per_epoch = steps_per_epoch();
  const long epoch = step_ / per_epoch;
  auto order = pairs_;
  Rng rng(derive_seed(cfg_.seed, "sampling", static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  const auto [fi, mi] = order[static_cast<std::size_t>(step_ % per_epoch)];

  const Forward fw = forward(fi, mi);
  LossWeights w = cfg_.weights;
  if (!rem_) w.aux = 0.0;
  const Var<float> main = main_loss(fw.dvf, fw.fixed_sr, fw.moving_sr, cfg_.lncc);
  Var<float> aux, reg;
  if (w.aux != 0.0) aux = aux_loss(rem_.get(), fw.dvf, constant(arm_.input[mi]), fw.fixed_sr, cfg_.huber_delta);
  if (w.reg != 0.0) reg = smoothness(fw.dvf);
  const Var<float> total = total_loss(main, aux, reg, w);
  backward(total);

  // Adam keys carry a model prefix so REM and net names cannot collide.
  std::vector<Param<float>> params;
  for (const auto& p : reg_.params) params.push_back({"reg/" + p.name, p.var, p.frozen});
  if (rem_ && !cfg_.freeze_rem) {
    for (const auto& p : rem_->params) params.push_back({"rem/" + p.name, p.var, p.frozen});
  }
  adam_step(params, adam_, lr_schedule(step_, cfg_.schedule));
  ++step_;
  return total.item();
}

void CascadeTrainer::validate_epoch(int epoch, double train_loss) {
  double d = 0.0, c = 0.0, s = 0.0;
  for (const auto& [f, m] : val_pairs_) {
    const Tensor<float> dvf = forward(f, m).dvf.value();
    const PairMetrics pm = pair_metrics(arm_, f, m, dvf, labels_);
    d += pm.dice;
    c += pm.ncc;
    s += smoothness(constant(dvf)).item();
  }
  const double n = static_cast<double>(val_pairs_.size());
  EpochRecord rec{epoch, step_, train_loss, {{"dice", d / n}, {"ncc", c / n}, {"smoothness", s / n}}};
  if (history_.epochs.empty() || rec.val["dice"] > history_.epochs[history_.best_epoch].val.at("dice")) {
    history_.best_epoch = epoch;
    best_ = snapshot(reg_.params);
  }
  history_.epochs.push_back(std::move(rec));
}

void CascadeTrainer::run(long until) {
  until = std::min(until, total_steps());
  const long per_epoch = steps_per_epoch();
  while (step_ < until) {
    history_.step_loss.push_back(train_step());
    if (step_ % per_epoch == 0) {
      const auto first = history_.step_loss.end() - per_epoch;
      const double mean = std::accumulate(first, history_.step_loss.end(), 0.0) / static_cast<double>(per_epoch);
      validate_epoch(static_cast<int>(step_ / per_epoch), mean);
    }
  }
}

RegModel<float> CascadeTrainer::best_model() const {
  RegModel<float> m{reg_.config, clone_params(reg_.params)};
  load_snapshot(m.params, best_);
  return m;
}

Checkpoint CascadeTrainer::checkpoint() const {
  Checkpoint c;
  c.iteration = step_;
  c.reg = reg_.config;
  export_params(c, reg_.params, "reg/");
  export_snapshot(c, reg_.params, best_, "best/reg/");
  if (rem_) {
    c.rem = rem_->config;
    export_params(c, rem_->params, "rem/");
  }
  export_adam(c, adam_, "adam/");
  c.extra = {{"kind", "cascade"},
             {"method", to_string(method_)},
             {"train_cfg", cfg_json(cfg_)},
             {"history", history_json(history_)}};
  return c;
}

void CascadeTrainer::restore(const Checkpoint& ckpt) {
  check_resume(ckpt, "cascade", cfg_);
  if (ckpt.extra.at("method") != to_string(method_)) throw ConfigError("checkpoint holds a different method");
  if (!ckpt.reg || !(*ckpt.reg == reg_.config)) throw ConfigError("checkpoint registration config differs");
  if (ckpt.rem.has_value() != static_cast<bool>(rem_)) throw ConfigError("checkpoint REM presence differs");
  import_params(ckpt, reg_.params, "reg/");
  best_ = import_snapshot(ckpt, reg_.params, "best/reg/");
  if (rem_) {
    if (!(*ckpt.rem == rem_->config)) throw ConfigError("checkpoint REM config differs");
    import_params(ckpt, rem_->params, "rem/");
  }
  adam_ = import_adam(ckpt, "adam/");
  history_ = history_from_json(ckpt.extra.at("history"));
  step_ = ckpt.iteration;
}

CascadeTrainResult train_cascade(const std::vector<VolumeSample>& data, const DatasetSplit& split,
                                 RegMethod method, const RemModel<float>* rem, const RegConfig& reg_cfg,
                                 const TrainCfg& cfg) {
  CascadeTrainer t(data, split, method, rem, reg_cfg, cfg);
  t.run();
  return {t.best_model(), t.history()};
}

std::vector<MetricReportRow> evaluate_suite(const std::vector<VolumeSample>& data,
                                            const std::vector<std::size_t>& test, int scale,
                                            const std::vector<ArmModels>& arms) {
  if (test.size() < 2) throw ConfigError("evaluate_suite needs at least two test samples");
  for (const auto& a : arms) {
    if (a.method != RegMethod::identity && !a.reg) {
      throw ConfigError("missing registration model for " + to_string(a.method) + " at scale " +
                        std::to_string(scale));
    }
    if (a.method == RegMethod::rereg_down_up && !a.rem) {
      throw ConfigError("missing REM for rereg_down_up at scale " + std::to_string(scale));
    }
  }
  const std::vector<int> labels = dataset_labels(data);
  std::map<RegMethod, ArmData> prepared;
  std::vector<MetricReportRow> rows;
  for (const auto& a : arms) {
    auto it = prepared.find(a.method);
    if (it == prepared.end()) it = prepared.emplace(a.method, prepare_arm(data, a.method, scale)).first;
    const ArmData& arm = it->second;
    PairMetrics acc;
    int n = 0;
    for (std::size_t f : test) {
      for (std::size_t m : test) {
        if (f == m) continue;
        const Tensor<float> dvf = predict_dvf(a.method, a.rem, a.reg, arm.input.at(f), arm.input.at(m));
        const PairMetrics pm = pair_metrics(arm, f, m, dvf, labels);
        acc.dice += pm.dice;
        acc.ncc += pm.ncc;
        acc.psnr += pm.psnr;
        acc.ssim += pm.ssim;
        ++n;
      }
    }
    MetricReportRow row;
    row.method = a.name.empty() ? to_string(a.method) : a.name;
    row.scale = scale;
    row.dice = acc.dice / n;
    row.ncc = acc.ncc / n;
    row.psnr = acc.psnr / n;
    row.ssim = acc.ssim / n;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace remreg
