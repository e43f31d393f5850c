// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "remreg/checkpoint.hpp"
#include "remreg/losses.hpp"
#include "remreg/optim.hpp"
#include "remreg/phantom.hpp"
#include "remreg/regnet.hpp"
#include "remreg/rem.hpp"
#include "remreg/report.hpp"

namespace remreg {

struct TrainCfg {
  int epochs = 20;
  int steps_per_epoch = 100;  // REM only; a cascade epoch visits every ordered training pair once
  int batch_size = 2;
  int patch_size = 16;        // REM patch side; the cascade always uses full volumes
  ScheduleCfg schedule = rem_schedule();
  LossWeights weights;
  LnccCfg lncc;
  double huber_delta = 0.1;
  std::uint64_t seed = 0;
  bool freeze_rem = true;
  int scale = 2;

  void validate() const;
};

/// Desk-scale REM defaults: 16^3 patches, batch 2, 20 x 100 steps.
TrainCfg rem_train_defaults();
/// Desk-scale cascade defaults: full volumes, batch 1, 10 epochs.
TrainCfg cascade_train_defaults();

/// Validation snapshot taken before training (epoch 0) and after every epoch.
struct EpochRecord {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;  // mean over the epoch's steps; 0 for epoch 0
  std::map<std::string, double> val;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<double> step_loss;  // one entry per optimizer step
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;

  bool operator==(const TrainHistory&) const = default;
};

/// Mean of the `window` step losses ending at `step` (fewer near the start).
double smoothed_loss(const std::vector<double>& step_loss, long step, int window = 10);

// ---------------------------------------------------------------------------
// Super-resolution training

/// Supervised REM training on random (lr_up, gt) patches of the training
/// split under the Huber loss; validation PSNR/SSIM on whole volumes picks the
/// best model. Sampling for step s is derived from (seed, s) alone, so a run
/// restored from a checkpoint continues bit-identically.
class RemTrainer {
 public:
  RemTrainer(const std::vector<VolumeSample>& data, const DatasetSplit& split, const RemConfig& rem_cfg,
             const TrainCfg& cfg, RemInit init = RemInit::kaiming);

  long step() const { return step_; }
  long total_steps() const { return static_cast<long>(cfg_.epochs) * cfg_.steps_per_epoch; }
  bool done() const { return step_ >= total_steps(); }
  /// Trains until `until` steps (clamped to total_steps()) have been taken.
  void run(long until);
  void run() { run(total_steps()); }

  const RemModel<float>& model() const { return model_; }
  RemModel<float> best_model() const;
  const TrainHistory& history() const { return history_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  struct Pair {
    Tensor<float> lr_up, gt;
  };
  void validate_epoch(int epoch, double train_loss);
  double train_step();

  TrainCfg cfg_;
  RemModel<float> model_;
  AdamState<float> adam_;
  std::vector<Pair> train_, val_;
  std::vector<Tensor<float>> best_;
  TrainHistory history_;
  long step_ = 0;
};

struct RemTrainResult {
  RemModel<float> model;  // best validation PSNR
  TrainHistory history;
};

RemTrainResult train_rem(const std::vector<VolumeSample>& data, const DatasetSplit& split, const RemConfig& rem_cfg,
                         const TrainCfg& cfg, RemInit init = RemInit::kaiming);

/// Mean PSNR/SSIM of rem(lr_up) against the ground truth over `indices`;
/// a null model scores the trilinear baseline.
SrReportRow evaluate_rem(const RemModel<float>* rem, const std::vector<VolumeSample>& data,
                         const std::vector<std::size_t>& indices, int scale, const std::string& method);

// ---------------------------------------------------------------------------
// Registration

/// Registration arms:
///  - identity:      zero field
///  - reg_down_up:   net on trilinear down/up-sampled images, no REM
///  - rereg_down_up: the cascade, REM in front of the net
///  - reg_down:      net on the downsampled images themselves (no upsampling);
///                   labels and references are resized onto that grid
enum class RegMethod { identity, reg_down_up, rereg_down_up, reg_down };
std::string to_string(RegMethod m);
RegMethod parse_method(const std::string& s);

/// Per-sample inputs of an arm at a given scale.
struct ArmData {
  std::vector<Tensor<float>> input;  // what the network sees
  std::vector<Tensor<float>> ref;    // full-quality intensities on the network grid
  std::vector<LabelVolume> labels;   // labels on the network grid
};
ArmData prepare_arm(const std::vector<VolumeSample>& data, RegMethod method, int scale);

/// Unsupervised cascade training over shuffled ordered training pairs under
/// main + lambda_1 aux + lambda_2 smoothness. The auxiliary term needs a REM
/// and is dropped for arms without one. Validation uses the pairs
/// (validation, train[0]) in both orders; the best mean Dice wins.
class CascadeTrainer {
 public:
  CascadeTrainer(const std::vector<VolumeSample>& data, const DatasetSplit& split, RegMethod method,
                 const RemModel<float>* rem, const RegConfig& reg_cfg, const TrainCfg& cfg);

  long step() const { return step_; }
  long steps_per_epoch() const { return static_cast<long>(pairs_.size()); }
  long total_steps() const { return static_cast<long>(cfg_.epochs) * steps_per_epoch(); }
  bool done() const { return step_ >= total_steps(); }
  void run(long until);
  void run() { run(total_steps()); }

  RegMethod method() const { return method_; }
  const RegModel<float>& model() const { return reg_; }
  RegModel<float> best_model() const;
  const RemModel<float>* rem() const { return rem_ ? rem_.get() : nullptr; }
  const TrainHistory& history() const { return history_; }

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  struct Forward {
    Var<float> fixed_sr, moving_sr;
    Dvf<float> dvf;
  };
  Forward forward(std::size_t fixed, std::size_t moving) const;
  double train_step();
  void validate_epoch(int epoch, double train_loss);

  TrainCfg cfg_;
  RegMethod method_;
  std::unique_ptr<RemModel<float>> rem_;
  RegModel<float> reg_;
  AdamState<float> adam_;
  ArmData arm_;
  std::vector<Tensor<float>> sr_cache_;  // REM outputs when REM is frozen
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::pair<std::size_t, std::size_t>> val_pairs_;
  std::vector<int> labels_;
  std::vector<Tensor<float>> best_;
  TrainHistory history_;
  long step_ = 0;
};

struct CascadeTrainResult {
  RegModel<float> model;  // best validation Dice
  TrainHistory history;
};

CascadeTrainResult train_cascade(const std::vector<VolumeSample>& data, const DatasetSplit& split,
                                 RegMethod method, const RemModel<float>* rem, const RegConfig& reg_cfg,
                                 const TrainCfg& cfg);

/// Field predicted by an arm for one (fixed, moving) pair of arm inputs.
Tensor<float> predict_dvf(RegMethod method, const RemModel<float>* rem, const RegModel<float>* reg,
                          const Tensor<float>& fixed, const Tensor<float>& moving);

struct PairMetrics {
  double dice = 0.0, ncc = 0.0, psnr = 0.0, ssim = 0.0;
};
/// Metrics of moving warped by `dvf` against fixed: Dice of the warped labels
/// and NCC/PSNR/SSIM of the warped reference intensities.
PairMetrics pair_metrics(const ArmData& arm, std::size_t fixed, std::size_t moving, const Tensor<float>& dvf,
                         const std::vector<int>& labels);

/// One trained cell of the evaluation grid.
struct ArmModels {
  RegMethod method = RegMethod::identity;
  const RegModel<float>* reg = nullptr;
  const RemModel<float>* rem = nullptr;
  std::string name;  // report label; defaults to to_string(method)
};

/// Registers every ordered pair of distinct test samples with each arm and
/// averages the pair metrics into one row per arm.
std::vector<MetricReportRow> evaluate_suite(const std::vector<VolumeSample>& data,
                                            const std::vector<std::size_t>& test, int scale,
                                            const std::vector<ArmModels>& arms);

/// Label values present in the dataset, excluding background.
std::vector<int> dataset_labels(const std::vector<VolumeSample>& data);

}  // namespace remreg
