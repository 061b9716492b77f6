#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "athv/data.hpp"
#include "athv/masks.hpp"
#include "athv/networks.hpp"

namespace athv {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::map<std::string, Tensor<T>> m, v;  // zero-initialized on first use
};

/// Bias-corrected Adam update of every parameter from its accumulated
/// gradient. A non-finite gradient aborts before anything is modified.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state);

struct TrainConfig {
  std::filesystem::path data_dir;  // holds manifest.txt
  std::filesystem::path out_dir;
  ModelConfig model;
  MaskSpec mask;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0: no step limit
  std::size_t batch_size = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  std::size_t eval_every = 1;        // epochs
  bool f64 = false;
  std::filesystem::path resume;  // training checkpoint to continue from

  void validate() const;
  /// `key = value` text; unknown keys are an error.
  static TrainConfig from_text(const std::string& text);
  std::string to_text() const;
};

/// A sample prepared for a network: target magnitude and masked k-space.
template <typename T>
struct PreparedSample {
  std::string sample_id;
  Tensor<T> target;    // [H,W]
  Tensor<T> k_masked;  // [N,2,H,W]
  Mask mask;
};

/// Loads the split from `data_dir`, regenerating each sample's mask from its manifest seed.
template <typename T>
std::vector<PreparedSample<T>> prepare_split(const std::filesystem::path& data_dir, Split split, const MaskSpec& spec);

/// Training objective for one sample: dual loss for every architecture that
/// has an intermediate reconstruction, plain NRMSE for the U-Net baseline.
template <typename T>
Var<T> sample_loss(const Model<T>& model, const PreparedSample<T>& s);

struct EvalRow {
  std::string sample_id;
  std::string model;
  double psnr = 0, ssim = 0, nrmse = 0;
};

struct EvalTable {
  std::vector<EvalRow> rows;  // per sample, in model order then sample order

  /// Mean row per model, in first-appearance order.
  std::vector<EvalRow> means() const;
  EvalRow mean_of(const std::string& model) const;
  /// `sample_id,model,psnr,ssim,nrmse` rows followed by `mean` rows.
  std::string to_csv() const;
};

/// Target and prediction are both scaled by the target's range before scoring.
template <typename T>
EvalRow score(const std::string& sample_id, const std::string& model, const Tensor<T>& target, const Tensor<T>& pred);

template <typename T>
Tensor<T> reconstruct(const Model<T>& model, const PreparedSample<T>& s);

/// Scores a model (or, when `model` is null, the ground truth itself) and the
/// zero-filled reconstruction on each sample.
template <typename T>
EvalTable evaluate(const Model<T>* model, const std::string& name, const std::vector<PreparedSample<T>>& samples,
                   bool include_zero_filled = true);

struct TrainResult {
  std::vector<double> step_losses;
  std::string metrics_csv;  // epoch,step,train_loss,test_psnr,test_ssim,test_nrmse
  std::filesystem::path final_checkpoint;
};

/// Seeded Adam training. Writes config.txt, metrics.csv, steps.csv and
/// checkpoints (model, optimizer state and history) into out_dir.
template <typename T>
TrainResult train(const TrainConfig& cfg);

inline constexpr const char* kMetricsHeader = "epoch,step,train_loss,test_psnr,test_ssim,test_nrmse";

}  // namespace athv
