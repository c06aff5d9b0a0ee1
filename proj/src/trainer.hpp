#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "nets.hpp"

namespace udehaze {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int resize = 128;
  uint64_t seed = 0;
  double val_fraction = 0.1;  // last fraction of the filename-sorted set
  int base_channels = 16;
  int max_steps = 0;  // 0 = run all epochs; otherwise stop after N optimizer steps
  std::string input_dir;
  std::string reference_dir;
  std::string out_dir;    // checkpoints + train_log.jsonl; empty = keep in memory
  std::string drop_term;  // ablation label; set via ablate()
  bool quiet = false;
  LossConfig loss;
  PriorConfig prior;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct EpochLog {
  int epoch = 0;
  double l1 = 0, dct = 0, fwd = 0, a_reg = 0, beta_reg = 0, total = 0;
  double val_psnr = 0, val_ssim = 0;
  double wall_time = 0;  // seconds spent in this epoch
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  int best_epoch = 0;  // 0 = the initialized model
  double best_val_psnr = 0, best_val_ssim = 0;
  int steps_run = 0;
  std::vector<EpochLog> log;
  std::string best_checkpoint_path;  // empty when out_dir not set
  std::string last_checkpoint_path;
  std::string report_json() const;
};

// Training loop: shuffled mini-batches, the five-term loss, AdamW, and
// best-checkpoint selection by validation PSNR. Deterministic given the
// seed. Aborts with the offending term named if any loss turns non-finite.
TrainResult train(const TrainConfig& config);

// Sets the matching loss weight to zero and trains; term must be one of
// l1, dct, fwd, a_reg, beta_reg.
TrainResult ablate(TrainConfig config, const std::string& drop_term);

// Runs the model over a paired dataset and reports PSNR/SSIM against the
// references.
MetricsReport evaluate(const ModelParams& params,
                       const std::vector<PairedSample>& samples,
                       const PriorConfig& prior_cfg);
MetricsReport evaluate_dirs(const ModelParams& params, const std::string& input_dir,
                            const std::string& reference_dir, int resize,
                            const PriorConfig& prior_cfg);

// One forward+backward probe on a batch; returns the gradient L1 norm per
// parameter group in parameter order. Used by gradient-flow checks.
std::vector<double> gradient_probe(ModelParams& params,
                                   const std::vector<PairedSample>& samples,
                                   const TrainConfig& config);

std::string metrics_report_json(const MetricsReport& report);

}  // namespace udehaze
