#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "invit/checkpoint.hpp"
#include "invit/instance.hpp"
#include "invit/optimizer.hpp"
#include "invit/policy.hpp"
#include "invit/rollout.hpp"

namespace invit {

struct TrainConfig {
  ModelConfig model;
  Kind kind = Kind::kTsp;
  Dist distribution = Dist::kUniform;
  int n_nodes = 50;  // customers for CVRP
  int capacity = 50;
  int demand_lo = 1;
  int demand_hi = 10;

  int epochs = 500;
  int steps_per_epoch = 300;
  int batch_size = 64;
  int omega = 8;  // augmentations per instance during training
  double lr = 1e-4;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  int eval_instances = 64;  // per-epoch baseline-replacement set

  uint64_t seed = 0;
  int workers = 1;
  std::string out_dir;

  GenParams gen_params(uint64_t instance_seed) const;

  /// Small single-core preset: TSP-20, d_model 32, views [10, 5], 2000 steps
  /// at batch 32, no training-time augmentation.
  static TrainConfig smoke();
};

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct StepStats {
  int step = 0;  // global step index
  double loss = 0.0;
  double mean_advantage = 0.0;
  double baseline_cost = 0.0;  // batch mean of the per-instance baselines
  double grad_norm = 0.0;      // pre-clip global norm
};

/// One REINFORCE update on a batch: for each instance, omega augmented
/// copies; the baseline is the mean greedy cost of the frozen policy over
/// those copies, the advantage is per-copy sampled cost minus that mean, and
/// the surrogate loss is mean(advantage * sum-logprob). Gradients flow per
/// rollout (seeded with advantage / (batch * omega)), are clipped to
/// cfg.grad_clip in global norm, and applied with the optimizer.
StepStats reinforce_step(const std::vector<Instance>& batch, PolicyParamsT<float>& theta,
                         const PolicyParamsT<float>& baseline, OptimizerStateT<float>& opt,
                         const TrainConfig& cfg, uint64_t step_seed);

/// Mean single-greedy rollout cost over a set of instances (no gradients).
double eval_greedy_mean(const std::vector<Instance>& instances,
                        const PolicyParamsT<float>& params, int workers);

/// Full checkpoint of a training run (policy, frozen baseline, optimizer
/// moments, counters, configs).
Checkpoint make_train_checkpoint(const TrainConfig& cfg, const PolicyParamsT<float>& theta,
                                 const PolicyParamsT<float>& baseline,
                                 const OptimizerStateT<float>& opt, int epochs_done,
                                 int global_step);
void restore_train_checkpoint(const Checkpoint& ckpt, TrainConfig& cfg,
                              PolicyParamsT<float>& theta, PolicyParamsT<float>& baseline,
                              OptimizerStateT<float>& opt, int& epochs_done, int& global_step);

/// Loads just the trained policy from a checkpoint (for solve/eval).
PolicyParamsT<float> load_policy(const std::string& path);

struct TrainResult {
  int epochs_run = 0;
  int global_steps = 0;
  double final_eval_mean = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

/// Runs the training loop: fresh instances each step, metrics CSV row per
/// step (step, loss, mean_advantage, baseline_cost, grad_norm), baseline
/// replacement at epoch end when the candidate is strictly better on a fresh
/// eval set, checkpoint per epoch. resume_path continues a previous run.
TrainResult train(const TrainConfig& cfg, const std::string& resume_path = "");

/// %.9g rendering used for all CSV numbers.
std::string format_g9(double v);

}  // namespace invit
