#include "invit/training.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "invit/errors.hpp"
#include "invit/log.hpp"
#include "invit/parallel.hpp"
#include "invit/rng.hpp"

namespace invit {

namespace {
constexpr uint64_t kTagInit = 0x696e6974;  // "init"
constexpr uint64_t kTagData = 0x64617461;  // "data"
constexpr uint64_t kTagStep = 0x73746570;  // "step"
constexpr uint64_t kTagAugs = 0x61756773;  // "augs"
constexpr uint64_t kTagSamp = 0x73616d70;  // "samp"
constexpr uint64_t kTagEval = 0x6576616c;  // "eval"
}  // namespace

GenParams TrainConfig::gen_params(uint64_t instance_seed) const {
  GenParams p;
  p.distribution = distribution;
  p.n = n_nodes;
  p.seed = instance_seed;
  p.capacity = capacity;
  p.demand_lo = demand_lo;
  p.demand_hi = demand_hi;
  return p;
}

TrainConfig TrainConfig::smoke() {
  TrainConfig c;
  c.model.n_views = 2;
  c.model.k_list = {10, 5};
  c.model.d_model = 32;
  c.model.d_ff = 64;
  c.model.n_heads = 4;
  c.model.encoder_layers_per_view = 1;
  c.model.decoder_layers = 2;
  c.kind = Kind::kTsp;
  c.distribution = Dist::kUniform;
  c.n_nodes = 20;
  c.epochs = 10;
  c.steps_per_epoch = 200;
  c.batch_size = 32;
  c.omega = 1;
  c.lr = 3e-4;
  c.eval_instances = 32;
  return c;
}

nlohmann::json model_config_to_json(const ModelConfig& m) {
  return {{"n_views", m.n_views},
          {"k_list", m.k_list},
          {"d_model", m.d_model},
          {"d_ff", m.d_ff},
          {"n_heads", m.n_heads},
          {"encoder_layers_per_view", m.encoder_layers_per_view},
          {"decoder_layers", m.decoder_layers},
          {"c_clip", m.c_clip},
          {"global_view", m.global_view},
          {"invariance_off", m.invariance_off}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.n_views = j.at("n_views").get<int>();
  m.k_list = j.at("k_list").get<std::vector<int>>();
  m.d_model = j.at("d_model").get<int>();
  m.d_ff = j.at("d_ff").get<int>();
  m.n_heads = j.at("n_heads").get<int>();
  m.encoder_layers_per_view = j.at("encoder_layers_per_view").get<int>();
  m.decoder_layers = j.at("decoder_layers").get<int>();
  m.c_clip = j.at("c_clip").get<double>();
  m.global_view = j.value("global_view", false);
  m.invariance_off = j.value("invariance_off", false);
  m.validate();
  return m;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"model", model_config_to_json(c.model)},
          {"kind", c.kind == Kind::kTsp ? "tsp" : "cvrp"},
          {"distribution", dist_name(c.distribution)},
          {"n_nodes", c.n_nodes},
          {"capacity", c.capacity},
          {"demand_lo", c.demand_lo},
          {"demand_hi", c.demand_hi},
          {"epochs", c.epochs},
          {"steps_per_epoch", c.steps_per_epoch},
          {"batch_size", c.batch_size},
          {"omega", c.omega},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"eval_instances", c.eval_instances},
          {"seed", c.seed},
          {"workers", c.workers},
          {"out_dir", c.out_dir}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.model = model_config_from_json(j.at("model"));
  c.kind = j.at("kind").get<std::string>() == "cvrp" ? Kind::kCvrp : Kind::kTsp;
  c.distribution = dist_from_name(j.at("distribution").get<std::string>());
  c.n_nodes = j.at("n_nodes").get<int>();
  c.capacity = j.at("capacity").get<int>();
  c.demand_lo = j.at("demand_lo").get<int>();
  c.demand_hi = j.at("demand_hi").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.omega = j.at("omega").get<int>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.eval_instances = j.at("eval_instances").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.workers = j.at("workers").get<int>();
  c.out_dir = j.value("out_dir", std::string());
  return c;
}

std::string format_g9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

StepStats reinforce_step(const std::vector<Instance>& batch, PolicyParamsT<float>& theta,
                         const PolicyParamsT<float>& baseline, OptimizerStateT<float>& opt,
                         const TrainConfig& cfg, uint64_t step_seed) {
  if (batch.empty()) throw LogicError("reinforce_step: empty batch");
  const size_t B = batch.size();
  const size_t W = static_cast<size_t>(cfg.omega);
  const double inv = 1.0 / static_cast<double>(B * W);
  const int k_min = cfg.model.k_list.back();

  theta.zero_grad();
  double loss = 0.0, adv_sum = 0.0, base_sum = 0.0;

  for (size_t i = 0; i < B; ++i) {
    auto augs = augment(batch[i], cfg.omega, derive_seed(step_seed, {kTagAugs, i}), k_min);

    // frozen-policy greedy rollouts give the per-instance baseline
    std::vector<double> bl_costs(augs.size());
    parallel_for(augs.size(), cfg.workers, [&](size_t j) {
      Rng unused(0);
      TourT<float> t = rollout(augs[j].first, baseline, RolloutMode::kGreedy,
                               augs[j].second.start, unused, false);
      bl_costs[j] = t.cost;
    });
    double b = 0.0;
    for (double c : bl_costs) b += c;
    b /= static_cast<double>(bl_costs.size());
    base_sum += b;

    // sampled rollouts: graph recorded, backward immediately (sequential so
    // gradients accumulate into shared parameter leaves without races)
    for (size_t j = 0; j < augs.size(); ++j) {
      Rng srng = Rng::stream(step_seed, {kTagSamp, i, j});
      TourT<float> t = rollout(augs[j].first, theta, RolloutMode::kSample,
                               augs[j].second.start, srng, true);
      const double adv = t.cost - b;
      adv_sum += adv;
      loss += adv * t.total_logprob() * inv;
      t.sum_logprob.backward(static_cast<float>(adv * inv));
    }
  }

  StepStats st;
  st.loss = loss;
  st.mean_advantage = adv_sum * inv;
  st.baseline_cost = base_sum / static_cast<double>(B);
  st.grad_norm = clip_global_norm(theta.tensors, cfg.grad_clip);
  optimizer_step(theta.tensors, opt);
  theta.zero_grad();
  return st;
}

double eval_greedy_mean(const std::vector<Instance>& instances,
                        const PolicyParamsT<float>& params, int workers) {
  if (instances.empty()) throw LogicError("eval_greedy_mean: no instances");
  std::vector<double> costs(instances.size());
  parallel_for(instances.size(), workers, [&](size_t i) {
    Rng unused(0);
    costs[i] = rollout(instances[i], params, RolloutMode::kGreedy, -1, unused, false).cost;
  });
  double s = 0.0;
  for (double c : costs) s += c;
  return s / static_cast<double>(costs.size());
}

Checkpoint make_train_checkpoint(const TrainConfig& cfg, const PolicyParamsT<float>& theta,
                                 const PolicyParamsT<float>& baseline,
                                 const OptimizerStateT<float>& opt, int epochs_done,
                                 int global_step) {
  Checkpoint c;
  c.meta["model"] = model_config_to_json(cfg.model);
  c.meta["train"] = train_config_to_json(cfg);
  c.meta["epochs_done"] = epochs_done;
  c.meta["global_step"] = global_step;
  c.meta["opt_step"] = opt.step;
  pack_tensors(c, "theta", theta.names, theta.tensors);
  pack_tensors(c, "baseline", baseline.names, baseline.tensors);
  pack_vectors(c, "opt_m", theta.names, opt.m);
  pack_vectors(c, "opt_v", theta.names, opt.v);
  return c;
}

void restore_train_checkpoint(const Checkpoint& ckpt, TrainConfig& cfg,
                              PolicyParamsT<float>& theta, PolicyParamsT<float>& baseline,
                              OptimizerStateT<float>& opt, int& epochs_done, int& global_step) {
  cfg = train_config_from_json(ckpt.meta.at("train"));
  theta = init_policy<float>(cfg.model, 0);
  baseline = init_policy<float>(cfg.model, 0);
  unpack_tensors(ckpt, "theta", theta.names, theta.tensors);
  unpack_tensors(ckpt, "baseline", baseline.names, baseline.tensors);
  theta.set_requires_grad(true);
  baseline.set_requires_grad(false);
  opt.init(theta.tensors);
  unpack_vectors(ckpt, "opt_m", theta.names, opt.m);
  unpack_vectors(ckpt, "opt_v", theta.names, opt.v);
  opt.step = ckpt.meta.at("opt_step").get<int64_t>();
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  epochs_done = ckpt.meta.at("epochs_done").get<int>();
  global_step = ckpt.meta.at("global_step").get<int>();
}

PolicyParamsT<float> load_policy(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  ModelConfig m = model_config_from_json(c.meta.at("model"));
  PolicyParamsT<float> params = init_policy<float>(m, 0);
  unpack_tensors(c, "theta", params.names, params.tensors);
  params.set_requires_grad(false);
  return params;
}

TrainResult train(const TrainConfig& cfg_in, const std::string& resume_path) {
  TrainConfig cfg = cfg_in;
  PolicyParamsT<float> theta, baseline;
  OptimizerStateT<float> opt;
  int epochs_done = 0, gstep = 0;
  const bool resumed = !resume_path.empty();

  if (resumed) {
    Checkpoint c = load_checkpoint(resume_path);
    restore_train_checkpoint(c, cfg, theta, baseline, opt, epochs_done, gstep);
    // the caller may extend the horizon or redirect output; everything else
    // (model, data, optimizer, seed) stays as trained
    if (cfg_in.epochs > cfg.epochs) cfg.epochs = cfg_in.epochs;
    if (!cfg_in.out_dir.empty()) cfg.out_dir = cfg_in.out_dir;
    cfg.workers = cfg_in.workers;
    log::info("resumed from %s at epoch %d (step %d)", resume_path.c_str(), epochs_done, gstep);
  } else {
    cfg.model.validate();
    theta = init_policy<float>(cfg.model, derive_seed(cfg.seed, {kTagInit}));
    theta.set_requires_grad(true);
    baseline = clone_policy(theta, false);
    opt.init(theta.tensors);
  }
  if (cfg.out_dir.empty()) throw InputError("train: an output directory is required");
  std::filesystem::create_directories(cfg.out_dir);
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  TrainResult res;
  res.metrics_path = cfg.out_dir + "/metrics.csv";
  res.checkpoint_path = cfg.out_dir + "/latest.ckpt";

  std::ofstream mf(res.metrics_path,
                   resumed ? std::ios::app : std::ios::trunc);
  if (!mf) throw InputError("cannot open metrics file: " + res.metrics_path);
  if (!resumed) mf << "step,loss,mean_advantage,baseline_cost,grad_norm\n";

  for (int e = epochs_done; e < cfg.epochs; ++e) {
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      std::vector<Instance> batch;
      batch.reserve(static_cast<size_t>(cfg.batch_size));
      for (int i = 0; i < cfg.batch_size; ++i) {
        const uint64_t iseed = derive_seed(
            cfg.seed, {kTagData, static_cast<uint64_t>(e), static_cast<uint64_t>(s),
                       static_cast<uint64_t>(i)});
        batch.push_back(generate(cfg.gen_params(iseed), cfg.kind));
      }
      const uint64_t step_seed = derive_seed(
          cfg.seed, {kTagStep, static_cast<uint64_t>(e), static_cast<uint64_t>(s)});
      StepStats st;
      try {
        st = reinforce_step(batch, theta, baseline, opt, cfg, step_seed);
      } catch (const NumericError& err) {
        log::error("aborting at epoch %d step %d: %s (last good checkpoint: %s)", e, s,
                   err.what(), epochs_done > 0 ? res.checkpoint_path.c_str() : "<none>");
        throw;
      }
      st.step = gstep++;
      mf << st.step << ',' << format_g9(st.loss) << ',' << format_g9(st.mean_advantage) << ','
         << format_g9(st.baseline_cost) << ',' << format_g9(st.grad_norm) << '\n';
      mf.flush();
    }

    std::vector<Instance> eval_set;
    eval_set.reserve(static_cast<size_t>(cfg.eval_instances));
    for (int i = 0; i < cfg.eval_instances; ++i) {
      const uint64_t iseed = derive_seed(
          cfg.seed, {kTagEval, static_cast<uint64_t>(e), static_cast<uint64_t>(i)});
      eval_set.push_back(generate(cfg.gen_params(iseed), cfg.kind));
    }
    const double cand = eval_greedy_mean(eval_set, theta, cfg.workers);
    const double incumbent = eval_greedy_mean(eval_set, baseline, cfg.workers);
    if (cand < incumbent) {
      copy_policy_data(baseline, theta);
      log::info("epoch %d: baseline replaced (%.6f < %.6f)", e, cand, incumbent);
    } else {
      log::info("epoch %d: baseline kept (%.6f >= %.6f)", e, cand, incumbent);
    }
    epochs_done = e + 1;
    res.final_eval_mean = cand;
    save_checkpoint(res.checkpoint_path,
                    make_train_checkpoint(cfg, theta, baseline, opt, epochs_done, gstep));
  }

  res.epochs_run = epochs_done;
  res.global_steps = gstep;
  return res;
}

}  // namespace invit
