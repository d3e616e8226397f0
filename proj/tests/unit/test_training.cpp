#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "invit/checkpoint.hpp"
#include "invit/training.hpp"
#include "invit/version.hpp"
#include "test_oracles.hpp"

using namespace invit;
namespace fs = std::filesystem;

namespace {

TrainConfig micro_config(const std::string& out) {
  TrainConfig cfg;
  cfg.model.n_views = 2;
  cfg.model.k_list = {6, 3};
  cfg.model.d_model = 16;
  cfg.model.d_ff = 32;
  cfg.model.n_heads = 2;
  cfg.model.encoder_layers_per_view = 1;
  cfg.model.decoder_layers = 2;
  cfg.n_nodes = 8;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 2;
  cfg.batch_size = 2;
  cfg.omega = 2;
  cfg.eval_instances = 2;
  cfg.seed = 5;
  cfg.out_dir = out;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("reinforce_step updates parameters deterministically") {
  TrainConfig cfg = micro_config("");
  std::vector<Instance> batch;
  for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(testo::make_tsp(8, 50 + i));

  auto run = [&](uint64_t seed) {
    PolicyParamsT<float> theta = init_policy<float>(cfg.model, 1);
    PolicyParamsT<float> baseline = clone_policy(theta, false);
    OptimizerStateT<float> opt;
    opt.lr = cfg.lr;
    opt.init(theta.tensors);
    const StepStats stats = reinforce_step(batch, theta, baseline, opt, cfg, seed);
    return std::make_pair(theta, stats);
  };

  auto [t1, s1] = run(99);
  auto [t2, s2] = run(99);
  CHECK(std::isfinite(s1.loss));
  CHECK(std::isfinite(s1.grad_norm));
  CHECK(s1.grad_norm >= 0.0);
  CHECK(s1.baseline_cost > 0.0);
  CHECK(s1.loss == s2.loss);
  CHECK(s1.grad_norm == s2.grad_norm);
  for (size_t i = 0; i < t1.tensors.size(); ++i)
    CHECK(t1.tensors[i].data() == t2.tensors[i].data());

  // the step must actually move the parameters
  const PolicyParamsT<float> fresh = init_policy<float>(cfg.model, 1);
  bool moved = false;
  for (size_t i = 0; i < t1.tensors.size() && !moved; ++i)
    moved = t1.tensors[i].data() != fresh.tensors[i].data();
  CHECK(moved);
}

TEST_CASE("forced tours give zero advantage and zero gradient") {
  // 2-node instances leave a single feasible action per step, so the sample
  // always equals the frozen-policy greedy tour and the advantage vanishes
  TrainConfig cfg = micro_config("");
  cfg.omega = 1;
  std::vector<Instance> batch{testo::make_tsp(2, 3), testo::make_tsp(2, 4)};

  PolicyParamsT<float> theta = init_policy<float>(cfg.model, 7);
  PolicyParamsT<float> baseline = clone_policy(theta, false);
  OptimizerStateT<float> opt;
  opt.weight_decay = 0.0;
  opt.init(theta.tensors);

  const PolicyParamsT<float> before = clone_policy(theta, false);
  const StepStats stats = reinforce_step(batch, theta, baseline, opt, cfg, 11);
  CHECK(stats.mean_advantage == 0.0);
  CHECK(stats.loss == 0.0);
  CHECK(stats.grad_norm == 0.0);
  for (size_t i = 0; i < theta.tensors.size(); ++i)
    CHECK(theta.tensors[i].data() == before.tensors[i].data());
}

TEST_CASE("eval_greedy_mean is the plain mean of greedy costs") {
  const TrainConfig cfg = micro_config("");
  PolicyParamsT<float> params = init_policy<float>(cfg.model, 2);
  std::vector<Instance> insts;
  for (int i = 0; i < 3; ++i) insts.push_back(testo::make_tsp(8, 80 + i));
  double want = 0.0;
  for (const auto& inst : insts) {
    Rng rng(0);
    want += rollout(inst, params, RolloutMode::kGreedy, 0, rng).cost;
  }
  want /= 3.0;
  CHECK(eval_greedy_mean(insts, params, 1) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const fs::path dir = fresh_dir("invit_test_ckpt");
  const TrainConfig cfg = micro_config(dir.string());
  PolicyParamsT<float> theta = init_policy<float>(cfg.model, 3);
  PolicyParamsT<float> baseline = clone_policy(theta, false);
  OptimizerStateT<float> opt;
  opt.init(theta.tensors);
  opt.step = 17;

  const Checkpoint ck = make_train_checkpoint(cfg, theta, baseline, opt, 4, 1234);
  const std::string path = (dir / "a.ckpt").string();
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.meta == ck.meta);
  REQUIRE(back.arrays.size() == ck.arrays.size());
  for (const auto& [name, blob] : ck.arrays) {
    REQUIRE(back.arrays.count(name) == 1);
    CHECK(back.arrays.at(name).data == blob.data);
  }

  // saving the loaded checkpoint again reproduces the file byte-for-byte
  const std::string path2 = (dir / "b.ckpt").string();
  save_checkpoint(path2, back);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoint corruption and version mismatches are detected") {
  const fs::path dir = fresh_dir("invit_test_ckpt_bad");
  const TrainConfig cfg = micro_config(dir.string());
  PolicyParamsT<float> theta = init_policy<float>(cfg.model, 3);
  PolicyParamsT<float> baseline = clone_policy(theta, false);
  OptimizerStateT<float> opt;
  opt.init(theta.tensors);
  const std::string path = (dir / "c.ckpt").string();
  save_checkpoint(path, make_train_checkpoint(cfg, theta, baseline, opt, 0, 0));

  std::string bytes = slurp(path);
  SUBCASE("flipped payload byte fails the checksum") {
    bytes[bytes.size() / 2] ^= 0x40;
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), InputError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), InputError);
  }
  SUBCASE("truncation") {
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 9);
    CHECK_THROWS_AS(load_checkpoint(path), InputError);
  }
  SUBCASE("future version is refused by name") {
    // bump the version field and refresh the trailing crc so only the
    // version check can fire
    const uint32_t v = kCheckpointVersion + 1;
    std::memcpy(bytes.data() + 8, &v, 4);
    const uint32_t crc =
        crc32_bytes(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size() - 4);
    std::memcpy(bytes.data() + bytes.size() - 4, &crc, 4);
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), InputError);
  }
}

TEST_CASE("training is resumable without drift") {
  const fs::path once_dir = fresh_dir("invit_train_once");
  const fs::path twice_dir = fresh_dir("invit_train_twice");

  TrainConfig once = micro_config(once_dir.string());
  const TrainResult full = train(once);
  CHECK(full.epochs_run == 2);
  CHECK(full.global_steps == 4);
  CHECK(std::isfinite(full.final_eval_mean));

  TrainConfig first = micro_config(twice_dir.string());
  first.epochs = 1;
  train(first);
  TrainConfig second = micro_config(twice_dir.string());
  const TrainResult resumed = train(second, (twice_dir / "latest.ckpt").string());
  CHECK(resumed.epochs_run == 2);

  // metrics rows and final parameters match the uninterrupted run exactly
  CHECK(slurp(once_dir / "metrics.csv") == slurp(twice_dir / "metrics.csv"));
  const PolicyParamsT<float> a = load_policy((once_dir / "latest.ckpt").string());
  const PolicyParamsT<float> b = load_policy((twice_dir / "latest.ckpt").string());
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (size_t i = 0; i < a.tensors.size(); ++i)
    CHECK(a.tensors[i].data() == b.tensors[i].data());
}

TEST_CASE("metrics csv has the documented shape") {
  const fs::path dir = fresh_dir("invit_train_metrics");
  TrainConfig cfg = micro_config(dir.string());
  cfg.epochs = 1;
  train(cfg);
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,loss,mean_advantage,baseline_cost,grad_norm");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == cfg.steps_per_epoch);
}

TEST_CASE("train config json round trip") {
  TrainConfig cfg = micro_config("somewhere");
  cfg.kind = Kind::kCvrp;
  cfg.distribution = Dist::kExplosion;
  const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
  CHECK(back.kind == cfg.kind);
  CHECK(back.distribution == cfg.distribution);
  CHECK(back.n_nodes == cfg.n_nodes);
  CHECK(back.model.k_list == cfg.model.k_list);
  CHECK(back.omega == cfg.omega);
  CHECK(back.out_dir == cfg.out_dir);
}

TEST_CASE("smoke preset carries its pinned shape") {
  const TrainConfig s = TrainConfig::smoke();
  CHECK(s.n_nodes == 20);
  CHECK(s.model.d_model == 32);
  CHECK(s.model.k_list == std::vector<int>{10, 5});
  CHECK(s.epochs * s.steps_per_epoch == 2000);
  CHECK(s.batch_size == 32);
  CHECK(s.kind == Kind::kTsp);
}

}  // TEST_SUITE
