#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "invit/analysis.hpp"
#include "invit/errors.hpp"
#include "invit/instance.hpp"
#include "invit/log.hpp"
#include "invit/oracle.hpp"
#include "invit/parallel.hpp"
#include "invit/rng.hpp"
#include "invit/rollout.hpp"
#include "invit/training.hpp"
#include "invit/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace invit;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
  int workers = 0;  // 0 = all available cores
  bool deterministic = false;
  std::string out;
};

int resolve_workers(const GlobalOpts& g) {
  if (g.deterministic) {
    if (g.workers > 1) log::warn("deterministic mode forces a single worker");
    return 1;
  }
  return g.workers > 0 ? g.workers : hardware_workers();
}

std::string timestamp_utc(const GlobalOpts& g) {
  if (g.deterministic) return "";  // byte-identical outputs across runs
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << text;
  if (!out) throw InputError("failed writing: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_manifest(const std::string& dir, const std::string& command, const json& config,
                    const GlobalOpts& g, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = g.seed;
  m["workers"] = resolve_workers(g);
  m["deterministic"] = g.deterministic;
  m["version"] = kVersion;
  m["timestamp"] = timestamp_utc(g);
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

std::string ensure_out_dir(const GlobalOpts& g) {
  if (g.out.empty()) throw InputError("an output directory is required (--out)");
  fs::create_directories(g.out);
  return g.out;
}

/// Accepts a directory of *.json files, a native JSON file (single instance
/// or array), or a TSPLIB/CVRPLIB file by extension.
std::vector<Instance> load_instance_arg(const std::string& path) {
  if (path.empty()) throw InputError("an instance path is required (--instances)");
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json" &&
          entry.path().filename() != "manifest.json")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no .json instance files in directory: " + path);
    std::vector<Instance> out;
    for (const auto& f : files) {
      auto batch = load_instances(read_text(f));
      out.insert(out.end(), batch.begin(), batch.end());
    }
    return out;
  }
  if (!fs::exists(path)) throw InputError("instance path does not exist: " + path);
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".tsp") return {parse_tsplib(read_text(path))};
  if (ext == ".vrp") return {parse_cvrplib(read_text(path))};
  if (ext == ".json") return load_instances(read_text(path));
  throw InputError("unrecognized instance file type (expect .json, .tsp, or .vrp): " + path);
}

/// Reference for one instance: "exact" enforces oracle bounds, "auto" falls
/// back to heuristics beyond them, "none" skips.
std::optional<Reference> make_reference(const Instance& inst, const std::string& mode) {
  const int customers = inst.kind == Kind::kCvrp ? inst.n() - 1 : inst.n();
  if (mode == "none") return std::nullopt;
  if (mode == "exact")
    return inst.kind == Kind::kTsp ? held_karp(inst) : cvrp_exact_tiny(inst);
  if (mode == "nn") return nearest_neighbor(inst);
  if (mode == "nn2opt") {
    if (inst.kind == Kind::kTsp) return near_optimal_reference(inst);
    return nearest_neighbor(inst);  // 2-opt is TSP-only
  }
  if (mode == "auto") {
    if (inst.kind == Kind::kTsp)
      return inst.n() <= 20 ? held_karp(inst) : near_optimal_reference(inst);
    return customers <= 8 ? cvrp_exact_tiny(inst) : nearest_neighbor(inst);
  }
  throw InputError("unknown reference mode: " + mode +
                   " (expect auto, exact, nn2opt, nn, or none)");
}

std::vector<double> load_reference_costs(const std::string& path, size_t expected) {
  const json j = json::parse(read_text(path));
  if (!j.is_array()) throw InputError("reference file must be a JSON array: " + path);
  std::vector<double> costs;
  for (const auto& item : j) {
    if (item.is_number())
      costs.push_back(item.get<double>());
    else if (item.is_object() && item.contains("cost"))
      costs.push_back(item.at("cost").get<double>());
    else
      throw InputError("reference entries must be numbers or {\"cost\": ...}: " + path);
  }
  if (costs.size() != expected)
    throw InputError("reference file has " + std::to_string(costs.size()) +
                     " entries, expected " + std::to_string(expected));
  return costs;
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
  std::string kind = "tsp";
  std::string dist = "uniform";
  int n = 20;
  int count = 10;
  bool force = false;
  std::string preset;
};

void write_instance_files(const std::string& dir, const std::vector<Instance>& batch) {
  fs::create_directories(dir);
  char name[32];
  for (size_t i = 0; i < batch.size(); ++i) {
    std::snprintf(name, sizeof(name), "instance_%04zu.json", i);
    write_text(dir + "/" + name, instance_to_json(batch[i]).dump(2) + "\n");
  }
}

std::vector<Instance> generate_batch(Kind kind, Dist dist, int n, int count, uint64_t seed) {
  std::vector<Instance> batch;
  batch.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    GenParams p;
    p.distribution = dist;
    p.n = n;
    p.seed = derive_seed(seed, {0x67656e, static_cast<uint64_t>(i)});  // "gen"
    batch.push_back(generate(p, kind));
  }
  return batch;
}

int cmd_generate(const GlobalOpts& g, const GenerateOpts& o) {
  const std::string dir = ensure_out_dir(g);
  bool nonempty = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    (void)entry;
    nonempty = true;
    break;
  }
  if (nonempty && !o.force)
    throw InputError("output directory is not empty (use --force to overwrite): " + dir);

  const Kind kind = o.kind == "cvrp" ? Kind::kCvrp : Kind::kTsp;
  if (o.kind != "tsp" && o.kind != "cvrp")
    throw InputError("unknown kind: " + o.kind + " (expect tsp or cvrp)");

  std::vector<std::string> outputs;
  json config;
  if (!o.preset.empty()) {
    if (o.preset != "msvdrp-mini")
      throw InputError("unknown generate preset: " + o.preset + " (expect msvdrp-mini)");
    const std::vector<Dist> dists = {Dist::kUniform, Dist::kClustered, Dist::kExplosion,
                                     Dist::kImplosion};
    const std::vector<int> sizes = {20, 50, 100};
    for (Dist d : dists)
      for (int n : sizes) {
        const std::string sub = o.kind + "-" + dist_name(d) + "-" + std::to_string(n);
        const uint64_t sub_seed =
            derive_seed(g.seed, {static_cast<uint64_t>(d), static_cast<uint64_t>(n)});
        write_instance_files(dir + "/" + sub,
                             generate_batch(kind, d, n, o.count, sub_seed));
        outputs.push_back(sub + "/");
      }
    config = {{"preset", o.preset}, {"kind", o.kind}, {"count", o.count}};
  } else {
    const Dist dist = dist_from_name(o.dist);
    write_instance_files(dir, generate_batch(kind, dist, o.n, o.count, g.seed));
    char name[32];
    for (int i = 0; i < o.count; ++i) {
      std::snprintf(name, sizeof(name), "instance_%04d.json", i);
      outputs.push_back(name);
    }
    config = {{"kind", o.kind}, {"distribution", o.dist}, {"n", o.n}, {"count", o.count}};
  }
  write_manifest(dir, "generate", config, g, {}, outputs);
  std::printf("wrote %zu instance file sets to %s\n", outputs.size(), dir.c_str());
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainCliOpts {
  std::string preset;
  std::string resume;
  // model
  int views = -1;
  std::string k_csv;
  int d_model = -1, d_ff = -1, heads = -1, enc_layers = -1, dec_layers = -1;
  double c_clip = -1.0;
  bool global_view = false, no_invariance = false;
  // data + schedule
  std::string kind, dist;
  int n = -1, epochs = -1, steps = -1, batch = -1, omega = -1, eval_instances = -1;
  double lr = -1.0, weight_decay = -1.0, grad_clip = -1.0;
};

std::vector<int> parse_int_csv(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

int cmd_train(const GlobalOpts& g, const TrainCliOpts& o) {
  TrainConfig cfg;
  if (!o.preset.empty()) {
    if (o.preset != "smoke")
      throw InputError("unknown train preset: " + o.preset + " (expect smoke)");
    cfg = TrainConfig::smoke();
  }
  if (o.views > 0) cfg.model.n_views = o.views;
  if (!o.k_csv.empty()) {
    cfg.model.k_list = parse_int_csv(o.k_csv);
    cfg.model.n_views = static_cast<int>(cfg.model.k_list.size());
  }
  if (o.d_model > 0) cfg.model.d_model = o.d_model;
  if (o.d_ff > 0) cfg.model.d_ff = o.d_ff;
  if (o.heads > 0) cfg.model.n_heads = o.heads;
  if (o.enc_layers > 0) cfg.model.encoder_layers_per_view = o.enc_layers;
  if (o.dec_layers > 0) cfg.model.decoder_layers = o.dec_layers;
  if (o.c_clip > 0) cfg.model.c_clip = o.c_clip;
  if (o.global_view) cfg.model.global_view = true;
  if (o.no_invariance) cfg.model.invariance_off = true;
  if (!o.kind.empty()) cfg.kind = o.kind == "cvrp" ? Kind::kCvrp : Kind::kTsp;
  if (!o.dist.empty()) cfg.distribution = dist_from_name(o.dist);
  if (o.n > 0) cfg.n_nodes = o.n;
  if (o.epochs > 0) cfg.epochs = o.epochs;
  if (o.steps > 0) cfg.steps_per_epoch = o.steps;
  if (o.batch > 0) cfg.batch_size = o.batch;
  if (o.omega > 0) cfg.omega = o.omega;
  if (o.eval_instances > 0) cfg.eval_instances = o.eval_instances;
  if (o.lr > 0) cfg.lr = o.lr;
  if (o.weight_decay >= 0) cfg.weight_decay = o.weight_decay;
  if (o.grad_clip > 0) cfg.grad_clip = o.grad_clip;
  cfg.seed = g.seed;
  cfg.workers = resolve_workers(g);
  cfg.out_dir = ensure_out_dir(g);

  const TrainResult res = train(cfg, o.resume);
  write_manifest(cfg.out_dir, "train", train_config_to_json(cfg), g,
                 o.resume.empty() ? std::vector<std::string>{}
                                  : std::vector<std::string>{o.resume},
                 {"metrics.csv", "latest.ckpt"});
  std::printf("trained %d epochs (%d steps); final eval mean %.6f\n", res.epochs_run,
              res.global_steps, res.final_eval_mean);
  std::printf("checkpoint: %s\nmetrics: %s\n", res.checkpoint_path.c_str(),
              res.metrics_path.c_str());
  return 0;
}

// -------------------------------------------------------------- solve/eval

struct SolveOpts {
  std::string checkpoint;
  std::string instances;
  std::string reference = "auto";
  std::string reference_file;
  int omega = 8;
  int pomo_size = 8;
};

int cmd_solve_eval(const GlobalOpts& g, const SolveOpts& o, bool write_tours) {
  const std::string dir = ensure_out_dir(g);
  PolicyParamsT<float> params = load_policy(o.checkpoint);
  const std::vector<Instance> instances = load_instance_arg(o.instances);
  const int workers = resolve_workers(g);

  std::vector<TourT<float>> tours(instances.size());
  std::vector<double> runtimes(instances.size(), 0.0);
  parallel_for(instances.size(), workers, [&](size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    tours[i] = solve(instances[i], params, o.omega, o.pomo_size,
                     derive_seed(g.seed, {0x736c7665, i}));  // "slve"
    runtimes[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<std::optional<double>> ref_costs(instances.size());
  if (!o.reference_file.empty()) {
    const auto costs = load_reference_costs(o.reference_file, instances.size());
    for (size_t i = 0; i < costs.size(); ++i) ref_costs[i] = costs[i];
  } else if (o.reference != "none") {
    parallel_for(instances.size(), workers, [&](size_t i) {
      try {
        if (auto ref = make_reference(instances[i], o.reference)) ref_costs[i] = ref->cost;
      } catch (const InputError& e) {
        if (o.reference != "auto") throw;
        log::warn("instance %zu: no reference (%s)", i, e.what());
      }
    });
  }

  const std::string csv_path = dir + "/results.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw InputError("cannot open for writing: " + csv_path);
  csv << "instance,model_cost,reference_cost,gap_pct,runtime_sec\n";
  double gap_sum = 0.0;
  int gap_count = 0;
  for (size_t i = 0; i < instances.size(); ++i) {
    csv << i << ',' << format_g9(tours[i].cost) << ',';
    if (ref_costs[i]) {
      const double gp = gap(tours[i].cost, *ref_costs[i]);
      gap_sum += gp;
      ++gap_count;
      csv << format_g9(*ref_costs[i]) << ',' << format_g9(gp);
    } else {
      csv << "no-reference,no-reference";
    }
    csv << ',' << format_g9(g.deterministic ? 0.0 : runtimes[i]) << '\n';
  }
  csv.close();

  std::vector<std::string> outputs = {"results.csv"};
  if (write_tours) {
    json arr = json::array();
    for (size_t i = 0; i < instances.size(); ++i)
      arr.push_back({{"instance", i},
                     {"indices", tours[i].indices},
                     {"cost", tours[i].cost},
                     {"aug_id", tours[i].aug_id},
                     {"start_id", tours[i].start_id}});
    write_text(dir + "/tours.json", arr.dump(2) + "\n");
    outputs.push_back("tours.json");
  }
  write_manifest(dir, write_tours ? "solve" : "eval",
                 {{"checkpoint", o.checkpoint},
                  {"instances", o.instances},
                  {"reference", o.reference},
                  {"reference_file", o.reference_file},
                  {"omega", o.omega},
                  {"pomo_size", o.pomo_size}},
                 g, {o.checkpoint, o.instances}, outputs);

  double mean_cost = 0.0;
  for (const auto& t : tours) mean_cost += t.cost;
  mean_cost /= static_cast<double>(tours.size());
  std::printf("%zu instances: mean cost %.6f", tours.size(), mean_cost);
  if (gap_count > 0) std::printf(", mean gap %.4f%% (%d referenced)", gap_sum / gap_count,
                                 gap_count);
  std::printf("\nresults: %s\n", csv_path.c_str());
  return 0;
}

// ------------------------------------------------------------------- stats

struct StatsOpts {
  std::string instances;
  std::string reference = "auto";
  int max_rank = 32;
  std::string added_csv = "5";
  double lo = 1.5, hi = 2.5;
  std::string checkpoint;
  int k = 0;
};

int cmd_stats_knn_rank(const GlobalOpts& g, const StatsOpts& o) {
  const std::string dir = ensure_out_dir(g);
  const std::vector<Instance> instances = load_instance_arg(o.instances);
  const int workers = resolve_workers(g);
  std::vector<std::vector<int>> ref_tours(instances.size());
  parallel_for(instances.size(), workers, [&](size_t i) {
    auto ref = make_reference(instances[i], o.reference == "auto" ? "auto" : o.reference);
    if (!ref) throw InputError("knn-rank needs reference tours (reference mode 'none' given)");
    ref_tours[i] = ref->tour;
  });
  const RankHistogram hist = knn_rank_histogram(instances, ref_tours, o.max_rank);
  write_rank_histogram_csv(dir + "/rank_histogram.csv", hist);
  write_manifest(dir, "stats knn-rank",
                 {{"instances", o.instances},
                  {"reference", o.reference},
                  {"max_rank", o.max_rank}},
                 g, {o.instances}, {"rank_histogram.csv"});
  std::printf("%zu tours, %lld transitions; cumulative mass at rank 8: %.4f\n",
              instances.size(), static_cast<long long>(hist.total), hist.cumulative(8));
  return 0;
}

int cmd_stats_overlap(const GlobalOpts& g, const StatsOpts& o) {
  const std::string dir = ensure_out_dir(g);
  const std::vector<Instance> instances = load_instance_arg(o.instances);
  const std::vector<int> counts = parse_int_csv(o.added_csv);
  std::vector<OverlapResult> rows(instances.size() * counts.size());
  const int workers = resolve_workers(g);
  parallel_for(rows.size(), workers, [&](size_t idx) {
    const size_t ci = idx / instances.size();
    const size_t ii = idx % instances.size();
    rows[idx] = boundary_augmentation_overlap(instances[ii], counts[ci],
                                              derive_seed(g.seed, {0x6f766c, idx}), o.lo, o.hi);
  });
  write_overlap_csv(dir + "/overlap.csv", rows);
  write_manifest(dir, "stats overlap",
                 {{"instances", o.instances},
                  {"added", o.added_csv},
                  {"lo", o.lo},
                  {"hi", o.hi}},
                 g, {o.instances}, {"overlap.csv"});
  for (size_t ci = 0; ci < counts.size(); ++ci) {
    double mean = 0.0;
    for (size_t ii = 0; ii < instances.size(); ++ii)
      mean += rows[ci * instances.size() + ii].overlap_pct;
    mean /= static_cast<double>(instances.size());
    std::printf("added %d: mean overlap %.2f%% over %zu instances\n", counts[ci], mean,
                instances.size());
  }
  return 0;
}

int cmd_stats_attention(const GlobalOpts& g, const StatsOpts& o) {
  const std::string dir = ensure_out_dir(g);
  PolicyParamsT<float> params = load_policy(o.checkpoint);
  if (!params.config.global_view) {
    log::warn("checkpoint is not the all-remaining-view variant; enabling it for analysis");
    params.config.global_view = true;
  }
  const std::vector<Instance> instances = load_instance_arg(o.instances);
  const int k = o.k > 0 ? o.k : params.config.k_list[0];
  const AttentionMassHistogram hist = collect_attention_mass(instances, params, k);
  write_attention_csv(dir + "/attention_mass.csv", hist);
  write_manifest(dir, "stats attention",
                 {{"checkpoint", o.checkpoint},
                  {"instances", o.instances},
                  {"k", k},
                  {"queries", hist.queries},
                  {"mean_mass", hist.mean},
                  {"median_mass", hist.median}},
                 g, {o.checkpoint, o.instances}, {"attention_mass.csv"});
  std::printf("mass beyond %d-NN over %lld queries: mean %.6f, median %.6f\n", k,
              static_cast<long long>(hist.queries), hist.mean, hist.median);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invit: invariant nested-view transformer routing solver"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root random seed")->envname("INVIT_SEED");
  app.add_option("--workers", g.workers, "worker threads (0 = all cores)")
      ->envname("INVIT_WORKERS");
  app.add_flag("--deterministic", g.deterministic,
               "bit-reproducible outputs; forces one worker")
      ->envname("INVIT_DETERMINISTIC");
  app.add_option("--out", g.out, "output directory")->envname("INVIT_OUT");
  app.set_config("--config", "", "INI/TOML config file (flags take precedence)")
      ->envname("INVIT_CONFIG");

  GenerateOpts gen;
  CLI::App* sub_gen = app.add_subcommand("generate", "write instance datasets");
  sub_gen->fallthrough();
  sub_gen->add_option("--kind", gen.kind, "tsp or cvrp");
  sub_gen->add_option("--dist", gen.dist, "uniform, clustered, explosion, or implosion");
  sub_gen->add_option("--n", gen.n, "nodes (TSP) or customers (CVRP)");
  sub_gen->add_option("--count", gen.count, "instances to generate");
  sub_gen->add_flag("--force", gen.force, "overwrite a non-empty output directory");
  sub_gen->add_option("--preset", gen.preset, "msvdrp-mini: 4 distributions x sizes 20/50/100");

  TrainCliOpts tr;
  CLI::App* sub_train = app.add_subcommand("train", "train a policy");
  sub_train->fallthrough();
  sub_train->add_option("--preset", tr.preset, "smoke: TSP-20 single-core preset");
  sub_train->add_option("--resume", tr.resume, "checkpoint to continue from");
  sub_train->add_option("--views", tr.views, "number of nested views");
  sub_train->add_option("--k", tr.k_csv, "comma-separated view sizes, descending (e.g. 50,35,15)");
  sub_train->add_option("--d-model", tr.d_model, "embedding width");
  sub_train->add_option("--d-ff", tr.d_ff, "feed-forward width");
  sub_train->add_option("--heads", tr.heads, "attention heads");
  sub_train->add_option("--enc-layers", tr.enc_layers, "encoder layers per view");
  sub_train->add_option("--dec-layers", tr.dec_layers, "decoder layers (>= 2)");
  sub_train->add_option("--c-clip", tr.c_clip, "logit tanh clip scale");
  sub_train->add_flag("--global", tr.global_view, "largest view spans all remaining nodes");
  sub_train->add_flag("--no-invariance", tr.no_invariance, "feed raw coordinates (ablation)");
  sub_train->add_option("--kind", tr.kind, "tsp or cvrp");
  sub_train->add_option("--dist", tr.dist, "training distribution");
  sub_train->add_option("--n", tr.n, "instance size");
  sub_train->add_option("--epochs", tr.epochs, "epochs");
  sub_train->add_option("--steps", tr.steps, "steps per epoch");
  sub_train->add_option("--batch", tr.batch, "instances per step");
  sub_train->add_option("--omega", tr.omega, "augmentations per instance");
  sub_train->add_option("--eval-instances", tr.eval_instances, "baseline-comparison set size");
  sub_train->add_option("--lr", tr.lr, "learning rate");
  sub_train->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
  sub_train->add_option("--grad-clip", tr.grad_clip, "global gradient norm clip");

  SolveOpts so;
  CLI::App* sub_solve = app.add_subcommand("solve", "solve instances with a trained policy");
  CLI::App* sub_eval = app.add_subcommand("eval", "evaluate a policy against references");
  for (CLI::App* s : {sub_solve, sub_eval}) {
    s->fallthrough();
    s->add_option("--checkpoint", so.checkpoint, "trained checkpoint")->required();
    s->add_option("--instances", so.instances, "instance file or directory")->required();
    s->add_option("--reference", so.reference, "auto, exact, nn2opt, nn, or none");
    s->add_option("--reference-file", so.reference_file, "JSON array of reference costs");
    s->add_option("--aug", so.omega, "test-time augmentations (omega)");
    s->add_option("--pomo-size", so.pomo_size, "total greedy rollouts kept");
  }

  StatsOpts st;
  CLI::App* sub_stats = app.add_subcommand("stats", "emit the analysis CSVs");
  sub_stats->require_subcommand(1);
  sub_stats->fallthrough();
  CLI::App* st_rank = sub_stats->add_subcommand("knn-rank", "reference-action rank histogram");
  st_rank->fallthrough();
  st_rank->add_option("--instances", st.instances, "instance file or directory")->required();
  st_rank->add_option("--reference", st.reference, "auto, exact, nn2opt, or nn");
  st_rank->add_option("--max-rank", st.max_rank, "histogram buckets before overflow");
  CLI::App* st_ovlp = sub_stats->add_subcommand("overlap", "optimal-edge overlap under far-node augmentation");
  st_ovlp->fallthrough();
  st_ovlp->add_option("--instances", st.instances, "instance file or directory")->required();
  st_ovlp->add_option("--added", st.added_csv, "comma-separated added-node counts");
  st_ovlp->add_option("--lo", st.lo, "inner annulus radius around the board center");
  st_ovlp->add_option("--hi", st.hi, "outer annulus radius around the board center");
  CLI::App* st_attn = sub_stats->add_subcommand("attention", "attention mass beyond the k nearest");
  st_attn->fallthrough();
  st_attn->add_option("--checkpoint", st.checkpoint, "trained checkpoint")->required();
  st_attn->add_option("--instances", st.instances, "instance file or directory")->required();
  st_attn->add_option("--k", st.k, "neighbor cutoff (default: largest configured view)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_gen->parsed()) return cmd_generate(g, gen);
    if (sub_train->parsed()) return cmd_train(g, tr);
    if (sub_solve->parsed()) return cmd_solve_eval(g, so, true);
    if (sub_eval->parsed()) return cmd_solve_eval(g, so, false);
    if (sub_stats->parsed()) {
      if (st_rank->parsed()) return cmd_stats_knn_rank(g, st);
      if (st_ovlp->parsed()) return cmd_stats_overlap(g, st);
      if (st_attn->parsed()) return cmd_stats_attention(g, st);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
