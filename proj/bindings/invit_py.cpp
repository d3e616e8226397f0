#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "invit/analysis.hpp"
#include "invit/instance.hpp"
#include "invit/oracle.hpp"
#include "invit/rollout.hpp"
#include "invit/training.hpp"
#include "invit/version.hpp"

namespace py = pybind11;
using namespace invit;

namespace {

Instance py_generate(const std::string& kind, const std::string& distribution, int n,
                     uint64_t seed, int capacity, int demand_lo, int demand_hi) {
  GenParams p;
  p.distribution = dist_from_name(distribution);
  p.n = n;
  p.seed = seed;
  p.capacity = capacity;
  p.demand_lo = demand_lo;
  p.demand_hi = demand_hi;
  return generate(p, kind == "cvrp" ? Kind::kCvrp : Kind::kTsp);
}

struct Policy {
  PolicyParamsT<float> params;
};

py::dict tour_to_dict(const TourT<float>& t) {
  py::dict d;
  d["indices"] = t.indices;
  d["cost"] = t.cost;
  d["aug_id"] = t.aug_id;
  d["start_id"] = t.start_id;
  d["mode"] = t.mode;
  return d;
}

}  // namespace

PYBIND11_MODULE(_invit, m) {
  m.doc() = "invariant nested-view transformer routing solver";
  m.attr("__version__") = kVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Instance>(m, "Instance")
      .def(py::init<>())
      .def_property(
          "kind", [](const Instance& i) { return kind_name(i.kind); },
          [](Instance& i, const std::string& k) {
            i.kind = k == "cvrp" ? Kind::kCvrp : Kind::kTsp;
          })
      .def_readwrite("coords", &Instance::coords)
      .def_readwrite("depot", &Instance::depot)
      .def_readwrite("demands", &Instance::demands)
      .def_readwrite("capacity", &Instance::capacity)
      .def("n", &Instance::n)
      .def("validate", &Instance::validate)
      .def("to_json", [](const Instance& i) { return instance_to_json(i).dump(); })
      .def_static("from_json",
                  [](const std::string& s) { return instance_from_json(nlohmann::json::parse(s)); });

  py::class_<Reference>(m, "Reference")
      .def_readonly("tour", &Reference::tour)
      .def_readonly("cost", &Reference::cost)
      .def_readonly("quality", &Reference::quality)
      .def_readonly("solver", &Reference::solver)
      .def_readonly("runtime_sec", &Reference::runtime_sec);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_views", &ModelConfig::n_views)
      .def_readwrite("k_list", &ModelConfig::k_list)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("d_ff", &ModelConfig::d_ff)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("encoder_layers_per_view", &ModelConfig::encoder_layers_per_view)
      .def_readwrite("decoder_layers", &ModelConfig::decoder_layers)
      .def_readwrite("c_clip", &ModelConfig::c_clip)
      .def_readwrite("global_view", &ModelConfig::global_view)
      .def_readwrite("invariance_off", &ModelConfig::invariance_off)
      .def("validate", &ModelConfig::validate);

  py::class_<Policy>(m, "Policy")
      .def_property_readonly("config", [](const Policy& p) { return p.params.config; })
      .def("param_count", [](const Policy& p) { return p.params.param_count(); });

  m.def("generate", &py_generate, py::arg("kind") = "tsp", py::arg("distribution") = "uniform",
        py::arg("n") = 20, py::arg("seed") = 0, py::arg("capacity") = 50,
        py::arg("demand_lo") = 1, py::arg("demand_hi") = 10,
        "Sample one instance (coordinates rescaled to the unit square)");
  m.def("tour_cost", &tour_cost, py::arg("instance"), py::arg("tour"));
  m.def("rescale_unit_square", &rescale_unit_square, py::arg("instance"));
  m.def("parse_tsplib", &parse_tsplib, py::arg("text"));
  m.def("parse_cvrplib", &parse_cvrplib, py::arg("text"));

  m.def("held_karp", &held_karp, py::arg("instance"));
  m.def("cvrp_exact_tiny", &cvrp_exact_tiny, py::arg("instance"));
  m.def("nearest_neighbor", &nearest_neighbor, py::arg("instance"), py::arg("start") = 0);
  m.def("two_opt", &two_opt, py::arg("instance"), py::arg("tour"), py::arg("max_passes") = 0);
  m.def("near_optimal_reference", &near_optimal_reference, py::arg("instance"),
        py::arg("starts") = 10);
  m.def("gap", &gap, py::arg("model_cost"), py::arg("ref_cost"));

  m.def(
      "init_policy",
      [](const ModelConfig& cfg, uint64_t seed) {
        return Policy{init_policy<float>(cfg, seed)};
      },
      py::arg("config"), py::arg("seed") = 0);
  m.def(
      "load_policy", [](const std::string& path) { return Policy{load_policy(path)}; },
      py::arg("path"));

  m.def(
      "rollout",
      [](const Instance& inst, const Policy& p, const std::string& mode, int start,
         uint64_t seed) {
        Rng rng(seed);
        return tour_to_dict(rollout(inst, p.params,
                                    mode == "sample" ? RolloutMode::kSample
                                                     : RolloutMode::kGreedy,
                                    start, rng, false));
      },
      py::arg("instance"), py::arg("policy"), py::arg("mode") = "greedy",
      py::arg("start") = -1, py::arg("seed") = 0);
  m.def(
      "solve",
      [](const Instance& inst, const Policy& p, int omega, int pomo_size, uint64_t seed) {
        return tour_to_dict(solve(inst, p.params, omega, pomo_size, seed));
      },
      py::arg("instance"), py::arg("policy"), py::arg("omega") = 8, py::arg("pomo_size") = 8,
      py::arg("seed") = 0);
  m.def("audit_tour", &audit_tour, py::arg("instance"), py::arg("tour"));

  m.def(
      "train",
      [](const std::string& config_json, const std::string& resume) {
        const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(config_json));
        const TrainResult res = train(cfg, resume);
        py::dict d;
        d["epochs_run"] = res.epochs_run;
        d["global_steps"] = res.global_steps;
        d["final_eval_mean"] = res.final_eval_mean;
        d["checkpoint_path"] = res.checkpoint_path;
        d["metrics_path"] = res.metrics_path;
        return d;
      },
      py::arg("config_json"), py::arg("resume") = "",
      "Run the training loop from a JSON config string");
  m.def("smoke_train_config", [] { return train_config_to_json(TrainConfig::smoke()).dump(); });

  m.def(
      "knn_rank_histogram",
      [](const std::vector<Instance>& instances, const std::vector<std::vector<int>>& tours,
         int max_rank) {
        const RankHistogram h = knn_rank_histogram(instances, tours, max_rank);
        py::dict d;
        d["counts"] = h.counts;
        d["overflow"] = h.overflow;
        d["total"] = h.total;
        d["cumulative_at_8"] = h.cumulative(8);
        return d;
      },
      py::arg("instances"), py::arg("tours"), py::arg("max_rank") = 32);
  m.def(
      "boundary_augmentation_overlap",
      [](const Instance& inst, int n_add, uint64_t seed, double lo, double hi) {
        return boundary_augmentation_overlap(inst, n_add, seed, lo, hi).overlap_pct;
      },
      py::arg("instance"), py::arg("n_add"), py::arg("seed") = 0, py::arg("lo") = 1.5,
      py::arg("hi") = 2.5);
}
