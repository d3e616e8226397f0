#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "invit/errors.hpp"
#include "invit/instance.hpp"
#include "invit/policy.hpp"
#include "invit/rng.hpp"
#include "invit/state.hpp"

namespace invit {

/// One dihedral-group element (0..7) plus a start id. For TSP `start` is the
/// start node; for CVRP it is the forced first customer, -1 for none (tours
/// always begin at the depot).
struct AugmentSpec {
  int transform = 0;
  int start = 0;
  int index = 0;  // slot within the augmentation set
};

template <typename T>
struct TourT {
  std::vector<int> indices;
  double cost = 0.0;
  std::vector<double> step_logprobs;
  int aug_id = 0;
  int start_id = 0;
  std::string mode;           // "greedy" | "sample"
  TensorT<T> sum_logprob;     // defined only when the rollout recorded a graph

  double total_logprob() const {
    double s = 0.0;
    for (double lp : step_logprobs) s += lp;
    return s;
  }
};

using Tour = TourT<float>;

/// Applies dihedral transform t (0..7) to a unit-square point.
Vec2 dihedral_apply(const Vec2& p, int t);

/// Builds up to omega (instance, spec) pairs: dihedral images re-run through
/// rescale_unit_square, each with a distinct start. Slot 0 is always the
/// identity transform with the canonical start (TSP node 0 / CVRP unforced).
/// omega > 8 reuses transforms cyclically with fresh starts (warned).
/// cvrp_start_pool bounds the forced-first-customer pool to the depot's
/// nearest feasible customers (typically the model's smallest k).
std::vector<std::pair<Instance, AugmentSpec>> augment(const Instance& inst, int omega,
                                                      uint64_t seed, int cvrp_start_pool = 8);

/// Feasibility audit: visit-exactly-once via tour_cost plus CVRP per-trip
/// capacity. Throws InputError on violation.
void audit_tour(const Instance& inst, const std::vector<int>& tour);

enum class RolloutMode { kGreedy, kSample };

/// Autoregressive construction. Forced steps (the TSP start, the CVRP forced
/// first customer) are part of the rollout specification, not policy
/// decisions, so they contribute no log-probability term. With record_graph
/// the returned tour carries sum_logprob for backward; otherwise the forward
/// runs in no-grad mode.
template <typename T>
TourT<T> rollout(const Instance& inst, const PolicyParamsT<T>& params, RolloutMode mode,
                 int start, Rng& rng, bool record_graph = false) {
  std::unique_ptr<NoGradGuard> guard;
  if (!record_graph) guard = std::make_unique<NoGradGuard>();

  const bool cvrp = inst.kind == Kind::kCvrp;
  State state = cvrp ? init_state(inst, inst.depot)
                     : init_state(inst, start < 0 ? 0 : start);
  if (cvrp && start >= 0) state = apply_action(state, start);

  TourT<T> tour;
  tour.mode = mode == RolloutMode::kGreedy ? "greedy" : "sample";
  tour.start_id = start;
  TensorT<T> sum_lp;

  while (!state.is_terminal()) {
    PolicyStepResultT<T> step = policy_step(state, params);
    const auto& probs = step.cand_probs.data();
    const size_t m = step.candidates.size();
    size_t pick_idx = 0;
    if (mode == RolloutMode::kGreedy) {
      // argmax; ties resolved toward the lowest node index
      T best = probs[0];
      int best_node = step.candidates[0];
      for (size_t j = 1; j < m; ++j) {
        if (probs[j] > best || (probs[j] == best && step.candidates[j] < best_node)) {
          best = probs[j];
          best_node = step.candidates[j];
          pick_idx = j;
        }
      }
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      pick_idx = m - 1;
      for (size_t j = 0; j < m; ++j) {
        acc += static_cast<double>(probs[j]);
        if (u < acc) {
          pick_idx = j;
          break;
        }
      }
    }
    tour.step_logprobs.push_back(std::log(static_cast<double>(probs[pick_idx])));
    if (record_graph) {
      TensorT<T> lp = log_elem(pick(step.cand_probs, 0, static_cast<int>(pick_idx)));
      sum_lp = sum_lp.defined() ? add(sum_lp, lp) : lp;
    }
    state = apply_action(state, step.candidates[pick_idx]);
  }

  tour.indices = state.partial_tour;
  tour.cost = tour_cost(inst, tour.indices);
  if (record_graph) tour.sum_logprob = sum_lp;
  return tour;
}

/// Recomputes the summed log-probability of a fixed action sequence on the
/// current parameters (graph recorded). `actions` excludes the forced start;
/// used by the REINFORCE surrogate gradient check.
template <typename T>
TensorT<T> replay_sum_logprob(const Instance& inst, int start, const std::vector<int>& actions,
                              const PolicyParamsT<T>& params) {
  const bool cvrp = inst.kind == Kind::kCvrp;
  State state = cvrp ? init_state(inst, inst.depot)
                     : init_state(inst, start < 0 ? 0 : start);
  if (cvrp && start >= 0) state = apply_action(state, start);
  TensorT<T> sum_lp;
  for (int action : actions) {
    PolicyStepResultT<T> step = policy_step(state, params);
    int idx = -1;
    for (size_t j = 0; j < step.candidates.size(); ++j)
      if (step.candidates[j] == action) {
        idx = static_cast<int>(j);
        break;
      }
    if (idx < 0) throw LogicError("replay: action not in candidate set");
    TensorT<T> lp = log_elem(pick(step.cand_probs, 0, idx));
    sum_lp = sum_lp.defined() ? add(sum_lp, lp) : lp;
    state = apply_action(state, action);
  }
  if (!state.is_terminal()) throw LogicError("replay: action sequence is incomplete");
  return sum_lp;
}

/// Best-of-(omega x starts) greedy search: round-robin over the augmented
/// instances, adding one more start per cycle, until pomo_size rollouts run
/// (or starts are exhausted). Costs are re-evaluated on the original
/// instance, so the minimum is exact and slot (0,0) reproduces the plain
/// single-greedy tour.
template <typename T>
TourT<T> solve(const Instance& inst, const PolicyParamsT<T>& params, int omega, int pomo_size,
               uint64_t seed = 0) {
  if (omega < 1 || pomo_size < 1) throw LogicError("solve: omega and pomo_size must be >= 1");
  const int k_min = params.config.k_list.back();
  auto augs = augment(inst, omega, seed, k_min);
  const int n_aug = static_cast<int>(augs.size());
  const bool cvrp = inst.kind == Kind::kCvrp;

  // Per-augmentation start sequences: spec start first, then the remaining
  // pool in a deterministic per-augmentation shuffle.
  std::vector<std::vector<int>> starts(static_cast<size_t>(n_aug));
  for (int a = 0; a < n_aug; ++a) {
    auto& seq = starts[static_cast<size_t>(a)];
    seq.push_back(augs[static_cast<size_t>(a)].second.start);
    std::vector<int> pool;
    if (cvrp) {
      // forced first customers come from the depot's nearest feasible pool
      State depot_state = init_state(inst, inst.depot);
      pool = candidate_set(depot_state, k_min);
    } else {
      pool.resize(static_cast<size_t>(inst.n()));
      for (int i = 0; i < inst.n(); ++i) pool[static_cast<size_t>(i)] = i;
    }
    Rng pool_rng = Rng::stream(seed, {0x736f6c76, static_cast<uint64_t>(a)});  // "solv"
    pool_rng.shuffle(pool);
    for (int node : pool)
      if (node != seq[0]) seq.push_back(node);
  }

  TourT<T> best;
  bool have = false;
  Rng dummy(0);
  int produced = 0;
  for (int round = 0; produced < pomo_size; ++round) {
    bool any = false;
    for (int a = 0; a < n_aug && produced < pomo_size; ++a) {
      const auto& seq = starts[static_cast<size_t>(a)];
      if (round >= static_cast<int>(seq.size())) continue;
      any = true;
      TourT<T> t = rollout(augs[static_cast<size_t>(a)].first, params, RolloutMode::kGreedy,
                           seq[static_cast<size_t>(round)], dummy, false);
      t.aug_id = a;
      t.cost = tour_cost(inst, t.indices);  // exact comparison frame
      ++produced;
      if (!have || t.cost < best.cost) {
        best = t;
        have = true;
      }
    }
    if (!any) break;
  }
  return best;
}

}  // namespace invit
