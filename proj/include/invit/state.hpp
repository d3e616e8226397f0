#pragma once

#include <vector>

#include "invit/instance.hpp"

namespace invit {

/// Partial-solution state of the routing MDP. Value-semantic; holds a
/// non-owning pointer to the instance, which must outlive the state.
struct State {
  const Instance* instance = nullptr;
  std::vector<uint8_t> visited;
  std::vector<int> partial_tour;
  int first = -1;  // first visited node (TSP) or depot (CVRP)
  int last = -1;
  int remaining_capacity = 0;
  int step = 0;
  int visited_customers = 0;

  bool cvrp() const { return instance->kind == Kind::kCvrp; }
  int customer_count() const {
    return cvrp() ? instance->n() - 1 : instance->n();
  }
  bool is_terminal() const {
    if (visited_customers < customer_count()) return false;
    return !cvrp() || last == instance->depot;
  }
};

/// One k-NN subgraph around the last visited node, in normalized coordinates.
struct View {
  int k = 0;
  std::vector<int> nodes;        // candidate nodes, sorted by (distance to last, index)
  std::vector<Vec2> norm;        // normalized coords, parallel to nodes
  std::vector<double> extra;     // demand/R per candidate (0 for TSP)
  Vec2 last_norm{0.0, 0.0};
  Vec2 first_norm{0.0, 0.0};
  double last_extra = 0.0;       // remaining_capacity/R (0 for TSP)
  bool first_projected = false;  // true when first/depot was clipped in
};

struct ViewSet {
  std::vector<int> k_list;      // descending, as configured
  std::vector<View> views;      // parallel to k_list
  std::vector<int> candidates;  // A^p: the smallest view's candidate nodes
  int last = -1;
  int first = -1;
};

/// TSP: start may be any node. CVRP: start must be the depot.
State init_state(const Instance& inst, int start);

/// Sorted ascending by node index. TSP: unvisited nodes. CVRP: unvisited
/// customers within remaining capacity, plus the depot unless currently
/// there; a forced depot return when no customer fits. Throws on terminal.
std::vector<int> feasible_actions(const State& state);

/// Feasible actions sorted by (distance from the last visited node, index),
/// measured in the instance's original coordinates.
std::vector<int> ranked_feasible(const State& state);

/// The min(k_min, |feasible|) feasible actions nearest to the last visited
/// node (ties by index); CVRP appends the depot when feasible even if it is
/// not among the k nearest.
std::vector<int> candidate_set(const State& state, int k_min);

/// Builds one view per k (k_list strictly descending); the smallest view's
/// candidates define A^p. Coordinates are normalized per view: min-subtract
/// and divide by the largest axis extent of the normalization set (the
/// candidates plus the last node); an infeasible first/depot is mapped by
/// the same transform and clipped into the unit square.
ViewSet extract_views(const State& state, const std::vector<int>& k_list);

/// Standalone normalization of a point set (the candidates-plus-last set),
/// with optional extra points transformed by the same map and clipped.
/// Coincident input sets normalize to all-zeros and log a warning.
std::vector<Vec2> invariant_normalize(const std::vector<Vec2>& norm_set,
                                      const std::vector<Vec2>& projected,
                                      std::vector<Vec2>* projected_out);

State apply_action(const State& state, int node);

}  // namespace invit
