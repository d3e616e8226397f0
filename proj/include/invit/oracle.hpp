#pragma once

#include <string>
#include <vector>

#include "invit/instance.hpp"

namespace invit {

struct Reference {
  std::vector<int> tour;
  double cost = 0.0;
  std::string quality;  // "exact" | "heuristic"
  std::string solver;
  double runtime_sec = 0.0;
};

/// Exact TSP by Held-Karp dynamic programming; n <= 20 enforced.
Reference held_karp(const Instance& inst);

/// Exact CVRP by per-subset route DP plus set-partition DP; at most 8
/// customers enforced.
Reference cvrp_exact_tiny(const Instance& inst);

/// Greedy nearest-feasible construction. TSP: begins at `start`. CVRP:
/// always begins at the depot (start ignored); returns to the depot when no
/// customer fits the remaining capacity.
Reference nearest_neighbor(const Instance& inst, int start = 0);

/// Improving 2-edge exchanges until local optimality or max_passes full
/// sweeps (max_passes <= 0 means until convergence). TSP only.
Reference two_opt(const Instance& inst, const std::vector<int>& tour, int max_passes = 0);

/// Best of `starts` evenly spaced nearest-neighbor starts, each polished by
/// two_opt to convergence; the near-optimal desk-scale TSP reference.
Reference near_optimal_reference(const Instance& inst, int starts = 10);

/// (model - ref) / ref * 100. ref must be positive.
double gap(double model_cost, double ref_cost);

}  // namespace invit
