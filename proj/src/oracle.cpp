#include "invit/oracle.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "invit/errors.hpp"

namespace invit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double edge(const Instance& inst, int a, int b) {
  return dist(inst.coords[static_cast<size_t>(a)], inst.coords[static_cast<size_t>(b)]);
}

}  // namespace

Reference held_karp(const Instance& inst) {
  const auto t0 = Clock::now();
  if (inst.kind != Kind::kTsp) throw InputError("held_karp: TSP instances only");
  const int n = inst.n();
  if (n < 2) throw InputError("held_karp: need at least 2 nodes");
  if (n > 20) throw InputError("held_karp: size bound is 20 nodes, got " + std::to_string(n));

  if (n == 2) {
    Reference ref;
    ref.tour = {0, 1};
    ref.cost = tour_cost(inst, ref.tour);
    ref.quality = "exact";
    ref.solver = "held_karp";
    ref.runtime_sec = seconds_since(t0);
    return ref;
  }

  // Node 0 is the fixed tour anchor; DP over subsets of nodes 1..n-1.
  const int m = n - 1;
  const size_t full = size_t(1) << m;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(full * static_cast<size_t>(m), inf);
  std::vector<int8_t> parent(full * static_cast<size_t>(m), -1);

  for (int j = 0; j < m; ++j)
    dp[(size_t(1) << j) * static_cast<size_t>(m) + static_cast<size_t>(j)] = edge(inst, 0, j + 1);

  for (size_t mask = 1; mask < full; ++mask) {
    const size_t base = mask * static_cast<size_t>(m);
    for (int j = 0; j < m; ++j) {
      if (!(mask & (size_t(1) << j))) continue;
      const double cur = dp[base + static_cast<size_t>(j)];
      if (cur == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask & (size_t(1) << k)) continue;
        const size_t next = mask | (size_t(1) << k);
        const double cand = cur + edge(inst, j + 1, k + 1);
        double& slot = dp[next * static_cast<size_t>(m) + static_cast<size_t>(k)];
        if (cand < slot) {
          slot = cand;
          parent[next * static_cast<size_t>(m) + static_cast<size_t>(k)] =
              static_cast<int8_t>(j);
        }
      }
    }
  }

  const size_t all = full - 1;
  double best = inf;
  int best_j = -1;
  for (int j = 0; j < m; ++j) {
    const double total = dp[all * static_cast<size_t>(m) + static_cast<size_t>(j)] +
                         edge(inst, j + 1, 0);
    if (total < best) {
      best = total;
      best_j = j;
    }
  }

  std::vector<int> rev;
  size_t mask = all;
  int j = best_j;
  while (j >= 0) {
    rev.push_back(j + 1);
    const int8_t pj = parent[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
    mask &= ~(size_t(1) << j);
    j = pj;
  }
  Reference ref;
  ref.tour.push_back(0);
  ref.tour.insert(ref.tour.end(), rev.rbegin(), rev.rend());
  ref.cost = tour_cost(inst, ref.tour);
  ref.quality = "exact";
  ref.solver = "held_karp";
  ref.runtime_sec = seconds_since(t0);
  return ref;
}

Reference cvrp_exact_tiny(const Instance& inst) {
  const auto t0 = Clock::now();
  if (inst.kind != Kind::kCvrp) throw InputError("cvrp_exact_tiny: CVRP instances only");
  std::vector<int> customers;
  for (int i = 0; i < inst.n(); ++i)
    if (i != inst.depot) customers.push_back(i);
  const int m = static_cast<int>(customers.size());
  if (m < 1) throw InputError("cvrp_exact_tiny: no customers");
  if (m > 8)
    throw InputError("cvrp_exact_tiny: size bound is 8 customers, got " + std::to_string(m));

  const size_t full = size_t(1) << m;
  const double inf = std::numeric_limits<double>::infinity();

  // Open-path DP within a subset: path[mask][j] = cheapest depot->...->j.
  std::vector<double> path(full * static_cast<size_t>(m), inf);
  std::vector<int8_t> path_par(full * static_cast<size_t>(m), -1);
  for (int j = 0; j < m; ++j)
    path[(size_t(1) << j) * static_cast<size_t>(m) + static_cast<size_t>(j)] =
        edge(inst, inst.depot, customers[static_cast<size_t>(j)]);
  for (size_t mask = 1; mask < full; ++mask) {
    const size_t base = mask * static_cast<size_t>(m);
    for (int j = 0; j < m; ++j) {
      if (!(mask & (size_t(1) << j))) continue;
      const double cur = path[base + static_cast<size_t>(j)];
      if (cur == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask & (size_t(1) << k)) continue;
        const size_t next = mask | (size_t(1) << k);
        const double cand =
            cur + edge(inst, customers[static_cast<size_t>(j)], customers[static_cast<size_t>(k)]);
        double& slot = path[next * static_cast<size_t>(m) + static_cast<size_t>(k)];
        if (cand < slot) {
          slot = cand;
          path_par[next * static_cast<size_t>(m) + static_cast<size_t>(k)] =
              static_cast<int8_t>(j);
        }
      }
    }
  }

  // Closed single-route cost per capacity-feasible subset.
  std::vector<double> route(full, inf);
  std::vector<int> route_end(full, -1);
  std::vector<int> demand_sum(full, 0);
  for (size_t mask = 1; mask < full; ++mask) {
    const size_t low = mask & (mask - 1);
    const int bit = static_cast<int>(std::countr_zero(mask));
    demand_sum[mask] = demand_sum[low] +
                       inst.demands[static_cast<size_t>(customers[static_cast<size_t>(bit)])];
    if (demand_sum[mask] > inst.capacity) continue;
    for (int j = 0; j < m; ++j) {
      if (!(mask & (size_t(1) << j))) continue;
      const double total = path[mask * static_cast<size_t>(m) + static_cast<size_t>(j)] +
                           edge(inst, customers[static_cast<size_t>(j)], inst.depot);
      if (total < route[mask]) {
        route[mask] = total;
        route_end[mask] = j;
      }
    }
  }

  // Set-partition DP over customer subsets.
  std::vector<double> part(full, inf);
  std::vector<size_t> part_choice(full, 0);
  part[0] = 0.0;
  for (size_t mask = 1; mask < full; ++mask) {
    // iterate submasks containing the lowest set bit (canonical split)
    const size_t anchor = mask & (~mask + 1);
    for (size_t sub = mask;; sub = (sub - 1) & mask) {
      if (sub & anchor) {
        if (route[sub] < inf && part[mask ^ sub] < inf) {
          const double total = route[sub] + part[mask ^ sub];
          if (total < part[mask]) {
            part[mask] = total;
            part_choice[mask] = sub;
          }
        }
      }
      if (sub == 0) break;
    }
  }

  // Reconstruct: routes in partition order, each as depot -> path -> (depot).
  Reference ref;
  size_t remaining = full - 1;
  while (remaining) {
    const size_t sub = part_choice[remaining];
    std::vector<int> rev;
    size_t mask = sub;
    int j = route_end[sub];
    while (j >= 0) {
      rev.push_back(customers[static_cast<size_t>(j)]);
      const int8_t pj = path_par[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
      mask &= ~(size_t(1) << j);
      j = pj;
    }
    ref.tour.push_back(inst.depot);
    ref.tour.insert(ref.tour.end(), rev.rbegin(), rev.rend());
    remaining ^= sub;
  }
  ref.cost = tour_cost(inst, ref.tour);
  ref.quality = "exact";
  ref.solver = "cvrp_exact_tiny";
  ref.runtime_sec = seconds_since(t0);
  return ref;
}

Reference nearest_neighbor(const Instance& inst, int start) {
  const auto t0 = Clock::now();
  Reference ref;
  ref.quality = "heuristic";
  ref.solver = "nearest_neighbor";
  const int n = inst.n();
  std::vector<uint8_t> visited(static_cast<size_t>(n), 0);

  if (inst.kind == Kind::kTsp) {
    if (start < 0 || start >= n) throw InputError("nearest_neighbor: start out of range");
    int cur = start;
    visited[static_cast<size_t>(cur)] = 1;
    ref.tour.push_back(cur);
    for (int step = 1; step < n; ++step) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (visited[static_cast<size_t>(i)]) continue;
        const double d = edge(inst, cur, i);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      visited[static_cast<size_t>(best)] = 1;
      ref.tour.push_back(best);
      cur = best;
    }
  } else {
    int cur = inst.depot;
    int remaining = inst.capacity;
    int left = n - 1;
    ref.tour.push_back(cur);
    visited[static_cast<size_t>(inst.depot)] = 1;
    while (left > 0) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (i == inst.depot || visited[static_cast<size_t>(i)]) continue;
        if (inst.demands[static_cast<size_t>(i)] > remaining) continue;
        const double d = edge(inst, cur, i);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      if (best < 0) {
        ref.tour.push_back(inst.depot);
        cur = inst.depot;
        remaining = inst.capacity;
        continue;
      }
      visited[static_cast<size_t>(best)] = 1;
      ref.tour.push_back(best);
      remaining -= inst.demands[static_cast<size_t>(best)];
      cur = best;
      --left;
    }
  }
  ref.cost = tour_cost(inst, ref.tour);
  ref.runtime_sec = seconds_since(t0);
  return ref;
}

Reference two_opt(const Instance& inst, const std::vector<int>& tour, int max_passes) {
  const auto t0 = Clock::now();
  if (inst.kind != Kind::kTsp) throw InputError("two_opt: TSP instances only");
  tour_cost(inst, tour);  // validates the input tour
  std::vector<int> t = tour;
  const int n = static_cast<int>(t.size());
  int pass = 0;
  bool improved = true;
  while (improved && (max_passes <= 0 || pass < max_passes)) {
    improved = false;
    ++pass;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const int a = t[static_cast<size_t>(i)];
        const int b = t[static_cast<size_t>((i + 1) % n)];
        const int c = t[static_cast<size_t>(j)];
        const int d = t[static_cast<size_t>((j + 1) % n)];
        if (a == c || b == d || a == d) continue;
        const double delta = edge(inst, a, c) + edge(inst, b, d) -
                             edge(inst, a, b) - edge(inst, c, d);
        if (delta < -1e-12) {
          std::reverse(t.begin() + i + 1, t.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  Reference ref;
  ref.tour = std::move(t);
  ref.cost = tour_cost(inst, ref.tour);
  ref.quality = "heuristic";
  ref.solver = "two_opt";
  ref.runtime_sec = seconds_since(t0);
  return ref;
}

Reference near_optimal_reference(const Instance& inst, int starts) {
  const auto t0 = Clock::now();
  if (inst.kind != Kind::kTsp)
    throw InputError("near_optimal_reference: TSP instances only");
  if (starts < 1) throw InputError("near_optimal_reference: starts must be >= 1");
  Reference best;
  bool have = false;
  for (int s = 0; s < starts; ++s) {
    const int start = static_cast<int>(static_cast<long>(s) * inst.n() / starts);
    Reference nn = nearest_neighbor(inst, start);
    Reference polished = two_opt(inst, nn.tour, 0);
    if (!have || polished.cost < best.cost) {
      best = polished;
      have = true;
    }
  }
  best.solver = "nn+two_opt";
  best.runtime_sec = seconds_since(t0);
  return best;
}

double gap(double model_cost, double ref_cost) {
  if (!(ref_cost > 0.0)) throw LogicError("gap: reference cost must be positive");
  return (model_cost - ref_cost) / ref_cost * 100.0;
}

}  // namespace invit
