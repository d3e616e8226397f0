#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace invit {

using Vec2 = std::array<double, 2>;

inline double dist(const Vec2& a, const Vec2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

enum class Kind { kTsp, kCvrp };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

/// A routing instance. TSP instances have coords only; CVRP instances add a
/// depot index, per-node integer demands (0 at the depot) and a capacity.
struct Instance {
  Kind kind = Kind::kTsp;
  std::vector<Vec2> coords;
  int depot = -1;
  std::vector<int> demands;
  int capacity = 0;
  nlohmann::json meta = nlohmann::json::object();

  int n() const { return static_cast<int>(coords.size()); }

  /// Throws InputError when structural invariants are broken.
  void validate() const;
};

enum class Dist { kUniform, kClustered, kExplosion, kImplosion };

std::string dist_name(Dist d);
Dist dist_from_name(const std::string& name);

struct GenParams {
  Dist distribution = Dist::kUniform;
  int n = 50;  // customer count for CVRP; total node count for TSP
  uint64_t seed = 0;
  // clustered: mixture balanced over {clusters=3, board=10} and {clusters=7, board=50}
  // explosion/implosion disc radius range and explosion push rate
  double r_min = 0.1;
  double r_max = 0.5;
  double lambda = 10.0;
  // CVRP fields
  int capacity = 50;
  int demand_lo = 1;
  int demand_hi = 10;
};

/// Deterministic function of (params, kind); output coordinates lie in the
/// unit square. CVRP instances get node 0 as the depot.
Instance generate(const GenParams& params, Kind kind);

/// Uniformly rescales coordinates into [0,1]^2: per-axis minimum subtracted,
/// both axes divided by the larger extent. Idempotent; preserves aspect ratio.
Instance rescale_unit_square(const Instance& inst);

/// TSPLIB EUC_2D subset. Throws InputError on unsupported or malformed input.
Instance parse_tsplib(const std::string& text);

/// CVRPLIB (Set-X style) subset. Throws InputError on unsupported or
/// malformed input, including any single demand exceeding capacity.
Instance parse_cvrplib(const std::string& text);

/// Euclidean length of the closed tour. The tour must visit every non-depot
/// node exactly once; CVRP tours list depot returns explicitly. The closing
/// edge back to the first index is implicit. Exactly invariant under cyclic
/// rotation and reversal (edge lengths are summed in sorted order).
double tour_cost(const Instance& inst, const std::vector<int>& tour);

/// Capacity check for CVRP tours (per depot-to-depot trip); no-op for TSP.
/// Throws InputError naming the first offending trip.
void check_capacity(const Instance& inst, const std::vector<int>& tour);

nlohmann::json instance_to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

std::string save_instances(const std::vector<Instance>& batch);
std::vector<Instance> load_instances(const std::string& text);

}  // namespace invit
