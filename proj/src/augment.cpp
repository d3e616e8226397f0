#include "invit/rollout.hpp"

#include <algorithm>

#include "invit/log.hpp"

namespace invit {

Vec2 dihedral_apply(const Vec2& p, int t) {
  if (t < 0 || t > 7) throw LogicError("dihedral_apply: transform must be in 0..7");
  const double x = p[0], y = p[1];
  switch (t) {
    case 0: return {x, y};
    case 1: return {y, x};
    case 2: return {x, 1.0 - y};
    case 3: return {y, 1.0 - x};
    case 4: return {1.0 - x, y};
    case 5: return {1.0 - y, x};
    case 6: return {1.0 - x, 1.0 - y};
    case 7: return {1.0 - y, 1.0 - x};
  }
  return p;
}

std::vector<std::pair<Instance, AugmentSpec>> augment(const Instance& inst, int omega,
                                                      uint64_t seed, int cvrp_start_pool) {
  if (omega < 1) throw LogicError("augment: omega must be >= 1");
  if (omega > 8)
    log::warn("augment: omega > 8 reuses dihedral transforms with fresh starts");

  const bool cvrp = inst.kind == Kind::kCvrp;
  Rng rng = Rng::stream(seed, {0x6175676dULL});  // "augm"

  // Start sequence: slot 0 is canonical (TSP node 0 / CVRP unforced); the
  // rest are drawn without replacement from the start pool, cycling only
  // when the pool is exhausted.
  std::vector<int> pool;
  if (cvrp) {
    State depot_state = init_state(inst, inst.depot);
    pool = candidate_set(depot_state, std::max(1, cvrp_start_pool));
  } else {
    for (int i = 1; i < inst.n(); ++i) pool.push_back(i);
  }
  rng.shuffle(pool);

  std::vector<int> starts;
  starts.push_back(cvrp ? -1 : 0);
  for (int a = 1; a < omega; ++a) {
    if (pool.empty())
      starts.push_back(starts[0]);
    else
      starts.push_back(pool[static_cast<size_t>((a - 1) % static_cast<int>(pool.size()))]);
  }

  std::vector<std::pair<Instance, AugmentSpec>> out;
  out.reserve(static_cast<size_t>(omega));
  for (int a = 0; a < omega; ++a) {
    Instance img = inst;
    for (auto& c : img.coords) c = dihedral_apply(c, a % 8);
    img = rescale_unit_square(img);
    AugmentSpec spec;
    spec.transform = a % 8;
    spec.start = starts[static_cast<size_t>(a)];
    spec.index = a;
    out.push_back({std::move(img), spec});
  }
  return out;
}

void audit_tour(const Instance& inst, const std::vector<int>& tour) {
  tour_cost(inst, tour);  // validates visit-exactly-once structure
  check_capacity(inst, tour);
}

}  // namespace invit
