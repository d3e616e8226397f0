#include "invit/state.hpp"

#include <algorithm>
#include <cmath>

#include "invit/errors.hpp"
#include "invit/log.hpp"

namespace invit {

State init_state(const Instance& inst, int start) {
  if (start < 0 || start >= inst.n()) throw LogicError("init_state: start out of range");
  if (inst.kind == Kind::kCvrp && start != inst.depot)
    throw LogicError("init_state: CVRP tours must start at the depot");
  State s;
  s.instance = &inst;
  s.visited.assign(static_cast<size_t>(inst.n()), 0);
  s.visited[static_cast<size_t>(start)] = 1;
  s.partial_tour = {start};
  s.first = start;
  s.last = start;
  s.step = 1;
  if (inst.kind == Kind::kCvrp) {
    s.remaining_capacity = inst.capacity;
    s.visited_customers = 0;
  } else {
    s.visited_customers = 1;
  }
  return s;
}

std::vector<int> feasible_actions(const State& state) {
  if (state.is_terminal()) throw LogicError("feasible_actions: terminal state");
  const Instance& inst = *state.instance;
  std::vector<int> out;
  if (!state.cvrp()) {
    for (int i = 0; i < inst.n(); ++i)
      if (!state.visited[static_cast<size_t>(i)]) out.push_back(i);
    return out;
  }
  for (int i = 0; i < inst.n(); ++i) {
    if (i == inst.depot || state.visited[static_cast<size_t>(i)]) continue;
    if (inst.demands[static_cast<size_t>(i)] <= state.remaining_capacity) out.push_back(i);
  }
  if (out.empty()) return {inst.depot};
  if (state.last != inst.depot) {
    out.push_back(inst.depot);
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::vector<int> ranked_feasible(const State& state) {
  std::vector<int> feas = feasible_actions(state);
  const Vec2& anchor = state.instance->coords[static_cast<size_t>(state.last)];
  std::vector<std::pair<double, int>> keyed;
  keyed.reserve(feas.size());
  for (int idx : feas)
    keyed.push_back({dist(state.instance->coords[static_cast<size_t>(idx)], anchor), idx});
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  out.reserve(keyed.size());
  for (const auto& [d, idx] : keyed) out.push_back(idx);
  return out;
}

namespace {

std::vector<int> head_with_depot(const State& state, const std::vector<int>& ranked, int k) {
  const size_t count = std::min<size_t>(static_cast<size_t>(k), ranked.size());
  std::vector<int> out(ranked.begin(), ranked.begin() + static_cast<long>(count));
  if (state.cvrp() && state.last != state.instance->depot) {
    const int depot = state.instance->depot;
    if (std::find(out.begin(), out.end(), depot) == out.end() &&
        std::find(ranked.begin(), ranked.end(), depot) != ranked.end())
      out.push_back(depot);
  }
  return out;
}

}  // namespace

std::vector<int> candidate_set(const State& state, int k_min) {
  if (k_min < 1) throw LogicError("candidate_set: k_min must be positive");
  return head_with_depot(state, ranked_feasible(state), k_min);
}

std::vector<Vec2> invariant_normalize(const std::vector<Vec2>& norm_set,
                                      const std::vector<Vec2>& projected,
                                      std::vector<Vec2>* projected_out) {
  if (norm_set.empty()) throw LogicError("invariant_normalize: empty normalization set");
  double min_x = norm_set[0][0], max_x = norm_set[0][0];
  double min_y = norm_set[0][1], max_y = norm_set[0][1];
  for (const auto& p : norm_set) {
    min_x = std::min(min_x, p[0]);
    max_x = std::max(max_x, p[0]);
    min_y = std::min(min_y, p[1]);
    max_y = std::max(max_y, p[1]);
  }
  const double denom = std::max(max_x - min_x, max_y - min_y);
  std::vector<Vec2> out;
  out.reserve(norm_set.size());
  if (denom <= 0.0) {
    log::warn("invariant_normalize: degenerate view (all points coincident)");
    out.assign(norm_set.size(), {0.0, 0.0});
    if (projected_out) {
      projected_out->clear();
      for (const auto& p : projected)
        projected_out->push_back({std::clamp(p[0] - min_x, 0.0, 1.0),
                                  std::clamp(p[1] - min_y, 0.0, 1.0)});
    }
    return out;
  }
  for (const auto& p : norm_set)
    out.push_back({(p[0] - min_x) / denom, (p[1] - min_y) / denom});
  if (projected_out) {
    projected_out->clear();
    for (const auto& p : projected)
      projected_out->push_back({std::clamp((p[0] - min_x) / denom, 0.0, 1.0),
                                std::clamp((p[1] - min_y) / denom, 0.0, 1.0)});
  }
  return out;
}

ViewSet extract_views(const State& state, const std::vector<int>& k_list) {
  if (k_list.empty()) throw LogicError("extract_views: empty k_list");
  for (size_t i = 1; i < k_list.size(); ++i)
    if (k_list[i] >= k_list[i - 1])
      throw LogicError("extract_views: k_list must be strictly descending");
  if (k_list.back() < 1) throw LogicError("extract_views: k values must be positive");

  const Instance& inst = *state.instance;
  const std::vector<int> ranked = ranked_feasible(state);

  ViewSet vs;
  vs.k_list = k_list;
  vs.last = state.last;
  vs.first = state.first;
  vs.candidates = head_with_depot(state, ranked, k_list.back());

  const Vec2 last_pt = inst.coords[static_cast<size_t>(state.last)];
  const Vec2 first_pt = inst.coords[static_cast<size_t>(state.first)];
  const double R = state.cvrp() ? static_cast<double>(inst.capacity) : 0.0;

  for (int k : k_list) {
    View view;
    view.k = k;
    view.nodes = head_with_depot(state, ranked, k);

    // Normalization set: candidates plus last. The first/depot joins it only
    // when it is itself a feasible candidate (CVRP depot away from depot, or
    // the degenerate first==last start); otherwise it is projected in.
    const bool first_is_candidate =
        std::find(view.nodes.begin(), view.nodes.end(), state.first) != view.nodes.end();
    const bool first_in_set = first_is_candidate || state.first == state.last;

    std::vector<Vec2> pts;
    pts.reserve(view.nodes.size() + 2);
    for (int idx : view.nodes) pts.push_back(inst.coords[static_cast<size_t>(idx)]);
    pts.push_back(last_pt);
    if (first_in_set) pts.push_back(first_pt);

    std::vector<Vec2> projected;
    if (!first_in_set) projected.push_back(first_pt);
    std::vector<Vec2> proj_out;
    std::vector<Vec2> norm = invariant_normalize(pts, projected, &proj_out);

    view.norm.assign(norm.begin(), norm.begin() + static_cast<long>(view.nodes.size()));
    view.last_norm = norm[view.nodes.size()];
    if (first_in_set) {
      view.first_norm = norm[view.nodes.size() + 1];
      view.first_projected = false;
    } else {
      view.first_norm = proj_out[0];
      view.first_projected = true;
    }

    if (state.cvrp()) {
      view.extra.reserve(view.nodes.size());
      for (int idx : view.nodes)
        view.extra.push_back(static_cast<double>(inst.demands[static_cast<size_t>(idx)]) / R);
      view.last_extra = static_cast<double>(state.remaining_capacity) / R;
    } else {
      view.extra.assign(view.nodes.size(), 0.0);
      view.last_extra = 0.0;
    }
    vs.views.push_back(std::move(view));
  }
  return vs;
}

State apply_action(const State& state, int node) {
  const Instance& inst = *state.instance;
  if (node < 0 || node >= inst.n()) throw LogicError("apply_action: node out of range");
  State next = state;
  if (!state.cvrp()) {
    if (state.visited[static_cast<size_t>(node)])
      throw LogicError("apply_action: node already visited");
    next.visited[static_cast<size_t>(node)] = 1;
    ++next.visited_customers;
  } else if (node == inst.depot) {
    if (state.last == inst.depot)
      throw LogicError("apply_action: depot revisit while at depot");
    next.remaining_capacity = inst.capacity;
  } else {
    if (state.visited[static_cast<size_t>(node)])
      throw LogicError("apply_action: customer already visited");
    if (inst.demands[static_cast<size_t>(node)] > state.remaining_capacity)
      throw LogicError("apply_action: demand exceeds remaining capacity");
    next.visited[static_cast<size_t>(node)] = 1;
    next.remaining_capacity -= inst.demands[static_cast<size_t>(node)];
    ++next.visited_customers;
  }
  next.partial_tour.push_back(node);
  next.last = node;
  ++next.step;
  return next;
}

}  // namespace invit
