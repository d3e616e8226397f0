#include "invit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "invit/errors.hpp"
#include "invit/oracle.hpp"
#include "invit/rng.hpp"
#include "invit/state.hpp"
#include "invit/training.hpp"

namespace invit {

double RankHistogram::cumulative(int r) const {
  if (total == 0) return 0.0;
  int64_t mass = 0;
  const int upto = std::min(r, max_rank);
  for (int i = 0; i < upto; ++i) mass += counts[static_cast<size_t>(i)];
  if (r > max_rank) mass += overflow;
  return static_cast<double>(mass) / static_cast<double>(total);
}

RankHistogram knn_rank_histogram(const std::vector<Instance>& instances,
                                 const std::vector<std::vector<int>>& tours, int max_rank) {
  if (instances.size() != tours.size())
    throw LogicError("knn_rank_histogram: instances/tours size mismatch");
  if (max_rank < 1) throw LogicError("knn_rank_histogram: max_rank must be >= 1");
  RankHistogram hist;
  hist.max_rank = max_rank;
  hist.counts.assign(static_cast<size_t>(max_rank), 0);

  for (size_t t = 0; t < instances.size(); ++t) {
    const Instance& inst = instances[t];
    const std::vector<int>& tour = tours[t];
    if (tour.size() < 2) throw InputError("knn_rank_histogram: tour too short");
    State state = init_state(inst, tour[0]);
    for (size_t i = 1; i < tour.size(); ++i) {
      const std::vector<int> ranked = ranked_feasible(state);
      auto it = std::find(ranked.begin(), ranked.end(), tour[i]);
      if (it == ranked.end())
        throw InputError("knn_rank_histogram: tour step " + std::to_string(i) +
                         " is not a feasible action");
      const int rank = static_cast<int>(it - ranked.begin()) + 1;
      if (rank <= max_rank)
        ++hist.counts[static_cast<size_t>(rank - 1)];
      else
        ++hist.overflow;
      ++hist.total;
      state = apply_action(state, tour[i]);
    }
  }
  return hist;
}

namespace {

std::set<std::pair<int, int>> tour_edges(const std::vector<int>& tour, int node_limit) {
  std::set<std::pair<int, int>> edges;
  const size_t n = tour.size();
  for (size_t i = 0; i < n; ++i) {
    const int a = tour[i];
    const int b = tour[(i + 1) % n];
    if (a >= node_limit || b >= node_limit) continue;
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  return edges;
}

}  // namespace

OverlapResult boundary_augmentation_overlap(const Instance& inst, int n_add, uint64_t seed,
                                            double lo, double hi) {
  if (inst.kind != Kind::kTsp)
    throw InputError("boundary_augmentation_overlap: TSP instances only");
  if (n_add < 0) throw InputError("boundary_augmentation_overlap: n_add must be >= 0");
  if (!(0.0 < lo && lo < hi))
    throw InputError("boundary_augmentation_overlap: need 0 < lo < hi");
  const int n = inst.n();

  const Reference base = held_karp(inst);
  const auto base_edges = tour_edges(base.tour, n);

  Instance aug = inst;
  Rng rng = Rng::stream(seed, {0x6f766c70});  // "ovlp"
  for (int i = 0; i < n_add; ++i) {
    // uniform over the annulus lo <= |p - board center| <= hi
    for (;;) {
      Vec2 p{rng.uniform(0.5 - hi, 0.5 + hi), rng.uniform(0.5 - hi, 0.5 + hi)};
      const double r = std::hypot(p[0] - 0.5, p[1] - 0.5);
      if (r >= lo && r <= hi) {
        aug.coords.push_back(p);
        break;
      }
    }
  }

  const Reference full = held_karp(aug);
  const auto kept_edges = tour_edges(full.tour, n);

  int64_t shared = 0;
  for (const auto& e : base_edges)
    if (kept_edges.count(e)) ++shared;

  OverlapResult out;
  out.added = n_add;
  out.overlap_pct =
      100.0 * static_cast<double>(shared) / static_cast<double>(base_edges.size());
  return out;
}

std::vector<double> attention_mass_beyond_k(const Instance& inst,
                                            const AttnCaptureT<float>& capture, int k) {
  if (k < 1) throw LogicError("attention_mass_beyond_k: k must be >= 1");
  if (k >= inst.n())
    throw InputError("attention_mass_beyond_k: k must be below the node count, got k=" +
                     std::to_string(k) + " for " + std::to_string(inst.n()) + " nodes");
  std::vector<double> masses;
  std::vector<int> order;
  for (const auto& layer : capture.layers) {
    const int rows = layer.rows;
    for (int q = 0; q < rows; ++q) {
      const Vec2 qc = inst.coords[static_cast<size_t>(layer.node_ids[static_cast<size_t>(q)])];
      order.resize(static_cast<size_t>(rows));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Vec2& ca = inst.coords[static_cast<size_t>(layer.node_ids[static_cast<size_t>(a)])];
        const Vec2& cb = inst.coords[static_cast<size_t>(layer.node_ids[static_cast<size_t>(b)])];
        return std::hypot(ca[0] - qc[0], ca[1] - qc[1]) < std::hypot(cb[0] - qc[0], cb[1] - qc[1]);
      });
      // keys at 1-based distance rank > k, the query itself ranking first
      double mass = 0.0;
      for (int h = 0; h < layer.n_heads; ++h) {
        const float* row =
            layer.probs.data() + (static_cast<size_t>(h) * rows + static_cast<size_t>(q)) * rows;
        for (int r = k; r < rows; ++r) mass += static_cast<double>(row[order[static_cast<size_t>(r)]]);
      }
      masses.push_back(layer.n_heads > 0 ? mass / layer.n_heads : 0.0);
    }
  }
  return masses;
}

AttentionMassHistogram make_mass_histogram(std::vector<double> masses) {
  AttentionMassHistogram hist;
  const int buckets = static_cast<int>(std::lround(1.0 / hist.bucket_width));
  hist.counts.assign(static_cast<size_t>(buckets), 0);
  hist.queries = static_cast<int64_t>(masses.size());
  if (masses.empty()) return hist;
  double sum = 0.0;
  for (double m : masses) {
    sum += m;
    int b = static_cast<int>(m / hist.bucket_width);
    b = std::clamp(b, 0, buckets - 1);
    ++hist.counts[static_cast<size_t>(b)];
  }
  hist.mean = sum / static_cast<double>(masses.size());
  std::sort(masses.begin(), masses.end());
  const size_t mid = masses.size() / 2;
  hist.median =
      masses.size() % 2 ? masses[mid] : 0.5 * (masses[mid - 1] + masses[mid]);
  return hist;
}

AttentionMassHistogram collect_attention_mass(const std::vector<Instance>& instances,
                                              const PolicyParamsT<float>& params, int k) {
  if (!params.config.global_view)
    throw InputError("collect_attention_mass: needs the all-remaining-view encoder variant");
  NoGradGuard guard;
  std::vector<double> masses;
  for (const Instance& inst : instances) {
    const State state =
        inst.kind == Kind::kCvrp ? init_state(inst, inst.depot) : init_state(inst, 0);
    AttnCaptureT<float> cap;
    policy_step(state, params, &cap);
    // only the untruncated view attends over all nodes
    std::erase_if(cap.layers, [](const auto& l) { return l.view_index != 0; });
    const std::vector<double> m = attention_mass_beyond_k(inst, cap, k);
    masses.insert(masses.end(), m.begin(), m.end());
  }
  return make_mass_histogram(std::move(masses));
}

void write_rank_histogram_csv(const std::string& path, const RankHistogram& hist) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << "rank,count,cumulative\n";
  for (int r = 1; r <= hist.max_rank; ++r) {
    out << r << ',' << hist.counts[static_cast<size_t>(r - 1)] << ','
        << format_g9(hist.cumulative(r)) << '\n';
  }
  out << "overflow," << hist.overflow << ",1\n";
}

void write_overlap_csv(const std::string& path, const std::vector<OverlapResult>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << "added,instances,mean_overlap_pct,stddev_pct\n";
  std::map<int, std::vector<double>> by_count;
  for (const auto& r : rows) by_count[r.added].push_back(r.overlap_pct);
  for (const auto& [added, vals] : by_count) {
    const double mean =
        std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    out << added << ',' << vals.size() << ',' << format_g9(mean) << ',' << format_g9(sd) << '\n';
  }
}

void write_attention_csv(const std::string& path, const AttentionMassHistogram& hist) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << "bucket_lo,bucket_hi,count,fraction\n";
  for (size_t b = 0; b < hist.counts.size(); ++b) {
    const double lo = static_cast<double>(b) * hist.bucket_width;
    const double hi = lo + hist.bucket_width;
    const double frac = hist.queries
                            ? static_cast<double>(hist.counts[b]) / static_cast<double>(hist.queries)
                            : 0.0;
    out << format_g9(lo) << ',' << format_g9(hi) << ',' << hist.counts[b] << ','
        << format_g9(frac) << '\n';
  }
}

}  // namespace invit
