#pragma once

#include <string>
#include <vector>

#include "invit/instance.hpp"
#include "invit/policy.hpp"

namespace invit {

/// Distribution of the rank (1-based, by distance from the current node,
/// ties toward the lower index) that reference tours assign to their next
/// node among the currently feasible actions.
struct RankHistogram {
  int max_rank = 0;
  std::vector<int64_t> counts;  // counts[r-1] = transitions picked at rank r
  int64_t overflow = 0;         // transitions with rank > max_rank
  int64_t total = 0;

  /// Fraction of transitions at rank <= r.
  double cumulative(int r) const;
};

/// Replays each reference tour through the routing state and ranks every
/// explicit transition (the implied closing edge is forced, not a choice).
RankHistogram knn_rank_histogram(const std::vector<Instance>& instances,
                                 const std::vector<std::vector<int>>& tours, int max_rank = 32);

/// How much of an optimal tour survives adding far-away nodes: fraction of
/// the original optimal tour's undirected edges that the augmented optimum,
/// restricted to the original nodes, still uses. Added nodes are drawn
/// uniformly from the annulus lo <= radius <= hi around the board center.
/// Exact solves, so inst.n() + n_add must stay within the Held-Karp bound.
/// TSP only.
struct OverlapResult {
  double overlap_pct = 0.0;
  int added = 0;
};

OverlapResult boundary_augmentation_overlap(const Instance& inst, int n_add, uint64_t seed,
                                            double lo = 1.5, double hi = 2.5);

/// Per-query attention mass on keys ranked beyond k by distance from the
/// query's own node (the query ranks first at distance zero), averaged over
/// heads. One value per query row per encoder record. Meaningful on the
/// all-remaining-nodes encoder variant, where the largest view is not
/// truncated at k.
std::vector<double> attention_mass_beyond_k(const Instance& inst,
                                            const AttnCaptureT<float>& capture, int k);

/// Histogram of per-query masses over queries and instances.
struct AttentionMassHistogram {
  double bucket_width = 0.05;   // buckets over [0, 1], last bucket closed
  std::vector<int64_t> counts;
  int64_t queries = 0;
  double mean = 0.0;
  double median = 0.0;
};

AttentionMassHistogram make_mass_histogram(std::vector<double> masses);

/// Encodes each instance once (initial state, all nodes present) with
/// attention capture and aggregates the per-query masses.
AttentionMassHistogram collect_attention_mass(const std::vector<Instance>& instances,
                                              const PolicyParamsT<float>& params, int k);

void write_rank_histogram_csv(const std::string& path, const RankHistogram& hist);
void write_overlap_csv(const std::string& path, const std::vector<OverlapResult>& rows);
void write_attention_csv(const std::string& path, const AttentionMassHistogram& hist);

}  // namespace invit
