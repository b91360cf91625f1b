#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "xmrmap/trace.hpp"

namespace xmrmap {

struct InferenceParams {
  std::uint64_t c_min = 2;  // rows below this count are noise
  std::size_t n_min = 8;    // sources with fewer filtered rows are skipped
  // Cluster distinct counts weighted by how many rows carry them, instead of
  // each distinct count once.
  bool weighted = false;

  void validate() const;  // throws InputError
};

// Optimal two-cluster split of a set of counts along the number line.
struct TwoMeansSplit {
  std::uint64_t threshold = 0;      // largest value of the low cluster
  std::vector<std::uint64_t> low;   // distinct values, ascending
  std::vector<std::uint64_t> high;  // distinct values strictly above threshold
  double cost = 0;                  // total within-cluster sum of squares
};

// Exact 1-D 2-means over the distinct values of `values`: every contiguous
// split of the sorted distinct values is scored and the cheapest kept. Cost
// ties go to the larger gap between cluster means, then to the smaller high
// cluster. Returns nullopt when fewer than two distinct values exist.
std::optional<TwoMeansSplit> two_means_split(std::span<const std::uint64_t> values,
                                             bool weighted = false);

// Separation margins of a split: (min_high - max_low, mean_high - mean_low),
// computed over distinct values. Throws InputError when `values` cannot be split.
struct ClusterQuality {
  double margin = 0;
  double mean_gap = 0;
};
ClusterQuality cluster_quality(std::span<const std::uint64_t> values, bool weighted = false);

struct InferredEdge {
  PeerAddress ip1;
  PeerAddress ip2;
  std::uint64_t count = 0;

  friend bool operator==(const InferredEdge&, const InferredEdge&) = default;
};

struct SourceSummary {
  PeerAddress source;
  std::size_t filtered_rows = 0;
  enum class Outcome { clustered, too_few_rows, degenerate } outcome = Outcome::clustered;
  std::uint64_t threshold = 0;  // meaningful when clustered

  friend bool operator==(const SourceSummary&, const SourceSummary&) = default;
};

// Rows labelled as true neighbors (label 1), sorted by (ip1, ip2).
struct InferredEdgeList {
  std::vector<InferredEdge> edges;
  std::vector<PeerAddress> skipped_sources;  // fewer than n_min filtered rows
  std::vector<SourceSummary> sources;        // one per source surviving the count filter

  friend bool operator==(const InferredEdgeList&, const InferredEdgeList&) = default;
};

InferredEdgeList infer_neighbors(const TripletTable& table, const InferenceParams& params = {});

// `ip1,ip2,count,label`, label always 1.
void write_inferred_csv(std::ostream& out, const InferredEdgeList& edges);
// `source,filtered_rows,outcome,threshold` for every source that reached clustering or was skipped.
void write_source_report_csv(std::ostream& out, const InferredEdgeList& edges);
// Accepts the inferred-edge CSV; rows labelled 0 are dropped.
InferredEdgeList read_inferred_csv(std::istream& in);

}  // namespace xmrmap
