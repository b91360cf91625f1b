#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

#include "xmrmap/inference.hpp"
#include "xmrmap/peer_address.hpp"

namespace xmrmap {

using NodeId = std::uint32_t;

// Undirected simple graph. Node ids follow address order, so the smallest id
// is the smallest address; adjacency lists are sorted.
class Graph {
 public:
  Graph() = default;

  struct BuildStats {
    std::size_t self_loops = 0;
    std::size_t duplicate_edges = 0;
  };

  static Graph from_edges(std::span<const std::pair<PeerAddress, PeerAddress>> edges,
                          BuildStats* stats = nullptr);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const PeerAddress& address(NodeId id) const { return nodes_[id]; }
  const std::vector<PeerAddress>& addresses() const noexcept { return nodes_; }
  std::span<const NodeId> neighbors(NodeId id) const { return adjacency_[id]; }
  std::size_t degree(NodeId id) const { return adjacency_[id].size(); }

  // Subgraph induced by `keep`, renumbered in address order.
  Graph induced(std::span<const NodeId> keep) const;

 private:
  std::vector<PeerAddress> nodes_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
};

Graph build_graph(const InferredEdgeList& edges, Graph::BuildStats* stats = nullptr);

// Components as sorted id lists, in order of their smallest node id.
std::vector<std::vector<NodeId>> connected_components(const Graph& g);

// Largest component; ties go to the component holding the smallest node id.
Graph lcc(const Graph& g);

struct CentralityScores {
  std::vector<std::uint32_t> degree;
  std::vector<double> betweenness;
};

std::vector<std::uint32_t> degree_centrality(const Graph& g);

// Unnormalized betweenness over unordered pairs {s, t}. Parallel over source
// blocks with a fixed reduction order, so results do not depend on `threads`
// (0 = hardware concurrency).
std::vector<double> betweenness(const Graph& g, unsigned threads = 1);

CentralityScores centrality(const Graph& g, unsigned threads = 1);

// Top `k` node ids by score, ties by smaller id.
std::vector<NodeId> top_k(std::span<const double> scores, std::size_t k);
std::vector<NodeId> top_k(std::span<const std::uint32_t> scores, std::size_t k);

// |S ∪ N(S)| / |V|.
double one_hop_coverage(const Graph& g, std::span<const NodeId> nodes);

// r(x, y) = shared / min(n_x, n_y) where neighbor sets exclude x and y.
struct OverlapMatrix {
  std::vector<NodeId> nodes;
  std::vector<double> values;  // row-major, nodes.size() squared

  double at(std::size_t i, std::size_t j) const { return values[i * nodes.size() + j]; }
};

OverlapMatrix overlap_matrix(const Graph& g, std::span<const NodeId> nodes);

enum class AttackStrategy { degree, betweenness, random };

const char* to_string(AttackStrategy s) noexcept;
AttackStrategy parse_attack_strategy(std::string_view name);

struct AttackOptions {
  double step_fraction = 0.01;
  double collapse_threshold = 0.01;  // LCC at or below this share of |V| counts as collapsed
  bool adaptive = false;             // re-rank the remaining graph after every batch
  std::uint64_t seed = 1;            // random strategy only
  unsigned threads = 1;
};

struct AttackPoint {
  double removed_fraction = 0;
  double lcc_fraction = 0;
};

struct AttackCurve {
  AttackStrategy strategy = AttackStrategy::degree;
  std::vector<AttackPoint> points;  // starts at (0, lcc/|V|)
  std::optional<double> turning_point;
};

// Removes nodes in batches of round(step_fraction * |V|) (at least one) and
// records the LCC size relative to the original |V| after each batch.
AttackCurve attack(const Graph& g, AttackStrategy strategy, const AttackOptions& options = {});

void write_graphml(std::ostream& out, const Graph& g, const CentralityScores* scores = nullptr);
void write_edge_list(std::ostream& out, const Graph& g);

// Reads `ip1,ip2[,...]` edge CSVs: inferred edges or simulator truth.
std::vector<std::pair<PeerAddress, PeerAddress>> read_edge_csv(std::istream& in);

}  // namespace xmrmap
