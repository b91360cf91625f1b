#include "xmrmap/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <thread>

#include "text_io.hpp"
#include "xmrmap/error.hpp"

namespace xmrmap {

Graph Graph::from_edges(std::span<const std::pair<PeerAddress, PeerAddress>> edges,
                        BuildStats* stats) {
  BuildStats local;
  Graph g;
  for (const auto& [a, b] : edges) {
    if (a == b) {
      ++local.self_loops;
      continue;
    }
    g.nodes_.push_back(a);
    g.nodes_.push_back(b);
  }
  std::sort(g.nodes_.begin(), g.nodes_.end());
  g.nodes_.erase(std::unique(g.nodes_.begin(), g.nodes_.end()), g.nodes_.end());
  g.adjacency_.resize(g.nodes_.size());

  auto id_of = [&](const PeerAddress& a) {
    return static_cast<NodeId>(std::lower_bound(g.nodes_.begin(), g.nodes_.end(), a) - g.nodes_.begin());
  };
  std::size_t directed = 0;
  for (const auto& [a, b] : edges) {
    if (a == b) continue;
    const NodeId u = id_of(a), v = id_of(b);
    g.adjacency_[u].push_back(v);
    g.adjacency_[v].push_back(u);
    ++directed;
  }
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    g.edge_count_ += adj.size();
  }
  g.edge_count_ /= 2;
  local.duplicate_edges = directed - g.edge_count_;
  if (stats) *stats = local;
  return g;
}

Graph Graph::induced(std::span<const NodeId> keep) const {
  std::vector<NodeId> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<NodeId> remap(nodes_.size(), static_cast<NodeId>(-1));
  Graph g;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    remap[sorted[i]] = static_cast<NodeId>(i);
    g.nodes_.push_back(nodes_[sorted[i]]);
  }
  g.adjacency_.resize(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (NodeId v : adjacency_[sorted[i]]) {
      if (remap[v] != static_cast<NodeId>(-1)) g.adjacency_[i].push_back(remap[v]);
    }
    g.edge_count_ += g.adjacency_[i].size();
  }
  g.edge_count_ /= 2;
  return g;
}

Graph build_graph(const InferredEdgeList& edges, Graph::BuildStats* stats) {
  std::vector<std::pair<PeerAddress, PeerAddress>> pairs;
  pairs.reserve(edges.edges.size());
  for (const auto& e : edges.edges) pairs.emplace_back(e.ip1, e.ip2);
  return Graph::from_edges(pairs, stats);
}

namespace {

// Sizes of components restricted to nodes with alive[v] set; returns the largest.
std::size_t largest_alive_component(const Graph& g, const std::vector<char>& alive) {
  std::vector<char> seen(g.node_count(), 0);
  std::vector<NodeId> stack;
  std::size_t best = 0;
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (!alive[s] || seen[s]) continue;
    std::size_t size = 0;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      ++size;
      for (NodeId v : g.neighbors(u)) {
        if (alive[v] && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    best = std::max(best, size);
  }
  return best;
}

// Dependencies of every node on paths from `s`, added into `acc`.
void accumulate_source(const Graph& g, NodeId s, std::vector<double>& acc,
                       std::vector<std::int64_t>& dist, std::vector<double>& sigma,
                       std::vector<double>& delta, std::vector<NodeId>& order) {
  std::fill(dist.begin(), dist.end(), -1);
  std::fill(sigma.begin(), sigma.end(), 0.0);
  std::fill(delta.begin(), delta.end(), 0.0);
  order.clear();

  dist[s] = 0;
  sigma[s] = 1.0;
  order.push_back(s);
  for (std::size_t head = 0; head < order.size(); ++head) {
    const NodeId u = order[head];
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        order.push_back(v);
      }
      if (dist[v] == dist[u] + 1) sigma[v] += sigma[u];
    }
  }
  for (std::size_t i = order.size(); i-- > 1;) {
    const NodeId w = order[i];
    for (NodeId v : g.neighbors(w)) {
      if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
    }
    acc[w] += delta[w];
  }
}

}  // namespace

std::vector<std::vector<NodeId>> connected_components(const Graph& g) {
  std::vector<std::vector<NodeId>> out;
  std::vector<char> seen(g.node_count(), 0);
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (seen[s]) continue;
    std::vector<NodeId> comp{s};
    seen[s] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      for (NodeId v : g.neighbors(comp[head])) {
        if (!seen[v]) {
          seen[v] = 1;
          comp.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

Graph lcc(const Graph& g) {
  auto comps = connected_components(g);
  if (comps.empty()) return {};
  // Components come in order of their smallest id; keep the first of the largest.
  const auto* best = &comps.front();
  for (const auto& c : comps) {
    if (c.size() > best->size()) best = &c;
  }
  return g.induced(*best);
}

std::vector<std::uint32_t> degree_centrality(const Graph& g) {
  std::vector<std::uint32_t> out(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) out[v] = static_cast<std::uint32_t>(g.degree(v));
  return out;
}

std::vector<double> betweenness(const Graph& g, unsigned threads) {
  const std::size_t n = g.node_count();
  if (n == 0) return {};
  // Block layout depends only on n, so the reduction order is fixed.
  const std::size_t blocks = std::min<std::size_t>(64, (n + 31) / 32);
  const std::size_t block_size = (n + blocks - 1) / blocks;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(n, 0.0));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    std::vector<std::int64_t> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<NodeId> order;
    order.reserve(n);
    for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
      const std::size_t lo = b * block_size, hi = std::min(n, lo + block_size);
      for (std::size_t s = lo; s < hi; ++s) {
        accumulate_source(g, static_cast<NodeId>(s), partial[b], dist, sigma, delta, order);
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<double> out(n, 0.0);
  for (const auto& block : partial) {
    for (std::size_t v = 0; v < n; ++v) out[v] += block[v];
  }
  // Each unordered pair was counted from both endpoints.
  for (auto& b : out) b /= 2.0;
  return out;
}

CentralityScores centrality(const Graph& g, unsigned threads) {
  return {degree_centrality(g), betweenness(g, threads)};
}

namespace {

template <typename T>
std::vector<NodeId> top_k_impl(std::span<const T> scores, std::size_t k) {
  std::vector<NodeId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), NodeId{0});
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](NodeId a, NodeId b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  ids.resize(k);
  return ids;
}

}  // namespace

std::vector<NodeId> top_k(std::span<const double> scores, std::size_t k) {
  return top_k_impl(scores, k);
}

std::vector<NodeId> top_k(std::span<const std::uint32_t> scores, std::size_t k) {
  return top_k_impl(scores, k);
}

double one_hop_coverage(const Graph& g, std::span<const NodeId> nodes) {
  if (g.node_count() == 0) return 0.0;
  std::vector<char> covered(g.node_count(), 0);
  for (NodeId v : nodes) {
    covered[v] = 1;
    for (NodeId u : g.neighbors(v)) covered[u] = 1;
  }
  const auto n = std::count(covered.begin(), covered.end(), 1);
  return static_cast<double>(n) / static_cast<double>(g.node_count());
}

OverlapMatrix overlap_matrix(const Graph& g, std::span<const NodeId> nodes) {
  OverlapMatrix m;
  m.nodes.assign(nodes.begin(), nodes.end());
  const std::size_t k = nodes.size();
  m.values.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    m.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      const NodeId x = nodes[i], y = nodes[j];
      auto nx = g.neighbors(x), ny = g.neighbors(y);
      auto excluded = [&](NodeId v) { return v == x || v == y; };
      const auto size_x = static_cast<std::size_t>(std::count_if(nx.begin(), nx.end(), [&](NodeId v) { return !excluded(v); }));
      const auto size_y = static_cast<std::size_t>(std::count_if(ny.begin(), ny.end(), [&](NodeId v) { return !excluded(v); }));
      std::size_t shared = 0;
      for (auto a = nx.begin(), b = ny.begin(); a != nx.end() && b != ny.end();) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          if (!excluded(*a)) ++shared;
          ++a, ++b;
        }
      }
      const std::size_t denom = std::min(size_x, size_y);
      const double r = denom == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(denom);
      m.values[i * k + j] = m.values[j * k + i] = r;
    }
  }
  return m;
}

const char* to_string(AttackStrategy s) noexcept {
  switch (s) {
    case AttackStrategy::degree: return "degree";
    case AttackStrategy::betweenness: return "betweenness";
    case AttackStrategy::random: return "random";
  }
  return "unknown";
}

AttackStrategy parse_attack_strategy(std::string_view name) {
  if (name == "degree") return AttackStrategy::degree;
  if (name == "betweenness") return AttackStrategy::betweenness;
  if (name == "random") return AttackStrategy::random;
  throw InputError("unknown attack strategy '" + std::string(name) + "'");
}

namespace {

std::vector<NodeId> removal_ranking(const Graph& g, AttackStrategy strategy,
                                    const AttackOptions& options, std::mt19937_64& rng) {
  switch (strategy) {
    case AttackStrategy::degree: {
      auto d = degree_centrality(g);
      return top_k(std::span<const std::uint32_t>(d), d.size());
    }
    case AttackStrategy::betweenness: {
      auto b = betweenness(g, options.threads);
      return top_k(std::span<const double>(b), b.size());
    }
    case AttackStrategy::random: {
      std::vector<NodeId> ids(g.node_count());
      std::iota(ids.begin(), ids.end(), NodeId{0});
      std::shuffle(ids.begin(), ids.end(), rng);
      return ids;
    }
  }
  return {};
}

}  // namespace

AttackCurve attack(const Graph& g, AttackStrategy strategy, const AttackOptions& options) {
  if (!(options.step_fraction > 0.0 && options.step_fraction <= 1.0)) {
    throw InputError("attack step fraction must lie in (0, 1]");
  }
  if (!(options.collapse_threshold >= 0.0 && options.collapse_threshold < 1.0)) {
    throw InputError("collapse threshold must lie in [0, 1)");
  }
  AttackCurve curve;
  curve.strategy = strategy;
  const std::size_t n = g.node_count();
  if (n == 0) return curve;

  const auto batch = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.step_fraction * static_cast<double>(n))));
  const double collapse_size = options.collapse_threshold * static_cast<double>(n);
  std::mt19937_64 rng(options.seed);

  std::vector<char> alive(n, 1);
  std::size_t removed = 0;
  auto record = [&] {
    const auto size = largest_alive_component(g, alive);
    const double removed_fraction = static_cast<double>(removed) / static_cast<double>(n);
    curve.points.push_back({removed_fraction, static_cast<double>(size) / static_cast<double>(n)});
    if (!curve.turning_point && static_cast<double>(size) <= collapse_size) {
      curve.turning_point = removed_fraction;
    }
  };
  record();

  std::vector<NodeId> ranking;
  std::size_t cursor = 0;
  if (!options.adaptive || strategy == AttackStrategy::random) {
    ranking = removal_ranking(g, strategy, options, rng);
  }
  while (removed < n) {
    const std::size_t take = std::min(batch, n - removed);
    if (options.adaptive && strategy != AttackStrategy::random) {
      std::vector<NodeId> remaining;
      for (NodeId v = 0; v < n; ++v) {
        if (alive[v]) remaining.push_back(v);
      }
      // induced() renumbers in id order, so local id i maps to remaining[i].
      const Graph rest = g.induced(remaining);
      auto local = removal_ranking(rest, strategy, options, rng);
      for (std::size_t i = 0; i < take; ++i) alive[remaining[local[i]]] = 0;
    } else {
      for (std::size_t i = 0; i < take; ++i) alive[ranking[cursor++]] = 0;
    }
    removed += take;
    record();
  }
  return curve;
}

void write_graphml(std::ostream& out, const Graph& g, const CentralityScores* scores) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
         "  <key id=\"address\" for=\"node\" attr.name=\"address\" attr.type=\"string\"/>\n";
  if (scores) {
    out << "  <key id=\"degree\" for=\"node\" attr.name=\"degree\" attr.type=\"int\"/>\n"
           "  <key id=\"betweenness\" for=\"node\" attr.name=\"betweenness\" attr.type=\"double\"/>\n";
  }
  out << "  <graph id=\"G\" edgedefault=\"undirected\">\n";
  char buf[64];
  for (NodeId v = 0; v < g.node_count(); ++v) {
    out << "    <node id=\"n" << v << "\"><data key=\"address\">" << g.address(v).to_string()
        << "</data>";
    if (scores) {
      std::snprintf(buf, sizeof buf, "%.17g", scores->betweenness[v]);
      out << "<data key=\"degree\">" << scores->degree[v] << "</data><data key=\"betweenness\">"
          << buf << "</data>";
    }
    out << "</node>\n";
  }
  for (NodeId u = 0; u < g.node_count(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (u < v) out << "    <edge source=\"n" << u << "\" target=\"n" << v << "\"/>\n";
    }
  }
  out << "  </graph>\n</graphml>\n";
}

void write_edge_list(std::ostream& out, const Graph& g) {
  for (NodeId u = 0; u < g.node_count(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (u < v) out << g.address(u).to_string() << ' ' << g.address(v).to_string() << '\n';
    }
  }
}

std::vector<std::pair<PeerAddress, PeerAddress>> read_edge_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ProtocolError("expected edge CSV with header 'ip1,ip2,...' (produced by infer or simulate)");
  }
  auto header = detail::split_fields(detail::trim_cr(line));
  if (header.size() < 2 || header[0] != "ip1" || header[1] != "ip2") {
    throw ProtocolError("expected edge CSV with header 'ip1,ip2,...' (produced by infer or simulate)");
  }
  std::ptrdiff_t label_col = -1;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i] == "label") label_col = static_cast<std::ptrdiff_t>(i);
  }
  std::vector<std::pair<PeerAddress, PeerAddress>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    auto fields = detail::split_fields(detail::trim_cr(line));
    try {
      if (fields.size() != header.size()) throw InputError("field count does not match header");
      if (label_col >= 0 && fields[static_cast<std::size_t>(label_col)] == "0") continue;
      out.emplace_back(PeerAddress::parse(fields[0]), PeerAddress::parse(fields[1]));
    } catch (const InputError& e) {
      throw InputError("edge CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace xmrmap
