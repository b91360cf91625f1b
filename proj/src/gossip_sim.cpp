#include "xmrmap/gossip_sim.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "xmrmap/error.hpp"

namespace xmrmap::sim {

namespace {

constexpr std::uint32_t kBaseAddress = 0x0A000001;  // 10.0.0.1
constexpr std::uint64_t kMaxWhitelistCells = 1ULL << 25;
constexpr std::int64_t kAbsent = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kNeverSeen = -1;

std::uint32_t uniform_below(std::mt19937_64& rng, std::uint32_t n) {
  return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(rng);
}

// Dense per-node whitelist over the address universe. Entries are bucketed by
// last_seen; ties inside a bucket are broken by the rng whenever a window is
// cut through a bucket or an entry is evicted from the oldest one.
class Whitelist {
 public:
  Whitelist(std::uint32_t universe, std::uint32_t rounds)
      : last_seen_(universe, kAbsent), slot_(universe, 0), buckets_(rounds + 2) {}

  bool contains(std::uint32_t addr) const { return last_seen_[addr] != kAbsent; }
  std::int64_t last_seen(std::uint32_t addr) const { return last_seen_[addr]; }
  std::size_t size() const { return size_; }

  void set(std::uint32_t addr, std::int64_t seen) {
    if (contains(addr)) {
      if (last_seen_[addr] == seen) return;
      unlink(addr);
    } else {
      ++size_;
    }
    auto& bucket = buckets_[bucket_index(seen)];
    last_seen_[addr] = seen;
    slot_[addr] = static_cast<std::uint32_t>(bucket.size());
    bucket.push_back(addr);
  }

  void evict_to(std::uint32_t cap, std::mt19937_64& rng) {
    while (size_ > cap) {
      auto& bucket = oldest_bucket();
      const auto victim = bucket[uniform_below(rng, static_cast<std::uint32_t>(bucket.size()))];
      unlink(victim);
      last_seen_[victim] = kAbsent;
      --size_;
    }
  }

  // The n most recently seen entries, as a set.
  void window(std::uint32_t n, std::vector<std::uint32_t>& out, std::mt19937_64& rng) const {
    out.clear();
    for (std::size_t b = buckets_.size(); b-- > 0 && out.size() < n;) {
      const auto& bucket = buckets_[b];
      const std::size_t need = n - out.size();
      if (bucket.size() <= need) {
        out.insert(out.end(), bucket.begin(), bucket.end());
        continue;
      }
      const std::size_t begin = out.size();
      out.insert(out.end(), bucket.begin(), bucket.end());
      for (std::size_t i = 0; i < need; ++i) {
        const auto j = i + uniform_below(rng, static_cast<std::uint32_t>(bucket.size() - i));
        std::swap(out[begin + i], out[begin + j]);
      }
      out.resize(n);
    }
  }

 private:
  std::size_t bucket_index(std::int64_t seen) const {
    return static_cast<std::size_t>(seen - kNeverSeen);
  }

  std::vector<std::uint32_t>& oldest_bucket() {
    for (auto& b : buckets_) {
      if (!b.empty()) return b;
    }
    throw InvariantError("whitelist size out of sync with its buckets");
  }

  void unlink(std::uint32_t addr) {
    auto& bucket = buckets_[bucket_index(last_seen_[addr])];
    const auto pos = slot_[addr];
    bucket[pos] = bucket.back();
    slot_[bucket[pos]] = pos;
    bucket.pop_back();
  }

  std::vector<std::int64_t> last_seen_;
  std::vector<std::uint32_t> slot_;
  std::vector<std::vector<std::uint32_t>> buckets_;  // index = last_seen + 1
  std::size_t size_ = 0;
};

std::vector<std::vector<std::uint32_t>> build_out_targets(const SimConfig& config,
                                                          std::mt19937_64& rng) {
  const std::uint32_t n = config.node_count;
  const std::uint32_t hub_begin = n - config.hub_count;
  std::vector<std::vector<std::uint32_t>> outs(n);
  for (std::uint32_t node = 0; node < n; ++node) {
    auto& targets = outs[node];
    const std::uint32_t other_hubs = config.hub_count - (node >= hub_begin ? 1 : 0);
    const std::uint32_t hub_picks =
        std::min({config.hub_links, other_hubs, config.out_degree});
    while (targets.size() < hub_picks) {
      const std::uint32_t t = hub_begin + uniform_below(rng, config.hub_count);
      if (t != node && std::find(targets.begin(), targets.end(), t) == targets.end()) {
        targets.push_back(t);
      }
    }
    while (targets.size() < config.out_degree) {
      const std::uint32_t t = uniform_below(rng, n);
      if (t != node && std::find(targets.begin(), targets.end(), t) == targets.end()) {
        targets.push_back(t);
      }
    }
  }
  return outs;
}

std::vector<Edge> undirected_union(const std::vector<std::vector<std::uint32_t>>& outs) {
  std::set<Edge> edges;
  for (std::uint32_t a = 0; a < outs.size(); ++a) {
    for (auto b : outs[a]) edges.insert({std::min(a, b), std::max(a, b)});
  }
  return {edges.begin(), edges.end()};
}

}  // namespace

std::uint32_t SimConfig::effective_background_peers() const noexcept {
  if (background_peers) return *background_peers;
  return whitelist_cap > node_count ? whitelist_cap - node_count : 0;
}

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("invalid simulation config: " + msg); };
  if (node_count == 0) fail("node_count must be positive");
  if (out_degree == 0) fail("out_degree must be positive");
  if (out_degree >= node_count) {
    fail("out_degree (" + std::to_string(out_degree) + ") must be below node_count (" +
         std::to_string(node_count) + ")");
  }
  if (response_size == 0 || top_window == 0 || whitelist_cap == 0) {
    fail("response_size, top_window and whitelist_cap must be positive");
  }
  if (!(response_size <= top_window && top_window <= whitelist_cap)) {
    fail("require response_size <= top_window <= whitelist_cap");
  }
  if (response_size > kMaxPeersPerMessage) {
    fail("response_size exceeds the protocol maximum of " + std::to_string(kMaxPeersPerMessage));
  }
  if (handshake_period == 0) fail("handshake_period must be positive");
  for (auto o : observers) {
    if (o >= node_count) fail("observer " + std::to_string(o) + " is not a node");
  }
  if (hub_count > node_count) fail("hub_count exceeds node_count");
  if (churn_rate < 0.0 || churn_rate > 1.0) fail("churn_rate must lie in [0, 1]");
  if (round_seconds <= 0) fail("round_seconds must be positive");
  const std::uint64_t universe = std::uint64_t{node_count} + effective_background_peers();
  if (universe > (1ULL << 24) - 2) fail("address universe too large");
  if (universe * node_count > kMaxWhitelistCells) {
    fail("node_count x address universe exceeds the simulator's memory budget");
  }
}

ProtocolOdds theoretical_odds(const SimConfig& config) {
  ProtocolOdds odds;
  odds.p_selected = static_cast<double>(config.response_size) / config.top_window;
  odds.p_enter = static_cast<double>(config.top_window) / config.whitelist_cap;
  odds.p_neighbour = odds.p_selected;
  odds.p_random = odds.p_enter * odds.p_selected;
  return odds;
}

PeerAddress node_address(std::uint32_t index) {
  return PeerAddress::from_ipv4(kBaseAddress + index, kDefaultP2PPort);
}

std::optional<std::uint32_t> node_index(const PeerAddress& address) {
  const std::uint32_t ip = address.ipv4();
  if (ip < kBaseAddress || ip - kBaseAddress >= (1U << 24) - 2) return std::nullopt;
  return ip - kBaseAddress;
}

std::vector<Edge> build_topology(const SimConfig& config, std::mt19937_64& rng) {
  config.validate();
  return undirected_union(build_out_targets(config, rng));
}

std::vector<Edge> build_topology(const SimConfig& config) {
  std::mt19937_64 rng(config.seed);
  return build_topology(config, rng);
}

SimResult run(const SimConfig& config) {
  config.validate();
  const std::uint32_t n = config.node_count;
  const std::uint32_t universe = config.universe_size();
  std::mt19937_64 rng(config.seed);

  SimResult result;
  result.odds = theoretical_odds(config);

  auto outs = build_out_targets(config, rng);
  // Undirected multiplicity: a->b and b->a are one connection.
  std::vector<std::map<std::uint32_t, int>> links(n);
  auto link = [&](std::uint32_t a, std::uint32_t b, int delta) {
    if ((links[a][b] += delta) == 0) links[a].erase(b);
    if ((links[b][a] += delta) == 0) links[b].erase(a);
  };
  for (std::uint32_t a = 0; a < n; ++a) {
    for (auto b : outs[a]) link(a, b, +1);
  }
  const auto initial = undirected_union(outs);
  std::set<Edge> truth(initial.begin(), initial.end());

  std::vector<Whitelist> whitelists(n, Whitelist(universe, config.rounds));
  for (std::uint32_t a = 0; a < n; ++a) {
    for (const auto& [b, _] : links[a]) whitelists[a].set(b, 0);
    whitelists[a].evict_to(config.whitelist_cap, rng);
  }

  std::vector<char> is_observer(n, 0);
  for (auto o : config.observers) is_observer[o] = 1;

  std::vector<std::vector<std::uint32_t>> windows(n);
  std::vector<std::uint32_t> sample;
  std::vector<PeerAddress> advertised;

  for (std::uint32_t round = 1; round <= config.rounds; ++round) {
    const std::int64_t now = round;
    const std::int64_t timestamp = static_cast<std::int64_t>(round) * config.round_seconds;

    if (config.churn_rate > 0.0) {
      std::bernoulli_distribution rewire(config.churn_rate);
      for (std::uint32_t a = 0; a < n; ++a) {
        if (!rewire(rng)) continue;
        auto& targets = outs[a];
        const std::uint32_t slot = uniform_below(rng, static_cast<std::uint32_t>(targets.size()));
        std::uint32_t fresh;
        do {
          fresh = uniform_below(rng, n);
        } while (fresh == a || std::find(targets.begin(), targets.end(), fresh) != targets.end());
        link(a, targets[slot], -1);
        targets[slot] = fresh;
        link(a, fresh, +1);
        truth.insert({std::min(a, fresh), std::max(a, fresh)});
      }
    }

    // Responses within a round draw from the window as it stood at round start.
    for (std::uint32_t a = 0; a < n; ++a) whitelists[a].window(config.top_window, windows[a], rng);

    for (std::uint32_t a = 0; a < n && universe > 1; ++a) {
      for (std::uint32_t c = 0; c < config.transient_contacts; ++c) {
        std::uint32_t peer = uniform_below(rng, universe - 1);
        if (peer >= a) ++peer;
        whitelists[a].set(peer, now);
        whitelists[a].evict_to(config.whitelist_cap, rng);
        if (peer < n) {
          whitelists[peer].set(a, now);
          whitelists[peer].evict_to(config.whitelist_cap, rng);
        }
      }
    }

    auto deliver = [&](std::uint32_t from, std::uint32_t to) {
      const auto& window = windows[from];
      auto& wl = whitelists[to];
      // With direct-only recency an unobserved response can only add unknown
      // addresses; when there are none, which entries were sampled is moot.
      if (!is_observer[to] && config.gossip_recency == GossipRecency::direct_only &&
          std::all_of(window.begin(), window.end(),
                      [&](std::uint32_t x) { return x == to || wl.contains(x); })) {
        wl.set(from, now);
        wl.evict_to(config.whitelist_cap, rng);
        return;
      }
      sample.assign(window.begin(), window.end());
      const std::size_t k = std::min<std::size_t>(config.response_size, sample.size());
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + uniform_below(rng, static_cast<std::uint32_t>(sample.size() - i));
        std::swap(sample[i], sample[j]);
      }
      sample.resize(k);

      wl.set(from, now);
      for (auto x : sample) {
        if (x == to) continue;
        if (config.gossip_recency == GossipRecency::inherit) {
          const auto seen = whitelists[from].last_seen(x);
          const auto value = seen == kAbsent ? kNeverSeen : seen;
          if (!wl.contains(x) || wl.last_seen(x) < value) wl.set(x, value);
        } else if (!wl.contains(x)) {
          wl.set(x, kNeverSeen);
        }
      }
      wl.evict_to(config.whitelist_cap, rng);

      if (is_observer[to]) {
        advertised.clear();
        for (auto x : sample) advertised.push_back(node_address(x));
        result.trace.push_back(
            make_observation(timestamp, node_address(to), node_address(from), advertised));
      }
    };

    if (round % config.handshake_period == 0) {
      for (std::uint32_t a = 0; a < n; ++a) {
        for (const auto& [b, _] : links[a]) {
          if (b < a) continue;
          deliver(a, b);
          deliver(b, a);
        }
      }
    }

    for (auto o : config.observers) {
      GroundTruthSnapshot snap{timestamp, node_address(o).without_port(), {}};
      for (const auto& [b, _] : links[o]) snap.connections.push_back(node_address(b).without_port());
      result.snapshots.push_back(std::move(snap));
    }
    for (const auto& wl : whitelists) result.peak_whitelist = std::max(result.peak_whitelist, wl.size());
  }

  result.truth.assign(truth.begin(), truth.end());
  return result;
}

}  // namespace xmrmap::sim
