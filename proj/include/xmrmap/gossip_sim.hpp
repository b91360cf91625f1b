#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "xmrmap/peer_address.hpp"
#include "xmrmap/trace.hpp"

namespace xmrmap::sim {

// How advertised entries update the recipient's whitelist recency.
enum class GossipRecency {
  direct_only,  // advertised entries never refresh last_seen; unknown ones enter as never-seen
  inherit,      // advertised entries take the advertiser's last_seen when newer
};

struct SimConfig {
  std::uint32_t node_count = 300;
  std::uint32_t out_degree = 8;
  std::uint32_t whitelist_cap = 1000;
  std::uint32_t top_window = 300;
  std::uint32_t response_size = 250;
  std::uint32_t rounds = 200;
  std::uint32_t handshake_period = 1;
  std::vector<std::uint32_t> observers{0, 1, 2};
  std::uint64_t seed = 1;

  // Addresses that are reachable but not simulated in full (they neither
  // gossip nor get observed). Defaults to whitelist_cap - node_count, so a
  // whitelist can fill up the way it does on the real network.
  std::optional<std::uint32_t> background_peers;
  // Short-lived connections per node per round (peer probing, incoming
  // connection attempts). They refresh last_seen on both ends but carry no
  // logged peer list, and set how fast the non-neighbor part of the top
  // window turns over.
  std::uint32_t transient_contacts = 64;
  // The last `hub_count` nodes act as public seed nodes; every other node
  // spends `hub_links` of its outgoing slots on them.
  std::uint32_t hub_count = 0;
  std::uint32_t hub_links = 2;
  // Per node and round, probability of replacing one outgoing connection.
  double churn_rate = 0.0;
  GossipRecency gossip_recency = GossipRecency::direct_only;
  std::int64_t round_seconds = 60;

  std::uint32_t effective_background_peers() const noexcept;
  std::uint32_t universe_size() const noexcept {
    return node_count + effective_background_peers();
  }
  // Throws InputError naming the violated constraint.
  void validate() const;
};

struct ProtocolOdds {
  double p_neighbour = 0;
  double p_enter = 0;
  double p_selected = 0;
  double p_random = 0;
};

ProtocolOdds theoretical_odds(const SimConfig& config);

using Edge = std::pair<std::uint32_t, std::uint32_t>;  // first < second

// Address of simulated node or background peer `index`.
PeerAddress node_address(std::uint32_t index);
// Inverse of node_address; nullopt for addresses outside the simulation.
std::optional<std::uint32_t> node_index(const PeerAddress& address);

// Each node picks out_degree distinct targets; the result is the undirected
// union, sorted. Consumes `rng` in node order.
std::vector<Edge> build_topology(const SimConfig& config, std::mt19937_64& rng);
std::vector<Edge> build_topology(const SimConfig& config);

struct SimResult {
  std::vector<PeerListObservation> trace;
  // Every undirected edge that existed at some round (static without churn).
  std::vector<Edge> truth;
  // One snapshot per observer per round: its connections at that round.
  std::vector<GroundTruthSnapshot> snapshots;
  ProtocolOdds odds;
  std::size_t peak_whitelist = 0;  // largest whitelist seen at any round end
};

SimResult run(const SimConfig& config);

}  // namespace xmrmap::sim
