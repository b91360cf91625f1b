#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmrmap/peer_address.hpp"

namespace xmrmap {

// A timed-sync or handshake response never carries more entries than this.
inline constexpr std::size_t kMaxPeersPerMessage = 250;

// One received peer-list message. `peers` holds unique addresses in the order
// they first appeared on the wire.
struct PeerListObservation {
  std::int64_t observed_at = 0;
  PeerAddress observer;
  PeerAddress source;
  std::vector<PeerAddress> peers;

  friend bool operator==(const PeerListObservation&,
                         const PeerListObservation&) = default;
};

// Collapses duplicate peers and enforces the per-message cap.
PeerListObservation make_observation(std::int64_t observed_at,
                                     const PeerAddress& observer,
                                     const PeerAddress& source,
                                     std::span<const PeerAddress> advertised);

// Canonical trace record, one JSON object per line:
//   {"t":100,"observer":"10.0.0.1:18080","source":"10.0.0.2:18080","peers":[...]}
PeerListObservation parse_trace_line(std::string_view line);
std::string format_trace_line(const PeerListObservation& obs);

// Streams a trace, skipping blank lines. Errors carry the line number.
void for_each_trace_record(std::istream& in,
                           const std::function<void(PeerListObservation&&)>& sink);
std::vector<PeerListObservation> read_trace(std::istream& in);
void write_trace(std::ostream& out, std::span<const PeerListObservation> trace);

struct Triplet {
  PeerAddress ip1;
  PeerAddress ip2;
  std::uint64_t count = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Directed interaction frequencies: ip1 advertised ip2 in `count` of its
// packets. Rows are unique per (ip1, ip2) and kept sorted.
class TripletTable {
 public:
  TripletTable() = default;
  // Validates every invariant; throws InvariantError on violation.
  TripletTable(std::vector<Triplet> rows,
               std::map<PeerAddress, std::uint64_t> packet_totals);

  const std::vector<Triplet>& rows() const noexcept { return rows_; }
  const std::map<PeerAddress, std::uint64_t>& packet_totals() const noexcept {
    return packet_totals_;
  }
  bool empty() const noexcept { return rows_.empty(); }

  // 0 when the pair was never observed.
  std::uint64_t count(const PeerAddress& ip1, const PeerAddress& ip2) const;
  std::span<const Triplet> rows_for(const PeerAddress& ip1) const;

  friend bool operator==(const TripletTable&, const TripletTable&) = default;

 private:
  std::vector<Triplet> rows_;
  std::map<PeerAddress, std::uint64_t> packet_totals_;
};

// Exclusion entries without a port match every port of that IP.
class ExclusionSet {
 public:
  ExclusionSet() = default;
  explicit ExclusionSet(std::span<const PeerAddress> entries);

  bool contains(const PeerAddress& a) const;
  bool empty() const noexcept { return ip_only_.empty() && endpoints_.empty(); }

 private:
  std::set<PeerAddress> ip_only_;
  std::set<PeerAddress> endpoints_;
};

// Streaming fold over observations. Aggregators over disjoint shards can be
// merged; the result does not depend on observation order.
class TripletAggregator {
 public:
  explicit TripletAggregator(ExclusionSet exclude = {});

  void add(const PeerListObservation& obs);
  void merge(const TripletAggregator& other);
  TripletTable table() const;

  std::uint64_t observations_seen() const noexcept { return seen_; }
  std::uint64_t observations_excluded() const noexcept { return excluded_; }

 private:
  ExclusionSet exclude_;
  std::map<std::pair<PeerAddress, PeerAddress>, std::uint64_t> counts_;
  std::map<PeerAddress, std::uint64_t> totals_;
  std::uint64_t seen_ = 0;
  std::uint64_t excluded_ = 0;
};

TripletTable aggregate(std::span<const PeerListObservation> observations,
                       const ExclusionSet& exclude = {});

// Fraction of `source`'s packets that advertised `address`.
// Throws InputError when `source` sent no packets.
double relative_presence(const TripletTable& table, const PeerAddress& source,
                         const PeerAddress& address);

// Triplet CSV: header `ip1,ip2,count`, rows sorted by (ip1, ip2).
// Packet totals CSV: header `source,packets`.
void write_triplet_csv(std::ostream& out, const TripletTable& table);
void write_packet_totals_csv(std::ostream& out, const TripletTable& table);
TripletTable read_triplet_table(std::istream& triplets, std::istream& totals);

struct GroundTruthSnapshot {
  std::int64_t observed_at = 0;
  PeerAddress node;
  std::vector<PeerAddress> connections;

  friend bool operator==(const GroundTruthSnapshot&,
                         const GroundTruthSnapshot&) = default;
};

// {"t": <int>, "node": "<ip>", "connections": ["<ip>", ...]} per line.
// Result is stably sorted by observed_at.
std::vector<GroundTruthSnapshot> load_ground_truth(std::istream& in);
std::string format_ground_truth_line(const GroundTruthSnapshot& snapshot);

}  // namespace xmrmap
