#include "xmrmap/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "text_io.hpp"
#include "xmrmap/error.hpp"

namespace xmrmap {

namespace {

using nlohmann::json;

const json& require_field(const json& record, const char* name) {
  auto it = record.find(name);
  if (it == record.end()) throw InputError(std::string("missing field '") + name + "'");
  return *it;
}

PeerAddress address_field(const json& record, const char* name) {
  const json& value = require_field(record, name);
  if (!value.is_string()) throw InputError(std::string("field '") + name + "' must be a string");
  auto parsed = PeerAddress::try_parse(value.get_ref<const std::string&>());
  if (!parsed) {
    throw InputError(std::string("field '") + name + "': invalid address '" +
                     value.get<std::string>() + "'");
  }
  return *parsed;
}

std::int64_t time_field(const json& record) {
  const json& value = require_field(record, "t");
  if (!value.is_number_integer()) throw InputError("field 't' must be an integer");
  return value.get<std::int64_t>();
}

std::vector<PeerAddress> address_list_field(const json& record, const char* name) {
  const json& value = require_field(record, name);
  if (!value.is_array()) throw InputError(std::string("field '") + name + "' must be an array");
  std::vector<PeerAddress> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const json& item = value[i];
    std::optional<PeerAddress> parsed;
    if (item.is_string()) parsed = PeerAddress::try_parse(item.get_ref<const std::string&>());
    if (!parsed) {
      throw InputError(std::string("field '") + name + "[" + std::to_string(i) +
                       "]': invalid address");
    }
    out.push_back(*parsed);
  }
  return out;
}

json parse_object(std::string_view line) {
  json record = json::parse(line.begin(), line.end(), nullptr, false);
  if (record.is_discarded()) throw InputError("record is not valid JSON");
  if (!record.is_object()) throw InputError("record is not a JSON object");
  return record;
}

template <typename Fn>
void for_each_line(std::istream& in, const char* what, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      fn(detail::trim_cr(line));
    } catch (const Error& e) {
      std::string msg = std::string(what) + " line " + std::to_string(line_no) + ": " + e.what();
      if (e.kind() == ErrorKind::protocol) throw ProtocolError(msg);
      throw InputError(msg);
    }
  }
}

std::uint64_t parse_count(std::string_view text) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError("invalid count '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

PeerListObservation make_observation(std::int64_t observed_at,
                                     const PeerAddress& observer,
                                     const PeerAddress& source,
                                     std::span<const PeerAddress> advertised) {
  if (advertised.size() > kMaxPeersPerMessage) {
    throw ProtocolError("peer list carries " + std::to_string(advertised.size()) +
                        " entries, protocol maximum is " +
                        std::to_string(kMaxPeersPerMessage));
  }
  PeerListObservation obs{observed_at, observer, source, {}};
  obs.peers.reserve(advertised.size());
  std::unordered_set<PeerAddress> seen;
  for (const auto& a : advertised) {
    if (seen.insert(a).second) obs.peers.push_back(a);
  }
  return obs;
}

PeerListObservation parse_trace_line(std::string_view line) {
  json record = parse_object(line);
  auto t = time_field(record);
  auto observer = address_field(record, "observer");
  auto source = address_field(record, "source");
  auto peers = address_list_field(record, "peers");
  return make_observation(t, observer, source, peers);
}

std::string format_trace_line(const PeerListObservation& obs) {
  nlohmann::ordered_json record;
  record["t"] = obs.observed_at;
  record["observer"] = obs.observer.to_string();
  record["source"] = obs.source.to_string();
  auto& peers = record["peers"] = nlohmann::ordered_json::array();
  for (const auto& p : obs.peers) peers.push_back(p.to_string());
  return record.dump();
}

void for_each_trace_record(std::istream& in,
                           const std::function<void(PeerListObservation&&)>& sink) {
  for_each_line(in, "trace", [&](std::string_view line) { sink(parse_trace_line(line)); });
}

std::vector<PeerListObservation> read_trace(std::istream& in) {
  std::vector<PeerListObservation> out;
  for_each_trace_record(in, [&](PeerListObservation&& obs) { out.push_back(std::move(obs)); });
  return out;
}

void write_trace(std::ostream& out, std::span<const PeerListObservation> trace) {
  for (const auto& obs : trace) out << format_trace_line(obs) << '\n';
}

TripletTable::TripletTable(std::vector<Triplet> rows,
                           std::map<PeerAddress, std::uint64_t> packet_totals)
    : rows_(std::move(rows)), packet_totals_(std::move(packet_totals)) {
  std::sort(rows_.begin(), rows_.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.ip1, a.ip2) < std::tie(b.ip1, b.ip2);
  });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& row = rows_[i];
    if (row.count == 0) {
      throw InvariantError("triplet " + row.ip1.to_string() + "," + row.ip2.to_string() +
                           " has count 0");
    }
    if (i > 0 && rows_[i - 1].ip1 == row.ip1 && rows_[i - 1].ip2 == row.ip2) {
      throw InvariantError("duplicate triplet " + row.ip1.to_string() + "," +
                           row.ip2.to_string());
    }
    auto total = packet_totals_.find(row.ip1);
    if (total == packet_totals_.end() || row.count > total->second) {
      throw InvariantError("triplet " + row.ip1.to_string() + "," + row.ip2.to_string() +
                           " count exceeds packets received from " + row.ip1.to_string());
    }
  }
}

std::span<const Triplet> TripletTable::rows_for(const PeerAddress& ip1) const {
  auto lo = std::lower_bound(rows_.begin(), rows_.end(), ip1,
                             [](const Triplet& t, const PeerAddress& a) { return t.ip1 < a; });
  auto hi = std::upper_bound(lo, rows_.end(), ip1,
                             [](const PeerAddress& a, const Triplet& t) { return a < t.ip1; });
  return {lo, hi};
}

std::uint64_t TripletTable::count(const PeerAddress& ip1, const PeerAddress& ip2) const {
  auto group = rows_for(ip1);
  auto it = std::lower_bound(group.begin(), group.end(), ip2,
                             [](const Triplet& t, const PeerAddress& a) { return t.ip2 < a; });
  return it != group.end() && it->ip2 == ip2 ? it->count : 0;
}

ExclusionSet::ExclusionSet(std::span<const PeerAddress> entries) {
  for (const auto& e : entries) {
    if (e.has_port()) {
      endpoints_.insert(e);
    } else {
      ip_only_.insert(e);
    }
  }
}

bool ExclusionSet::contains(const PeerAddress& a) const {
  return ip_only_.contains(a.without_port()) || endpoints_.contains(a);
}

TripletAggregator::TripletAggregator(ExclusionSet exclude) : exclude_(std::move(exclude)) {}

void TripletAggregator::add(const PeerListObservation& obs) {
  ++seen_;
  if (exclude_.contains(obs.source)) {
    ++excluded_;
    return;
  }
  ++totals_[obs.source];
  for (const auto& peer : obs.peers) ++counts_[{obs.source, peer}];
}

void TripletAggregator::merge(const TripletAggregator& other) {
  for (const auto& [key, n] : other.counts_) counts_[key] += n;
  for (const auto& [src, n] : other.totals_) totals_[src] += n;
  seen_ += other.seen_;
  excluded_ += other.excluded_;
}

TripletTable TripletAggregator::table() const {
  std::vector<Triplet> rows;
  rows.reserve(counts_.size());
  for (const auto& [key, n] : counts_) rows.push_back({key.first, key.second, n});
  return TripletTable(std::move(rows), totals_);
}

TripletTable aggregate(std::span<const PeerListObservation> observations,
                       const ExclusionSet& exclude) {
  TripletAggregator agg(exclude);
  for (const auto& obs : observations) agg.add(obs);
  return agg.table();
}

double relative_presence(const TripletTable& table, const PeerAddress& source,
                         const PeerAddress& address) {
  auto total = table.packet_totals().find(source);
  if (total == table.packet_totals().end() || total->second == 0) {
    throw InputError("no packets received from " + source.to_string());
  }
  return static_cast<double>(table.count(source, address)) /
         static_cast<double>(total->second);
}

void write_triplet_csv(std::ostream& out, const TripletTable& table) {
  out << "ip1,ip2,count\n";
  for (const auto& row : table.rows()) {
    out << row.ip1.to_string() << ',' << row.ip2.to_string() << ',' << row.count << '\n';
  }
}

void write_packet_totals_csv(std::ostream& out, const TripletTable& table) {
  out << "source,packets\n";
  for (const auto& [source, n] : table.packet_totals()) {
    out << source.to_string() << ',' << n << '\n';
  }
}

TripletTable read_triplet_table(std::istream& triplets, std::istream& totals) {
  std::string line;
  if (!std::getline(triplets, line) || detail::trim_cr(line) != "ip1,ip2,count") {
    throw ProtocolError("expected triplet CSV header 'ip1,ip2,count' (produced by ingest)");
  }
  std::vector<Triplet> rows;
  std::size_t line_no = 1;
  while (std::getline(triplets, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    auto fields = detail::split_fields(detail::trim_cr(line));
    try {
      if (fields.size() != 3) throw InputError("expected 3 fields");
      rows.push_back({PeerAddress::parse(fields[0]), PeerAddress::parse(fields[1]),
                      parse_count(fields[2])});
    } catch (const InputError& e) {
      throw InputError("triplet CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  if (!std::getline(totals, line) || detail::trim_cr(line) != "source,packets") {
    throw ProtocolError("expected packet totals CSV header 'source,packets' (produced by ingest)");
  }
  std::map<PeerAddress, std::uint64_t> packet_totals;
  line_no = 1;
  while (std::getline(totals, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    auto fields = detail::split_fields(detail::trim_cr(line));
    try {
      if (fields.size() != 2) throw InputError("expected 2 fields");
      packet_totals[PeerAddress::parse(fields[0])] += parse_count(fields[1]);
    } catch (const InputError& e) {
      throw InputError("packet totals CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return TripletTable(std::move(rows), std::move(packet_totals));
}

std::vector<GroundTruthSnapshot> load_ground_truth(std::istream& in) {
  std::vector<GroundTruthSnapshot> out;
  for_each_line(in, "ground truth", [&](std::string_view line) {
    json record = parse_object(line);
    GroundTruthSnapshot snap;
    snap.observed_at = time_field(record);
    snap.node = address_field(record, "node");
    auto connections = address_list_field(record, "connections");
    std::unordered_set<PeerAddress> seen;
    for (const auto& c : connections) {
      if (c == snap.node) {
        throw InputError("node " + snap.node.to_string() + " lists itself as a connection");
      }
      if (seen.insert(c).second) snap.connections.push_back(c);
    }
    out.push_back(std::move(snap));
  });
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.observed_at < b.observed_at;
  });
  return out;
}

std::string format_ground_truth_line(const GroundTruthSnapshot& snapshot) {
  nlohmann::ordered_json record;
  record["t"] = snapshot.observed_at;
  record["node"] = snapshot.node.to_string();
  auto& conns = record["connections"] = nlohmann::ordered_json::array();
  for (const auto& c : snapshot.connections) conns.push_back(c.to_string());
  return record.dump();
}

}  // namespace xmrmap
