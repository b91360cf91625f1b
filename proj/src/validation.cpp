#include "xmrmap/validation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

namespace xmrmap {

std::optional<std::set<PeerAddress>> truth_neighbor_set(
    std::span<const GroundTruthSnapshot> snapshots, const PeerAddress& observer,
    const TimeWindow& window, MatchMode mode) {
  std::set<PeerAddress> out;
  bool any = false;
  for (const auto& snap : snapshots) {
    if (!window.contains(snap.observed_at) || !addresses_match(snap.node, observer, mode)) continue;
    any = true;
    for (const auto& c : snap.connections) out.insert(match_key(c, mode));
  }
  if (!any) return std::nullopt;
  return out;
}

std::set<PeerAddress> inferred_neighbors(const InferredEdgeList& inferred,
                                         const PeerAddress& observer, MatchMode mode) {
  std::set<PeerAddress> out;
  for (const auto& e : inferred.edges) {
    const bool first = addresses_match(e.ip1, observer, mode);
    const bool second = addresses_match(e.ip2, observer, mode);
    if (first && !second) out.insert(match_key(e.ip2, mode));
    if (second && !first) out.insert(match_key(e.ip1, mode));
  }
  return out;
}

std::optional<double> precision_of(std::size_t matched, std::size_t inferred) {
  if (inferred == 0) return std::nullopt;
  return static_cast<double>(matched) / static_cast<double>(inferred);
}

std::optional<double> recall_of(std::size_t matched, std::size_t truth) {
  if (truth == 0) return std::nullopt;
  return static_cast<double>(matched) / static_cast<double>(truth);
}

ValidationReport validate(const InferredEdgeList& inferred, const std::set<PeerAddress>& truth,
                          const PeerAddress& observer, MatchMode mode) {
  const auto found = inferred_neighbors(inferred, observer, mode);
  std::set<PeerAddress> benchmark;
  for (const auto& t : truth) benchmark.insert(match_key(t, mode));

  ValidationReport report;
  report.observer = observer;
  report.inferred_count = found.size();
  report.truth_count = benchmark.size();
  report.matched_count = static_cast<std::size_t>(
      std::count_if(found.begin(), found.end(), [&](const auto& a) { return benchmark.contains(a); }));
  report.precision = precision_of(report.matched_count, report.inferred_count);
  report.recall = recall_of(report.matched_count, report.truth_count);
  return report;
}

std::string format_report_line(const ValidationReport& r) {
  nlohmann::ordered_json j;
  j["observer"] = r.observer.to_string();
  j["inferred"] = r.inferred_count;
  j["matched"] = r.matched_count;
  j["truth"] = r.truth_count;
  j["precision"] = r.precision ? nlohmann::ordered_json(*r.precision) : nlohmann::ordered_json(nullptr);
  j["recall"] = r.recall ? nlohmann::ordered_json(*r.recall) : nlohmann::ordered_json(nullptr);
  auto bound = [](std::int64_t v) -> nlohmann::ordered_json {
    if (v == std::numeric_limits<std::int64_t>::min() || v == std::numeric_limits<std::int64_t>::max()) {
      return nullptr;
    }
    return v;
  };
  j["window"] = {bound(r.window.start), bound(r.window.end)};
  return j.dump();
}

void print_report_table(std::ostream& out, std::span<const ValidationReport> reports) {
  auto percent = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> rows{{"Observer"},
                                             {"Inferred network neighbors"},
                                             {"Neighbors in connection list"},
                                             {"Neighbor identification precision"},
                                             {"Neighbor identification recall"}};
  for (const auto& r : reports) {
    rows[0].push_back(r.observer.to_string());
    rows[1].push_back(std::to_string(r.inferred_count));
    rows[2].push_back(std::to_string(r.matched_count));
    rows[3].push_back(percent(r.precision));
    rows[4].push_back(percent(r.recall));
  }
  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  for (const auto& row : rows) {
    out << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << ' ' << row[c] << std::string(widths[c] - row[c].size(), ' ') << " |";
    }
    out << '\n';
  }
}

}  // namespace xmrmap
