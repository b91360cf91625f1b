#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xmrmap/inference.hpp"
#include "xmrmap/trace.hpp"

namespace xmrmap {

struct TimeWindow {
  std::int64_t start = std::numeric_limits<std::int64_t>::min();
  std::int64_t end = std::numeric_limits<std::int64_t>::max();

  bool contains(std::int64_t t) const noexcept { return start <= t && t <= end; }
};

// Union of the observer's connections over every snapshot inside `window`.
// nullopt when no snapshot of the observer falls inside the window.
std::optional<std::set<PeerAddress>> truth_neighbor_set(
    std::span<const GroundTruthSnapshot> snapshots, const PeerAddress& observer,
    const TimeWindow& window = {}, MatchMode mode = MatchMode::ip_only);

struct ValidationReport {
  PeerAddress observer;
  std::size_t inferred_count = 0;
  std::size_t matched_count = 0;
  std::size_t truth_count = 0;
  std::optional<double> precision;  // undefined with no inferred neighbors
  std::optional<double> recall;     // undefined with an empty benchmark
  TimeWindow window;
};

// Neighbors of `observer` in the inferred network: the other endpoint of
// every inferred edge touching it, keyed by `mode`.
std::set<PeerAddress> inferred_neighbors(const InferredEdgeList& inferred,
                                         const PeerAddress& observer,
                                         MatchMode mode = MatchMode::ip_only);

ValidationReport validate(const InferredEdgeList& inferred, const std::set<PeerAddress>& truth,
                          const PeerAddress& observer, MatchMode mode = MatchMode::ip_only);

// Plain precision/recall from counts; nullopt where the denominator is 0.
std::optional<double> precision_of(std::size_t matched, std::size_t inferred);
std::optional<double> recall_of(std::size_t matched, std::size_t truth);

// One JSON object per line.
std::string format_report_line(const ValidationReport& report);
// Console table: one column per observer, rows for inferred neighbors,
// neighbors in connection list, precision and recall.
void print_report_table(std::ostream& out, std::span<const ValidationReport> reports);

}  // namespace xmrmap
