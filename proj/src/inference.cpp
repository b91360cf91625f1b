#include "xmrmap/inference.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include <boost/multiprecision/cpp_int.hpp>

#include "text_io.hpp"
#include "xmrmap/error.hpp"

namespace xmrmap {

namespace {

using boost::multiprecision::cpp_int;

// Sum-of-squares bookkeeping for one candidate split, kept as exact fractions.
struct Candidate {
  std::size_t last_low = 0;  // index of the largest low value
  cpp_int between_num;       // s_l^2 n_h + s_h^2 n_l
  cpp_int between_den;       // n_l n_h
  cpp_int gap_num;           // s_h n_l - s_l n_h
  cpp_int gap_den;           // n_l n_h
};

// a/b vs c/d with positive denominators.
int compare_fractions(const cpp_int& a, const cpp_int& b, const cpp_int& c, const cpp_int& d) {
  const cpp_int lhs = a * d;
  const cpp_int rhs = c * b;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

long double to_long_double(const cpp_int& num, const cpp_int& den) {
  return num.convert_to<long double>() / den.convert_to<long double>();
}

}  // namespace

void InferenceParams::validate() const {
  if (c_min < 1) throw InputError("c_min must be at least 1");
  if (n_min < 2) throw InputError("n_min must be at least 2");
}

std::optional<TwoMeansSplit> two_means_split(std::span<const std::uint64_t> values,
                                             bool weighted) {
  std::vector<std::uint64_t> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint64_t> distinct;
  std::vector<std::uint64_t> weight;
  for (auto v : sorted) {
    if (distinct.empty() || distinct.back() != v) {
      distinct.push_back(v);
      weight.push_back(1);
    } else if (weighted) {
      ++weight.back();
    }
  }
  const std::size_t k = distinct.size();
  if (k < 2) return std::nullopt;

  cpp_int total_n = 0, total_s = 0, total_q = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const cpp_int v = distinct[i];
    total_n += weight[i];
    total_s += v * weight[i];
    total_q += v * v * weight[i];
  }

  std::optional<Candidate> best;
  cpp_int n_low = 0, s_low = 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    n_low += weight[i];
    s_low += cpp_int(distinct[i]) * weight[i];
    const cpp_int n_high = total_n - n_low;
    const cpp_int s_high = total_s - s_low;

    Candidate c;
    c.last_low = i;
    c.between_num = s_low * s_low * n_high + s_high * s_high * n_low;
    c.between_den = n_low * n_high;
    c.gap_num = s_high * n_low - s_low * n_high;
    c.gap_den = c.between_den;

    if (!best) {
      best = std::move(c);
      continue;
    }
    // Larger between-cluster term means smaller within-cluster cost.
    const int by_cost =
        compare_fractions(c.between_num, c.between_den, best->between_num, best->between_den);
    if (by_cost > 0) {
      best = std::move(c);
    } else if (by_cost == 0) {
      const int by_gap = compare_fractions(c.gap_num, c.gap_den, best->gap_num, best->gap_den);
      // Equal gaps: later split leaves the smaller high cluster.
      if (by_gap >= 0) best = std::move(c);
    }
  }

  TwoMeansSplit split;
  split.threshold = distinct[best->last_low];
  split.low.assign(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(best->last_low) + 1);
  split.high.assign(distinct.begin() + static_cast<std::ptrdiff_t>(best->last_low) + 1, distinct.end());
  const cpp_int cost_num = total_q * best->between_den - best->between_num;
  split.cost = static_cast<double>(to_long_double(cost_num, best->between_den));
  return split;
}

ClusterQuality cluster_quality(std::span<const std::uint64_t> values, bool weighted) {
  auto split = two_means_split(values, weighted);
  if (!split) throw InputError("cluster_quality: group has fewer than two distinct counts");
  auto mean = [](const std::vector<std::uint64_t>& xs) {
    long double s = 0;
    for (auto x : xs) s += x;
    return s / static_cast<long double>(xs.size());
  };
  ClusterQuality q;
  q.margin = static_cast<double>(split->high.front()) - static_cast<double>(split->low.back());
  q.mean_gap = static_cast<double>(mean(split->high) - mean(split->low));
  return q;
}

InferredEdgeList infer_neighbors(const TripletTable& table, const InferenceParams& params) {
  params.validate();
  InferredEdgeList out;
  const auto& rows = table.rows();
  std::vector<const Triplet*> group;
  std::vector<std::uint64_t> counts;
  for (std::size_t begin = 0; begin < rows.size();) {
    std::size_t end = begin;
    group.clear();
    while (end < rows.size() && rows[end].ip1 == rows[begin].ip1) {
      if (rows[end].count >= params.c_min) group.push_back(&rows[end]);
      ++end;
    }
    const PeerAddress source = rows[begin].ip1;
    begin = end;
    if (group.empty()) continue;

    SourceSummary summary{source, group.size(), SourceSummary::Outcome::clustered, 0};
    if (group.size() < params.n_min) {
      summary.outcome = SourceSummary::Outcome::too_few_rows;
      out.skipped_sources.push_back(source);
      out.sources.push_back(summary);
      continue;
    }
    counts.clear();
    for (const auto* row : group) counts.push_back(row->count);
    auto split = two_means_split(counts, params.weighted);
    if (!split) {
      summary.outcome = SourceSummary::Outcome::degenerate;
      out.sources.push_back(summary);
      continue;
    }
    summary.threshold = split->threshold;
    out.sources.push_back(summary);
    for (const auto* row : group) {
      if (row->count > split->threshold) out.edges.push_back({row->ip1, row->ip2, row->count});
    }
  }
  return out;
}

void write_inferred_csv(std::ostream& out, const InferredEdgeList& edges) {
  out << "ip1,ip2,count,label\n";
  for (const auto& e : edges.edges) {
    out << e.ip1.to_string() << ',' << e.ip2.to_string() << ',' << e.count << ",1\n";
  }
}

void write_source_report_csv(std::ostream& out, const InferredEdgeList& edges) {
  out << "source,filtered_rows,outcome,threshold\n";
  for (const auto& s : edges.sources) {
    const char* outcome = s.outcome == SourceSummary::Outcome::clustered     ? "clustered"
                          : s.outcome == SourceSummary::Outcome::too_few_rows ? "skipped"
                                                                               : "degenerate";
    out << s.source.to_string() << ',' << s.filtered_rows << ',' << outcome << ','
        << s.threshold << '\n';
  }
}

InferredEdgeList read_inferred_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim_cr(line) != "ip1,ip2,count,label") {
    throw ProtocolError("expected inferred-edge CSV header 'ip1,ip2,count,label' (produced by infer)");
  }
  InferredEdgeList out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    auto fields = detail::split_fields(detail::trim_cr(line));
    try {
      if (fields.size() != 4) throw InputError("expected 4 fields");
      std::uint64_t count = 0;
      auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count);
      if (ec != std::errc{} || p != fields[2].data() + fields[2].size()) {
        throw InputError("invalid count");
      }
      if (fields[3] != "0" && fields[3] != "1") throw InputError("label must be 0 or 1");
      if (fields[3] == "1") {
        out.edges.push_back({PeerAddress::parse(fields[0]), PeerAddress::parse(fields[1]), count});
      }
    } catch (const InputError& e) {
      throw InputError("inferred-edge CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.ip1, a.ip2) < std::tie(b.ip1, b.ip2);
  });
  return out;
}

}  // namespace xmrmap
