#include "xmrmap/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "version.hpp"
#include "xmrmap/capture.hpp"
#include "xmrmap/error.hpp"
#include "xmrmap/gossip_sim.hpp"
#include "xmrmap/graph.hpp"
#include "xmrmap/inference.hpp"
#include "xmrmap/trace.hpp"
#include "xmrmap/validation.hpp"

namespace xmrmap::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct RunContext {
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::ostream& out;
  std::ostream& err;
};

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) throw InputError("cannot read " + p.string());
  return in;
}

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir_ / name).string());
    names_.push_back(name);
    return out;
  }
  std::vector<std::string> names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

template <class T>
T param(const ojson& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("manifest parameter '") + key + "': " + e.what());
  }
}

template <class T>
std::optional<T> optional_param(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return param<T>(j, key);
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::vector<std::string> trace;
  std::vector<std::string> flows;
  std::vector<std::string> exclude;
  std::string exclude_file;
  std::string ip_byte_order = "network";
  std::uint64_t max_payload = levin::kDefaultMaxPayload;

  ojson to_json() const {
    return {{"trace", trace},
            {"flows", flows},
            {"exclude", exclude},
            {"exclude_file", exclude_file},
            {"ip_byte_order", ip_byte_order},
            {"max_payload", max_payload}};
  }
  static IngestArgs from_json(const ojson& j) {
    IngestArgs a;
    a.trace = param<std::vector<std::string>>(j, "trace");
    a.flows = param<std::vector<std::string>>(j, "flows");
    a.exclude = param<std::vector<std::string>>(j, "exclude");
    a.exclude_file = param<std::string>(j, "exclude_file");
    a.ip_byte_order = param<std::string>(j, "ip_byte_order");
    a.max_payload = param<std::uint64_t>(j, "max_payload");
    return a;
  }
};

struct FlowFile {
  fs::path path;
  FlowEndpoints endpoints;
};

struct FlowListing {
  std::vector<FlowFile> files;
  std::vector<std::string> skipped;  // names that do not follow the flow naming
};

FlowListing list_flows(const std::vector<std::string>& paths) {
  FlowListing listing;
  for (const auto& p : paths) {
    const fs::path path(p);
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
      std::vector<fs::path> entries;
      for (const auto& e : fs::recursive_directory_iterator(path)) {
        if (e.is_regular_file()) entries.push_back(e.path());
      }
      std::sort(entries.begin(), entries.end());
      std::size_t found = 0;
      for (const auto& e : entries) {
        if (auto ends = parse_flow_filename(e.filename().string())) {
          listing.files.push_back({e, *ends});
          ++found;
        } else {
          listing.skipped.push_back(e.string());
        }
      }
      if (found == 0) throw InputError("no flow files in directory " + p);
    } else if (fs::is_regular_file(path, ec)) {
      auto ends = parse_flow_filename(path.filename().string());
      if (!ends) {
        throw InputError("cannot derive flow endpoints from file name " + p +
                         " (expected aaa.bbb.ccc.ddd.ppppp-aaa.bbb.ccc.ddd.ppppp)");
      }
      listing.files.push_back({path, *ends});
    } else {
      throw InputError("cannot read " + p);
    }
  }
  return listing;
}

std::vector<fs::path> ingest_inputs(const IngestArgs& a) {
  std::vector<fs::path> in(a.trace.begin(), a.trace.end());
  for (const auto& f : list_flows(a.flows).files) in.push_back(f.path);
  if (!a.exclude_file.empty()) in.emplace_back(a.exclude_file);
  return in;
}

ExclusionSet load_exclusions(const IngestArgs& a) {
  std::vector<PeerAddress> entries;
  for (const auto& e : a.exclude) entries.push_back(PeerAddress::parse(e));
  if (!a.exclude_file.empty()) {
    auto in = open_in(a.exclude_file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line.erase(0, line.find_first_not_of(" \t\r"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      if (line.empty()) continue;
      auto addr = PeerAddress::try_parse(line);
      if (!addr) throw InputError(a.exclude_file + ":" + std::to_string(n) + ": bad address '" + line + "'");
      entries.push_back(*addr);
    }
  }
  return ExclusionSet(entries);
}

std::vector<std::string> exec_ingest(const ojson& params, const RunContext& ctx) {
  const auto a = IngestArgs::from_json(params);
  if (a.trace.empty() && a.flows.empty()) throw InputError("ingest needs --trace or --flows");
  CaptureOptions opts;
  opts.max_payload = a.max_payload;
  if (a.ip_byte_order == "network") {
    opts.byte_order = epee::IpByteOrder::network;
  } else if (a.ip_byte_order == "host") {
    opts.byte_order = epee::IpByteOrder::host;
  } else {
    throw InputError("ip-byte-order must be network or host");
  }

  TripletAggregator agg(load_exclusions(a));
  std::uint64_t trace_records = 0;
  for (const auto& t : a.trace) {
    auto in = open_in(t);
    try {
      for_each_trace_record(in, [&](PeerListObservation&& obs) {
        agg.add(obs);
        ++trace_records;
      });
    } catch (const Error& e) {
      // keep the category, add the file
      if (e.kind() == ErrorKind::protocol) throw ProtocolError(t + ": " + e.what());
      throw InputError(t + ": " + e.what());
    }
  }

  const auto listing = list_flows(a.flows);
  CaptureStats stats;
  for (const auto& f : listing.files) {
    auto in = open_in(f.path, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CaptureStats one;
    for (const auto& obs : observations_from_flow(bytes, f.endpoints, opts, one)) agg.add(obs);
    stats.merge(one);
  }
  if (!listing.files.empty() && stats.frames_parsed == 0 && trace_records == 0) {
    std::string why = "no parsable Levin frames in " + std::to_string(listing.files.size()) + " flow file(s)";
    if (!stats.errors.empty()) why += "; first error: " + stats.errors.front();
    throw ProtocolError(why);
  }
  if (agg.observations_seen() == 0) throw InputError("input holds no peer-list observations");

  const auto table = agg.table();
  OutputSet outs(ctx.out_dir);
  {
    auto o = outs.open("triplets.csv");
    write_triplet_csv(o, table);
  }
  {
    auto o = outs.open("packet_totals.csv");
    write_packet_totals_csv(o, table);
  }
  {
    ojson s;
    s["observations"] = agg.observations_seen();
    s["observations_excluded"] = agg.observations_excluded();
    s["trace_records"] = trace_records;
    s["sources"] = table.packet_totals().size();
    s["triplet_rows"] = table.rows().size();
    s["flow_files"] = listing.files.size();
    s["files_skipped"] = listing.skipped;
    s["flows_rejected"] = stats.flows_rejected;
    s["frames_parsed"] = stats.frames_parsed;
    s["frames_rejected"] = stats.frames_rejected;
    s["frames_oversized"] = stats.frames_oversized;
    s["frames_with_peerlist"] = stats.frames_with_peerlist;
    s["partial_frames"] = stats.partial_frames;
    s["peers_extracted"] = stats.peers_extracted;
    s["non_ipv4_skipped"] = stats.non_ipv4_skipped;
    s["errors"] = stats.errors;
    auto o = outs.open("ingest_stats.json");
    o << s.dump(2) << '\n';
  }
  ctx.out << "ingest: " << agg.observations_seen() << " observations, " << table.rows().size()
          << " triplets from " << table.packet_totals().size() << " sources\n";
  if (stats.frames_rejected + stats.flows_rejected + stats.frames_oversized > 0) {
    ctx.err << "ingest: rejected " << stats.flows_rejected << " flow(s), " << stats.frames_rejected
            << " frame(s), " << stats.frames_oversized << " oversized peer list(s)\n";
  }
  return outs.names();
}

// -------------------------------------------------------------- simulate

struct SimulateArgs {
  sim::SimConfig cfg;
  std::int64_t background_peers = -1;  // -1: whitelist_cap - nodes
  std::string gossip_recency = "direct-only";

  ojson to_json() const {
    return {{"nodes", cfg.node_count},
            {"out_degree", cfg.out_degree},
            {"whitelist_cap", cfg.whitelist_cap},
            {"top_window", cfg.top_window},
            {"response_size", cfg.response_size},
            {"rounds", cfg.rounds},
            {"handshake_period", cfg.handshake_period},
            {"observers", cfg.observers},
            {"background_peers", background_peers},
            {"transient_contacts", cfg.transient_contacts},
            {"hubs", cfg.hub_count},
            {"hub_links", cfg.hub_links},
            {"churn", cfg.churn_rate},
            {"gossip_recency", gossip_recency},
            {"round_seconds", cfg.round_seconds}};
  }
  static sim::SimConfig config_from_json(const ojson& j, std::uint64_t seed) {
    sim::SimConfig c;
    c.node_count = param<std::uint32_t>(j, "nodes");
    c.out_degree = param<std::uint32_t>(j, "out_degree");
    c.whitelist_cap = param<std::uint32_t>(j, "whitelist_cap");
    c.top_window = param<std::uint32_t>(j, "top_window");
    c.response_size = param<std::uint32_t>(j, "response_size");
    c.rounds = param<std::uint32_t>(j, "rounds");
    c.handshake_period = param<std::uint32_t>(j, "handshake_period");
    c.observers = param<std::vector<std::uint32_t>>(j, "observers");
    const auto bg = param<std::int64_t>(j, "background_peers");
    if (bg >= 0) c.background_peers = static_cast<std::uint32_t>(bg);
    c.transient_contacts = param<std::uint32_t>(j, "transient_contacts");
    c.hub_count = param<std::uint32_t>(j, "hubs");
    c.hub_links = param<std::uint32_t>(j, "hub_links");
    c.churn_rate = param<double>(j, "churn");
    const auto rec = param<std::string>(j, "gossip_recency");
    if (rec == "direct-only") {
      c.gossip_recency = sim::GossipRecency::direct_only;
    } else if (rec == "inherit") {
      c.gossip_recency = sim::GossipRecency::inherit;
    } else {
      throw InputError("gossip-recency must be direct-only or inherit");
    }
    c.round_seconds = param<std::int64_t>(j, "round_seconds");
    c.seed = seed;
    return c;
  }
};

std::vector<std::string> exec_simulate(const ojson& params, const RunContext& ctx) {
  const auto cfg = SimulateArgs::config_from_json(params, ctx.seed);
  cfg.validate();
  const auto result = sim::run(cfg);
  OutputSet outs(ctx.out_dir);
  {
    auto o = outs.open("trace.jsonl");
    write_trace(o, result.trace);
  }
  {
    auto o = outs.open("ground_truth.jsonl");
    for (const auto& s : result.snapshots) o << format_ground_truth_line(s) << '\n';
  }
  {
    auto o = outs.open("truth_edges.csv");
    o << "ip1,ip2\n";
    for (const auto& [a, b] : result.truth) {
      o << sim::node_address(a).to_string() << ',' << sim::node_address(b).to_string() << '\n';
    }
  }
  {
    ojson s;
    s["universe"] = cfg.universe_size();
    s["observations"] = result.trace.size();
    s["truth_edges"] = result.truth.size();
    s["snapshots"] = result.snapshots.size();
    auto& obs = s["observers"] = ojson::array();
    for (auto i : cfg.observers) obs.push_back(sim::node_address(i).to_string());
    s["odds"] = {{"p_neighbour", result.odds.p_neighbour},
                 {"p_enter", result.odds.p_enter},
                 {"p_selected", result.odds.p_selected},
                 {"p_random", result.odds.p_random}};
    auto o = outs.open("sim_summary.json");
    o << s.dump(2) << '\n';
  }
  ctx.out << "simulate: " << cfg.node_count << " nodes, " << result.truth.size() << " edges, "
          << result.trace.size() << " observations\n";
  return outs.names();
}

// ----------------------------------------------------------------- infer

struct InferArgs {
  std::string triplets;
  std::string totals;
  InferenceParams p;

  ojson to_json() const {
    return {{"triplets", triplets}, {"totals", totals}, {"c_min", p.c_min}, {"n_min", p.n_min},
            {"weighted", p.weighted}};
  }
  static InferArgs from_json(const ojson& j) {
    InferArgs a;
    a.triplets = param<std::string>(j, "triplets");
    a.totals = param<std::string>(j, "totals");
    a.p.c_min = param<std::uint64_t>(j, "c_min");
    a.p.n_min = param<std::size_t>(j, "n_min");
    a.p.weighted = param<bool>(j, "weighted");
    return a;
  }
};

std::vector<std::string> exec_infer(const ojson& params, const RunContext& ctx) {
  const auto a = InferArgs::from_json(params);
  a.p.validate();
  auto trip = open_in(a.triplets);
  auto tot = open_in(a.totals);
  const auto table = read_triplet_table(trip, tot);
  const auto inferred = infer_neighbors(table, a.p);
  OutputSet outs(ctx.out_dir);
  {
    auto o = outs.open("inferred.csv");
    write_inferred_csv(o, inferred);
  }
  {
    auto o = outs.open("skipped_sources.csv");
    write_source_report_csv(o, inferred);
  }
  std::size_t clustered = 0;
  std::size_t degenerate = 0;
  for (const auto& s : inferred.sources) {
    clustered += s.outcome == SourceSummary::Outcome::clustered;
    degenerate += s.outcome == SourceSummary::Outcome::degenerate;
  }
  ctx.out << "infer: " << inferred.edges.size() << " edges from " << clustered << " clustered sources ("
          << inferred.skipped_sources.size() << " skipped, " << degenerate << " degenerate)\n";
  return outs.names();
}

// -------------------------------------------------------------- validate

struct ValidateArgs {
  std::string inferred;
  std::string ground_truth;
  std::vector<std::string> observers;
  std::optional<std::int64_t> window_start;
  std::optional<std::int64_t> window_end;
  std::string match = "ip";

  ojson to_json() const {
    ojson j = {{"inferred", inferred}, {"ground_truth", ground_truth}, {"observers", observers}};
    j["window_start"] = window_start ? ojson(*window_start) : ojson(nullptr);
    j["window_end"] = window_end ? ojson(*window_end) : ojson(nullptr);
    j["match"] = match;
    return j;
  }
  static ValidateArgs from_json(const ojson& j) {
    ValidateArgs a;
    a.inferred = param<std::string>(j, "inferred");
    a.ground_truth = param<std::string>(j, "ground_truth");
    a.observers = param<std::vector<std::string>>(j, "observers");
    a.window_start = optional_param<std::int64_t>(j, "window_start");
    a.window_end = optional_param<std::int64_t>(j, "window_end");
    a.match = param<std::string>(j, "match");
    return a;
  }
};

std::vector<std::string> exec_validate(const ojson& params, const RunContext& ctx) {
  const auto a = ValidateArgs::from_json(params);
  MatchMode mode;
  if (a.match == "ip") {
    mode = MatchMode::ip_only;
  } else if (a.match == "endpoint") {
    mode = MatchMode::endpoint;
  } else {
    throw InputError("match must be ip or endpoint");
  }
  TimeWindow window;
  if (a.window_start) window.start = *a.window_start;
  if (a.window_end) window.end = *a.window_end;
  if (window.start > window.end) throw InputError("window start lies after window end");

  auto inf_in = open_in(a.inferred);
  const auto inferred = read_inferred_csv(inf_in);
  auto gt_in = open_in(a.ground_truth);
  const auto truth = load_ground_truth(gt_in);

  std::vector<PeerAddress> observers;
  for (const auto& o : a.observers) observers.push_back(PeerAddress::parse(o));
  if (observers.empty()) {
    for (const auto& s : truth) {
      if (std::find(observers.begin(), observers.end(), s.node) == observers.end()) observers.push_back(s.node);
    }
  }
  if (observers.empty()) throw InputError("no observers given and the ground truth names none");

  std::vector<ValidationReport> reports;
  for (const auto& obs : observers) {
    auto set = truth_neighbor_set(truth, obs, window, mode);
    if (!set) ctx.err << "validate: no ground-truth snapshot of " << obs.to_string() << " in the window\n";
    auto r = validate(inferred, set ? *set : std::set<PeerAddress>{}, obs, mode);
    r.window = window;
    reports.push_back(r);
  }
  OutputSet outs(ctx.out_dir);
  {
    auto o = outs.open("validation.jsonl");
    for (const auto& r : reports) o << format_report_line(r) << '\n';
  }
  print_report_table(ctx.out, reports);
  return outs.names();
}

// ------------------------------------------------------ analyze / attack

struct GraphInput {
  Graph graph;
  Graph::BuildStats stats;
  std::size_t components = 0;
  std::size_t full_nodes = 0;
  std::size_t full_edges = 0;
};

GraphInput load_graph(const std::string& path, bool lcc_only) {
  auto in = open_in(path);
  const auto edges = read_edge_csv(in);
  GraphInput g;
  g.graph = Graph::from_edges(edges, &g.stats);
  g.components = connected_components(g.graph).size();
  g.full_nodes = g.graph.node_count();
  g.full_edges = g.graph.edge_count();
  if (lcc_only) g.graph = lcc(g.graph);
  return g;
}

struct AnalyzeArgs {
  std::string edges;
  std::size_t top_k = 14;
  bool lcc_only = false;
  unsigned threads = 0;

  ojson to_json() const {
    return {{"edges", edges}, {"top_k", top_k}, {"lcc_only", lcc_only}, {"threads", threads}};
  }
  static AnalyzeArgs from_json(const ojson& j) {
    AnalyzeArgs a;
    a.edges = param<std::string>(j, "edges");
    a.top_k = param<std::size_t>(j, "top_k");
    a.lcc_only = param<bool>(j, "lcc_only");
    a.threads = param<unsigned>(j, "threads");
    return a;
  }
};

std::vector<std::string> exec_analyze(const ojson& params, const RunContext& ctx) {
  const auto a = AnalyzeArgs::from_json(params);
  const auto in = load_graph(a.edges, a.lcc_only);
  const Graph& g = in.graph;
  const auto scores = centrality(g, a.threads);
  const auto top = top_k(std::span<const std::uint32_t>(scores.degree), a.top_k);
  const auto top_b = top_k(std::span<const double>(scores.betweenness), a.top_k);
  const auto largest = lcc(g);
  const auto overlap = overlap_matrix(g, top);

  OutputSet outs(ctx.out_dir);
  {
    ojson m;
    m["scope"] = a.lcc_only ? "lcc" : "graph";
    m["input_nodes"] = in.full_nodes;
    m["input_edges"] = in.full_edges;
    m["self_loops_dropped"] = in.stats.self_loops;
    m["duplicate_edges"] = in.stats.duplicate_edges;
    m["components"] = in.components;
    m["nodes"] = g.node_count();
    m["edges"] = g.edge_count();
    m["lcc_nodes"] = largest.node_count();
    m["lcc_edges"] = largest.edge_count();
    auto rows = [&](const std::vector<NodeId>& ids) {
      ojson arr = ojson::array();
      for (auto id : ids) {
        arr.push_back({{"address", g.address(id).to_string()},
                       {"degree", scores.degree[id]},
                       {"betweenness", scores.betweenness[id]}});
      }
      return arr;
    };
    m["top_degree"] = rows(top);
    m["top_betweenness"] = rows(top_b);
    m["coverage"] = g.node_count() ? one_hop_coverage(g, top) : 0.0;
    auto o = outs.open("metrics.json");
    o << m.dump(2) << '\n';
  }
  {
    auto o = outs.open("centrality.csv");
    o << "address,degree,betweenness\n";
    for (NodeId i = 0; i < g.node_count(); ++i) {
      o << g.address(i).to_string() << ',' << scores.degree[i] << ',' << fmt_double(scores.betweenness[i]) << '\n';
    }
  }
  {
    auto o = outs.open("overlap.csv");
    o << "address";
    for (auto id : overlap.nodes) o << ',' << g.address(id).to_string();
    o << '\n';
    for (std::size_t i = 0; i < overlap.nodes.size(); ++i) {
      o << g.address(overlap.nodes[i]).to_string();
      for (std::size_t j = 0; j < overlap.nodes.size(); ++j) o << ',' << fmt_double(overlap.at(i, j));
      o << '\n';
    }
  }
  {
    auto o = outs.open("graph.graphml");
    write_graphml(o, g, &scores);
  }
  {
    auto o = outs.open("edges.txt");
    write_edge_list(o, g);
  }
  ctx.out << "analyze: " << g.node_count() << " nodes, " << g.edge_count() << " edges, LCC "
          << largest.node_count() << "\n";
  return outs.names();
}

struct AttackArgs {
  std::string edges;
  std::string strategy = "all";
  double step = 0.01;
  double epsilon = 0.01;
  bool adaptive = false;
  bool lcc_only = false;
  unsigned threads = 0;

  ojson to_json() const {
    return {{"edges", edges},       {"strategy", strategy}, {"step", step},
            {"epsilon", epsilon},   {"adaptive", adaptive}, {"lcc_only", lcc_only},
            {"threads", threads}};
  }
  static AttackArgs from_json(const ojson& j) {
    AttackArgs a;
    a.edges = param<std::string>(j, "edges");
    a.strategy = param<std::string>(j, "strategy");
    a.step = param<double>(j, "step");
    a.epsilon = param<double>(j, "epsilon");
    a.adaptive = param<bool>(j, "adaptive");
    a.lcc_only = param<bool>(j, "lcc_only");
    a.threads = param<unsigned>(j, "threads");
    return a;
  }
};

std::vector<std::string> exec_attack(const ojson& params, const RunContext& ctx) {
  const auto a = AttackArgs::from_json(params);
  std::vector<AttackStrategy> strategies;
  if (a.strategy == "all") {
    strategies = {AttackStrategy::degree, AttackStrategy::betweenness, AttackStrategy::random};
  } else {
    strategies = {parse_attack_strategy(a.strategy)};
  }
  AttackOptions opts;
  opts.step_fraction = a.step;
  opts.collapse_threshold = a.epsilon;
  opts.adaptive = a.adaptive;
  opts.seed = ctx.seed;
  opts.threads = a.threads;

  const auto in = load_graph(a.edges, a.lcc_only);
  std::vector<AttackCurve> curves;
  for (auto s : strategies) curves.push_back(attack(in.graph, s, opts));

  OutputSet outs(ctx.out_dir);
  {
    auto o = outs.open("attack_curve.csv");
    o << "strategy,removed_fraction,lcc_fraction\n";
    for (const auto& c : curves) {
      for (const auto& p : c.points) {
        o << to_string(c.strategy) << ',' << fmt_double(p.removed_fraction) << ',' << fmt_double(p.lcc_fraction)
          << '\n';
      }
    }
  }
  {
    ojson s;
    s["nodes"] = in.graph.node_count();
    s["mode"] = a.adaptive ? "adaptive" : "static";
    auto& tp = s["turning_points"] = ojson::object();
    for (const auto& c : curves) {
      tp[to_string(c.strategy)] = c.turning_point ? ojson(*c.turning_point) : ojson(nullptr);
      ctx.out << "attack: " << to_string(c.strategy) << " turning point "
              << (c.turning_point ? fmt_double(*c.turning_point) : std::string("none")) << '\n';
    }
    auto o = outs.open("attack_summary.json");
    o << s.dump(2) << '\n';
  }
  return outs.names();
}

// ------------------------------------------------------------- dispatch

struct CommandSpec {
  std::vector<fs::path> (*inputs)(const ojson& params);
  std::vector<std::string> (*execute)(const ojson& params, const RunContext& ctx);
};

const std::map<std::string, CommandSpec>& commands() {
  static const std::map<std::string, CommandSpec> table{
      {"ingest", {[](const ojson& p) { return ingest_inputs(IngestArgs::from_json(p)); }, exec_ingest}},
      {"simulate", {[](const ojson&) { return std::vector<fs::path>{}; }, exec_simulate}},
      {"infer",
       {[](const ojson& p) {
          auto a = InferArgs::from_json(p);
          return std::vector<fs::path>{a.triplets, a.totals};
        },
        exec_infer}},
      {"validate",
       {[](const ojson& p) {
          auto a = ValidateArgs::from_json(p);
          return std::vector<fs::path>{a.inferred, a.ground_truth};
        },
        exec_validate}},
      {"analyze",
       {[](const ojson& p) { return std::vector<fs::path>{AnalyzeArgs::from_json(p).edges}; }, exec_analyze}},
      {"attack",
       {[](const ojson& p) { return std::vector<fs::path>{AttackArgs::from_json(p).edges}; }, exec_attack}},
  };
  return table;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

void execute(const std::string& name, const ojson& params, std::uint64_t seed, const fs::path& out_dir,
             std::ostream& out, std::ostream& err, const std::vector<InputDigest>* expected) {
  const auto& spec = commands().at(name);
  std::vector<InputDigest> digests;
  for (const auto& p : spec.inputs(params)) digests.push_back(digest_input(p));
  if (expected) {
    bool same = digests.size() == expected->size();
    for (std::size_t i = 0; same && i < digests.size(); ++i) {
      same = digests[i].path == (*expected)[i].path && digests[i].sha256 == (*expected)[i].sha256;
    }
    if (!same) throw InputError("inputs differ from those recorded in the manifest");
  }
  prepare_out_dir(out_dir);
  RunContext ctx{out_dir, seed, out, err};
  RunManifest m;
  m.command = name;
  m.parameters = params;
  m.inputs = std::move(digests);
  m.seed = seed;
  m.version = kVersion;
  m.outputs = spec.execute(params, ctx);
  m.outputs.push_back(kManifestName);
  write_manifest(out_dir, m);
}

// ---------------------------------------------------------- config file

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(n) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw InputError(path + ":" + std::to_string(n) + ": empty key");
    kv.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

bool mentions(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::optional<std::string> flag_value(const std::vector<std::string>& args, const std::string& flag) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
  }
  return std::nullopt;
}

// Turns config entries into command-line tokens for everything the command
// line does not set itself.
std::vector<std::string> merge_config(CLI::App& app, const std::vector<std::string>& args) {
  auto path = flag_value(args, "--config");
  if (!path) return args;
  CLI::App* sub = nullptr;
  for (const auto& a : args) {
    if (auto* s = app.get_subcommand_no_throw(a)) {
      sub = s;
      break;
    }
  }
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : read_config(*path)) {
    const std::string flag = "--" + key;
    if (key == "config") throw InputError("config files cannot include other config files");
    const CLI::Option* opt = sub ? sub->get_option_no_throw(flag) : nullptr;
    if (!opt) opt = app.get_option_no_throw(flag);
    if (!opt) throw InputError(*path + ": unknown key '" + key + "'");
    if (mentions(args, flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes") {
        merged.push_back(flag);
      } else if (value != "false" && value != "0" && value != "no") {
        throw InputError(*path + ": '" + key + "' takes true or false");
      }
    } else {
      merged.push_back(flag);
      merged.push_back(value);
    }
  }
  return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monero P2P topology inference toolkit", "xmrmap"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string config;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory receiving outputs and manifest.json")->capture_default_str();
  app.add_option("--config", config, "flat key=value file; command-line flags win");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "peer-list observations to triplet CSV");
  c_ingest->add_option("--trace", ingest.trace, "canonical trace file(s)")->delimiter(',');
  c_ingest->add_option("--flows", ingest.flows, "tcpflow output files or directories")->delimiter(',');
  c_ingest->add_option("--exclude", ingest.exclude, "addresses to drop as sources")->delimiter(',');
  c_ingest->add_option("--exclude-file", ingest.exclude_file, "one address per line");
  c_ingest->add_option("--ip-byte-order", ingest.ip_byte_order, "m_ip interpretation")
      ->check(CLI::IsMember({"network", "host"}))
      ->capture_default_str();
  c_ingest->add_option("--max-payload", ingest.max_payload, "Levin payload cap in bytes")->capture_default_str();

  SimulateArgs simulate;
  auto& sc = simulate.cfg;
  auto* c_sim = app.add_subcommand("simulate", "gossip simulation with ground truth");
  c_sim->add_option("--nodes", sc.node_count)->capture_default_str();
  c_sim->add_option("--out-degree", sc.out_degree)->capture_default_str();
  c_sim->add_option("--whitelist-cap", sc.whitelist_cap)->capture_default_str();
  c_sim->add_option("--top-window", sc.top_window)->capture_default_str();
  c_sim->add_option("--response-size", sc.response_size)->capture_default_str();
  c_sim->add_option("--rounds", sc.rounds)->capture_default_str();
  c_sim->add_option("--handshake-period", sc.handshake_period, "rounds between timed syncs")->capture_default_str();
  c_sim->add_option("--observers", sc.observers, "node indices that log received peer lists")
      ->delimiter(',')
      ->capture_default_str();
  c_sim->add_option("--background-peers", simulate.background_peers, "-1: whitelist-cap minus nodes")
      ->capture_default_str();
  c_sim->add_option("--transient-contacts", sc.transient_contacts, "short contacts per node per round")
      ->capture_default_str();
  c_sim->add_option("--hubs", sc.hub_count, "high-degree seed nodes")->capture_default_str();
  c_sim->add_option("--hub-links", sc.hub_links, "outgoing slots each node spends on hubs")->capture_default_str();
  c_sim->add_option("--churn", sc.churn_rate, "per-round connection replacement probability")->capture_default_str();
  c_sim->add_option("--gossip-recency", simulate.gossip_recency)
      ->check(CLI::IsMember({"direct-only", "inherit"}))
      ->capture_default_str();
  c_sim->add_option("--round-seconds", sc.round_seconds)->capture_default_str();

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "label high-frequency pairs as neighbors");
  c_infer->add_option("--triplets", infer.triplets, "triplets.csv from ingest")->required();
  c_infer->add_option("--totals", infer.totals, "packet_totals.csv (default: next to triplets)");
  c_infer->add_option("--c-min", infer.p.c_min, "drop rows below this count")->capture_default_str();
  c_infer->add_option("--n-min", infer.p.n_min, "skip sources with fewer rows")->capture_default_str();
  c_infer->add_flag("--weighted", infer.p.weighted, "weight distinct counts by multiplicity");

  ValidateArgs validate_args;
  auto* c_val = app.add_subcommand("validate", "precision and recall against ground truth");
  c_val->add_option("--inferred", validate_args.inferred, "inferred.csv from infer")->required();
  c_val->add_option("--ground-truth", validate_args.ground_truth, "connection snapshots")->required();
  c_val->add_option("--observers", validate_args.observers, "observer addresses (default: all in ground truth)")
      ->delimiter(',');
  c_val->add_option("--window-start", validate_args.window_start);
  c_val->add_option("--window-end", validate_args.window_end);
  c_val->add_option("--match", validate_args.match)->check(CLI::IsMember({"ip", "endpoint"}))->capture_default_str();

  AnalyzeArgs analyze;
  auto* c_an = app.add_subcommand("analyze", "centrality, coverage and overlap of an edge list");
  c_an->add_option("--edges", analyze.edges, "inferred.csv or truth_edges.csv")->required();
  c_an->add_option("--top-k", analyze.top_k)->capture_default_str();
  c_an->add_flag("--lcc-only", analyze.lcc_only, "restrict to the largest component");
  c_an->add_option("--threads", analyze.threads, "0: all cores")->capture_default_str();

  AttackArgs attack_args;
  auto* c_att = app.add_subcommand("attack", "LCC decay under node removal");
  c_att->add_option("--edges", attack_args.edges)->required();
  c_att->add_option("--strategy", attack_args.strategy)
      ->check(CLI::IsMember({"degree", "betweenness", "random", "all"}))
      ->capture_default_str();
  c_att->add_option("--step", attack_args.step, "fraction of |V| removed per batch")->capture_default_str();
  c_att->add_option("--epsilon", attack_args.epsilon, "LCC share counted as collapsed")->capture_default_str();
  c_att->add_flag("--adaptive", attack_args.adaptive, "re-rank after every batch");
  c_att->add_flag("--lcc-only", attack_args.lcc_only);
  c_att->add_option("--threads", attack_args.threads)->capture_default_str();

  std::string manifest_path;
  auto* c_replay = app.add_subcommand("replay", "re-run a command from its manifest.json");
  c_replay->add_option("--manifest", manifest_path)->required();

  try {
    auto merged = merge_config(app, args);
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);

    if (c_replay->parsed()) {
      const auto m = read_manifest(manifest_path);
      if (!commands().count(m.command)) throw ProtocolError("manifest names unknown command " + m.command);
      if (m.version != kVersion) {
        err << "replay: manifest written by xmrmap " << m.version << ", running " << kVersion << '\n';
      }
      execute(m.command, m.parameters, m.seed, out_dir, out, err, &m.inputs);
      return 0;
    }
    ojson params;
    std::string name;
    if (c_ingest->parsed()) {
      name = "ingest";
      params = ingest.to_json();
    } else if (c_sim->parsed()) {
      name = "simulate";
      params = simulate.to_json();
    } else if (c_infer->parsed()) {
      name = "infer";
      if (infer.totals.empty()) infer.totals = (fs::path(infer.triplets).parent_path() / "packet_totals.csv").string();
      params = infer.to_json();
    } else if (c_val->parsed()) {
      name = "validate";
      params = validate_args.to_json();
    } else if (c_an->parsed()) {
      name = "analyze";
      params = analyze.to_json();
    } else {
      name = "attack";
      params = attack_args.to_json();
    }
    execute(name, params, seed, out_dir, out, err, nullptr);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    err << "xmrmap: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "xmrmap: internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace xmrmap::cli
