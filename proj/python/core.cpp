#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xmrmap/capture.hpp"
#include "xmrmap/cli.hpp"
#include "xmrmap/codec_error.hpp"
#include "xmrmap/gossip_sim.hpp"
#include "xmrmap/graph.hpp"
#include "xmrmap/inference.hpp"
#include "xmrmap/trace.hpp"
#include "xmrmap/validation.hpp"

namespace py = pybind11;
using namespace xmrmap;

namespace {

using EdgePairs = std::vector<std::pair<std::string, std::string>>;

std::vector<std::pair<PeerAddress, PeerAddress>> parse_pairs(const EdgePairs& edges) {
  std::vector<std::pair<PeerAddress, PeerAddress>> out;
  out.reserve(edges.size());
  for (const auto& [a, b] : edges) out.emplace_back(PeerAddress::parse(a), PeerAddress::parse(b));
  return out;
}

py::dict observation_dict(const PeerListObservation& o) {
  py::dict d;
  d["t"] = o.observed_at;
  d["observer"] = o.observer.to_string();
  d["source"] = o.source.to_string();
  std::vector<std::string> peers;
  for (const auto& p : o.peers) peers.push_back(p.to_string());
  d["peers"] = peers;
  return d;
}

PeerListObservation observation_from(const py::handle& h) {
  auto d = h.cast<py::dict>();
  std::vector<PeerAddress> peers;
  for (const auto& p : d["peers"]) peers.push_back(PeerAddress::parse(p.cast<std::string>()));
  return make_observation(d["t"].cast<std::int64_t>(), PeerAddress::parse(d["observer"].cast<std::string>()),
                          PeerAddress::parse(d["source"].cast<std::string>()), peers);
}

TripletTable table_from(const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& rows,
                        const std::map<std::string, std::uint64_t>& totals) {
  std::vector<Triplet> t;
  for (const auto& [a, b, c] : rows) t.push_back({PeerAddress::parse(a), PeerAddress::parse(b), c});
  std::map<PeerAddress, std::uint64_t> pt;
  for (const auto& [s, n] : totals) pt[PeerAddress::parse(s)] = n;
  return TripletTable(std::move(t), std::move(pt));
}

std::map<std::string, double> by_address(const Graph& g, const std::vector<double>& v) {
  std::map<std::string, double> out;
  for (NodeId i = 0; i < g.node_count(); ++i) out[g.address(i).to_string()] = v[i];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monero P2P topology inference toolkit";

  // The module keeps references to these as attributes.
  static PyObject* base = py::exception<Error>(m, "XmrmapError").ptr();
  static PyObject* input = py::exception<InputError>(m, "InputError", base).ptr();
  static PyObject* protocol = py::exception<ProtocolError>(m, "ProtocolError", base).ptr();
  static PyObject* invariant = py::exception<InvariantError>(m, "InvariantError", base).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(input, e.what());
    } catch (const ProtocolError& e) {
      PyErr_SetString(protocol, e.what());
    } catch (const InvariantError& e) {
      PyErr_SetString(invariant, e.what());
    }
  });

  m.def("normalize_address", [](const std::string& s) { return PeerAddress::parse(s).to_string(); });

  m.def("parse_trace_line", [](const std::string& line) { return observation_dict(parse_trace_line(line)); });

  m.def(
      "aggregate",
      [](const py::iterable& observations, const std::vector<std::string>& exclude) {
        std::vector<PeerAddress> ex;
        for (const auto& e : exclude) ex.push_back(PeerAddress::parse(e));
        TripletAggregator agg{ExclusionSet(ex)};
        for (const auto& o : observations) agg.add(observation_from(o));
        const auto t = agg.table();
        std::vector<std::tuple<std::string, std::string, std::uint64_t>> rows;
        for (const auto& r : t.rows()) rows.emplace_back(r.ip1.to_string(), r.ip2.to_string(), r.count);
        std::map<std::string, std::uint64_t> totals;
        for (const auto& [s, n] : t.packet_totals()) totals[s.to_string()] = n;
        return py::make_tuple(rows, totals);
      },
      py::arg("observations"), py::arg("exclude") = std::vector<std::string>{},
      "Returns (rows, packet_totals) with rows as (ip1, ip2, count).");

  m.def(
      "two_means_split",
      [](const std::vector<std::uint64_t>& values, bool weighted) -> py::object {
        auto s = two_means_split(values, weighted);
        if (!s) return py::none();
        py::dict d;
        d["threshold"] = s->threshold;
        d["low"] = s->low;
        d["high"] = s->high;
        d["cost"] = s->cost;
        return d;
      },
      py::arg("values"), py::arg("weighted") = false);

  m.def(
      "infer_neighbors",
      [](const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& rows,
         const std::map<std::string, std::uint64_t>& totals, std::uint64_t c_min, std::size_t n_min, bool weighted) {
        InferenceParams p{c_min, n_min, weighted};
        p.validate();
        const auto out = infer_neighbors(table_from(rows, totals), p);
        std::vector<std::tuple<std::string, std::string, std::uint64_t>> edges;
        for (const auto& e : out.edges) edges.emplace_back(e.ip1.to_string(), e.ip2.to_string(), e.count);
        std::vector<std::string> skipped;
        for (const auto& s : out.skipped_sources) skipped.push_back(s.to_string());
        return py::make_tuple(edges, skipped);
      },
      py::arg("rows"), py::arg("totals"), py::arg("c_min") = 2, py::arg("n_min") = 8, py::arg("weighted") = false,
      "Returns (edges, skipped_sources).");

  m.def(
      "validate",
      [](const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& edges,
         const std::vector<std::string>& truth, const std::string& observer, bool strict) {
        InferredEdgeList l;
        for (const auto& [a, b, c] : edges) l.edges.push_back({PeerAddress::parse(a), PeerAddress::parse(b), c});
        const auto mode = strict ? MatchMode::endpoint : MatchMode::ip_only;
        std::set<PeerAddress> t;
        for (const auto& x : truth) t.insert(match_key(PeerAddress::parse(x), mode));
        const auto r = validate(l, t, PeerAddress::parse(observer), mode);
        py::dict d;
        d["inferred"] = r.inferred_count;
        d["matched"] = r.matched_count;
        d["truth"] = r.truth_count;
        d["precision"] = r.precision ? py::cast(*r.precision) : py::none();
        d["recall"] = r.recall ? py::cast(*r.recall) : py::none();
        return d;
      },
      py::arg("edges"), py::arg("truth"), py::arg("observer"), py::arg("strict") = false);

  m.def(
      "simulate",
      [](std::uint32_t nodes, std::uint32_t rounds, std::uint64_t seed, std::vector<std::uint32_t> observers,
         std::uint32_t out_degree, std::uint32_t hubs) {
        sim::SimConfig c;
        c.node_count = nodes;
        c.rounds = rounds;
        c.seed = seed;
        c.observers = std::move(observers);
        c.out_degree = out_degree;
        c.hub_count = hubs;
        sim::SimResult r;
        {
          py::gil_scoped_release release;
          r = sim::run(c);
        }
        py::list trace;
        for (const auto& o : r.trace) trace.append(observation_dict(o));
        EdgePairs truth;
        for (auto [a, b] : r.truth) truth.emplace_back(sim::node_address(a).to_string(), sim::node_address(b).to_string());
        py::dict d;
        d["trace"] = trace;
        d["truth"] = truth;
        d["odds"] = py::make_tuple(r.odds.p_neighbour, r.odds.p_enter, r.odds.p_selected, r.odds.p_random);
        return d;
      },
      py::arg("nodes") = 300, py::arg("rounds") = 200, py::arg("seed") = 1,
      py::arg("observers") = std::vector<std::uint32_t>{0, 1, 2}, py::arg("out_degree") = 8, py::arg("hubs") = 0);

  m.def(
      "betweenness",
      [](const EdgePairs& edges, unsigned threads) {
        const auto g = Graph::from_edges(parse_pairs(edges));
        std::vector<double> b;
        {
          py::gil_scoped_release release;
          b = betweenness(g, threads);
        }
        return by_address(g, b);
      },
      py::arg("edges"), py::arg("threads") = 1);

  m.def("degree", [](const EdgePairs& edges) {
    const auto g = Graph::from_edges(parse_pairs(edges));
    std::map<std::string, std::uint32_t> out;
    const auto d = degree_centrality(g);
    for (NodeId i = 0; i < g.node_count(); ++i) out[g.address(i).to_string()] = d[i];
    return out;
  });

  m.def("lcc_size", [](const EdgePairs& edges) { return lcc(Graph::from_edges(parse_pairs(edges))).node_count(); });

  m.def(
      "attack",
      [](const EdgePairs& edges, const std::string& strategy, double step, bool adaptive, std::uint64_t seed) {
        AttackOptions o;
        o.step_fraction = step;
        o.adaptive = adaptive;
        o.seed = seed;
        const auto c = attack(Graph::from_edges(parse_pairs(edges)), parse_attack_strategy(strategy), o);
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : c.points) pts.emplace_back(p.removed_fraction, p.lcc_fraction);
        return py::make_tuple(pts, c.turning_point ? py::cast(*c.turning_point) : py::none());
      },
      py::arg("edges"), py::arg("strategy") = "degree", py::arg("step") = 0.01, py::arg("adaptive") = false,
      py::arg("seed") = 1, "Returns (points, turning_point).");

  m.def(
      "decode_flow",
      [](const py::bytes& data, const std::string& source, const std::string& destination) {
        const std::string raw = data;
        std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        FlowEndpoints ends{PeerAddress::parse(source), PeerAddress::parse(destination), 0};
        CaptureStats stats;
        py::list out;
        for (const auto& o : observations_from_flow(bytes, ends, {}, stats)) out.append(observation_dict(o));
        return py::make_tuple(out, stats.frames_parsed, stats.frames_rejected);
      },
      py::arg("data"), py::arg("source"), py::arg("destination"),
      "Decodes Levin frames of one flow direction: (observations, frames_parsed, frames_rejected).");

  m.def("encode_flow", [](const py::iterable& observations) {
    std::vector<PeerListObservation> obs;
    for (const auto& o : observations) obs.push_back(observation_from(o));
    const auto bytes = encode_flow(obs);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  });
}
