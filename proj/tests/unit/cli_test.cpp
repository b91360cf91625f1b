#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support/workdir.hpp"
#include "xmrmap/capture.hpp"
#include "xmrmap/gossip_sim.hpp"
#include "xmrmap/inference.hpp"
#include "xmrmap/trace.hpp"

using namespace testing_support;
namespace fs = std::filesystem;

namespace {

std::string p(const fs::path& x) { return x.string(); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small but non-trivial pipeline input shared by several tests.
class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    auto r = run_cli({"--seed", "5", "--out-dir", p(dir / "sim"), "simulate", "--nodes", "80", "--rounds", "60"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  WorkDir dir;
};

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--nodes", "many"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, SimulateConfigError) {
  WorkDir d;
  auto r = run_cli({"--out-dir", p(d / "x"), "simulate", "--nodes", "2", "--out-degree", "8"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("out_degree"), std::string::npos);
}

TEST(Cli, SimulateTwiceIdentical) {
  WorkDir d;
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(run_cli({"--out-dir", p(d / sub), "simulate", "--nodes", "60", "--rounds", "30", "--seed", "7"}).code, 0);
  }
  std::string why;
  EXPECT_TRUE(same_tree(d / "a", d / "b", &why)) << why;
  for (const char* f : {"trace.jsonl", "ground_truth.jsonl", "truth_edges.csv", "sim_summary.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(d / "a" / f)) << f;
  }
}

TEST(Cli, IngestThreeObservations) {
  WorkDir d;
  spit(d / "t.jsonl",
       R"({"t":1,"observer":"10.0.0.1:18080","source":"10.0.0.2:18080","peers":["10.0.0.3:18080"]})"
       "\n"
       R"({"t":2,"observer":"10.0.0.1:18080","source":"10.0.0.2:18080","peers":["10.0.0.3:18080","10.0.0.4:18080"]})"
       "\n"
       R"({"t":3,"observer":"10.0.0.1:18080","source":"10.0.0.2:18080","peers":[]})"
       "\n");
  auto r = run_cli({"--out-dir", p(d / "o"), "ingest", "--trace", p(d / "t.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(d / "o/packet_totals.csv"), "source,packets\n10.0.0.2:18080,3\n");
  EXPECT_EQ(slurp(d / "o/triplets.csv"), "ip1,ip2,count\n10.0.0.2:18080,10.0.0.3:18080,2\n10.0.0.2:18080,10.0.0.4:18080,1\n");
  auto stats = nlohmann::json::parse(slurp(d / "o/ingest_stats.json"));
  EXPECT_EQ(stats["observations"], 3);

  auto ex = run_cli({"--out-dir", p(d / "e"), "ingest", "--trace", p(d / "t.jsonl"), "--exclude", "10.0.0.2"});
  EXPECT_EQ(ex.code, 0);
  EXPECT_EQ(slurp(d / "e/triplets.csv"), "ip1,ip2,count\n");
}

TEST(Cli, IngestEmptyOrBadInputs) {
  WorkDir d;
  fs::create_directories(d / "empty");
  auto r = run_cli({"--out-dir", p(d / "o"), "ingest", "--flows", p(d / "empty")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run_cli({"--out-dir", p(d / "o"), "ingest"}).code, 1);
  EXPECT_EQ(run_cli({"--out-dir", p(d / "o"), "ingest", "--trace", p(d / "missing.jsonl")}).code, 1);
  spit(d / "010.000.000.002.18080-010.000.000.001.18080", std::string(50, 'x'));
  auto junk = run_cli({"--out-dir", p(d / "o"), "ingest", "--flows", p(d / "010.000.000.002.18080-010.000.000.001.18080")});
  EXPECT_EQ(junk.code, 2);
  EXPECT_NE(junk.err.find("frame"), std::string::npos);
}

TEST_F(Pipeline, BinaryFixtureMatchesGeneratingTrace) {
  // Encode the simulated trace as one flow file per (source, observer) pair.
  std::ifstream in(dir / "sim/trace.jsonl");
  std::map<std::pair<xmrmap::PeerAddress, xmrmap::PeerAddress>, std::vector<xmrmap::PeerListObservation>> flows;
  xmrmap::for_each_trace_record(in, [&](xmrmap::PeerListObservation&& o) {
    flows[{o.source, o.observer}].push_back(std::move(o));
  });
  fs::create_directories(dir / "flows");
  for (const auto& [key, obs] : flows) {
    xmrmap::FlowEndpoints ends{key.first, key.second, 0};
    auto bytes = xmrmap::encode_flow(obs);
    spit(dir / "flows" / xmrmap::flow_filename(ends), std::string(bytes.begin(), bytes.end()));
  }
  spit(dir / "flows" / "report.xml", "<dfxml/>");
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "a"), "ingest", "--trace", p(dir / "sim/trace.jsonl")}).code, 0);
  auto r = run_cli({"--out-dir", p(dir / "b"), "ingest", "--flows", p(dir / "flows")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "a/triplets.csv"), slurp(dir / "b/triplets.csv"));
  EXPECT_EQ(slurp(dir / "a/packet_totals.csv"), slurp(dir / "b/packet_totals.csv"));
}

TEST_F(Pipeline, InferEqualsLibraryCalls) {
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "ing"), "ingest", "--trace", p(dir / "sim/trace.jsonl")}).code, 0);
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "inf"), "infer", "--triplets", p(dir / "ing/triplets.csv")}).code, 0);
  std::ifstream in(dir / "sim/trace.jsonl");
  auto table = xmrmap::aggregate(xmrmap::read_trace(in));
  std::stringstream want;
  xmrmap::write_inferred_csv(want, xmrmap::infer_neighbors(table));
  EXPECT_EQ(slurp(dir / "inf/inferred.csv"), want.str());
  EXPECT_TRUE(fs::exists(dir / "inf/skipped_sources.csv"));
}

TEST_F(Pipeline, SchemaMismatchNamesProducer) {
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "ing"), "ingest", "--trace", p(dir / "sim/trace.jsonl")}).code, 0);
  auto r = run_cli({"--out-dir", p(dir / "x"), "infer", "--triplets", p(dir / "sim/truth_edges.csv"), "--totals",
                   p(dir / "ing/packet_totals.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ingest"), std::string::npos);
  auto v = run_cli({"--out-dir", p(dir / "y"), "validate", "--inferred", p(dir / "ing/triplets.csv"), "--ground-truth",
                   p(dir / "sim/ground_truth.jsonl")});
  EXPECT_EQ(v.code, 2);
  EXPECT_NE(v.err.find("infer"), std::string::npos);
}

TEST_F(Pipeline, ValidateWritesOneRecordPerObserver) {
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "ing"), "ingest", "--trace", p(dir / "sim/trace.jsonl")}).code, 0);
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "inf"), "infer", "--triplets", p(dir / "ing/triplets.csv")}).code, 0);
  auto r = run_cli({"--out-dir", p(dir / "val"), "validate", "--inferred", p(dir / "inf/inferred.csv"), "--ground-truth",
                   p(dir / "sim/ground_truth.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(slurp(dir / "val/validation.jsonl")), 3u);
  EXPECT_NE(r.out.find("precision"), std::string::npos);

  auto w = run_cli({"--out-dir", p(dir / "w"), "validate", "--inferred", p(dir / "inf/inferred.csv"), "--ground-truth",
                   p(dir / "sim/ground_truth.jsonl"), "--observers", "10.0.0.1", "--window-start", "999999"});
  ASSERT_EQ(w.code, 0);
  EXPECT_NE(w.err.find("no ground-truth snapshot"), std::string::npos);
  EXPECT_NE(slurp(dir / "w/validation.jsonl").find("\"recall\":null"), std::string::npos);
}

TEST_F(Pipeline, AnalyzeTopK14) {
  auto r = run_cli({"--out-dir", p(dir / "an"), "analyze", "--edges", p(dir / "sim/truth_edges.csv"), "--top-k", "14"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir / "an/overlap.csv");
  EXPECT_EQ(line_count(csv), 15u);
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 14);
  auto m = nlohmann::json::parse(slurp(dir / "an/metrics.json"));
  EXPECT_EQ(m["nodes"], 80);
  EXPECT_EQ(m["top_degree"].size(), 14u);
  for (const char* f : {"graph.graphml", "edges.txt", "centrality.csv"}) EXPECT_TRUE(fs::exists(dir / "an" / f));
}

TEST_F(Pipeline, AttackCurvePoints) {
  auto r = run_cli({"--out-dir", p(dir / "at"), "attack", "--edges", p(dir / "sim/truth_edges.csv"), "--strategy",
                   "degree", "--step", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  // 80 nodes, batches of round(0.8) = 1 node: 80 removals plus the start
  EXPECT_EQ(line_count(slurp(dir / "at/attack_curve.csv")), 1u + 81u);
  EXPECT_EQ(run_cli({"--out-dir", p(dir / "at2"), "attack", "--edges", p(dir / "sim/truth_edges.csv"), "--step", "0"}).code,
            1);
}

TEST_F(Pipeline, ConfigFileAndCommandLinePrecedence) {
  spit(dir / "run.cfg", "# simulation\nnodes = 40\nout_degree=4\nrounds=12\nobservers=0,1\n");
  auto r = run_cli({"--config", p(dir / "run.cfg"), "--out-dir", p(dir / "c"), "simulate", "--rounds", "9"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = nlohmann::json::parse(slurp(dir / "c/manifest.json"));
  EXPECT_EQ(m["parameters"]["nodes"], 40);
  EXPECT_EQ(m["parameters"]["out_degree"], 4);
  EXPECT_EQ(m["parameters"]["rounds"], 9);
  EXPECT_EQ(m["parameters"]["observers"], nlohmann::json::array({0, 1}));

  spit(dir / "bad.cfg", "no_such_key=1\n");
  EXPECT_EQ(run_cli({"--config", p(dir / "bad.cfg"), "--out-dir", p(dir / "d"), "simulate"}).code, 1);
  spit(dir / "seed.cfg", "seed=42\n");
  ASSERT_EQ(run_cli({"--config", p(dir / "seed.cfg"), "--out-dir", p(dir / "s"), "simulate", "--nodes", "20",
                    "--rounds", "2"})
                .code,
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "s/manifest.json"))["seed"], 42);
}

TEST_F(Pipeline, ReplayReproducesAndDetectsChangedInputs) {
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "ing"), "ingest", "--trace", p(dir / "sim/trace.jsonl")}).code, 0);
  ASSERT_EQ(run_cli({"--out-dir", p(dir / "re"), "replay", "--manifest", p(dir / "ing/manifest.json")}).code, 0);
  std::string why;
  EXPECT_TRUE(same_tree(dir / "ing", dir / "re", &why)) << why;
  auto m = nlohmann::json::parse(slurp(dir / "ing/manifest.json"));
  EXPECT_EQ(m["command"], "ingest");
  EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["outputs"].back(), "manifest.json");

  spit(dir / "sim/trace.jsonl", slurp(dir / "sim/trace.jsonl") + "\n");
  EXPECT_EQ(run_cli({"--out-dir", p(dir / "re2"), "replay", "--manifest", p(dir / "ing/manifest.json")}).code, 1);
  EXPECT_EQ(run_cli({"--out-dir", p(dir / "re3"), "replay", "--manifest", p(dir / "sim/trace.jsonl")}).code, 2);
}
