#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "flowsense/dataset_io.hpp"
#include "flowsense/errors.hpp"
#include "flowsense/flowgraph.hpp"
#include "flowsense/prng.hpp"

using namespace flowsense::flowgraph;
using flowsense::ValidationError;
using flowsense::Xorshift64Star;

namespace {

FlowsheetTopology two_node_graph() {
  FlowsheetTopology t;
  t.nodes = {{"A", UnitKind::kFeed}, {"B", UnitKind::kProduct}};
  t.edges = {{"E1", "A", "B"}};
  return t;
}

Dataset small_dataset(int n_frames, bool with_targets = true) {
  Dataset d;
  d.topology = two_node_graph();
  d.topology.sensors = {{"FI-E1", "E1", SensorKind::kFlow}};
  for (int i = 0; i < n_frames; ++i) {
    SnapshotFrame f;
    f.time = i * 36.0;
    f.readings["FI-E1"] = 1.0 + i;
    if (with_targets) f.target = 0.5 + 0.01 * i;
    d.frames.push_back(f);
  }
  return d;
}

}  // namespace

TEST_CASE("unit and sensor kinds have fixed declaration indices") {
  CHECK(static_cast<int>(UnitKind::kFeed) == 0);
  CHECK(static_cast<int>(UnitKind::kFlashVessel) == 3);
  CHECK(static_cast<int>(UnitKind::kReactor) == 5);
  CHECK(static_cast<int>(UnitKind::kPurgeSplitter) == 7);
  CHECK(kNumUnitKinds == 8);
  CHECK(static_cast<int>(SensorKind::kFlow) == 0);
  CHECK(static_cast<int>(SensorKind::kLevel) == 3);
  CHECK(static_cast<int>(SensorKind::kPower) == 6);
  CHECK(kNumSensorKinds == 7);
  CHECK(kNodeFeatureDim == 22);
  CHECK(kEdgeFeatureDim == 14);
  CHECK(unit_kind_from_name("Reactor") == UnitKind::kReactor);
  CHECK(sensor_kind_from_name("Duty") == SensorKind::kDuty);
}

TEST_CASE("validate_topology accepts a well-formed graph") {
  CHECK(validate_topology(two_node_graph()).empty());
}

TEST_CASE("validate_topology reports a dangling endpoint by name") {
  FlowsheetTopology t = two_node_graph();
  t.edges.push_back({"E2", "A", "X"});
  const auto errors = validate_topology(t);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("X") != std::string::npos);
}

TEST_CASE("validate_topology rejects two same-kind sensors at one location") {
  FlowsheetTopology t = two_node_graph();
  t.sensors = {{"TI-1", "E1", SensorKind::kTemperature},
               {"TI-2", "E1", SensorKind::kTemperature}};
  const auto errors = validate_topology(t);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("duplicate sensor kind") != std::string::npos);
}

TEST_CASE("validate_topology reports duplicate ids") {
  FlowsheetTopology t = two_node_graph();
  t.nodes.push_back({"A", UnitKind::kMixer});
  t.edges.push_back({"E1", "B", "A"});
  const auto errors = validate_topology(t);
  CHECK(errors.size() == 2);
}

TEST_CASE("encode_node_features: bare reactor row is the unit one-hot") {
  FlowsheetTopology t;
  t.nodes = {{"R", UnitKind::kReactor}};
  SnapshotFrame f;
  const auto feats = encode_node_features(t, f);
  REQUIRE(feats.rows() == 1);
  REQUIRE(feats.cols() == 22);
  for (int c = 0; c < 22; ++c) {
    CHECK(feats.at(0, c) == (c == 5 ? 1.0 : 0.0));
  }
}

TEST_CASE("encode_node_features: flash vessel with a level reading") {
  FlowsheetTopology t;
  t.nodes = {{"V", UnitKind::kFlashVessel}};
  t.sensors = {{"LI", "V", SensorKind::kLevel}};
  SnapshotFrame f;
  f.readings["LI"] = 0.5;
  const auto feats = encode_node_features(t, f);
  CHECK(feats.at(0, 3) == 1.0);                        // one-hot FlashVessel
  CHECK(feats.at(0, 8 + 3) == 0.5);                    // Level value slot
  CHECK(feats.at(0, 15 + 3) == 1.0);                   // Level mask slot
  CHECK(feats.at(0, 8 + 0) == 0.0);
  CHECK(feats.at(0, 15 + 0) == 0.0);
}

TEST_CASE("encode_node_features: node with every sensor kind has full mask") {
  FlowsheetTopology t;
  t.nodes = {{"N", UnitKind::kMixer}};
  SnapshotFrame f;
  for (int k = 0; k < kNumSensorKinds; ++k) {
    const std::string id = "S" + std::to_string(k);
    t.sensors.push_back({id, "N", static_cast<SensorKind>(k)});
    f.readings[id] = 1.0 + k;
  }
  const auto feats = encode_node_features(t, f);
  for (int k = 0; k < kNumSensorKinds; ++k) {
    CHECK(feats.at(0, 15 + k) == 1.0);
    CHECK(feats.at(0, 8 + k) == 1.0 + k);
  }
}

TEST_CASE("encode_edge_features lays out value and mask slots") {
  FlowsheetTopology t = two_node_graph();
  t.sensors = {{"FI", "E1", SensorKind::kFlow},
               {"TI", "E1", SensorKind::kTemperature}};
  SnapshotFrame f;
  f.readings["FI"] = 2.0;
  f.readings["TI"] = 300.0;
  const auto feats = encode_edge_features(t, f);
  REQUIRE(feats.rows() == 1);
  REQUIRE(feats.cols() == 14);
  CHECK(feats.at(0, 0) == 2.0);
  CHECK(feats.at(0, 1) == 300.0);
  CHECK(feats.at(0, 7) == 1.0);
  CHECK(feats.at(0, 8) == 1.0);
  for (int c : {2, 3, 4, 5, 6, 9, 10, 11, 12, 13}) CHECK(feats.at(0, c) == 0.0);
}

TEST_CASE("encode_edge_features: unsensored stream is all zeros") {
  FlowsheetTopology t = two_node_graph();
  SnapshotFrame f;
  const auto feats = encode_edge_features(t, f);
  for (int c = 0; c < 14; ++c) CHECK(feats.at(0, c) == 0.0);
}

TEST_CASE("a zero reading is distinguishable from an absent sensor") {
  FlowsheetTopology t = two_node_graph();
  t.sensors = {{"PI", "E1", SensorKind::kPressure}};
  SnapshotFrame f;
  f.readings["PI"] = 0.0;
  const auto feats = encode_edge_features(t, f);
  CHECK(feats.at(0, 2) == 0.0);
  CHECK(feats.at(0, 9) == 1.0);  // mask says present
}

TEST_CASE("encoding rejects readings from unbound sensors") {
  FlowsheetTopology t = two_node_graph();
  SnapshotFrame f;
  f.readings["GHOST"] = 1.0;
  CHECK_THROWS_WITH_AS(encode_node_features(t, f), doctest::Contains("GHOST"),
                       ValidationError);
}

TEST_CASE("mask zero implies value zero on random encodings") {
  Xorshift64Star rng(77);
  FlowsheetTopology t;
  t.nodes = {{"N1", UnitKind::kCompressor}, {"N2", UnitKind::kFlashVessel}};
  t.edges = {{"E1", "N1", "N2"}};
  t.sensors = {{"S1", "N1", SensorKind::kPower},
               {"S2", "N2", SensorKind::kLevel},
               {"S3", "E1", SensorKind::kFlow}};
  for (int trial = 0; trial < 50; ++trial) {
    SnapshotFrame f;
    if (rng.next_bool()) f.readings["S1"] = rng.uniform_pm(10.0);
    if (rng.next_bool()) f.readings["S2"] = rng.uniform01();
    if (rng.next_bool()) f.readings["S3"] = rng.uniform_pm(100.0);
    const auto nf = encode_node_features(t, f);
    for (int r = 0; r < nf.rows(); ++r) {
      for (int k = 0; k < kNumSensorKinds; ++k) {
        if (nf.at(r, 15 + k) == 0.0) CHECK(nf.at(r, 8 + k) == 0.0);
      }
    }
    const auto ef = encode_edge_features(t, f);
    for (int k = 0; k < kNumSensorKinds; ++k) {
      if (ef.at(0, 7 + k) == 0.0) CHECK(ef.at(0, k) == 0.0);
    }
  }
}

TEST_CASE("row order follows node declaration order under permutation") {
  FlowsheetTopology t;
  t.nodes = {{"N1", UnitKind::kFeed},
             {"N2", UnitKind::kReactor},
             {"N3", UnitKind::kProduct}};
  t.sensors = {{"S2", "N2", SensorKind::kTemperature}};
  SnapshotFrame f;
  f.readings["S2"] = 640.0;
  const auto feats = encode_node_features(t, f);

  FlowsheetTopology permuted = t;
  std::swap(permuted.nodes[0], permuted.nodes[2]);
  const auto pfeats = encode_node_features(permuted, f);
  for (int c = 0; c < 22; ++c) {
    CHECK(pfeats.at(0, c) == feats.at(2, c));
    CHECK(pfeats.at(2, c) == feats.at(0, c));
    CHECK(pfeats.at(1, c) == feats.at(1, c));
  }
}

TEST_CASE("assemble_windows counts") {
  SUBCASE("exactly L frames give one window") {
    const Dataset d = small_dataset(5);
    const auto w = assemble_windows(d, 5);
    REQUIRE(w.size() == 1);
    CHECK(w[0].first_frame == 0);
    CHECK(w[0].target == d.frames[4].target.value());
  }
  SUBCASE("8000 frames with L=5 give 7996 windows") {
    const Dataset d = small_dataset(8000);
    CHECK(assemble_windows(d, 5).size() == 7996);
  }
  SUBCASE("fewer than L frames give none") {
    const Dataset d = small_dataset(3);
    CHECK(assemble_windows(d, 5).empty());
  }
  SUBCASE("count is N-L+1 over random sizes") {
    Xorshift64Star rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = static_cast<int>(rng.next_below(40));
      const int lookback = 1 + static_cast<int>(rng.next_below(8));
      const Dataset d = small_dataset(n);
      CHECK(static_cast<int>(assemble_windows(d, lookback).size()) ==
            std::max(0, n - lookback + 1));
    }
  }
  SUBCASE("windows skip final frames without targets") {
    Dataset d = small_dataset(6);
    d.frames[5].target.reset();
    const auto w = assemble_windows(d, 5);
    REQUIRE(w.size() == 1);
    CHECK(w[0].first_frame == 0);
  }
}

TEST_CASE("chronological_split boundaries") {
  SUBCASE("N=100 at defaults") {
    const auto r = chronological_split(100, SplitFractions{0.8, 0.1, 0.1});
    CHECK(r.train.begin == 0);
    CHECK(r.train.end == 80);
    CHECK(r.val.end == 90);
    CHECK(r.test.end == 100);
  }
  SUBCASE("N=10 with quarters") {
    const auto r = chronological_split(10, SplitFractions{0.5, 0.25, 0.25});
    CHECK(r.train.end == 5);
    CHECK(r.val.end == 7);
    CHECK(r.test.begin == 7);
    CHECK(r.test.end == 10);
  }
  SUBCASE("ratios are normalized before use") {
    const auto r = chronological_split(12, SplitFractions{8, 2, 2});
    CHECK(r.train.end == 8);   // floor(12 * 2/3)
    CHECK(r.val.end == 10);    // floor(12 * 5/6)
    CHECK(r.test.end == 12);
  }
  SUBCASE("empty ranges are rejected") {
    CHECK_THROWS_AS(chronological_split(3, SplitFractions{0.8, 0.1, 0.1}),
                    ValidationError);
    CHECK_THROWS_AS(chronological_split(5, SplitFractions{-1, 1, 1}),
                    ValidationError);
  }
  SUBCASE("ranges partition [0, N) in order") {
    Xorshift64Star rng(6);
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 30 + static_cast<int>(rng.next_below(500));
      SplitFractions f{0.5 + rng.uniform01(), 0.1 + rng.uniform01() * 0.5,
                       0.1 + rng.uniform01() * 0.5};
      const auto r = chronological_split(n, f);
      CHECK(r.train.begin == 0);
      CHECK(r.train.end == r.val.begin);
      CHECK(r.val.end == r.test.begin);
      CHECK(r.test.end == n);
      CHECK(r.train.size() > 0);
      CHECK(r.val.size() > 0);
      CHECK(r.test.size() > 0);
    }
  }
}

TEST_CASE("dataset save/load round-trips structurally") {
  Dataset d = small_dataset(7);
  d.meta.process_name = "A";
  d.meta.sample_interval_s = 36.0;
  d.meta.target_sensor_id = "AI-PROD";
  d.meta.seed = 1234;
  const std::string path = "test_dataset_roundtrip.json";
  save_dataset(d, path);
  const Dataset loaded = load_dataset(path);
  CHECK(loaded.meta.process_name == d.meta.process_name);
  CHECK(loaded.meta.seed == d.meta.seed);
  CHECK(loaded.topology.nodes.size() == d.topology.nodes.size());
  CHECK(loaded.topology.edges.size() == d.topology.edges.size());
  CHECK(loaded.topology.sensors.size() == d.topology.sensors.size());
  REQUIRE(loaded.frames.size() == d.frames.size());
  for (size_t i = 0; i < d.frames.size(); ++i) {
    CHECK(loaded.frames[i].time == d.frames[i].time);
    CHECK(loaded.frames[i].readings == d.frames[i].readings);
    CHECK(loaded.frames[i].target == d.frames[i].target);
  }
  CHECK(loaded.split.train == d.split.train);
  std::filesystem::remove(path);
}

TEST_CASE("dataset loader rejects unknown versions") {
  Dataset d = small_dataset(2);
  const std::string path = "test_dataset_version.json";
  save_dataset(d, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 12, "\"version\": 9");
  std::ofstream out(path, std::ios::trunc);
  out << text;
  out.close();
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("version"),
                       ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("dataset loader rejects frames with unbound sensors") {
  Dataset d = small_dataset(2);
  const std::string path = "test_dataset_unbound.json";
  save_dataset(d, path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"FI-E1\": 2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "\"BOGUS\"");
  std::ofstream out(path, std::ios::trunc);
  out << text;
  out.close();
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("BOGUS"),
                       ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("dataset loader rejects malformed JSON") {
  const std::string path = "test_dataset_malformed.json";
  std::ofstream out(path);
  out << "{ not json";
  out.close();
  CHECK_THROWS_AS(load_dataset(path), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("frames CSV has one column per sensor plus time and target") {
  Dataset d = small_dataset(3);
  const std::string path = "test_frames.csv";
  write_frames_csv(d, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,FI-E1,target");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  in.close();
  std::filesystem::remove(path);
}
