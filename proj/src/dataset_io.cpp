#include "flowsense/dataset_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "flowsense/errors.hpp"

namespace flowsense::flowgraph {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFormat = "flowsense.dataset";
constexpr int kVersion = 1;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  const auto errors = validate_topology(d.topology);
  if (!errors.empty()) {
    throw ValidationError("refusing to save invalid topology: " + errors[0]);
  }
  ordered_json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["meta"] = {
      {"process", d.meta.process_name},
      {"sample_interval_s", d.meta.sample_interval_s},
      {"target_sensor_id", d.meta.target_sensor_id},
      {"seed", d.meta.seed},
  };
  ordered_json nodes = ordered_json::array();
  for (const NodeSpec& n : d.topology.nodes) {
    nodes.push_back({{"id", n.id}, {"kind", unit_kind_name(n.kind)}});
  }
  ordered_json edges = ordered_json::array();
  for (const EdgeSpec& e : d.topology.edges) {
    edges.push_back({{"id", e.id}, {"src", e.src}, {"dst", e.dst}});
  }
  doc["topology"] = {{"nodes", nodes}, {"edges", edges}};
  ordered_json sensors = ordered_json::array();
  for (const SensorBinding& s : d.topology.sensors) {
    sensors.push_back({{"id", s.sensor_id},
                       {"location", s.location},
                       {"kind", sensor_kind_name(s.kind)}});
  }
  doc["sensors"] = sensors;
  doc["split_fractions"] = {d.split.train, d.split.val, d.split.test};
  ordered_json frames = ordered_json::array();
  for (const SnapshotFrame& f : d.frames) {
    ordered_json jf;
    jf["t"] = f.time;
    ordered_json readings = ordered_json::object();
    for (const auto& [id, value] : f.readings) readings[id] = value;
    jf["readings"] = std::move(readings);
    if (f.target.has_value()) {
      jf["target"] = *f.target;
    } else {
      jf["target"] = nullptr;
    }
    frames.push_back(std::move(jf));
  }
  doc["frames"] = std::move(frames);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << doc.dump(1, '\t') << "\n";
  if (!out) throw ValidationError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset: " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed dataset file " + path + ": " + e.what());
  }
  try {
    if (doc.value("format", "") != kFormat) {
      throw ValidationError("not a dataset file (format tag mismatch): " + path);
    }
    if (doc.value("version", -1) != kVersion) {
      throw ValidationError("unsupported dataset version in " + path);
    }
    Dataset d;
    const auto& meta = doc.at("meta");
    d.meta.process_name = meta.value("process", "");
    d.meta.sample_interval_s = meta.value("sample_interval_s", 0.0);
    d.meta.target_sensor_id = meta.value("target_sensor_id", "");
    d.meta.seed = meta.value("seed", 0ull);
    for (const auto& jn : doc.at("topology").at("nodes")) {
      d.topology.nodes.push_back(
          {jn.at("id").get<std::string>(),
           unit_kind_from_name(jn.at("kind").get<std::string>())});
    }
    for (const auto& je : doc.at("topology").at("edges")) {
      d.topology.edges.push_back({je.at("id").get<std::string>(),
                                  je.at("src").get<std::string>(),
                                  je.at("dst").get<std::string>()});
    }
    for (const auto& js : doc.at("sensors")) {
      d.topology.sensors.push_back(
          {js.at("id").get<std::string>(), js.at("location").get<std::string>(),
           sensor_kind_from_name(js.at("kind").get<std::string>())});
    }
    const auto& sf = doc.at("split_fractions");
    if (sf.size() != 3) {
      throw ValidationError("split_fractions must have 3 entries");
    }
    d.split = {sf[0].get<double>(), sf[1].get<double>(), sf[2].get<double>()};

    const auto errors = validate_topology(d.topology);
    if (!errors.empty()) {
      throw ValidationError("invalid topology in " + path + ": " + errors[0]);
    }

    double prev_time = -1.0;
    for (const auto& jf : doc.at("frames")) {
      SnapshotFrame f;
      f.time = jf.at("t").get<double>();
      if (f.time <= prev_time) {
        throw ValidationError("frames are not chronologically ordered in " +
                              path);
      }
      prev_time = f.time;
      for (const auto& [id, value] : jf.at("readings").items()) {
        bool bound = false;
        for (const SensorBinding& s : d.topology.sensors) {
          if (s.sensor_id == id) {
            bound = true;
            break;
          }
        }
        if (!bound) {
          throw ValidationError("frame at t=" + std::to_string(f.time) +
                                " references unbound sensor " + id);
        }
        f.readings[id] = value.get<double>();
      }
      if (!jf.at("target").is_null()) f.target = jf.at("target").get<double>();
      d.frames.push_back(std::move(f));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed dataset file " + path + ": " + e.what());
  }
}

void write_frames_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "t";
  for (const SensorBinding& s : d.topology.sensors) out << "," << s.sensor_id;
  out << ",target\n";
  for (const SnapshotFrame& f : d.frames) {
    out << fmt_double(f.time);
    for (const SensorBinding& s : d.topology.sensors) {
      auto it = f.readings.find(s.sensor_id);
      out << ",";
      if (it != f.readings.end()) out << fmt_double(it->second);
    }
    out << ",";
    if (f.target.has_value()) out << fmt_double(*f.target);
    out << "\n";
  }
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace flowsense::flowgraph
