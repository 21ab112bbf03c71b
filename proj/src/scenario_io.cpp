#include "cpps/scenario_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace cpps::grid {
namespace {

nlohmann::json complex_array(const std::vector<Complex>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const Complex& c : v) out.push_back({c.real(), c.imag()});
  return out;
}

std::vector<Complex> complex_vector(const nlohmann::json& j) {
  std::vector<Complex> out;
  out.reserve(j.size());
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::runtime_error("scenario JSON: complex entries must be [re, im]");
    out.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  return out;
}

}  // namespace

std::string scenarios_to_json(const ScenarioSet& set) {
  nlohmann::json j;
  j["seed"] = set.rng_seed;
  j["anomaly_times"] = set.anomaly_times;
  auto& snaps = j["snapshots"] = nlohmann::json::array();
  for (const GridSnapshot& s : set.snapshots) {
    nlohmann::json snap;
    snap["t"] = s.t;
    snap["voltage"] = complex_array(s.node_voltage);
    snap["current"] = complex_array(s.edge_current);
    snap["injection"] = complex_array(s.node_injection);
    if (s.anomaly_label)
      snap["anomaly_edge"] = *s.anomaly_label;
    else
      snap["anomaly_edge"] = nullptr;
    snaps.push_back(std::move(snap));
  }
  return j.dump(2) + "\n";
}

ScenarioSet scenarios_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("scenario JSON: ") + e.what());
  }
  ScenarioSet set;
  set.rng_seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("anomaly_times")) set.anomaly_times.insert(t.get<std::size_t>());
  for (const auto& snap : j.at("snapshots")) {
    GridSnapshot s;
    s.t = snap.at("t").get<std::size_t>();
    s.node_voltage = complex_vector(snap.at("voltage"));
    s.edge_current = complex_vector(snap.at("current"));
    s.node_injection = complex_vector(snap.at("injection"));
    const auto& label = snap.at("anomaly_edge");
    if (!label.is_null()) s.anomaly_label = label.get<std::size_t>();
    set.snapshots.push_back(std::move(s));
  }
  return set;
}

void save_scenarios(const std::string& path, const ScenarioSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  const std::string text = scenarios_to_json(set);
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw std::runtime_error("short write on scenario file: " + path);
}

ScenarioSet load_scenarios(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenarios_from_json(buf.str());
}

}  // namespace cpps::grid
