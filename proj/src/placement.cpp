#include "cpps/placement.hpp"

#include <algorithm>
#include <json.hpp>
#include <stdexcept>

#include "cpps/spectral.hpp"

namespace cpps::placement {

std::size_t PlacementGraph::selected_count() const {
  std::size_t c = 0;
  for (auto v : node_sel) c += v != 0;
  return c;
}

std::vector<std::size_t> PlacementGraph::selected_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < node_sel.size(); ++i)
    if (node_sel[i]) out.push_back(i);
  return out;
}

PlacementGraph empty_placement(std::size_t n) {
  PlacementGraph p;
  p.node_sel.assign(n, 0);
  p.adj = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  return p;
}

PlacementGraph refine(const PlacementGraph& raw, const cyber::CyberLayer& layer,
                      const Eigen::MatrixXd& shadowing) {
  const std::size_t n = raw.node_count();
  if (raw.adj.rows() != Eigen::Index(n) || raw.adj.cols() != Eigen::Index(n))
    throw std::invalid_argument("refine: adj size does not match node_sel");
  if (layer.node_count() != n) throw std::invalid_argument("refine: layer size mismatch");

  PlacementGraph out = empty_placement(n);
  out.node_sel = raw.node_sel;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool wanted = raw.adj(Eigen::Index(i), Eigen::Index(j)) != 0.0 ||
                          raw.adj(Eigen::Index(j), Eigen::Index(i)) != 0.0;
      if (!wanted || !raw.node_sel[i] || !raw.node_sel[j]) continue;
      if (cyber::link_state(layer, i, j, shadowing(Eigen::Index(i), Eigen::Index(j))) != 1)
        continue;
      out.adj(Eigen::Index(i), Eigen::Index(j)) = 1.0;
      out.adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
    }
  return out;
}

std::pair<int, int> check_constraints(const PlacementGraph& p, double s_a,
                                      const RewardConfig& cfg) {
  const int i1 = p.selected_count() <= cfg.budget ? 1 : 0;
  const int i2 = s_a >= cfg.lambda_s ? 1 : 0;
  return {i1, i2};
}

double selected_lambda2(const PlacementGraph& p) {
  const std::vector<std::size_t> sel = p.selected_nodes();
  if (sel.size() < 2) return 0.0;
  Eigen::MatrixXd sub(Eigen::Index(sel.size()), Eigen::Index(sel.size()));
  for (std::size_t a = 0; a < sel.size(); ++a)
    for (std::size_t b = 0; b < sel.size(); ++b)
      sub(Eigen::Index(a), Eigen::Index(b)) =
          p.adj(Eigen::Index(sel[a]), Eigen::Index(sel[b]));
  return std::max(0.0, spectral::algebraic_connectivity(sub));
}

double reward(const PlacementGraph& p, double s_a, const RewardConfig& cfg) {
  const auto [i1, i2] = check_constraints(p, s_a, cfg);
  if (i1 * i2 == 1) return cfg.r1 * selected_lambda2(p);
  const double over = double(p.selected_count()) - double(cfg.budget);
  return -cfg.r2 * std::max(0.0, over) - cfg.r3 * std::max(0.0, cfg.lambda_s - s_a);
}

std::string to_json(const PlacementGraph& p) {
  nlohmann::json j;
  j["nodes"] = p.selected_nodes();
  auto& edges = j["edges"] = nlohmann::json::array();
  const std::size_t n = p.node_count();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      if (p.adj(Eigen::Index(i), Eigen::Index(k)) != 0.0) edges.push_back({i, k});
  return j.dump();
}

PlacementGraph from_json(const std::string& text, std::size_t n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("placement JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges"))
    throw std::runtime_error("placement JSON: expected {nodes, edges}");

  PlacementGraph p = empty_placement(n);
  for (const auto& v : j["nodes"]) {
    const std::size_t id = v.get<std::size_t>();
    if (id >= n) throw std::runtime_error("placement JSON: node id out of range");
    p.node_sel[id] = 1;
  }
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2)
      throw std::runtime_error("placement JSON: edge must be a pair");
    const std::size_t a = e[0].get<std::size_t>();
    const std::size_t b = e[1].get<std::size_t>();
    if (a >= n || b >= n || a == b) throw std::runtime_error("placement JSON: bad edge");
    p.adj(Eigen::Index(a), Eigen::Index(b)) = 1.0;
    p.adj(Eigen::Index(b), Eigen::Index(a)) = 1.0;
  }
  return p;
}

}  // namespace cpps::placement
