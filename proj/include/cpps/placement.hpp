#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpps/cyber.hpp"

namespace cpps::placement {

/// A sensor placement: which nodes carry a sensor and which pairs are wired
/// as communication links. After refine(), adj is symmetric with zero
/// diagonal and only touches selected nodes.
struct PlacementGraph {
  std::vector<std::uint8_t> node_sel;  // 1 = sensor placed
  Eigen::MatrixXd adj;                 // n x n, entries 0/1

  std::size_t node_count() const { return node_sel.size(); }
  std::size_t selected_count() const;
  std::vector<std::size_t> selected_nodes() const;
};

PlacementGraph empty_placement(std::size_t n);

/// Weights and thresholds of the penalty-constrained reward.
struct RewardConfig {
  double r1 = 5000.0;
  double r2 = 1.075;
  double r3 = 0.5;
  std::size_t budget = 25;   // sensor budget N
  double lambda_s = 0.90;    // required detection score
  double lambda_c = 75.0;    // path-loss threshold, mirrors PathLossParams
};

/// Makes a raw placement physically valid: OR-symmetrize adj, zero the
/// diagonal, drop links touching unselected nodes, and drop links whose
/// path loss under `shadowing` misses the budget. Idempotent.
PlacementGraph refine(const PlacementGraph& raw, const cyber::CyberLayer& layer,
                      const Eigen::MatrixXd& shadowing);

/// I1 = [selected count within budget], I2 = [S_a meets lambda_s].
std::pair<int, int> check_constraints(const PlacementGraph& p, double s_a,
                                      const RewardConfig& cfg);

/// Feasible placements earn r1 * lambda2 of the selected subgraph; anything
/// else pays -r2*max(0, |V_S| - N) - r3*max(0, lambda_s - S_a), so each
/// penalty term charges only the constraint that is actually violated.
/// Fewer than two selected nodes count as lambda2 = 0.
double reward(const PlacementGraph& p, double s_a, const RewardConfig& cfg);

/// lambda2 of the combinatorial Laplacian restricted to the selected nodes
/// (0 if fewer than two are selected or the subgraph is disconnected).
double selected_lambda2(const PlacementGraph& p);

/// JSON round-trip: {"nodes": [ids], "edges": [[i, j], ...]}. The node count
/// is not part of the object, so reading needs it back.
std::string to_json(const PlacementGraph& p);
PlacementGraph from_json(const std::string& text, std::size_t n);

}  // namespace cpps::placement
