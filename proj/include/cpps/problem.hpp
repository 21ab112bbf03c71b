#pragma once

#include <cstdint>

#include "cpps/cyber.hpp"
#include "cpps/detect.hpp"
#include "cpps/grid.hpp"
#include "cpps/placement.hpp"

namespace cpps::problem {

/// Everything a placement's reward depends on: the physical grid, the fixed
/// training scenarios with their precomputed per-sensor score table, the
/// communication layer and the thresholds.
struct ProblemContext {
  grid::PowerGrid grid;
  grid::ScenarioSet scenarios;
  cyber::CyberLayer layer;
  detect::DetectionConfig detect_cfg;
  placement::RewardConfig reward_cfg;
  detect::SensorScoreTable score_table;

  std::size_t node_count() const { return grid.node_count(); }
};

/// Builds the score table from the scenario set and assembles the context.
ProblemContext make_context(grid::PowerGrid grid_in, grid::ScenarioSet scenarios,
                            cyber::CyberLayer layer, detect::DetectionConfig detect_cfg,
                            placement::RewardConfig reward_cfg);

/// Detection score of a placement's sensor set, replayed from the table.
/// An empty selection detects nothing and scores 0.
double detection_score_of(const ProblemContext& ctx, const placement::PlacementGraph& p);

struct EvalResult {
  placement::PlacementGraph refined;
  double s_a = 0.0;
  double reward = 0.0;
  bool feasible = false;
};

/// Refines `raw` under one shadowing field and scores it.
EvalResult evaluate_placement(const ProblemContext& ctx, const placement::PlacementGraph& raw,
                              const Eigen::MatrixXd& shadowing);

/// Mean and population standard deviation of the reward over `conditions`
/// seeded shadowing realizations (condition c uses derive_seed(seed, "cond",
/// c), so different placements can share identical conditions).
std::pair<double, double> evaluate_under_conditions(const ProblemContext& ctx,
                                                    const placement::PlacementGraph& raw,
                                                    std::uint64_t seed, std::size_t conditions);

}  // namespace cpps::problem
