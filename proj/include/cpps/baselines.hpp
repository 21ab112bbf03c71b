#pragma once

#include <cstdint>

#include "cpps/placement.hpp"
#include "cpps/problem.hpp"

namespace cpps::baselines {

/// Greedily adds the node with the largest marginal detection-score gain
/// until `budget` nodes are placed or no candidate improves the score (ties
/// go to the lowest node id), then wires every feasible link among the
/// selected nodes at zero shadowing.
placement::PlacementGraph greedy_accuracy(const problem::ProblemContext& ctx,
                                          std::size_t budget);

/// Starts from the feasible pair with the smallest path loss and grows the
/// set one node at a time, always taking the node whose feasible links to
/// the current set maximize the selected subgraph's algebraic connectivity.
/// Throws "no feasible links" when no pair is within the path-loss budget.
placement::PlacementGraph greedy_robustness(const problem::ProblemContext& ctx,
                                            std::size_t budget);

/// `budget` nodes uniformly without replacement; each feasible link among
/// them kept with probability 1/2.
placement::PlacementGraph random_placement(const problem::ProblemContext& ctx,
                                           std::size_t budget, std::uint64_t seed);

}  // namespace cpps::baselines
