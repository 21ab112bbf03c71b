#include "cpps/problem.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "cpps/rng.hpp"

namespace cpps::problem {

ProblemContext make_context(grid::PowerGrid grid_in, grid::ScenarioSet scenarios,
                            cyber::CyberLayer layer, detect::DetectionConfig detect_cfg,
                            placement::RewardConfig reward_cfg) {
  if (layer.node_count() != grid_in.node_count())
    throw std::invalid_argument("problem context: layer and grid sizes differ");
  ProblemContext ctx;
  ctx.score_table = detect::build_score_table(scenarios, grid_in, detect_cfg);
  ctx.grid = std::move(grid_in);
  ctx.scenarios = std::move(scenarios);
  ctx.layer = std::move(layer);
  ctx.detect_cfg = detect_cfg;
  ctx.reward_cfg = reward_cfg;
  return ctx;
}

double detection_score_of(const ProblemContext& ctx, const placement::PlacementGraph& p) {
  return detect::score_from_table(ctx.score_table, p.selected_nodes(), ctx.detect_cfg.lambda_a);
}

EvalResult evaluate_placement(const ProblemContext& ctx, const placement::PlacementGraph& raw,
                              const Eigen::MatrixXd& shadowing) {
  EvalResult out;
  out.refined = placement::refine(raw, ctx.layer, shadowing);
  out.s_a = detection_score_of(ctx, out.refined);
  const auto [i1, i2] = placement::check_constraints(out.refined, out.s_a, ctx.reward_cfg);
  out.feasible = i1 * i2 == 1;
  out.reward = placement::reward(out.refined, out.s_a, ctx.reward_cfg);
  return out;
}

std::pair<double, double> evaluate_under_conditions(const ProblemContext& ctx,
                                                    const placement::PlacementGraph& raw,
                                                    std::uint64_t seed, std::size_t conditions) {
  if (conditions == 0) throw std::invalid_argument("need at least one test condition");
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t c = 0; c < conditions; ++c) {
    const Eigen::MatrixXd field =
        cyber::shadow_field(ctx.layer, derive_seed(seed, "cond", c));
    const double r = evaluate_placement(ctx, raw, field).reward;
    sum += r;
    sumsq += r * r;
  }
  const double mean = sum / double(conditions);
  const double var = std::max(0.0, sumsq / double(conditions) - mean * mean);
  return {mean, std::sqrt(var)};
}

}  // namespace cpps::problem
