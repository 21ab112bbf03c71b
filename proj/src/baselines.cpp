#include "cpps/baselines.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "cpps/rng.hpp"

namespace cpps::baselines {
namespace {

bool link_feasible(const problem::ProblemContext& ctx, std::size_t i, std::size_t j) {
  return cyber::link_state(ctx.layer, i, j, 0.0) == 1;
}

Eigen::MatrixXd zero_field(std::size_t n) {
  return Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
}

/// Wires every feasible pair among the selected nodes and refines.
placement::PlacementGraph finish_with_all_links(const problem::ProblemContext& ctx,
                                                const std::vector<std::uint8_t>& node_sel) {
  const std::size_t n = node_sel.size();
  placement::PlacementGraph p = placement::empty_placement(n);
  p.node_sel = node_sel;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (node_sel[i] && node_sel[j] && link_feasible(ctx, i, j)) {
        p.adj(Eigen::Index(i), Eigen::Index(j)) = 1.0;
        p.adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
      }
  return placement::refine(p, ctx.layer, zero_field(n));
}

double score_of(const problem::ProblemContext& ctx, const std::vector<std::size_t>& nodes) {
  return detect::score_from_table(ctx.score_table, nodes, ctx.detect_cfg.lambda_a);
}

}  // namespace

placement::PlacementGraph greedy_accuracy(const problem::ProblemContext& ctx,
                                          std::size_t budget) {
  const std::size_t n = ctx.node_count();
  std::vector<std::uint8_t> selected(n, 0);
  std::vector<std::size_t> picked;
  double current = 0.0;

  while (picked.size() < std::min(budget, n)) {
    std::size_t best = n;
    double best_score = current;
    for (std::size_t u = 0; u < n; ++u) {
      if (selected[u]) continue;
      std::vector<std::size_t> trial = picked;
      trial.push_back(u);
      const double s = score_of(ctx, trial);
      if (s > best_score) {  // strict: ties keep the lowest id seen first
        best_score = s;
        best = u;
      }
    }
    if (best == n) break;  // no positive marginal gain left
    if (best_score < current)
      throw std::logic_error("detection score decreased under a superset");
    selected[best] = 1;
    picked.push_back(best);
    current = best_score;
  }
  return finish_with_all_links(ctx, selected);
}

placement::PlacementGraph greedy_robustness(const problem::ProblemContext& ctx,
                                            std::size_t budget) {
  const std::size_t n = ctx.node_count();
  // Seed pair: smallest zero-shadowing path loss, lexicographic on ties.
  std::size_t seed_i = n, seed_j = n;
  double best_pl = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!link_feasible(ctx, i, j)) continue;
      const double pl = cyber::path_loss(ctx.layer, i, j, 0.0);
      if (pl < best_pl) {
        best_pl = pl;
        seed_i = i;
        seed_j = j;
      }
    }
  if (seed_i == n) throw std::runtime_error("no feasible links");

  std::vector<std::uint8_t> selected(n, 0);
  selected[seed_i] = selected[seed_j] = 1;
  std::size_t count = 2;
  while (count < std::min(budget, n)) {
    std::size_t best = n;
    double best_l2 = -1.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (selected[u]) continue;
      std::vector<std::uint8_t> trial = selected;
      trial[u] = 1;
      placement::PlacementGraph p = finish_with_all_links(ctx, trial);
      const double l2 = placement::selected_lambda2(p);
      if (l2 > best_l2) {  // strict comparison keeps the lowest id on ties
        best_l2 = l2;
        best = u;
      }
    }
    selected[best] = 1;
    ++count;
  }
  return finish_with_all_links(ctx, selected);
}

placement::PlacementGraph random_placement(const problem::ProblemContext& ctx,
                                           std::size_t budget, std::uint64_t seed) {
  const std::size_t n = ctx.node_count();
  const std::size_t pick = std::min(budget, n);
  Rng rng = make_rng(seed);

  // Partial Fisher-Yates draw of `pick` distinct nodes.
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::uint8_t> selected(n, 0);
  for (std::size_t i = 0; i < pick; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(pool[i], pool[d(rng)]);
    selected[pool[i]] = 1;
  }

  placement::PlacementGraph p = placement::empty_placement(n);
  p.node_sel = selected;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!selected[i] || !selected[j] || !link_feasible(ctx, i, j)) continue;
      if (unit(rng) < 0.5) {
        p.adj(Eigen::Index(i), Eigen::Index(j)) = 1.0;
        p.adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
      }
    }
  return placement::refine(p, ctx.layer, zero_field(n));
}

}  // namespace cpps::baselines
