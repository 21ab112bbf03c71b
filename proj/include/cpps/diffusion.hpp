#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cpps/rng.hpp"

namespace cpps::diffusion {

enum class ScheduleKind { linear, cosine };

/// Per-step 2x2 uniform transition matrices Q^t = a^t I + (1-a^t) 11'/2 and
/// their cumulative products, for node and edge channels.
struct DiffusionSchedule {
  std::size_t T = 0;
  std::vector<double> alpha;           // alpha[t-1] = a^t, decreasing to 0
  std::vector<Eigen::Matrix2d> Qv, Qe;          // per step, 1-indexed via t-1
  std::vector<Eigen::Matrix2d> Qv_bar, Qe_bar;  // cumulative products

  const Eigen::Matrix2d& Q_node(std::size_t t) const { return Qv.at(t - 1); }
  const Eigen::Matrix2d& Q_edge(std::size_t t) const { return Qe.at(t - 1); }
  /// Cumulative product through step t; t = 0 yields the identity.
  Eigen::Matrix2d Qbar_node(std::size_t t) const;
  Eigen::Matrix2d Qbar_edge(std::size_t t) const;
};

DiffusionSchedule make_schedule(std::size_t T, ScheduleKind kind);

/// Schedule from explicit retention factors (each in [0,1]); lets tests pin
/// degenerate chains such as the no-noise identity process.
DiffusionSchedule make_schedule_from_alphas(const std::vector<double>& alphas);

/// Binary node and edge categories at one diffusion timestep. Edge states
/// cover unordered pairs i<j in pair_index order.
struct GraphState {
  std::vector<std::uint8_t> node_states;
  std::vector<std::uint8_t> edge_states;
  std::size_t t = 0;

  std::size_t node_count() const { return node_states.size(); }
};

GraphState make_state(std::size_t n, std::size_t t);

/// Independent Bernoulli(1/2) on every node and edge state — the stationary
/// law of the uniform forward process; starting point of generation.
GraphState sample_prior(std::size_t n, std::size_t t, Rng& rng);

/// Jump directly from g0 to step t by sampling each state from its row of
/// the cumulative transition matrix.
GraphState forward_sample(const GraphState& g0, const DiffusionSchedule& sched, std::size_t t,
                          Rng& rng);

/// q(z^{t-1} | z^t, z^0): normalized elementwise product of row z^t of
/// (Q^t)' and row z^0 of Qbar^{t-1}. At t = 1 this is the point mass at z^0.
Eigen::Vector2d posterior(int z_t, int z0, const Eigen::Matrix2d& Q_t,
                          const Eigen::Matrix2d& Qbar_prev);
Eigen::Vector2d node_posterior(int z_t, int z0, const DiffusionSchedule& sched, std::size_t t);
Eigen::Vector2d edge_posterior(int z_t, int z0, const DiffusionSchedule& sched, std::size_t t);

/// Denoiser output: one categorical distribution per node and per edge.
struct Predictions {
  Eigen::MatrixX2d node_probs;
  Eigen::MatrixX2d edge_probs;
};

/// p(z^{t-1} | z^t) as the posterior mixture sum_g p_hat(g) q(z^{t-1}|z^t, g).
Eigen::Vector2d mixture_distribution(int z_t, const Eigen::Vector2d& p_hat,
                                     const Eigen::Matrix2d& Q_t,
                                     const Eigen::Matrix2d& Qbar_prev);

/// One reverse step: sample every node and edge from its posterior mixture
/// under `pred`; the result carries timestep g_t.t - 1. Prediction rows must
/// be distributions (sum 1 within 1e-6).
GraphState denoise_step(const GraphState& g_t, const Predictions& pred,
                        const DiffusionSchedule& sched, Rng& rng);

}  // namespace cpps::diffusion
