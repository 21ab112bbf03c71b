#include "cpps/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cpps/util.hpp"

namespace cpps::diffusion {
namespace {

Eigen::Matrix2d uniform_transition(double alpha) {
  Eigen::Matrix2d q = Eigen::Matrix2d::Constant((1.0 - alpha) / 2.0);
  q.diagonal().array() += alpha;
  return q;
}

int sample_binary(const Eigen::Vector2d& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p(0) ? 0 : 1;
}

}  // namespace

Eigen::Matrix2d DiffusionSchedule::Qbar_node(std::size_t t) const {
  if (t == 0) return Eigen::Matrix2d::Identity();
  return Qv_bar.at(t - 1);
}

Eigen::Matrix2d DiffusionSchedule::Qbar_edge(std::size_t t) const {
  if (t == 0) return Eigen::Matrix2d::Identity();
  return Qe_bar.at(t - 1);
}

DiffusionSchedule make_schedule_from_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw std::invalid_argument("schedule needs at least one step");
  DiffusionSchedule s;
  s.T = alphas.size();
  s.alpha = alphas;
  Eigen::Matrix2d cum = Eigen::Matrix2d::Identity();
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha outside [0, 1]");
    const Eigen::Matrix2d q = uniform_transition(a);
    cum = cum * q;
    s.Qv.push_back(q);
    s.Qe.push_back(q);
    s.Qv_bar.push_back(cum);
    s.Qe_bar.push_back(cum);
  }
  return s;
}

DiffusionSchedule make_schedule(std::size_t T, ScheduleKind kind) {
  if (T == 0) throw std::invalid_argument("schedule needs at least one step");
  std::vector<double> alphas(T);
  if (kind == ScheduleKind::linear) {
    for (std::size_t t = 1; t <= T; ++t) alphas[t - 1] = 1.0 - double(t) / double(T);
  } else {
    // Cosine cumulative retention: abar^t = cos^2(pi t / 2T), a^t the ratio
    // of consecutive abar values; hits 0 exactly at t = T.
    double abar_prev = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
      const double c = std::cos(0.5 * std::numbers::pi * double(t) / double(T));
      const double abar = c * c;
      alphas[t - 1] = abar / abar_prev;
      abar_prev = abar;
    }
  }
  return make_schedule_from_alphas(alphas);
}

GraphState make_state(std::size_t n, std::size_t t) {
  GraphState g;
  g.node_states.assign(n, 0);
  g.edge_states.assign(pair_count(n), 0);
  g.t = t;
  return g;
}

GraphState sample_prior(std::size_t n, std::size_t t, Rng& rng) {
  GraphState g = make_state(n, t);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : g.node_states) v = unit(rng) < 0.5 ? 0 : 1;
  for (auto& e : g.edge_states) e = unit(rng) < 0.5 ? 0 : 1;
  return g;
}

GraphState forward_sample(const GraphState& g0, const DiffusionSchedule& sched, std::size_t t,
                          Rng& rng) {
  if (g0.t != 0) throw std::invalid_argument("forward_sample: input must be at t = 0");
  if (t < 1 || t > sched.T) throw std::invalid_argument("forward_sample: t out of range");
  if (g0.edge_states.size() != pair_count(g0.node_count()))
    throw std::invalid_argument("forward_sample: edge state count mismatch");

  GraphState g = g0;
  g.t = t;
  const Eigen::Matrix2d& qv = sched.Qbar_node(t);
  const Eigen::Matrix2d& qe = sched.Qbar_edge(t);
  for (auto& v : g.node_states) v = std::uint8_t(sample_binary(qv.row(v).transpose(), rng));
  for (auto& e : g.edge_states) e = std::uint8_t(sample_binary(qe.row(e).transpose(), rng));
  return g;
}

Eigen::Vector2d posterior(int z_t, int z0, const Eigen::Matrix2d& Q_t,
                          const Eigen::Matrix2d& Qbar_prev) {
  // Row z^t of (Q^t)' is column z^t of Q^t.
  const Eigen::Vector2d lik = Q_t.col(z_t);
  const Eigen::Vector2d pri = Qbar_prev.row(z0).transpose();
  Eigen::Vector2d p = lik.cwiseProduct(pri);
  const double norm = p.sum();
  if (norm <= 0.0) throw std::runtime_error("posterior: zero normalizer");
  return p / norm;
}

Eigen::Vector2d node_posterior(int z_t, int z0, const DiffusionSchedule& sched, std::size_t t) {
  if (t < 1 || t > sched.T) throw std::invalid_argument("posterior: t out of range");
  return posterior(z_t, z0, sched.Q_node(t), sched.Qbar_node(t - 1));
}

Eigen::Vector2d edge_posterior(int z_t, int z0, const DiffusionSchedule& sched, std::size_t t) {
  if (t < 1 || t > sched.T) throw std::invalid_argument("posterior: t out of range");
  return posterior(z_t, z0, sched.Q_edge(t), sched.Qbar_edge(t - 1));
}

Eigen::Vector2d mixture_distribution(int z_t, const Eigen::Vector2d& p_hat,
                                     const Eigen::Matrix2d& Q_t,
                                     const Eigen::Matrix2d& Qbar_prev) {
  return p_hat(0) * posterior(z_t, 0, Q_t, Qbar_prev) +
         p_hat(1) * posterior(z_t, 1, Q_t, Qbar_prev);
}

GraphState denoise_step(const GraphState& g_t, const Predictions& pred,
                        const DiffusionSchedule& sched, Rng& rng) {
  const std::size_t t = g_t.t;
  if (t < 1 || t > sched.T) throw std::invalid_argument("denoise_step: t out of range");
  const std::size_t n = g_t.node_count();
  if (pred.node_probs.rows() != Eigen::Index(n) ||
      pred.edge_probs.rows() != Eigen::Index(g_t.edge_states.size()))
    throw std::invalid_argument("denoise_step: prediction shape mismatch");
  auto check_rows = [](const Eigen::MatrixX2d& m, const char* what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (m(r, 0) < 0.0 || m(r, 1) < 0.0 || std::abs(m.row(r).sum() - 1.0) > 1e-6)
        throw std::invalid_argument(std::string("denoise_step: invalid ") + what +
                                    " distribution row");
    }
  };
  check_rows(pred.node_probs, "node");
  check_rows(pred.edge_probs, "edge");

  GraphState out = g_t;
  out.t = t - 1;
  const Eigen::Matrix2d qv = sched.Q_node(t);
  const Eigen::Matrix2d qv_prev = sched.Qbar_node(t - 1);
  const Eigen::Matrix2d qe = sched.Q_edge(t);
  const Eigen::Matrix2d qe_prev = sched.Qbar_edge(t - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d mix = mixture_distribution(
        g_t.node_states[i], pred.node_probs.row(Eigen::Index(i)).transpose(), qv, qv_prev);
    out.node_states[i] = std::uint8_t(sample_binary(mix, rng));
  }
  for (std::size_t e = 0; e < g_t.edge_states.size(); ++e) {
    const Eigen::Vector2d mix = mixture_distribution(
        g_t.edge_states[e], pred.edge_probs.row(Eigen::Index(e)).transpose(), qe, qe_prev);
    out.edge_states[e] = std::uint8_t(sample_binary(mix, rng));
  }
  return out;
}

}  // namespace cpps::diffusion
