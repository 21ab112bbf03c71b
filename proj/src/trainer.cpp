#include "cpps/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace cpps::trainer {

TrainMode parse_mode(const std::string& name) {
  if (name == "ddpo") return TrainMode::ddpo;
  if (name == "gdpo") return TrainMode::gdpo;
  if (name == "efgd") return TrainMode::efgd;
  throw std::invalid_argument("unknown training mode: " + name);
}

std::string mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::ddpo: return "ddpo";
    case TrainMode::gdpo: return "gdpo";
    case TrainMode::efgd: return "efgd";
  }
  throw std::logic_error("bad mode value");
}

const diffusion::GraphState& Trajectory::state_at(std::size_t t) const {
  const std::size_t T = states.size() - 1;
  if (t > T) throw std::out_of_range("trajectory has no state at that timestep");
  return states[T - t];
}

namespace {

/// Concatenated (node_sel, upper-triangular adj) bits of a placement.
std::vector<std::uint8_t> placement_bits(const placement::PlacementGraph& p) {
  const std::size_t n = p.node_count();
  std::vector<std::uint8_t> bits;
  bits.reserve(n + pair_count(n));
  for (auto v : p.node_sel) bits.push_back(v ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      bits.push_back(p.adj(Eigen::Index(i), Eigen::Index(j)) != 0.0 ? 1 : 0);
  return bits;
}

std::size_t hamming(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("placement sizes differ");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

diffusion::GraphState state_from_placement(const placement::PlacementGraph& p) {
  const std::size_t n = p.node_count();
  diffusion::GraphState g = diffusion::make_state(n, 0);
  for (std::size_t i = 0; i < n; ++i) g.node_states[i] = p.node_sel[i] ? 1 : 0;
  std::size_t e = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++e)
      g.edge_states[e] = p.adj(Eigen::Index(i), Eigen::Index(j)) != 0.0 ? 1 : 0;
  return g;
}

}  // namespace

placement::PlacementGraph placement_from_state(const diffusion::GraphState& g0) {
  const std::size_t n = g0.node_count();
  placement::PlacementGraph p = placement::empty_placement(n);
  for (std::size_t i = 0; i < n; ++i) p.node_sel[i] = g0.node_states[i] ? 1 : 0;
  std::size_t e = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++e)
      if (g0.edge_states[e]) {
        p.adj(Eigen::Index(i), Eigen::Index(j)) = 1.0;
        p.adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
      }
  return p;
}

ExperienceBuffer::ExperienceBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
}

void ExperienceBuffer::insert(const placement::PlacementGraph& graph, double reward) {
  const std::vector<std::uint8_t> bits = placement_bits(graph);
  for (Entry& e : entries_) {
    if (placement_bits(e.graph) == bits) {
      if (reward > e.reward) {
        e.reward = reward;
        std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
          return a.reward > b.reward || (a.reward == b.reward && a.seq < b.seq);
        });
      }
      return;
    }
  }
  entries_.push_back(Entry{graph, reward, next_seq_++});
  std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.reward > b.reward || (a.reward == b.reward && a.seq < b.seq);
  });
  if (entries_.size() > capacity_) entries_.resize(capacity_);
}

std::optional<placement::PlacementGraph> ExperienceBuffer::select_feedback(
    const placement::PlacementGraph& terminal) const {
  if (entries_.empty()) return std::nullopt;
  const std::vector<std::uint8_t> bits = placement_bits(terminal);
  // Entries are ordered by reward then insertion, so the first strict
  // improvement in distance realizes the tie-break rule.
  const Entry* best = nullptr;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const Entry& e : entries_) {
    const std::size_t d = hamming(placement_bits(e.graph), bits);
    if (d < best_d) {
      best_d = d;
      best = &e;
    }
  }
  return best->graph;
}

double ExperienceBuffer::min_reward() const {
  if (entries_.empty()) throw std::runtime_error("empty buffer has no minimum reward");
  return entries_.back().reward;
}

namespace {

Trajectory roll_one(const denoiser::DenoiserParams& params,
                    const diffusion::DiffusionSchedule& sched,
                    const problem::ProblemContext& ctx, const TrainConfig& cfg,
                    std::uint64_t traj_seed) {
  const std::size_t T = sched.T;
  const std::size_t n = ctx.node_count();
  Rng rng = make_rng(derive_seed(traj_seed, "rollout"));

  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.states.push_back(diffusion::sample_prior(n, T, rng));
  for (std::size_t t = T; t >= 1; --t) {
    const diffusion::Predictions pred = denoiser::forward(params, traj.states.back(), t, T);
    traj.states.push_back(diffusion::denoise_step(traj.states.back(), pred, sched, rng));
  }

  const placement::PlacementGraph raw = placement_from_state(traj.states.back());
  const Eigen::MatrixXd field =
      cyber::shadow_field(ctx.layer, derive_seed(traj_seed, "shadow"));
  const problem::EvalResult ev = problem::evaluate_placement(ctx, raw, field);
  traj.terminal = ev.refined;
  traj.s_a = ev.s_a;
  traj.reward = ev.reward;
  traj.feasible = ev.feasible;

  // Uniform timestep subset of {1..T} via a partial Fisher-Yates pass.
  const std::size_t k = std::min(std::max<std::size_t>(1, cfg.timestep_samples), T);
  Rng trng = make_rng(derive_seed(traj_seed, "tsamp"));
  std::vector<std::size_t> pool(T);
  for (std::size_t i = 0; i < T; ++i) pool[i] = i + 1;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, T - 1);
    std::swap(pool[i], pool[pick(trng)]);
  }
  traj.sampled_t.assign(pool.begin(), pool.begin() + std::ptrdiff_t(k));
  std::sort(traj.sampled_t.begin(), traj.sampled_t.end());
  return traj;
}

/// Runs fn(i) for i in [0, count) across `threads` workers. Each index
/// writes only its own slot, so the outcome is identical for any thread
/// count.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, count);
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<Trajectory> collect_trajectories(const denoiser::DenoiserParams& params,
                                             const diffusion::DiffusionSchedule& sched,
                                             const problem::ProblemContext& ctx,
                                             const TrainConfig& cfg, std::uint64_t seed) {
  std::vector<Trajectory> out(cfg.trajectories_per_epoch);
  parallel_for(out.size(), cfg.threads, [&](std::size_t i) {
    out[i] = roll_one(params, sched, ctx, cfg, derive_seed(seed, "traj", i));
  });
  return out;
}

std::vector<double> standardize_rewards(const std::vector<Trajectory>& trajectories) {
  if (trajectories.size() < 2) throw std::runtime_error("cannot standardize");
  const double n = double(trajectories.size());
  double mean = 0.0;
  for (const auto& t : trajectories) mean += t.reward;
  mean /= n;
  double var = 0.0;
  for (const auto& t : trajectories) var += (t.reward - mean) * (t.reward - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> w(trajectories.size(), 0.0);
  if (sd < 1e-8) return w;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (trajectories[i].reward - mean) / sd;
  return w;
}

void update_buffer(ExperienceBuffer& buffer, const std::vector<Trajectory>& trajectories) {
  // Store the raw sampled G^0, not the refined terminal. Refinement belongs to
  // reward evaluation; a feedback target must be a graph the sampler can emit,
  // or the cross-entropy pull teaches the model post-refinement sparsity and
  // edge logits ratchet toward the empty graph.
  for (const auto& t : trajectories)
    buffer.insert(placement_from_state(t.states.back()), t.reward);
}

std::pair<double, std::vector<Eigen::MatrixXd>> policy_loss_and_grad(
    const denoiser::DenoiserParams& params, const diffusion::DiffusionSchedule& sched,
    const std::vector<Trajectory>& trajectories, const std::vector<double>& weights,
    const ExperienceBuffer* buffer, const TrainConfig& cfg, std::uint64_t seed) {
  if (weights.size() != trajectories.size())
    throw std::invalid_argument("one weight per trajectory required");
  const std::size_t T = sched.T;
  const double inv_d = 1.0 / double(trajectories.size());

  std::vector<denoiser::LossItem> items;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& traj = trajectories[k];
    if (traj.states.size() != T + 1)
      throw std::invalid_argument("trajectory length does not match the schedule");
    const double fold = inv_d * double(T) / double(traj.sampled_t.size());

    const diffusion::GraphState& g0 = traj.states.back();
    const Eigen::MatrixX2d g0_nodes = denoiser::one_hot_rows(g0.node_states);
    const Eigen::MatrixX2d g0_edges = denoiser::one_hot_rows(g0.edge_states);

    Eigen::MatrixX2d fb_nodes, fb_edges;
    bool has_feedback = false;
    if (cfg.mode == TrainMode::efgd && cfg.beta != 0.0 && buffer != nullptr) {
      if (const auto fb = buffer->select_feedback(placement_from_state(g0))) {
        const diffusion::GraphState fs = state_from_placement(*fb);
        fb_nodes = denoiser::one_hot_rows(fs.node_states);
        fb_edges = denoiser::one_hot_rows(fs.edge_states);
        has_feedback = true;
      }
    }

    for (const std::size_t t : traj.sampled_t) {
      denoiser::LossItem item;
      item.g_t = traj.state_at(t);
      item.t = t;
      item.T = T;
      item.dropout_seed = derive_seed(seed, "item", k * (T + 1) + t);
      if (cfg.mode == TrainMode::ddpo) {
        // Likelihood target is the observed next state G^{t-1}: coefficient
        // (i, g) is q(z_i^{t-1} = observed | z_i^t, z^0 = g).
        const diffusion::GraphState& g_prev = traj.state_at(t - 1);
        Eigen::MatrixX2d nc(Eigen::Index(g0.node_states.size()), 2);
        for (std::size_t i = 0; i < g0.node_states.size(); ++i)
          for (int g = 0; g < 2; ++g)
            nc(Eigen::Index(i), g) = diffusion::node_posterior(
                item.g_t.node_states[i], g, sched, t)(g_prev.node_states[i]);
        Eigen::MatrixX2d ec(Eigen::Index(g0.edge_states.size()), 2);
        for (std::size_t e = 0; e < g0.edge_states.size(); ++e)
          for (int g = 0; g < 2; ++g)
            ec(Eigen::Index(e), g) = diffusion::edge_posterior(
                item.g_t.edge_states[e], g, sched, t)(g_prev.edge_states[e]);
        item.terms.push_back({std::move(nc), std::move(ec), fold * weights[k],
                              "step likelihood"});
      } else {
        item.terms.push_back({g0_nodes, g0_edges, fold * weights[k], "reward term"});
        if (has_feedback)
          item.terms.push_back({fb_nodes, fb_edges, fold * cfg.beta, "feedback term"});
      }
      items.push_back(std::move(item));
    }
  }
  return denoiser::loss_and_grad(params, items);
}

TrainResult train(const TrainConfig& cfg, const problem::ProblemContext& ctx,
                  const diffusion::DiffusionSchedule& sched, const denoiser::DenoiserHyper& hyper,
                  const std::function<void(const EpochMetrics&,
                                           const denoiser::DenoiserParams&)>& on_epoch) {
  TrainResult out;
  out.params = denoiser::init(hyper, derive_seed(cfg.seed, "init"));
  ExperienceBuffer buffer(std::max<std::size_t>(1, cfg.buffer_size));

  // Adaptive-moment state, used only when cfg.adam is set.
  std::vector<Eigen::MatrixXd> m1, m2;
  if (cfg.adam) {
    for (const auto& v : out.params.values) {
      m1.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
      m2.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));
    }
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, "epoch", epoch);

    const std::vector<Trajectory> trajs = collect_trajectories(
        out.params, sched, ctx, cfg, derive_seed(epoch_seed, "collect"));
    const std::vector<double> weights = standardize_rewards(trajs);
    if (cfg.mode == TrainMode::efgd) update_buffer(buffer, trajs);

    const ExperienceBuffer* buf = cfg.mode == TrainMode::efgd ? &buffer : nullptr;
    auto [loss, grads] = policy_loss_and_grad(out.params, sched, trajs, weights, buf, cfg,
                                              derive_seed(epoch_seed, "loss"));

    if (cfg.adam) {
      const double c1 = 1.0 - std::pow(kBeta1, double(epoch));
      const double c2 = 1.0 - std::pow(kBeta2, double(epoch));
      for (std::size_t i = 0; i < grads.size(); ++i) {
        m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * grads[i];
        m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
        const Eigen::ArrayXXd mhat = m1[i].array() / c1;
        const Eigen::ArrayXXd vhat = m2[i].array() / c2;
        out.params.values[i].array() -= cfg.learning_rate * mhat / (vhat.sqrt() + kEps);
      }
    } else {
      for (std::size_t i = 0; i < grads.size(); ++i)
        out.params.values[i] -= cfg.learning_rate * grads[i];
    }

    EpochMetrics row;
    row.epoch = epoch;
    double sum = 0.0, feas = 0.0;
    for (const auto& t : trajs) {
      sum += t.reward;
      feas += t.feasible ? 1.0 : 0.0;
    }
    row.avg_reward = sum / double(trajs.size());
    row.feasible_fraction = feas / double(trajs.size());
    row.buffer_min_reward = (buf != nullptr && !buffer.empty())
                                ? buffer.min_reward()
                                : std::numeric_limits<double>::quiet_NaN();
    row.loss = loss;
    row.wall_time_s =
        cfg.record_wall_time
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
            : 0.0;
    out.metrics.push_back(row);
    if (on_epoch) on_epoch(row, out.params);
  }
  return out;
}

InferenceRecord evaluate_record(const problem::ProblemContext& ctx,
                                const placement::PlacementGraph& raw, std::size_t conditions,
                                std::uint64_t seed) {
  InferenceRecord rec;
  const auto [mean, sd] = problem::evaluate_under_conditions(ctx, raw, seed, conditions);
  rec.mean_reward = mean;
  rec.std_reward = sd;
  const std::size_t n = ctx.node_count();
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  const problem::EvalResult nominal = problem::evaluate_placement(ctx, raw, zero);
  rec.nominal = nominal.refined;
  rec.s_a = nominal.s_a;
  rec.lambda2 = placement::selected_lambda2(nominal.refined);
  rec.feasible = nominal.feasible;
  return rec;
}

std::vector<InferenceRecord> inference(const denoiser::DenoiserParams& params,
                                       const diffusion::DiffusionSchedule& sched,
                                       const problem::ProblemContext& ctx, std::size_t count,
                                       std::size_t conditions, std::uint64_t seed,
                                       std::size_t threads) {
  const std::size_t T = sched.T;
  const std::size_t n = ctx.node_count();
  std::vector<InferenceRecord> out(count);
  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  parallel_for(count, threads, [&](std::size_t j) {
    Rng rng = make_rng(derive_seed(seed, "roll", j));
    diffusion::GraphState g = diffusion::sample_prior(n, T, rng);
    for (std::size_t t = T; t >= 1; --t) {
      const diffusion::Predictions pred = denoiser::forward(params, g, t, T);
      g = diffusion::denoise_step(g, pred, sched, rng);
    }
    out[j] = evaluate_record(ctx, placement_from_state(g), conditions, eval_seed);
  });
  return out;
}

}  // namespace cpps::trainer
