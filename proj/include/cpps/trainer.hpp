#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpps/denoiser.hpp"
#include "cpps/diffusion.hpp"
#include "cpps/placement.hpp"
#include "cpps/problem.hpp"

namespace cpps::trainer {

enum class TrainMode { ddpo, gdpo, efgd };

TrainMode parse_mode(const std::string& name);
std::string mode_name(TrainMode mode);

/// One sampled denoising rollout: the visited states G^T..G^0, the sampled
/// timestep set, and the refined terminal with its reward. The accumulated
/// reward of the trajectory is the terminal reward; intermediate steps earn
/// nothing.
struct Trajectory {
  std::vector<diffusion::GraphState> states;  // states[i].t = T - i
  std::vector<std::size_t> sampled_t;         // subset of {1..T}, ascending
  placement::PlacementGraph terminal;         // refined G^0
  double s_a = 0.0;
  double reward = 0.0;
  bool feasible = false;

  const diffusion::GraphState& state_at(std::size_t t) const;  // G^t
};

/// Reward-sorted store of the best distinct terminal graphs seen so far.
class ExperienceBuffer {
 public:
  explicit ExperienceBuffer(std::size_t capacity);

  struct Entry {
    placement::PlacementGraph graph;
    double reward = 0.0;
    std::uint64_t seq = 0;  // insertion order, breaks exact ties
  };

  /// Inserts one terminal, deduplicating identical graphs (the higher
  /// reward wins) and trimming to capacity by reward.
  void insert(const placement::PlacementGraph& graph, double reward);

  /// Entry closest to `terminal` by mean squared difference of the
  /// concatenated (node_sel, upper-triangular adj) bit vectors; ties go to
  /// the higher reward, then the earlier insertion. Empty buffer -> none.
  std::optional<placement::PlacementGraph> select_feedback(
      const placement::PlacementGraph& terminal) const;

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  double min_reward() const;  // smallest retained reward; error when empty

 private:
  std::size_t capacity_;
  std::uint64_t next_seq_ = 0;
  std::vector<Entry> entries_;  // descending reward
};

struct TrainConfig {
  TrainMode mode = TrainMode::efgd;
  std::size_t trajectories_per_epoch = 256;  // |D|
  std::size_t timestep_samples = 4;          // |T_k|, clamped to T
  double beta = 0.2;                         // feedback weight (efgd only)
  double learning_rate = 1e-5;
  std::size_t epochs = 90;
  std::size_t buffer_size = 50;
  bool adam = false;  // paper trains with plain SGD; Adam is opt-in
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool record_wall_time = false;  // off: wall_time_s column stays 0 for replay
};

/// |D| independent rollouts under the current parameters. Every trajectory
/// draws from seeds derived from (seed, index), so results are identical for
/// any thread count.
std::vector<Trajectory> collect_trajectories(const denoiser::DenoiserParams& params,
                                             const diffusion::DiffusionSchedule& sched,
                                             const problem::ProblemContext& ctx,
                                             const TrainConfig& cfg, std::uint64_t seed);

/// (r - mean) / population std over the batch; all zeros when the spread is
/// below 1e-8. Fewer than two trajectories cannot be standardized.
std::vector<double> standardize_rewards(const std::vector<Trajectory>& trajectories);

/// Merges every terminal into the buffer (Algorithm step: update before the
/// gradient uses it).
void update_buffer(ExperienceBuffer& buffer, const std::vector<Trajectory>& trajectories);

/// The policy-gradient objective over one collected batch, including the
/// (T/|T_k|)/|D| weight folding, plus its exact parameter gradients.
/// efgd adds the beta-weighted feedback cross-entropy (buffer required);
/// gdpo is the same objective with beta = 0 and no buffer; ddpo targets the
/// per-step mixture likelihood of G^{t-1} instead of the terminal graph.
/// `seed` drives the per-item dropout masks.
std::pair<double, std::vector<Eigen::MatrixXd>> policy_loss_and_grad(
    const denoiser::DenoiserParams& params, const diffusion::DiffusionSchedule& sched,
    const std::vector<Trajectory>& trajectories, const std::vector<double>& weights,
    const ExperienceBuffer* buffer, const TrainConfig& cfg, std::uint64_t seed);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double avg_reward = 0.0;
  double feasible_fraction = 0.0;
  double buffer_min_reward = 0.0;  // NaN when no buffer is in play
  double wall_time_s = 0.0;
  double loss = 0.0;  // not part of the CSV contract; kept for diagnostics
};

struct TrainResult {
  denoiser::DenoiserParams params;
  std::vector<EpochMetrics> metrics;
};

/// Full training loop: collect, standardize, (efgd) update buffer, gradient
/// step, repeat. `on_epoch`, when set, observes each epoch's parameters and
/// metrics (checkpointing hook).
TrainResult train(const TrainConfig& cfg, const problem::ProblemContext& ctx,
                  const diffusion::DiffusionSchedule& sched, const denoiser::DenoiserHyper& hyper,
                  const std::function<void(const EpochMetrics&,
                                           const denoiser::DenoiserParams&)>& on_epoch = {});

struct InferenceRecord {
  placement::PlacementGraph nominal;  // refined at zero shadowing
  double mean_reward = 0.0;           // over the test conditions
  double std_reward = 0.0;
  double s_a = 0.0;
  double lambda2 = 0.0;
  bool feasible = false;
};

/// `count` denoising rollouts, each refined and scored over `conditions`
/// shared seeded shadowing realizations.
std::vector<InferenceRecord> inference(const denoiser::DenoiserParams& params,
                                       const diffusion::DiffusionSchedule& sched,
                                       const problem::ProblemContext& ctx, std::size_t count,
                                       std::size_t conditions, std::uint64_t seed,
                                       std::size_t threads = 1);

/// Copies a diffusion terminal state into the placement decision object.
placement::PlacementGraph placement_from_state(const diffusion::GraphState& g0);

/// Scores an externally produced placement the same way inference scores its
/// rollouts.
InferenceRecord evaluate_record(const problem::ProblemContext& ctx,
                                const placement::PlacementGraph& raw, std::size_t conditions,
                                std::uint64_t seed);

}  // namespace cpps::trainer
