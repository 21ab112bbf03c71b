#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpps/diffusion.hpp"

namespace cpps::denoiser {

struct DenoiserHyper {
  std::size_t hidden = 32;  // embedding width h
  std::size_t blocks = 2;   // transformer block count L
  double dropout = 0.1;
};

/// Named parameter tensors in a fixed registry order shared by init,
/// updates, checkpoints and gradient layouts. The network is size-agnostic:
/// no tensor shape depends on the node count, so the total parameter count
/// is the closed form (2 + 9L)h^2 + (14 + 13L)h + 2L + 4.
struct DenoiserParams {
  DenoiserHyper hyper;
  std::uint64_t init_seed = 0;
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> values;

  std::size_t index_of(std::string_view name) const;
  const Eigen::MatrixXd& at(std::string_view name) const;
  Eigen::MatrixXd& at(std::string_view name);
  std::size_t parameter_count() const;
};

/// Tensor names and shapes for a given hyperparameter choice, in registry
/// order.
std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> tensor_layout(
    const DenoiserHyper& hyper);

/// Seeded initialization: weights N(0, 1/fan_in), biases and norm betas 0,
/// norm gammas 1. Identical seeds give identical parameters.
DenoiserParams init(const DenoiserHyper& hyper, std::uint64_t seed);

/// Inference pass (dropout off): per-node and per-edge distributions over
/// {0, 1} for the graph at diffusion step t of T.
diffusion::Predictions forward(const DenoiserParams& params, const diffusion::GraphState& g,
                               std::size_t t, std::size_t T);

/// One weighted likelihood target against the network heads. Coefficient
/// rows are mixed with the predicted distributions: one-hot rows give plain
/// cross-entropy, denoising-posterior rows give the per-step mixture
/// likelihood.
struct LossTerm {
  Eigen::MatrixX2d node_coeff;
  Eigen::MatrixX2d edge_coeff;
  double weight = 1.0;
  std::string label;
};

/// One network evaluation inside a loss: the noisy graph it conditions on
/// plus every term scored against its outputs. The dropout masks of this
/// evaluation are drawn from dropout_seed, so the differentiated function is
/// exactly the sampled one.
struct LossItem {
  diffusion::GraphState g_t;
  std::size_t t = 0;
  std::size_t T = 0;
  std::vector<LossTerm> terms;
  std::uint64_t dropout_seed = 0;
};

/// Total weighted loss over the batch and its exact gradient for every
/// parameter tensor (reverse-mode), laid out parallel to params.values.
/// Dropout uses params.hyper.dropout; items are processed in order, so the
/// result is independent of thread count.
std::pair<double, std::vector<Eigen::MatrixXd>> loss_and_grad(const DenoiserParams& params,
                                                              const std::vector<LossItem>& batch);

/// One-hot coefficient rows for a vector of binary states.
Eigen::MatrixX2d one_hot_rows(const std::vector<std::uint8_t>& states);

/// Binary checkpoint: magic, JSON manifest (hyper, seed, tensor shapes),
/// then raw row-major doubles. load(save(p)) reproduces p bit for bit.
void save_checkpoint(const DenoiserParams& params, const std::string& path);
DenoiserParams load_checkpoint(const std::string& path);

}  // namespace cpps::denoiser
