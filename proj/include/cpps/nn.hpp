#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cpps::nn {

/// Handle to a tape node.
struct Var {
  int id = -1;
};

/// Reverse-mode autodiff over dense double matrices. Operations append nodes
/// in topological order; backward() replays them in reverse. One tape per
/// forward pass; values and gradients live in the tape, handles stay cheap.
class Tape {
 public:
  /// New input node. Gradients are only tracked through nodes that require
  /// them (parameters and anything computed from parameters).
  Var leaf(const Eigen::MatrixXd& value, bool requires_grad);

  const Eigen::MatrixXd& value(Var v) const;
  const Eigen::MatrixXd& grad(Var v) const;

  Var matmul(Var a, Var b);
  /// M * a for a constant matrix M that never needs gradients.
  Var lmul_const(const Eigen::MatrixXd& m, Var a);
  Var transpose(Var a);
  Var add(Var a, Var b);                // same shape
  Var add_rowvec(Var a, Var row);       // broadcast a 1 x k row over all rows
  Var cmul(Var a, Var b);               // elementwise
  Var cmul_rowvec(Var a, Var row);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var softmax_rows(Var a);
  /// Per-row standardization (x - mean) / sqrt(var + eps), no affine part.
  Var layernorm_rows(Var a, double eps = 1e-5);
  /// Inverted dropout: zero entries with probability `rate`, scale the rest
  /// by 1/(1-rate). The mask is drawn from `seed`, so the same seed yields
  /// the same sampled function. rate = 0 is the identity.
  Var dropout(Var a, double rate, std::uint64_t seed);
  /// Scatter a per-pair column (rows in pair_index order for i<j) into a
  /// symmetric n x n matrix with zero diagonal.
  Var sym_scatter(Var pairs, std::size_t n);
  /// Negative log of the per-row mixture likelihood, summed over rows:
  /// -sum_r log(softmax(logits_r) . coeff_r), a 1 x 1 node. `label` names
  /// the term in non-finite loss errors. One-hot coeff rows recover plain
  /// cross-entropy.
  Var mixture_nll(Var logits, const Eigen::MatrixX2d& coeff, const std::string& label);

  /// Backpropagates from a 1 x 1 node, seeding its gradient with 1.
  void backward(Var out);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void()> pull;  // adds this node's grad into its inputs
  };

  Node& at(Var v);
  const Node& at(Var v) const;
  Var push(Eigen::MatrixXd value, bool requires_grad, std::function<void()> pull);

  std::vector<Node> nodes_;
};

/// Softmax of each row, numerically stabilized. Shared by the tape op and
/// plain inference.
Eigen::MatrixXd softmax_rows_value(const Eigen::MatrixXd& logits);

}  // namespace cpps::nn
