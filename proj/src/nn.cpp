#include "cpps/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace cpps::nn {

Eigen::MatrixXd softmax_rows_value(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::RowVectorXd shifted =
        logits.row(r).array() - logits.row(r).maxCoeff();
    const Eigen::RowVectorXd ex = shifted.array().exp();
    out.row(r) = ex / ex.sum();
  }
  return out;
}

Tape::Node& Tape::at(Var v) { return nodes_.at(std::size_t(v.id)); }
const Tape::Node& Tape::at(Var v) const { return nodes_.at(std::size_t(v.id)); }

Var Tape::push(Eigen::MatrixXd value, bool requires_grad, std::function<void()> pull) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Var{int(nodes_.size()) - 1};
}

Var Tape::leaf(const Eigen::MatrixXd& value, bool requires_grad) {
  return push(value, requires_grad, nullptr);
}

const Eigen::MatrixXd& Tape::value(Var v) const { return at(v).value; }

const Eigen::MatrixXd& Tape::grad(Var v) const {
  const Node& n = at(v);
  if (n.grad.size() == 0) throw std::logic_error("grad read before backward");
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  const bool rg = at(a).requires_grad || at(b).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value * at(b).value, rg, [this, a, b, out] {
    const Eigen::MatrixXd& g = at(out).grad;
    if (at(a).requires_grad) at(a).grad += g * at(b).value.transpose();
    if (at(b).requires_grad) at(b).grad += at(a).value.transpose() * g;
  });
}

Var Tape::lmul_const(const Eigen::MatrixXd& m, Var a) {
  const bool rg = at(a).requires_grad;
  Var out{int(nodes_.size())};
  return push(m * at(a).value, rg, [this, m, a, out] {
    if (at(a).requires_grad) at(a).grad += m.transpose() * at(out).grad;
  });
}

Var Tape::transpose(Var a) {
  const bool rg = at(a).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value.transpose(), rg, [this, a, out] {
    if (at(a).requires_grad) at(a).grad += at(out).grad.transpose();
  });
}

Var Tape::add(Var a, Var b) {
  if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
    throw std::invalid_argument("add: shape mismatch");
  const bool rg = at(a).requires_grad || at(b).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value + at(b).value, rg, [this, a, b, out] {
    if (at(a).requires_grad) at(a).grad += at(out).grad;
    if (at(b).requires_grad) at(b).grad += at(out).grad;
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  if (at(row).value.rows() != 1 || at(row).value.cols() != at(a).value.cols())
    throw std::invalid_argument("add_rowvec: need a matching 1 x k row");
  const bool rg = at(a).requires_grad || at(row).requires_grad;
  Var out{int(nodes_.size())};
  Eigen::MatrixXd v = at(a).value;
  v.rowwise() += at(row).value.row(0);
  return push(std::move(v), rg, [this, a, row, out] {
    if (at(a).requires_grad) at(a).grad += at(out).grad;
    if (at(row).requires_grad) at(row).grad += at(out).grad.colwise().sum();
  });
}

Var Tape::cmul(Var a, Var b) {
  if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
    throw std::invalid_argument("cmul: shape mismatch");
  const bool rg = at(a).requires_grad || at(b).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value.cwiseProduct(at(b).value), rg, [this, a, b, out] {
    const Eigen::MatrixXd& g = at(out).grad;
    if (at(a).requires_grad) at(a).grad += g.cwiseProduct(at(b).value);
    if (at(b).requires_grad) at(b).grad += g.cwiseProduct(at(a).value);
  });
}

Var Tape::cmul_rowvec(Var a, Var row) {
  if (at(row).value.rows() != 1 || at(row).value.cols() != at(a).value.cols())
    throw std::invalid_argument("cmul_rowvec: need a matching 1 x k row");
  const bool rg = at(a).requires_grad || at(row).requires_grad;
  Var out{int(nodes_.size())};
  Eigen::MatrixXd v = at(a).value;
  v.array().rowwise() *= at(row).value.row(0).array();
  return push(std::move(v), rg, [this, a, row, out] {
    const Eigen::MatrixXd& g = at(out).grad;
    if (at(a).requires_grad) {
      Eigen::MatrixXd ga = g;
      ga.array().rowwise() *= at(row).value.row(0).array();
      at(a).grad += ga;
    }
    if (at(row).requires_grad)
      at(row).grad += g.cwiseProduct(at(a).value).colwise().sum();
  });
}

Var Tape::scale(Var a, double c) {
  const bool rg = at(a).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value * c, rg, [this, a, c, out] {
    if (at(a).requires_grad) at(a).grad += c * at(out).grad;
  });
}

Var Tape::relu(Var a) {
  const bool rg = at(a).requires_grad;
  Var out{int(nodes_.size())};
  return push(at(a).value.cwiseMax(0.0), rg, [this, a, out] {
    if (!at(a).requires_grad) return;
    at(a).grad +=
        at(out).grad.cwiseProduct((at(a).value.array() > 0.0).cast<double>().matrix());
  });
}

Var Tape::softmax_rows(Var a) {
  const bool rg = at(a).requires_grad;
  Eigen::MatrixXd p = softmax_rows_value(at(a).value);
  Var out{int(nodes_.size())};
  return push(std::move(p), rg, [this, a, out] {
    if (!at(a).requires_grad) return;
    const Eigen::MatrixXd& pv = at(out).value;
    const Eigen::MatrixXd& g = at(out).grad;
    for (Eigen::Index r = 0; r < pv.rows(); ++r) {
      const double dot = g.row(r).dot(pv.row(r));
      at(a).grad.row(r) += pv.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  });
}

Var Tape::layernorm_rows(Var a, double eps) {
  const bool rg = at(a).requires_grad;
  const Eigen::MatrixXd& x = at(a).value;
  const Eigen::Index k = x.cols();
  Eigen::MatrixXd y(x.rows(), k);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const Eigen::RowVectorXd cent = x.row(r).array() - mu;
    const double var = cent.squaredNorm() / double(k);
    inv(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = cent * inv(r);
  }
  Var out{int(nodes_.size())};
  return push(std::move(y), rg, [this, a, out, inv] {
    if (!at(a).requires_grad) return;
    const Eigen::MatrixXd& yv = at(out).value;
    const Eigen::MatrixXd& g = at(out).grad;
    const double k = double(yv.cols());
    for (Eigen::Index r = 0; r < yv.rows(); ++r) {
      const double gmean = g.row(r).mean();
      const double gymean = g.row(r).dot(yv.row(r)) / k;
      at(a).grad.row(r) +=
          inv(r) * (g.row(r).array() - gmean - yv.row(r).array() * gymean).matrix();
    }
  });
}

Var Tape::dropout(Var a, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  const bool rg = at(a).requires_grad;
  if (rate == 0.0) {
    // Identity, but still a node so callers can treat it uniformly.
    Var out{int(nodes_.size())};
    return push(at(a).value, rg, [this, a, out] {
      if (at(a).requires_grad) at(a).grad += at(out).grad;
    });
  }
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  Eigen::MatrixXd mask(at(a).value.rows(), at(a).value.cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = unit(rng) < rate ? 0.0 : keep_scale;
  Var out{int(nodes_.size())};
  return push(at(a).value.cwiseProduct(mask), rg, [this, a, out, mask] {
    if (at(a).requires_grad) at(a).grad += at(out).grad.cwiseProduct(mask);
  });
}

Var Tape::sym_scatter(Var pairs, std::size_t n) {
  if (at(pairs).value.cols() != 1 || std::size_t(at(pairs).value.rows()) != pair_count(n))
    throw std::invalid_argument("sym_scatter: need a pair_count(n) x 1 column");
  const bool rg = at(pairs).requires_grad;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  {
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++p)
        m(Eigen::Index(i), Eigen::Index(j)) = m(Eigen::Index(j), Eigen::Index(i)) =
            at(pairs).value(Eigen::Index(p), 0);
  }
  Var out{int(nodes_.size())};
  return push(std::move(m), rg, [this, pairs, n, out] {
    if (!at(pairs).requires_grad) return;
    const Eigen::MatrixXd& g = at(out).grad;
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++p)
        at(pairs).grad(Eigen::Index(p), 0) +=
            g(Eigen::Index(i), Eigen::Index(j)) + g(Eigen::Index(j), Eigen::Index(i));
  });
}

Var Tape::mixture_nll(Var logits, const Eigen::MatrixX2d& coeff, const std::string& label) {
  if (at(logits).value.cols() != 2 || coeff.rows() != at(logits).value.rows())
    throw std::invalid_argument("mixture_nll: coeff must match logits rows (2 columns)");
  const bool rg = at(logits).requires_grad;
  const Eigen::MatrixXd p = softmax_rows_value(at(logits).value);
  Eigen::VectorXd mix(p.rows());
  double total = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    mix(r) = p.row(r).dot(coeff.row(r));
    const double term = -std::log(mix(r));
    if (!std::isfinite(term))
      throw std::runtime_error("non-finite loss in " + label + " at row " + std::to_string(r));
    total += term;
  }
  Var out{int(nodes_.size())};
  return push(Eigen::MatrixXd::Constant(1, 1, total), rg, [this, logits, coeff, p, mix, out] {
    if (!at(logits).requires_grad) return;
    const double g = at(out).grad(0, 0);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      // d(-log(p . c))/dlogit = p * (1 - c / mix) through the softmax.
      at(logits).grad(r, 0) += g * p(r, 0) * (1.0 - coeff(r, 0) / mix(r));
      at(logits).grad(r, 1) += g * p(r, 1) * (1.0 - coeff(r, 1) / mix(r));
    }
  });
}

void Tape::backward(Var out) {
  Node& last = at(out);
  if (last.value.rows() != 1 || last.value.cols() != 1)
    throw std::invalid_argument("backward: output must be 1 x 1");
  if (!last.requires_grad) throw std::invalid_argument("backward: output has no gradient path");
  for (Node& n : nodes_)
    if (n.requires_grad) n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  last.grad(0, 0) = 1.0;
  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    Node& n = nodes_[idx];
    if (n.requires_grad && n.pull) n.pull();
  }
}

}  // namespace cpps::nn
