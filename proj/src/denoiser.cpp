#include "cpps/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <random>
#include <stdexcept>

#include "cpps/nn.hpp"
#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace cpps::denoiser {

std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> tensor_layout(
    const DenoiserHyper& hyper) {
  if (hyper.hidden < 2) throw std::invalid_argument("hidden width must be at least 2");
  if (hyper.blocks < 1) throw std::invalid_argument("need at least one block");
  if (hyper.dropout < 0.0 || hyper.dropout >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0, 1)");

  const Eigen::Index h = Eigen::Index(hyper.hidden);
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> out;
  auto put = [&](std::string name, Eigen::Index r, Eigen::Index c) {
    out.emplace_back(std::move(name), std::make_pair(r, c));
  };

  // One-hot state plus the t/T scalar make the input width 3.
  for (const char* side : {"node_embed", "edge_embed"}) {
    put(std::string(side) + ".w1", 3, h);
    put(std::string(side) + ".b1", 1, h);
    put(std::string(side) + ".w2", h, h);
    put(std::string(side) + ".b2", 1, h);
  }
  for (std::size_t k = 0; k < hyper.blocks; ++k) {
    const std::string b = "block" + std::to_string(k) + ".";
    put(b + "attn.wq", h, h);
    put(b + "attn.wk", h, h);
    put(b + "attn.wv", h, h);
    put(b + "attn.wo", h, h);
    put(b + "attn.bo", 1, h);
    put(b + "film.ws", h, 1);
    put(b + "film.bs", 1, 1);
    put(b + "film.wm", h, 1);
    put(b + "film.bm", 1, 1);
    put(b + "norm1.gamma", 1, h);
    put(b + "norm1.beta", 1, h);
    put(b + "ffn.w1", h, h);
    put(b + "ffn.b1", 1, h);
    put(b + "ffn.w2", h, h);
    put(b + "ffn.b2", 1, h);
    put(b + "norm2.gamma", 1, h);
    put(b + "norm2.beta", 1, h);
    put(b + "edge.we1", h, h);
    put(b + "edge.wn1", h, h);
    put(b + "edge.be1", 1, h);
    put(b + "edge.we2", h, h);
    put(b + "edge.be2", 1, h);
    put(b + "norm3.gamma", 1, h);
    put(b + "norm3.beta", 1, h);
  }
  put("head.node.w", h, 2);
  put("head.node.b", 1, 2);
  put("head.edge.w", h, 2);
  put("head.edge.b", 1, 2);
  return out;
}

std::size_t DenoiserParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw std::out_of_range("no parameter tensor named " + std::string(name));
}

const Eigen::MatrixXd& DenoiserParams::at(std::string_view name) const {
  return values[index_of(name)];
}

Eigen::MatrixXd& DenoiserParams::at(std::string_view name) { return values[index_of(name)]; }

std::size_t DenoiserParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& v : values) total += std::size_t(v.size());
  return total;
}

namespace {

std::string_view leaf_name(std::string_view full) {
  const auto dot = full.rfind('.');
  return dot == std::string_view::npos ? full : full.substr(dot + 1);
}

}  // namespace

DenoiserParams init(const DenoiserHyper& hyper, std::uint64_t seed) {
  DenoiserParams p;
  p.hyper = hyper;
  p.init_seed = seed;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& [name, shape] : tensor_layout(hyper)) {
    Eigen::MatrixXd v(shape.first, shape.second);
    const std::string_view leaf = leaf_name(name);
    if (leaf.front() == 'w') {
      const double scale = 1.0 / std::sqrt(double(shape.first));
      for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = scale * gauss(rng);
    } else if (leaf == "gamma") {
      v.setOnes();
    } else {
      v.setZero();
    }
    p.names.push_back(name);
    p.values.push_back(std::move(v));
  }
  return p;
}

namespace {

/// Builds the full network on a tape and returns the raw output logits.
struct BuiltNet {
  std::vector<nn::Var> param_vars;  // parallel to params.values
  nn::Var node_logits;
  nn::Var edge_logits;
};

BuiltNet build_net(nn::Tape& tape, const DenoiserParams& params, const diffusion::GraphState& g,
                   std::size_t t, std::size_t T, double dropout_rate,
                   std::uint64_t dropout_seed) {
  const std::size_t n = g.node_count();
  const std::size_t m = pair_count(n);
  if (n == 0) throw std::invalid_argument("denoiser: empty graph");
  if (g.edge_states.size() != m) throw std::invalid_argument("denoiser: edge state count mismatch");
  if (T < 1 || t < 1 || t > T) throw std::invalid_argument("denoiser: t out of range");
  const double h = double(params.hyper.hidden);
  const double tfrac = double(t) / double(T);

  BuiltNet net;
  net.param_vars.reserve(params.values.size());
  for (const auto& v : params.values) net.param_vars.push_back(tape.leaf(v, true));
  auto P = [&](std::string_view name) { return net.param_vars[params.index_of(name)]; };

  Eigen::MatrixXd xin(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    xin(Eigen::Index(i), 0) = g.node_states[i] == 0 ? 1.0 : 0.0;
    xin(Eigen::Index(i), 1) = g.node_states[i] == 0 ? 0.0 : 1.0;
    xin(Eigen::Index(i), 2) = tfrac;
  }
  Eigen::MatrixXd ein(m, 3);
  for (std::size_t e = 0; e < m; ++e) {
    ein(Eigen::Index(e), 0) = g.edge_states[e] == 0 ? 1.0 : 0.0;
    ein(Eigen::Index(e), 1) = g.edge_states[e] == 0 ? 0.0 : 1.0;
    ein(Eigen::Index(e), 2) = tfrac;
  }
  // Constant pooling map: row p of (pairsum * X) is X_i + X_j for pair p.
  Eigen::MatrixXd pairsum = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(n));
  {
    std::size_t pidx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++pidx) {
        pairsum(Eigen::Index(pidx), Eigen::Index(i)) = 1.0;
        pairsum(Eigen::Index(pidx), Eigen::Index(j)) = 1.0;
      }
  }

  std::uint64_t drop_counter = 0;
  auto drop = [&](nn::Var v) {
    return tape.dropout(v, dropout_rate, derive_seed(dropout_seed, "drop", drop_counter++));
  };
  auto mlp2 = [&](nn::Var in, std::string_view w1, std::string_view b1, std::string_view w2,
                  std::string_view b2) {
    const nn::Var hidden = tape.relu(tape.add_rowvec(tape.matmul(in, P(w1)), P(b1)));
    return tape.add_rowvec(tape.matmul(hidden, P(w2)), P(b2));
  };
  // Post-norm residual: LN(x + Dropout(sub)) with learnable gamma/beta.
  auto residual_norm = [&](nn::Var x, nn::Var sub, std::string_view gamma,
                           std::string_view beta) {
    const nn::Var ln = tape.layernorm_rows(tape.add(x, drop(sub)));
    return tape.add_rowvec(tape.cmul_rowvec(ln, P(gamma)), P(beta));
  };

  nn::Var X = mlp2(tape.leaf(xin, false), "node_embed.w1", "node_embed.b1", "node_embed.w2",
                   "node_embed.b2");
  nn::Var E = mlp2(tape.leaf(ein, false), "edge_embed.w1", "edge_embed.b1", "edge_embed.w2",
                   "edge_embed.b2");

  for (std::size_t k = 0; k < params.hyper.blocks; ++k) {
    const std::string b = "block" + std::to_string(k) + ".";
    // Single-head self-attention with the edge track modulating the logits:
    // A = (QK'/sqrt(h)) .* (1 + S) + M, S and M scattered from per-edge
    // scalars (feature-wise linear modulation).
    const nn::Var q = tape.matmul(X, P(b + "attn.wq"));
    const nn::Var key = tape.matmul(X, P(b + "attn.wk"));
    const nn::Var v = tape.matmul(X, P(b + "attn.wv"));
    const nn::Var a0 = tape.scale(tape.matmul(q, tape.transpose(key)), 1.0 / std::sqrt(h));
    const nn::Var s = tape.sym_scatter(
        tape.add_rowvec(tape.matmul(E, P(b + "film.ws")), P(b + "film.bs")), n);
    const nn::Var mshift = tape.sym_scatter(
        tape.add_rowvec(tape.matmul(E, P(b + "film.wm")), P(b + "film.bm")), n);
    const nn::Var logits = tape.add(tape.add(a0, tape.cmul(a0, s)), mshift);
    const nn::Var attn = tape.softmax_rows(logits);
    const nn::Var mixed =
        tape.add_rowvec(tape.matmul(tape.matmul(attn, v), P(b + "attn.wo")), P(b + "attn.bo"));
    X = residual_norm(X, mixed, b + "norm1.gamma", b + "norm1.beta");

    const nn::Var ffn = mlp2(X, b + "ffn.w1", b + "ffn.b1", b + "ffn.w2", b + "ffn.b2");
    X = residual_norm(X, ffn, b + "norm2.gamma", b + "norm2.beta");

    // Edge track update from its own state plus the endpoint sum.
    const nn::Var epre = tape.relu(
        tape.add(tape.add_rowvec(tape.matmul(E, P(b + "edge.we1")), P(b + "edge.be1")),
                 tape.matmul(tape.lmul_const(pairsum, X), P(b + "edge.wn1"))));
    const nn::Var eupd = tape.add_rowvec(tape.matmul(epre, P(b + "edge.we2")), P(b + "edge.be2"));
    E = residual_norm(E, eupd, b + "norm3.gamma", b + "norm3.beta");
  }

  net.node_logits = tape.add_rowvec(tape.matmul(X, P("head.node.w")), P("head.node.b"));
  net.edge_logits = tape.add_rowvec(tape.matmul(E, P("head.edge.w")), P("head.edge.b"));
  return net;
}

}  // namespace

diffusion::Predictions forward(const DenoiserParams& params, const diffusion::GraphState& g,
                               std::size_t t, std::size_t T) {
  nn::Tape tape;
  const BuiltNet net = build_net(tape, params, g, t, T, /*dropout_rate=*/0.0, 0);
  diffusion::Predictions pred;
  pred.node_probs = nn::softmax_rows_value(tape.value(net.node_logits));
  pred.edge_probs = nn::softmax_rows_value(tape.value(net.edge_logits));
  return pred;
}

std::pair<double, std::vector<Eigen::MatrixXd>> loss_and_grad(
    const DenoiserParams& params, const std::vector<LossItem>& batch) {
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.values.size());
  for (const auto& v : params.values) grads.push_back(Eigen::MatrixXd::Zero(v.rows(), v.cols()));

  double total = 0.0;
  for (const LossItem& item : batch) {
    if (item.terms.empty()) continue;
    nn::Tape tape;
    const BuiltNet net = build_net(tape, params, item.g_t, item.t, item.T, params.hyper.dropout,
                                   item.dropout_seed);
    nn::Var loss{-1};
    for (const LossTerm& term : item.terms) {
      if (term.node_coeff.rows() != tape.value(net.node_logits).rows() ||
          term.edge_coeff.rows() != tape.value(net.edge_logits).rows())
        throw std::invalid_argument("loss term coefficient rows do not match the graph");
      const nn::Var node_nll = tape.mixture_nll(net.node_logits, term.node_coeff,
                                                term.label + " (nodes)");
      const nn::Var edge_nll = tape.mixture_nll(net.edge_logits, term.edge_coeff,
                                                term.label + " (edges)");
      const nn::Var weighted = tape.scale(tape.add(node_nll, edge_nll), term.weight);
      loss = loss.id < 0 ? weighted : tape.add(loss, weighted);
    }
    tape.backward(loss);
    total += tape.value(loss)(0, 0);
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += tape.grad(net.param_vars[i]);
  }
  if (!std::isfinite(total)) throw std::runtime_error("non-finite loss total");
  return {total, std::move(grads)};
}

Eigen::MatrixX2d one_hot_rows(const std::vector<std::uint8_t>& states) {
  Eigen::MatrixX2d out(Eigen::Index(states.size()), 2);
  for (std::size_t i = 0; i < states.size(); ++i) {
    out(Eigen::Index(i), 0) = states[i] == 0 ? 1.0 : 0.0;
    out(Eigen::Index(i), 1) = states[i] == 0 ? 0.0 : 1.0;
  }
  return out;
}

namespace {
constexpr char kMagic[8] = {'C', 'P', 'P', 'S', 'N', 'E', 'T', '1'};
}

void save_checkpoint(const DenoiserParams& params, const std::string& path) {
  nlohmann::json manifest;
  manifest["hyper"] = {{"hidden", params.hyper.hidden},
                       {"blocks", params.hyper.blocks},
                       {"dropout", params.hyper.dropout}};
  manifest["init_seed"] = params.init_seed;
  manifest["dtype"] = "f64";
  auto& tensors = manifest["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.names.size(); ++i)
    tensors.push_back({{"name", params.names[i]},
                       {"rows", params.values[i].rows()},
                       {"cols", params.values[i].cols()}});
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), std::streamsize(text.size()));
  for (const auto& v : params.values)
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const double x = v(r, c);
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

DenoiserParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), std::streamsize(len));
  if (!in) throw std::runtime_error("truncated checkpoint manifest: " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("bad checkpoint manifest: " + std::string(e.what()));
  }
  DenoiserParams p;
  p.hyper.hidden = manifest.at("hyper").at("hidden").get<std::size_t>();
  p.hyper.blocks = manifest.at("hyper").at("blocks").get<std::size_t>();
  p.hyper.dropout = manifest.at("hyper").at("dropout").get<double>();
  p.init_seed = manifest.at("init_seed").get<std::uint64_t>();

  const auto layout = tensor_layout(p.hyper);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != layout.size())
    throw std::runtime_error("checkpoint tensor count does not match its hyperparameters");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != layout[i].first ||
        t.at("rows").get<Eigen::Index>() != layout[i].second.first ||
        t.at("cols").get<Eigen::Index>() != layout[i].second.second)
      throw std::runtime_error("checkpoint tensor mismatch at " + layout[i].first);
    Eigen::MatrixXd v(layout[i].second.first, layout[i].second.second);
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        double x = 0.0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        v(r, c) = x;
      }
    p.names.push_back(layout[i].first);
    p.values.push_back(std::move(v));
  }
  if (!in) throw std::runtime_error("truncated checkpoint tensors: " + path);
  return p;
}

}  // namespace cpps::denoiser
