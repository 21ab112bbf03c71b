#include "cpps/cyber.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace cpps::cyber {

bool CyberLayer::is_candidate(std::size_t i, std::size_t j) const {
  if (candidate.empty()) return true;
  return candidate[pair_index(i, j, node_count())] != 0;
}

Eigen::MatrixX2d mds_embed(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw std::invalid_argument("distance matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (distances(i, i) != 0.0) throw std::invalid_argument("distance diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (distances(i, j) < 0.0) throw std::invalid_argument("negative distance");
      if (std::abs(distances(i, j) - distances(j, i)) > 1e-12)
        throw std::invalid_argument("distance matrix must be symmetric");
    }
  }

  const Eigen::MatrixXd sq = distances.array().square();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
  const Eigen::MatrixXd gram = -0.5 * centering * sq * centering;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw std::runtime_error("MDS eigensolver failed");

  // Eigenvalues ascend; the top two carry the embedding.
  Eigen::MatrixX2d coords(n, 2);
  for (int k = 0; k < 2; ++k) {
    const Eigen::Index idx = n - 1 - k;
    const double lam = std::max(0.0, solver.eigenvalues()(idx));
    coords.col(k) = solver.eigenvectors().col(idx) * std::sqrt(lam);
  }
  return coords;
}

double path_loss(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db) {
  if (i == j) throw std::invalid_argument("path_loss: i == j");
  const double d = layer.dist(i, j);
  if (d <= 0.0) throw std::invalid_argument("coincident nodes");
  const auto& p = layer.params;
  return p.bpl_d0 + 10.0 * p.gamma * std::log10(d / p.d0) + shadowing_db;
}

double snr(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db) {
  return layer.params.pt_dbm - path_loss(layer, i, j, shadowing_db) - layer.params.pn_dbm;
}

int link_state(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db) {
  if (!layer.is_candidate(i, j)) return 0;
  return path_loss(layer, i, j, shadowing_db) <= layer.params.lambda_c ? 1 : 0;
}

CyberLayer layer_from_grid(const grid::PowerGrid& grid, const PathLossParams& params,
                           double distance_scale) {
  const std::size_t n = grid.node_count();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd sp = Eigen::MatrixXd::Constant(n, n, inf);
  for (std::size_t i = 0; i < n; ++i) sp(i, i) = 0.0;
  for (const auto& e : grid.edges) {
    const double len = distance_scale / std::abs(e.admittance);
    sp(e.i, e.j) = std::min(sp(e.i, e.j), len);
    sp(e.j, e.i) = sp(e.i, e.j);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (sp(i, k) + sp(k, j) < sp(i, j)) sp(i, j) = sp(i, k) + sp(k, j);

  CyberLayer layer;
  layer.params = params;
  layer.coords = mds_embed(sp);
  layer.dist = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (layer.coords.row(i) - layer.coords.row(j)).norm();
      layer.dist(i, j) = layer.dist(j, i) = d;
    }
  layer.candidate.assign(pair_count(n), 1);
  return layer;
}

Eigen::MatrixXd shadow_field(const CyberLayer& layer, std::uint64_t seed) {
  const std::size_t n = layer.node_count();
  Eigen::MatrixXd field = Eigen::MatrixXd::Zero(n, n);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, layer.params.sigma_shadow);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double x = gauss(rng);
      field(i, j) = field(j, i) = x;
    }
  return field;
}

}  // namespace cpps::cyber
