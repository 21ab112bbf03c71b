#include "cpps/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpps::spectral {

GraphMatrixBundle build_bundle(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) throw std::invalid_argument("adjacency must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw std::invalid_argument("adjacency has nonzero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0 && a != 1.0) throw std::invalid_argument("adjacency is not 0/1");
      if (a != adjacency(j, i)) throw std::invalid_argument("adjacency is not symmetric");
    }
  }

  GraphMatrixBundle b;
  b.adjacency = adjacency;
  b.degree = adjacency.rowwise().sum();
  b.laplacian = Eigen::MatrixXd(b.degree.asDiagonal()) - adjacency;

  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv_sqrt(i) = b.degree(i) > 0.0 ? 1.0 / std::sqrt(b.degree(i)) : 0.0;
  b.normalized_laplacian =
      inv_sqrt.asDiagonal() * b.laplacian * inv_sqrt.asDiagonal();
  return b;
}

double fiedler_value(const GraphMatrixBundle& bundle, bool normalized) {
  const Eigen::Index n = bundle.size();
  if (n < 2) throw std::invalid_argument("fiedler_value needs at least 2 nodes");
  const Eigen::MatrixXd& m = normalized ? bundle.normalized_laplacian : bundle.laplacian;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return solver.eigenvalues()(1);  // ascending order
}

double cheeger_bruteforce(const GraphMatrixBundle& bundle) {
  const Eigen::Index n = bundle.size();
  if (n > 16) throw std::invalid_argument("too large for exact Cheeger (n > 16)");
  const double total_vol = bundle.degree.sum();
  if (total_vol <= 0.0) throw std::invalid_argument("cheeger_bruteforce: graph has no edges");

  double best = std::numeric_limits<double>::infinity();
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t mask = 1; mask + 1 < limit; ++mask) {
    double vol = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) vol += bundle.degree(i);
    const double min_vol = std::min(vol, total_vol - vol);
    if (min_vol <= 0.0) continue;  // zero-volume side, ratio undefined

    double cut = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      for (Eigen::Index j = 0; j < n; ++j)
        if (!(mask & (1u << j))) cut += bundle.adjacency(i, j);
    }
    best = std::min(best, cut / min_vol);
  }
  return best;
}

std::pair<double, double> cheeger_bounds(const GraphMatrixBundle& bundle) {
  const double l2 = std::max(0.0, fiedler_value(bundle, /*normalized=*/true));
  return {l2 / 2.0, std::sqrt(2.0 * l2)};
}

double algebraic_connectivity(const Eigen::MatrixXd& adjacency) {
  return fiedler_value(build_bundle(adjacency), /*normalized=*/false);
}

}  // namespace cpps::spectral
