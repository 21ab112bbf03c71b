#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// deliberately avoid the library's own code paths (e.g. a Jacobi eigensolver
// instead of Eigen's solver, a hand-rolled union-find) so agreement means
// something.
#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cpps/config.hpp"
#include "cpps/cyber.hpp"
#include "cpps/grid.hpp"
#include "cpps/problem.hpp"
#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace testers {

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi rotation method,
/// ascending. Independent of Eigen's eigensolvers.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-24) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[std::size_t(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Plain union-find, local to the tests.
class Components {
 public:
  explicit Components(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }
  std::size_t count() {
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent_.size(); ++i)
      if (find(i) == i) ++c;
    return c;
  }

 private:
  std::vector<std::size_t> parent_;
};

inline bool adjacency_connected(const Eigen::MatrixXd& adj) {
  Components comp(std::size_t(adj.rows()));
  for (Eigen::Index i = 0; i < adj.rows(); ++i)
    for (Eigen::Index j = i + 1; j < adj.cols(); ++j)
      if (adj(i, j) != 0.0) comp.unite(std::size_t(i), std::size_t(j));
  return comp.count() == 1;
}

/// Random 0/1 adjacency with independent edge probability.
inline Eigen::MatrixXd random_adjacency(std::size_t n, double p, cpps::Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (unit(rng) < p) adj(Eigen::Index(i), Eigen::Index(j)) = adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
  return adj;
}

/// Random connected adjacency: random spanning tree plus extra edges.
inline Eigen::MatrixXd random_connected_adjacency(std::size_t n, double extra_p, cpps::Rng& rng) {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 1; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    const std::size_t a = order[k], b = order[pick(rng)];
    adj(Eigen::Index(a), Eigen::Index(b)) = adj(Eigen::Index(b), Eigen::Index(a)) = 1.0;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (adj(Eigen::Index(i), Eigen::Index(j)) == 0.0 && unit(rng) < extra_p)
        adj(Eigen::Index(i), Eigen::Index(j)) = adj(Eigen::Index(j), Eigen::Index(i)) = 1.0;
  return adj;
}

/// A 6-bus ring-with-chord test grid; every branch sits on a cycle, so any
/// single branch may fail without islanding.
inline std::string small_grid_text() {
  return R"(BUS 1 0.5 0.1
BUS 2 0.9 0.2
BUS 3 -0.6 -0.1
BUS 4 -0.5 -0.15
BUS 5 -0.3 -0.05
BUS 6 0.0 0.0
BRANCH 1 2 3.0 -12.0
BRANCH 2 3 2.5 -10.0
BRANCH 3 4 2.0 -8.0
BRANCH 4 5 3.5 -14.0
BRANCH 5 6 2.2 -9.0
BRANCH 6 1 2.8 -11.0
BRANCH 2 5 1.8 -7.5
)";
}

/// Assembles a complete small ProblemContext (grid, scenarios, cyber layer,
/// score table) for detect/placement/trainer tests.
inline cpps::problem::ProblemContext small_context(std::uint64_t seed, std::size_t steps = 120,
                                                   std::size_t anomalies = 8,
                                                   double noise_sigma = 0.01,
                                                   double distance_scale = 200.0) {
  namespace grid = cpps::grid;
  auto g = grid::parse_case(small_grid_text(), "small-grid");
  cpps::detect::DetectionConfig det;
  det.window_w = 16;
  det.lambda_a = 8.0;
  std::set<std::size_t> times;
  cpps::Rng rng = cpps::make_rng(cpps::derive_seed(seed, "times"));
  std::uniform_int_distribution<std::size_t> pick(det.window_w + 1, steps - 1);
  while (times.size() < anomalies) times.insert(pick(rng));
  auto set = grid::generate_scenarios(g, steps, times, noise_sigma,
                                      cpps::derive_seed(seed, "noise"));
  cpps::cyber::PathLossParams pl;
  auto layer = cpps::cyber::layer_from_grid(g, pl, distance_scale);
  cpps::placement::RewardConfig rw;
  rw.budget = 4;
  rw.lambda_s = 0.5;
  return cpps::problem::make_context(std::move(g), std::move(set), std::move(layer), det, rw);
}

}  // namespace testers
