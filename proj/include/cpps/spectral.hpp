#pragma once

#include <Eigen/Dense>
#include <utility>

namespace cpps::spectral {

/// Adjacency, degree, combinatorial and normalized Laplacian of one graph.
/// Built once via build_bundle; all downstream spectral quantities read it.
struct GraphMatrixBundle {
  Eigen::MatrixXd adjacency;             // symmetric 0/1, zero diagonal
  Eigen::VectorXd degree;                // row sums of adjacency
  Eigen::MatrixXd laplacian;             // D - A
  Eigen::MatrixXd normalized_laplacian;  // D^{-1/2} (D - A) D^{-1/2}

  Eigen::Index size() const { return adjacency.rows(); }
};

/// Validates that the input is a symmetric 0/1 matrix with zero diagonal and
/// assembles both Laplacians. Isolated nodes get a zero row/column in the
/// normalized form (D^{-1/2} entry treated as 0).
GraphMatrixBundle build_bundle(const Eigen::MatrixXd& adjacency);

/// Second-smallest eigenvalue of the chosen Laplacian. Positive iff the graph
/// is connected. Requires n >= 2.
double fiedler_value(const GraphMatrixBundle& bundle, bool normalized);

/// Exact Cheeger constant (isoperimetric number) by enumerating all proper
/// bipartitions. Exponential in n; restricted to n <= 16. Requires at least
/// one edge. A disconnected graph yields 0.
double cheeger_bruteforce(const GraphMatrixBundle& bundle);

/// Cheeger inequality bracket (lambda2/2, sqrt(2*lambda2)) on the normalized
/// Laplacian.
std::pair<double, double> cheeger_bounds(const GraphMatrixBundle& bundle);

/// lambda2 of the combinatorial Laplacian of an arbitrary symmetric 0/1
/// adjacency. Convenience for reward evaluation; requires n >= 2.
double algebraic_connectivity(const Eigen::MatrixXd& adjacency);

}  // namespace cpps::spectral
