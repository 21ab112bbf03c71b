#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cpps/grid.hpp"

namespace cpps::cyber {

/// Log-normal shadowing path loss constants plus the link budget.
/// Defaults are the smart-grid substation profile used throughout.
struct PathLossParams {
  double d0 = 1.0;             // reference distance, m
  double bpl_d0 = 40.3308;     // path loss at d0, dB
  double gamma = 1.701;        // path-loss exponent
  double sigma_shadow = 2.18;  // shadowing std, dB
  double pt_dbm = 10.0;        // transmit power
  double pn_dbm = -90.0;       // noise power
  double lambda_c = 75.0;      // path-loss threshold for an active link
};

/// Node positions, pairwise distances and the candidate link set of the
/// communication layer. candidate[pair_index(i,j,n)] marks pairs that may
/// ever carry a link; path loss prunes the rest.
struct CyberLayer {
  Eigen::MatrixX2d coords;  // n x 2, meters
  Eigen::MatrixXd dist;     // symmetric, zero diagonal, meters
  PathLossParams params;
  std::vector<std::uint8_t> candidate;  // flat over unordered pairs, default all 1

  std::size_t node_count() const { return static_cast<std::size_t>(dist.rows()); }
  bool is_candidate(std::size_t i, std::size_t j) const;
};

/// Classical MDS: double-center the squared distances, keep the top-2
/// eigenpairs (negative eigenvalues clamped to 0). Input must be symmetric,
/// non-negative with zero diagonal.
Eigen::MatrixX2d mds_embed(const Eigen::MatrixXd& distances);

/// Eq-style LNSPL: bpl_d0 + 10*gamma*log10(d/d0) + shadowing. The shadowing
/// draw is supplied by the caller so evaluation conditions stay replayable.
double path_loss(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db);

double snr(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db);

/// 1 iff path_loss <= lambda_c and (i,j) is a candidate pair.
int link_state(const CyberLayer& layer, std::size_t i, std::size_t j, double shadowing_db);

/// Builds the layer from grid line admittances: |1/y| * distance_scale as
/// edge length, all-pairs shortest paths, then MDS into 2D; dist is the
/// Euclidean distance of the embedded coordinates.
CyberLayer layer_from_grid(const grid::PowerGrid& grid, const PathLossParams& params,
                           double distance_scale);

/// One seeded shadowing realization per unordered pair: symmetric n x n
/// matrix of N(0, sigma_shadow^2) draws, zero diagonal.
Eigen::MatrixXd shadow_field(const CyberLayer& layer, std::uint64_t seed);

}  // namespace cpps::cyber
