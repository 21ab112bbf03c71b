#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cpps::grid {

using Complex = std::complex<double>;

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  Complex admittance;  // per-unit series admittance, nonzero for present edges
};

/// Physical-layer topology. Nodes are densely indexed 0..n-1 after loading;
/// bus_ids keeps the original case numbering for reporting.
struct PowerGrid {
  std::vector<std::uint64_t> bus_ids;
  std::vector<Edge> edges;
  std::vector<Complex> injections;  // per-unit complex injection per node
  std::size_t slack_node = 0;

  std::size_t node_count() const { return bus_ids.size(); }
  /// Edge ids adjacent to each node, in edge-id order.
  std::vector<std::vector<std::size_t>> adjacency() const;
};

/// One solved timestep. edge_current[e] flows from edges[e].i to edges[e].j;
/// the reverse orientation is its negation.
struct GridSnapshot {
  std::size_t t = 0;
  std::vector<Complex> node_voltage;
  std::vector<Complex> edge_current;
  std::vector<Complex> node_injection;  // injections actually used at this step
  std::optional<std::size_t> anomaly_label;  // failed edge id, if any
};

struct ScenarioSet {
  std::vector<GridSnapshot> snapshots;
  std::set<std::size_t> anomaly_times;
  std::uint64_t rng_seed = 0;
};

/// Parses the text case format (BUS / BRANCH records, '#' comments; the first
/// BUS record is the slack node). Bus ids are re-indexed densely from 0 in
/// file order. Rejects self-loops, duplicate unordered pairs, zero admittance
/// and disconnected cases, naming the offending line.
PowerGrid load_case(const std::string& path);

/// Same parser over an in-memory case description.
PowerGrid parse_case(const std::string& text, const std::string& origin = "<memory>");

/// Solves the reduced nodal admittance system with the slack fixed at 1+0j.
/// Throws "islanded grid" if the system is singular (disconnected).
GridSnapshot nodal_solve(const PowerGrid& grid);

/// Kirchhoff current law residual: max over non-slack nodes of
/// |injection - sum of outgoing edge currents|.
double max_kcl_residual(const PowerGrid& grid, const GridSnapshot& snap);

/// Seeded scenario generator. Injections are perturbed per timestep by
/// 1 + Normal(0, load_noise_sigma); at each anomaly time one uniformly chosen
/// non-bridge edge is opened for that timestep and the snapshot labeled.
ScenarioSet generate_scenarios(const PowerGrid& grid, std::size_t steps,
                               const std::set<std::size_t>& anomaly_times,
                               double load_noise_sigma, std::uint64_t rng_seed);

/// True if the graph over edges with nonzero admittance is connected,
/// optionally ignoring one edge id.
bool connected_without(const PowerGrid& grid,
                       std::optional<std::size_t> skip_edge = std::nullopt);

}  // namespace cpps::grid
