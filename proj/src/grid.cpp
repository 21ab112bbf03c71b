#include "cpps/grid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cpps/rng.hpp"
#include "cpps/util.hpp"

namespace cpps::grid {

std::vector<std::vector<std::size_t>> PowerGrid::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(node_count());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].i].push_back(e);
    adj[edges[e].j].push_back(e);
  }
  return adj;
}

namespace {

[[noreturn]] void parse_error(const std::string& origin, std::size_t line_no,
                              const std::string& what) {
  std::ostringstream os;
  os << origin << ":" << line_no << ": " << what;
  throw std::runtime_error(os.str());
}

}  // namespace

PowerGrid parse_case(const std::string& text, const std::string& origin) {
  PowerGrid grid;
  std::map<std::uint64_t, std::size_t> index_of;  // original bus id -> dense index
  std::set<std::pair<std::size_t, std::size_t>> seen_pairs;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_slack = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;  // blank or comment-only line

    if (kind == "BUS") {
      std::uint64_t id;
      double re, im;
      if (!(ls >> id >> re >> im)) parse_error(origin, line_no, "malformed BUS record");
      if (index_of.count(id)) parse_error(origin, line_no, "duplicate bus id");
      index_of[id] = grid.bus_ids.size();
      grid.bus_ids.push_back(id);
      grid.injections.emplace_back(re, im);
      if (!have_slack) {
        grid.slack_node = index_of[id];
        have_slack = true;
      }
    } else if (kind == "BRANCH") {
      std::uint64_t a, b;
      double re, im;
      if (!(ls >> a >> b >> re >> im)) parse_error(origin, line_no, "malformed BRANCH record");
      if (a == b) parse_error(origin, line_no, "self-loop");
      if (!index_of.count(a) || !index_of.count(b))
        parse_error(origin, line_no, "branch references unknown bus");
      const std::size_t i = index_of[a], j = index_of[b];
      const auto key = std::minmax(i, j);
      if (!seen_pairs.insert(key).second) parse_error(origin, line_no, "duplicate edge");
      const Complex y(re, im);
      if (std::abs(y) <= 0.0) parse_error(origin, line_no, "zero admittance");
      grid.edges.push_back({i, j, y});
    } else {
      parse_error(origin, line_no, "unknown record '" + kind + "'");
    }
  }

  if (grid.bus_ids.empty()) throw std::runtime_error(origin + ": case has no buses");
  if (!connected_without(grid)) throw std::runtime_error(origin + ": disconnected case");
  return grid;
}

PowerGrid load_case(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open case file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_case(buf.str(), path);
}

bool connected_without(const PowerGrid& grid, std::optional<std::size_t> skip_edge) {
  const std::size_t n = grid.node_count();
  UnionFind uf(n);
  for (std::size_t e = 0; e < grid.edges.size(); ++e) {
    if (skip_edge && *skip_edge == e) continue;
    if (std::abs(grid.edges[e].admittance) > 0.0) uf.unite(grid.edges[e].i, grid.edges[e].j);
  }
  return uf.components() == 1;
}

namespace {

GridSnapshot solve_with(const PowerGrid& grid, const std::vector<Complex>& admittances,
                        const std::vector<Complex>& injections, std::size_t t) {
  const std::size_t n = grid.node_count();
  const std::size_t slack = grid.slack_node;

  Eigen::MatrixXcd ybus = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t e = 0; e < grid.edges.size(); ++e) {
    const auto& ed = grid.edges[e];
    const Complex y = admittances[e];
    ybus(ed.i, ed.i) += y;
    ybus(ed.j, ed.j) += y;
    ybus(ed.i, ed.j) -= y;
    ybus(ed.j, ed.i) -= y;
  }

  // Reduced system: drop the slack row/column, move its fixed voltage to the RHS.
  const Complex v_slack(1.0, 0.0);
  const std::size_t m = n - 1;
  Eigen::MatrixXcd reduced(m, m);
  Eigen::VectorXcd rhs(m);
  std::vector<std::size_t> keep;
  keep.reserve(m);
  for (std::size_t i = 0; i < n; ++i)
    if (i != slack) keep.push_back(i);
  for (std::size_t r = 0; r < m; ++r) {
    rhs(r) = injections[keep[r]] - ybus(keep[r], slack) * v_slack;
    for (std::size_t c = 0; c < m; ++c) reduced(r, c) = ybus(keep[r], keep[c]);
  }

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(reduced);
  if (!lu.isInvertible()) throw std::runtime_error("islanded grid");
  const Eigen::VectorXcd v_red = lu.solve(rhs);

  GridSnapshot snap;
  snap.t = t;
  snap.node_voltage.assign(n, v_slack);
  for (std::size_t r = 0; r < m; ++r) snap.node_voltage[keep[r]] = v_red(r);
  snap.edge_current.resize(grid.edges.size());
  for (std::size_t e = 0; e < grid.edges.size(); ++e) {
    const auto& ed = grid.edges[e];
    snap.edge_current[e] =
        admittances[e] * (snap.node_voltage[ed.i] - snap.node_voltage[ed.j]);
  }
  snap.node_injection = injections;
  return snap;
}

std::vector<Complex> edge_admittances(const PowerGrid& grid) {
  std::vector<Complex> y(grid.edges.size());
  for (std::size_t e = 0; e < grid.edges.size(); ++e) y[e] = grid.edges[e].admittance;
  return y;
}

}  // namespace

GridSnapshot nodal_solve(const PowerGrid& grid) {
  return solve_with(grid, edge_admittances(grid), grid.injections, 0);
}

double max_kcl_residual(const PowerGrid& grid, const GridSnapshot& snap) {
  const auto adj = grid.adjacency();
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    if (i == grid.slack_node) continue;
    Complex outgoing(0.0, 0.0);
    for (std::size_t e : adj[i]) {
      const Complex cur = snap.edge_current[e];
      outgoing += (grid.edges[e].i == i) ? cur : -cur;
    }
    worst = std::max(worst, std::abs(snap.node_injection[i] - outgoing));
  }
  return worst;
}

ScenarioSet generate_scenarios(const PowerGrid& grid, std::size_t steps,
                               const std::set<std::size_t>& anomaly_times,
                               double load_noise_sigma, std::uint64_t rng_seed) {
  if (load_noise_sigma < 0.0) throw std::invalid_argument("load_noise_sigma must be >= 0");
  for (std::size_t t : anomaly_times)
    if (t >= steps) throw std::invalid_argument("anomaly time outside scenario horizon");

  // Edges whose single removal keeps the grid connected.
  std::vector<std::size_t> safe_edges;
  for (std::size_t e = 0; e < grid.edges.size(); ++e)
    if (connected_without(grid, e)) safe_edges.push_back(e);
  if (!anomaly_times.empty() && safe_edges.empty())
    throw std::runtime_error("no safe anomaly edge");

  ScenarioSet out;
  out.anomaly_times = anomaly_times;
  out.rng_seed = rng_seed;
  out.snapshots.reserve(steps);

  Rng rng = make_rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto base_y = edge_admittances(grid);

  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Complex> inj(grid.node_count());
    for (std::size_t i = 0; i < grid.node_count(); ++i)
      inj[i] = grid.injections[i] * (1.0 + load_noise_sigma * gauss(rng));

    auto y = base_y;
    std::optional<std::size_t> failed;
    if (anomaly_times.count(t)) {
      std::uniform_int_distribution<std::size_t> pick(0, safe_edges.size() - 1);
      failed = safe_edges[pick(rng)];
      y[*failed] = Complex(0.0, 0.0);
    }

    GridSnapshot snap = solve_with(grid, y, inj, t);
    snap.anomaly_label = failed;
    out.snapshots.push_back(std::move(snap));
  }
  return out;
}

}  // namespace cpps::grid
