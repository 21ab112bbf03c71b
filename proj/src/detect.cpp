#include "cpps/detect.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace cpps::detect {
namespace {

// Type-7 quantile (linear interpolation between order statistics), the
// convention NumPy and R default to.
double quantile(std::vector<double>& v, double p) {
  std::sort(v.begin(), v.end());
  const double h = double(v.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - double(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

DetectorVector componentwise(const std::deque<DetectorVector>& window,
                             double (*stat)(std::vector<double>&)) {
  std::vector<double> se, ga, gd;
  se.reserve(window.size());
  ga.reserve(window.size());
  gd.reserve(window.size());
  for (const auto& x : window) {
    se.push_back(x.x_se);
    ga.push_back(x.x_ga);
    gd.push_back(x.x_gd);
  }
  return {stat(se), stat(ga), stat(gd)};
}

double stat_median(std::vector<double>& v) { return quantile(v, 0.5); }
double stat_iqr(std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

}  // namespace

DetectorHistory::DetectorHistory(std::size_t window_w) : cap_(window_w) {
  if (window_w < 4) throw std::invalid_argument("history window must hold at least 4 entries");
}

void DetectorHistory::push(const DetectorVector& x) {
  window_.push_back(x);
  if (window_.size() > cap_) window_.pop_front();
}

DetectorVector DetectorHistory::median() const {
  if (window_.empty()) throw std::runtime_error("insufficient history");
  return componentwise(window_, &stat_median);
}

DetectorVector DetectorHistory::iqr() const {
  if (window_.empty()) throw std::runtime_error("insufficient history");
  return componentwise(window_, &stat_iqr);
}

DetectorVector detector_vector(std::size_t sensor, const grid::GridSnapshot& prev,
                               const grid::GridSnapshot& curr, const grid::PowerGrid& grid) {
  if (sensor >= grid.node_count()) throw std::invalid_argument("detector_vector: bad sensor id");
  if (prev.t + 1 != curr.t)
    throw std::invalid_argument("detector_vector: snapshots must be consecutive");

  std::vector<grid::Complex> delta;
  for (std::size_t e = 0; e < grid.edges.size(); ++e) {
    const auto& edge = grid.edges[e];
    if (edge.i != sensor && edge.j != sensor) continue;
    const double sign = edge.i == sensor ? 1.0 : -1.0;
    const grid::Complex s_curr =
        curr.node_voltage[sensor] * std::conj(sign * curr.edge_current[e]);
    const grid::Complex s_prev =
        prev.node_voltage[sensor] * std::conj(sign * prev.edge_current[e]);
    delta.push_back(s_curr - s_prev);
  }
  if (delta.empty()) return {};

  DetectorVector out;
  grid::Complex sum = 0.0;
  for (const auto& d : delta) {
    out.x_se = std::max(out.x_se, std::abs(d));
    sum += d;
  }
  out.x_ga = std::abs(sum);
  const grid::Complex mean = sum / double(delta.size());
  for (const auto& d : delta) out.x_gd += std::abs(d - mean);
  return out;
}

double sensor_anomalousness(DetectorHistory& hist, const DetectorVector& x,
                            const DetectionConfig& cfg) {
  if (hist.empty()) throw std::runtime_error("insufficient history");
  const DetectorVector med = hist.median();
  const DetectorVector spread = hist.iqr();
  const double score = std::max(
      {std::abs(x.x_se - med.x_se) / std::max(spread.x_se, cfg.iqr_floor),
       std::abs(x.x_ga - med.x_ga) / std::max(spread.x_ga, cfg.iqr_floor),
       std::abs(x.x_gd - med.x_gd) / std::max(spread.x_gd, cfg.iqr_floor)});
  hist.push(x);
  return score;
}

double overall_score(const std::vector<double>& scores, const std::vector<std::size_t>& placed) {
  if (placed.empty()) throw std::invalid_argument("overall_score: empty sensor set");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i : placed) {
    if (i >= scores.size()) throw std::invalid_argument("overall_score: bad sensor id");
    best = std::max(best, scores[i]);
  }
  return best;
}

namespace {

// Walks the scenario timeline once, scoring the given sensors at every
// timestep with a full history window. detection_score and
// build_score_table share this loop.
struct TimelineScores {
  std::vector<std::size_t> times;
  std::vector<std::uint8_t> is_anomaly;
  std::vector<std::vector<double>> scores;  // per scored time, per walked sensor
};

TimelineScores walk_timeline(const grid::ScenarioSet& scenarios,
                             const std::vector<std::size_t>& sensors,
                             const DetectionConfig& cfg, const grid::PowerGrid& grid) {
  const std::size_t steps = scenarios.snapshots.size();
  if (scenarios.anomaly_times.empty())
    throw std::invalid_argument("scenario set has no anomaly times");
  const std::size_t first_scored = cfg.window_w + 1;  // readings start at t=1
  if (*scenarios.anomaly_times.begin() < first_scored)
    throw std::runtime_error("insufficient warm-up");

  std::vector<DetectorHistory> hist(sensors.size(), DetectorHistory(cfg.window_w));
  TimelineScores out;
  for (std::size_t t = 1; t < steps; ++t) {
    const auto& prev = scenarios.snapshots[t - 1];
    const auto& curr = scenarios.snapshots[t];
    const bool scored = t >= first_scored;
    if (scored) {
      out.times.push_back(t);
      out.is_anomaly.push_back(scenarios.anomaly_times.count(t) ? 1 : 0);
      out.scores.emplace_back();
      out.scores.back().reserve(sensors.size());
    }
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const DetectorVector x = detector_vector(sensors[s], prev, curr, grid);
      if (scored)
        out.scores.back().push_back(sensor_anomalousness(hist[s], x, cfg));
      else
        hist[s].push(x);
    }
  }
  for (std::size_t a : scenarios.anomaly_times)
    if (a >= steps) throw std::invalid_argument("anomaly time beyond scenario length");
  return out;
}

}  // namespace

double detection_score(const grid::ScenarioSet& scenarios, const std::vector<std::size_t>& placed,
                       const DetectionConfig& cfg, const grid::PowerGrid& grid) {
  if (placed.empty()) throw std::invalid_argument("detection_score: empty sensor set");
  const TimelineScores tl = walk_timeline(scenarios, placed, cfg, grid);
  std::size_t hits = 0, total = 0;
  std::vector<std::size_t> all(placed.size());
  for (std::size_t s = 0; s < placed.size(); ++s) all[s] = s;
  for (std::size_t r = 0; r < tl.times.size(); ++r) {
    if (!tl.is_anomaly[r]) continue;
    ++total;
    if (overall_score(tl.scores[r], all) > cfg.lambda_a) ++hits;
  }
  return double(hits) / double(total);
}

std::size_t SensorScoreTable::anomaly_count() const {
  std::size_t c = 0;
  for (auto f : is_anomaly) c += f;
  return c;
}

SensorScoreTable build_score_table(const grid::ScenarioSet& scenarios,
                                   const grid::PowerGrid& grid, const DetectionConfig& cfg) {
  std::vector<std::size_t> all(grid.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const TimelineScores tl = walk_timeline(scenarios, all, cfg, grid);

  SensorScoreTable table;
  table.window_w = cfg.window_w;
  table.times = tl.times;
  table.is_anomaly = tl.is_anomaly;
  table.scores.resize(Eigen::Index(tl.times.size()), Eigen::Index(all.size()));
  for (std::size_t r = 0; r < tl.times.size(); ++r)
    for (std::size_t s = 0; s < all.size(); ++s)
      table.scores(Eigen::Index(r), Eigen::Index(s)) = tl.scores[r][s];
  return table;
}

double score_from_table(const SensorScoreTable& table, const std::vector<std::size_t>& placed,
                        double lambda_a) {
  const std::size_t total = table.anomaly_count();
  if (total == 0) throw std::invalid_argument("score table has no anomaly rows");
  if (placed.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < table.times.size(); ++r) {
    if (!table.is_anomaly[r]) continue;
    double best = 0.0;
    for (std::size_t s : placed) best = std::max(best, table.scores(Eigen::Index(r), Eigen::Index(s)));
    if (best > lambda_a) ++hits;
  }
  return double(hits) / double(total);
}

double false_alarm_from_table(const SensorScoreTable& table,
                              const std::vector<std::size_t>& placed, double lambda_a) {
  std::size_t hits = 0, total = 0;
  for (std::size_t r = 0; r < table.times.size(); ++r) {
    if (table.is_anomaly[r]) continue;
    ++total;
    if (placed.empty()) continue;
    double best = 0.0;
    for (std::size_t s : placed) best = std::max(best, table.scores(Eigen::Index(r), Eigen::Index(s)));
    if (best > lambda_a) ++hits;
  }
  return total == 0 ? 0.0 : double(hits) / double(total);
}

}  // namespace cpps::detect
