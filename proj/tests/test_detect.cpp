#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <complex>
#include <random>

#include "cpps/detect.hpp"
#include "cpps/grid.hpp"
#include "cpps/rng.hpp"
#include "helpers.hpp"

using namespace cpps;
using namespace cpps::detect;
using grid::Complex;

namespace {

/// Star grid: node 0 in the middle, k leaves. Snapshots are then filled by
/// hand so the power changes seen by sensor 0 are exactly controlled.
grid::PowerGrid star_grid(std::size_t leaves) {
  grid::PowerGrid g;
  g.bus_ids.resize(leaves + 1);
  g.injections.assign(leaves + 1, Complex(0.0, 0.0));
  g.slack_node = 0;
  for (std::size_t i = 0; i <= leaves; ++i) g.bus_ids[i] = i + 1;
  for (std::size_t leaf = 1; leaf <= leaves; ++leaf)
    g.edges.push_back({0, leaf, Complex(1.0, 0.0)});
  return g;
}

grid::GridSnapshot flat_snapshot(const grid::PowerGrid& g, std::size_t t) {
  grid::GridSnapshot snap;
  snap.t = t;
  snap.node_voltage.assign(g.node_count(), Complex(1.0, 0.0));
  snap.edge_current.assign(g.edges.size(), Complex(0.0, 0.0));
  snap.node_injection.assign(g.node_count(), Complex(0.0, 0.0));
  return snap;
}

/// Snapshot pair that makes sensor 0's per-edge power change equal `deltas`
/// (unit voltage, previous currents zero).
std::pair<grid::GridSnapshot, grid::GridSnapshot> snapshots_with_deltas(
    const grid::PowerGrid& g, const std::vector<Complex>& deltas) {
  auto prev = flat_snapshot(g, 0);
  auto curr = flat_snapshot(g, 1);
  for (std::size_t e = 0; e < deltas.size(); ++e) curr.edge_current[e] = std::conj(deltas[e]);
  return {prev, curr};
}

/// Independent re-evaluation of the three detector formulas.
DetectorVector oracle_detectors(const std::vector<Complex>& deltas) {
  DetectorVector out;
  if (deltas.empty()) return out;
  Complex total(0.0, 0.0);
  for (const auto& d : deltas) total += d;
  out.x_ga = std::abs(total);
  for (const auto& d : deltas) out.x_se = std::max(out.x_se, std::abs(d));
  const Complex mean = total / double(deltas.size());
  for (const auto& d : deltas) out.x_gd += std::abs(d - mean);
  return out;
}

}  // namespace

TEST_CASE("detector_vector worked examples") {
  const auto g = star_grid(2);
  {
    const auto [prev, curr] = snapshots_with_deltas(g, {Complex(0, 0), Complex(0, 0)});
    const auto x = detector_vector(0, prev, curr, g);
    CHECK(x.x_se == 0.0);
    CHECK(x.x_ga == 0.0);
    CHECK(x.x_gd == 0.0);
  }
  {
    // Real changes [3, -1]: x_se=3, x_ga=|2|=2, x_gd=|3-1|+|-1-1|=4.
    const auto [prev, curr] = snapshots_with_deltas(g, {Complex(3, 0), Complex(-1, 0)});
    const auto x = detector_vector(0, prev, curr, g);
    CHECK(x.x_se == doctest::Approx(3.0));
    CHECK(x.x_ga == doctest::Approx(2.0));
    CHECK(x.x_gd == doctest::Approx(4.0));
  }
  {
    // A single edge: the mean equals the sole change, so x_gd = 0.
    const auto one = star_grid(1);
    const auto [prev, curr] = snapshots_with_deltas(one, {Complex(5, 0)});
    const auto x = detector_vector(0, prev, curr, one);
    CHECK(x.x_se == doctest::Approx(5.0));
    CHECK(x.x_ga == doctest::Approx(5.0));
    CHECK(x.x_gd == doctest::Approx(0.0));
  }
}

TEST_CASE("detector_vector matches the oracle on 1000 random delta sets") {
  cpps::Rng rng = make_rng(417);
  std::uniform_int_distribution<std::size_t> edge_count(1, 6);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = edge_count(rng);
    std::vector<Complex> deltas;
    for (std::size_t e = 0; e < k; ++e) deltas.emplace_back(coord(rng), coord(rng));
    const auto g = star_grid(k);
    const auto [prev, curr] = snapshots_with_deltas(g, deltas);
    const auto x = detector_vector(0, prev, curr, g);
    const auto want = oracle_detectors(deltas);
    CHECK(x.x_se == doctest::Approx(want.x_se).epsilon(1e-12));
    CHECK(x.x_ga == doctest::Approx(want.x_ga).epsilon(1e-12));
    CHECK(x.x_gd == doctest::Approx(want.x_gd).epsilon(1e-12));
  }
}

TEST_CASE("detector_vector respects current orientation") {
  // The same physical state must read identically whichever way the branch
  // was recorded. Current away from the sensor is positive.
  grid::PowerGrid fwd = star_grid(1);          // edge (0, 1)
  grid::PowerGrid rev = fwd;
  rev.edges[0] = {1, 0, Complex(1.0, 0.0)};    // edge (1, 0)

  auto prev_f = flat_snapshot(fwd, 0);
  auto curr_f = flat_snapshot(fwd, 1);
  curr_f.edge_current[0] = Complex(2.0, 1.0);
  auto prev_r = prev_f;
  auto curr_r = curr_f;
  curr_r.edge_current[0] = -curr_f.edge_current[0];  // same flow, flipped storage

  const auto xf = detector_vector(0, prev_f, curr_f, fwd);
  const auto xr = detector_vector(0, prev_r, curr_r, rev);
  CHECK(xf.x_se == doctest::Approx(xr.x_se));
  CHECK(xf.x_ga == doctest::Approx(xr.x_ga));
  CHECK(xf.x_gd == doctest::Approx(xr.x_gd));
}

TEST_CASE("detector_vector degenerate and error cases") {
  // Isolated sensor: all-zero reading, not an error.
  grid::PowerGrid g = star_grid(1);
  g.bus_ids.push_back(99);
  g.injections.emplace_back(0.0, 0.0);
  auto prev = flat_snapshot(g, 0);
  auto curr = flat_snapshot(g, 1);
  const auto x = detector_vector(2, prev, curr, g);
  CHECK(x.x_se == 0.0);
  CHECK(x.x_ga == 0.0);
  CHECK(x.x_gd == 0.0);

  CHECK_THROWS(detector_vector(7, prev, curr, g));        // unknown sensor
  auto later = flat_snapshot(g, 5);
  CHECK_THROWS(detector_vector(0, prev, later, g));       // non-consecutive
}

TEST_CASE("detector components are positively homogeneous in the power scale") {
  const auto g = star_grid(3);
  const std::vector<Complex> deltas{{1.5, -0.4}, {0.2, 0.9}, {-1.1, 0.3}};
  const auto [prev, curr] = snapshots_with_deltas(g, deltas);
  auto curr2 = curr;
  for (auto& c : curr2.edge_current) c *= 2.0;
  const auto x1 = detector_vector(0, prev, curr, g);
  const auto x2 = detector_vector(0, prev, curr2, g);
  CHECK(x2.x_se == doctest::Approx(2.0 * x1.x_se));
  CHECK(x2.x_ga == doctest::Approx(2.0 * x1.x_ga));
  CHECK(x2.x_gd == doctest::Approx(2.0 * x1.x_gd));
}

TEST_CASE("DetectorHistory median and IQR use type-7 quantiles") {
  DetectorHistory hist(4);
  CHECK_THROWS_WITH(hist.median(), doctest::Contains("insufficient history"));
  for (double v : {1.0, 2.0, 3.0, 4.0}) hist.push({v, 10.0 * v, 0.0});
  CHECK(hist.median().x_se == doctest::Approx(2.5));
  CHECK(hist.median().x_ga == doctest::Approx(25.0));
  CHECK(hist.iqr().x_se == doctest::Approx(1.5));   // 3.25 - 1.75
  CHECK(hist.iqr().x_ga == doctest::Approx(15.0));
  CHECK(hist.iqr().x_gd == doctest::Approx(0.0));

  // Capacity: a fifth push evicts the oldest value.
  hist.push({5.0, 50.0, 0.0});
  CHECK(hist.size() == 4);
  CHECK(hist.median().x_se == doctest::Approx(3.5));

  CHECK_THROWS(DetectorHistory(3));  // window floor
}

TEST_CASE("sensor_anomalousness worked examples") {
  DetectionConfig cfg;
  cfg.iqr_floor = 1e-6;

  DetectorHistory hist(4);
  for (double v : {2.0, 2.0, 4.0, 4.0}) hist.push({v, 0.0, 0.0});
  // med 3, iqr 2 on the first component; deviation 2 -> score 1.
  CHECK(sensor_anomalousness(hist, {5.0, 0.0, 0.0}, cfg) == doctest::Approx(1.0));

  DetectorHistory flat(4);
  for (int i = 0; i < 4; ++i) flat.push({3.0, 3.0, 3.0});
  // x equals the median exactly -> 0.
  CHECK(sensor_anomalousness(flat, {3.0, 3.0, 3.0}, cfg) == doctest::Approx(0.0));
  // Constant history has IQR 0: the floor keeps the score finite.
  CHECK(sensor_anomalousness(flat, {4.0, 3.0, 3.0}, cfg) == doctest::Approx(1e6));

  DetectorHistory empty(4);
  CHECK_THROWS_WITH(sensor_anomalousness(empty, {1.0, 1.0, 1.0}, cfg),
                    doctest::Contains("insufficient history"));
}

TEST_CASE("sensor_anomalousness pushes after scoring") {
  DetectionConfig cfg;
  DetectorHistory hist(8);
  for (double v : {1.0, 1.0, 1.0, 1.0}) hist.push({v, 0.0, 0.0});
  const double spike = sensor_anomalousness(hist, {100.0, 0.0, 0.0}, cfg);
  CHECK(spike > 1.0);
  CHECK(hist.size() == 5);  // the spike entered the window after scoring
  CHECK(hist.median().x_se == doctest::Approx(1.0));
}

TEST_CASE("overall_score restricts the max to placed sensors") {
  const std::vector<double> scores{2.0, 7.0, 1.0};
  CHECK(overall_score(scores, {0, 1, 2}) == 7.0);
  CHECK(overall_score(scores, {1}) == 7.0);
  CHECK(overall_score(scores, {0, 2}) == 2.0);
  CHECK_THROWS(overall_score(scores, {}));
  CHECK_THROWS(overall_score(scores, {9}));
}

TEST_CASE("detection_score equals the table replay and stays within [0,1]") {
  const auto ctx = testers::small_context(21);
  const auto& set = ctx.scenarios;
  const auto& g = ctx.grid;
  DetectionConfig cfg = ctx.detect_cfg;

  cpps::Rng rng = make_rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::size_t> placed;
    for (std::size_t i = 0; i < g.node_count(); ++i)
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.5) placed.push_back(i);
    if (placed.empty()) placed.push_back(0);
    const double direct = detection_score(set, placed, cfg, g);
    const double replay = score_from_table(ctx.score_table, placed, cfg.lambda_a);
    CHECK(direct == doctest::Approx(replay).epsilon(1e-12));
    CHECK(direct >= 0.0);
    CHECK(direct <= 1.0);
  }

  // An absurd threshold detects nothing.
  CHECK(detection_score(set, {0, 1, 2}, DetectionConfig{1e12, cfg.window_w, cfg.iqr_floor}, g) ==
        0.0);
  CHECK_THROWS(detection_score(set, {}, cfg, g));
}

TEST_CASE("anomalies inside the warm-up window are rejected") {
  const auto g = grid::parse_case(testers::small_grid_text(), "small");
  DetectionConfig cfg;
  cfg.window_w = 16;
  const auto set = grid::generate_scenarios(g, 40, {5}, 0.01, 3);  // 5 < 17
  CHECK_THROWS_WITH(detection_score(set, {0, 1}, cfg, g), doctest::Contains("insufficient warm-up"));
}

TEST_CASE("detection score is monotone under sensor-set inclusion") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto ctx = testers::small_context(seed, 80, 4);
    cpps::Rng rng = make_rng(derive_seed(seed, "subset"));
    std::vector<std::size_t> small, big;
    for (std::size_t i = 0; i < ctx.node_count(); ++i) {
      const double u = std::uniform_real_distribution<double>(0, 1)(rng);
      if (u < 0.3) small.push_back(i);
      if (u < 0.7) big.push_back(i);  // superset of `small` by construction
    }
    const double s_small = score_from_table(ctx.score_table, small, ctx.detect_cfg.lambda_a);
    const double s_big = score_from_table(ctx.score_table, big, ctx.detect_cfg.lambda_a);
    CHECK(s_small <= s_big + 1e-12);
  }
}

TEST_CASE("score table shape and false alarm accounting") {
  const auto ctx = testers::small_context(9, 100, 6);
  const auto& tab = ctx.score_table;
  CHECK(tab.times.size() == 100 - (tab.window_w + 1));
  CHECK(tab.anomaly_count() == 6);
  CHECK(std::size_t(tab.scores.cols()) == ctx.node_count());
  CHECK(std::size_t(tab.scores.rows()) == tab.times.size());

  std::vector<std::size_t> all(ctx.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double fa = false_alarm_from_table(tab, all, ctx.detect_cfg.lambda_a);
  CHECK(fa >= 0.0);
  CHECK(fa <= 1.0);
  CHECK(false_alarm_from_table(tab, {}, ctx.detect_cfg.lambda_a) == 0.0);
  CHECK(score_from_table(tab, {}, ctx.detect_cfg.lambda_a) == 0.0);
}
