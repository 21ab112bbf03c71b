#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <vector>

#include "cpps/grid.hpp"

namespace cpps::detect {

/// One sensor's detector readings for a timestep: largest absolute power
/// change, gross aggregate change and gross deviation (Eqs. 8-10 style).
struct DetectorVector {
  double x_se = 0.0;
  double x_ga = 0.0;
  double x_gd = 0.0;
};

struct DetectionConfig {
  double lambda_a = 50.0;   // anomaly-score threshold
  std::size_t window_w = 32;  // history window length
  double iqr_floor = 1e-6;  // lower bound on the IQR denominator
};

/// Sliding window of the last W detector vectors for one sensor stream.
/// Median and IQR are recomputed from exactly the current window contents.
class DetectorHistory {
 public:
  explicit DetectorHistory(std::size_t window_w);

  void push(const DetectorVector& x);
  bool empty() const { return window_.empty(); }
  std::size_t size() const { return window_.size(); }
  std::size_t capacity() const { return cap_; }

  DetectorVector median() const;
  DetectorVector iqr() const;

 private:
  std::size_t cap_;
  std::deque<DetectorVector> window_;
};

/// Detector readings of `sensor` between two consecutive snapshots. Power
/// changes are dS_e = V_i*conj(I_e) differences over the sensor's incident
/// edges, currents oriented away from the sensor. A sensor with no incident
/// edges reads all zeros.
DetectorVector detector_vector(std::size_t sensor, const grid::GridSnapshot& prev,
                               const grid::GridSnapshot& curr, const grid::PowerGrid& grid);

/// Standardized infinity-norm score max_c |x_c - med_c| / max(iqr_c, floor);
/// the history is updated with x after scoring. Empty window is an error.
double sensor_anomalousness(DetectorHistory& hist, const DetectorVector& x,
                            const DetectionConfig& cfg);

/// Max sensor-level score over the placed set.
double overall_score(const std::vector<double>& scores, const std::vector<std::size_t>& placed);

/// Fraction of anomaly times whose overall score exceeds lambda_a. Histories
/// are warmed on the timesteps before the first anomaly; every anomaly time
/// must leave room for a full window of prior readings.
double detection_score(const grid::ScenarioSet& scenarios, const std::vector<std::size_t>& placed,
                       const DetectionConfig& cfg, const grid::PowerGrid& grid);

/// Per-sensor anomalousness for every scoreable timestep of a scenario set.
/// Scores do not depend on which sensors are placed, so one table serves
/// every candidate placement.
struct SensorScoreTable {
  std::size_t window_w = 0;
  std::vector<std::size_t> times;        // scored timesteps, ascending
  std::vector<std::uint8_t> is_anomaly;  // per scored timestep
  Eigen::MatrixXd scores;                // times.size() x node_count

  std::size_t anomaly_count() const;
};

SensorScoreTable build_score_table(const grid::ScenarioSet& scenarios,
                                   const grid::PowerGrid& grid, const DetectionConfig& cfg);

/// detection_score replayed from a precomputed table. Empty placements
/// detect nothing and score 0.
double score_from_table(const SensorScoreTable& table, const std::vector<std::size_t>& placed,
                        double lambda_a);

/// Fraction of scored normal timesteps whose overall score exceeds lambda_a
/// (auxiliary reporting; not part of the detection score).
double false_alarm_from_table(const SensorScoreTable& table,
                              const std::vector<std::size_t>& placed, double lambda_a);

}  // namespace cpps::detect
