#ifndef ST2_METRICS_HPP
#define ST2_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "st2/engine.hpp"

namespace st2 {

/// Metric requested on too little data.
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frobenius norm of M = sum_k j_k j_k^T, where j_k is the 4-point third
/// difference of the rows of `samples` (one row per tick, one column per channel).
template <typename Derived>
typename Derived::Scalar jerk_frobenius(const Eigen::MatrixBase<Derived>& samples, typename Derived::Scalar dt) {
  using Scalar = typename Derived::Scalar;
  if (samples.rows() < 4) throw MetricError("jerk_frobenius: need at least 4 samples");
  if (!(dt > Scalar(0))) throw MetricError("jerk_frobenius: dt must be positive");
  const Eigen::Index n = samples.rows() - 3;
  const Scalar inv = Scalar(1) / (dt * dt * dt);
  const auto J = ((samples.bottomRows(n) - Scalar(3) * samples.middleRows(2, n) + Scalar(3) * samples.middleRows(1, n) -
                   samples.topRows(n)) *
                  inv)
                     .eval();
  return (J.transpose() * J).norm();
}

/// Centered moving average with a shrinking window at the ends.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> moving_average(
    const Eigen::MatrixBase<Derived>& samples, int half_window) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> out(samples.rows(), samples.cols());
  const Eigen::Index n = samples.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, r - half_window);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, r + half_window);
    out.row(r) = samples.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  return out;
}

/// (x, z, theta) per record, theta unwrapped so the heading channel is continuous.
Eigen::MatrixX3d pose_trajectory(const std::vector<TickRecord>& records);
Eigen::MatrixX3d force_trajectory(const std::vector<TickRecord>& records);

struct TrialScore {
  std::optional<int> trials_to_success;
  double score = 0.0;

  bool operator==(const TrialScore&) const = default;
};

/// score = 1/#t for the first success, 0 when all fail. Throws MetricError on an
/// empty list or more than max_trials outcomes.
TrialScore score(const std::vector<bool>& outcomes, int max_trials = 3);

/// Percentage of episodes raising each code; every code is present in the result.
std::map<ErrorCode, double> detector_frequencies(const std::vector<DetectorReport>& batch);

struct EpisodeMetrics {
  double trajectory_jerk = 0.0;
  double torque_jerk = 0.0;
  double execution_time = 0.0;
  bool success = false;
  std::map<ErrorCode, long> detector_counts;

  bool operator==(const EpisodeMetrics&) const = default;
};

/// Metrics over the records of ticks [from, to). Episodes shorter than 4 ticks get zero jerk.
EpisodeMetrics episode_metrics(const std::vector<TickRecord>& records, long from, long to, double dt, bool success,
                               const DetectorReport& report);

/// Graphviz digraph with one node per flow node, in id order.
std::string export_flow_tree(const FlowTree& tree);
/// Inverse of export_flow_tree. Throws std::invalid_argument on malformed text.
FlowTree parse_flow_tree(const std::string& text);

struct ReportRow {
  std::string label;
  std::string framework;
  std::string strategy;
  std::uint64_t seed = 0;
  int trials = 0;
  TrialScore score;
  EpisodeMetrics metrics;
  std::string error;  // empty unless the run aborted
};

/// One row per episode followed by "mean" and "std" rows over the numeric columns.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace st2

#endif  // ST2_METRICS_HPP
