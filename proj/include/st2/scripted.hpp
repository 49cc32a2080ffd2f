#ifndef ST2_SCRIPTED_HPP
#define ST2_SCRIPTED_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "st2/session_io.hpp"

namespace st2 {

struct ScriptedResult {
  SessionFile session;
  ReportRow row;
  DemoLog demo;
  std::vector<bool> outcomes;
  std::vector<std::pair<long, Eigen::Vector3d>> corrections;  // (tick, wrench) pushed by the supervisor
  std::optional<std::string> error;
};

/// Demonstrates the canonical plan, then runs supervised autonomous trials
/// until one succeeds or max_trials is reached. Simulation errors end the run
/// early and are reported in `error`, never thrown.
ScriptedResult run_scripted(const ExperimentConfig& cfg);

/// Report row for a stored session: the last episode's metrics and the trial score.
ReportRow report_row(const SessionFile& file, const std::string& label);

std::string run_label(const ExperimentConfig& cfg);

/// Newly recorded teaching samples needed to repair a faulty demonstration.
struct CorrectionCost {
  long segmented = 0;   // correction samples recorded during supervised segmented trials
  long monolithic = 0;  // samples of a monolithic re-demonstration from the faulty task to the end
  bool segmented_success = false;
};

/// Runs both repairs for `fault` with the teacher settings of `cfg`.
CorrectionCost correction_cost(const ExperimentConfig& cfg, const DemoFault& fault);

}  // namespace st2

#endif  // ST2_SCRIPTED_HPP
