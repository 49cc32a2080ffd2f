#ifndef ST2_SESSION_IO_HPP
#define ST2_SESSION_IO_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "st2/engine.hpp"
#include "st2/metrics.hpp"
#include "st2/teacher_oracle.hpp"

namespace st2 {

constexpr int kFormatVersion = 1;
constexpr const char* kConfigEnvVar = "ST2_CONFIG";

struct ExperimentConfig {
  SessionOptions session;
  WorldConfig world;
  TeacherConfig teacher;
  std::optional<DemoFault> fault;
  int max_trials = 3;
};

struct EpisodeEntry {
  EpisodeResult result;
  EpisodeMetrics metrics;
};

/// End-of-session world state kept for replay verification.
struct FinalState {
  EndEffectorPose ee;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  GripState grip = GripState::Open;
  Eigen::Vector3d joints = Eigen::Vector3d::Zero();
  Carton carton;
  long tick = 0;

  bool operator==(const FinalState&) const = default;
};

struct SessionFile {
  int format_version = kFormatVersion;
  ExperimentConfig config;
  std::vector<InputLogEntry> input_log;
  Dataset dataset;
  FlowTree flow_tree;
  std::vector<EpisodeEntry> episodes;
  FinalState final_state;
};

/// Corrupt, truncated, or incompatible file. `section()` names the offending part.
class SessionLoadError : public std::runtime_error {
 public:
  SessionLoadError(std::string section, const std::string& what)
      : std::runtime_error(section + ": " + what), section_(std::move(section)) {}
  const std::string& section() const { return section_; }

 private:
  std::string section_;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults. Throws std::invalid_argument on bad values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json command_to_json(const Command& c);
Command command_from_json(const nlohmann::json& j);
nlohmann::json teacher_input_to_json(const TeacherInput& in);
TeacherInput teacher_input_from_json(const nlohmann::json& j);
nlohmann::json pose_to_json(const EndEffectorPose& p);
EndEffectorPose pose_from_json(const nlohmann::json& j);
nlohmann::json flow_tree_to_json(const FlowTree& tree);
FlowTree flow_tree_from_json(const nlohmann::json& j);

nlohmann::json session_to_json(const SessionFile& file);
/// Throws SessionLoadError.
SessionFile session_from_json(const nlohmann::json& j);
void save_session(const std::filesystem::path& path, const SessionFile& file);
SessionFile load_session(const std::filesystem::path& path);

FinalState final_state(const SceneState& scene);

/// Snapshot of an engine plus the episodes run on it.
SessionFile capture_session(const Engine& engine, const ExperimentConfig& cfg, std::vector<EpisodeEntry> episodes);

EpisodeEntry measure_episode(const Engine& engine, const EpisodeResult& result);

struct ReplayOutcome {
  SessionFile regenerated;
  std::vector<std::string> mismatches;  // names of sections that differ from the stored file

  bool identical() const { return mismatches.empty(); }
};

/// Re-runs the input log and recomputes every stored artifact.
ReplayOutcome replay_session(const SessionFile& file);

}  // namespace st2

#endif  // ST2_SESSION_IO_HPP
