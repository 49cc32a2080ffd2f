#ifndef ST2_ENGINE_HPP
#define ST2_ENGINE_HPP

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "st2/sim_world.hpp"
#include "st2/teaching_flow.hpp"

namespace st2 {

struct WorldConfig {
  SceneLayout layout;
  double rate_hz = 20.0;

  double dt() const { return 1.0 / rate_hz; }
};

/// Teacher input for one tick. In demo mode the compliant arm follows `drag`;
/// in auto mode only `wrench` reaches the robot.
struct TeacherInput {
  std::optional<EndEffectorPose> drag;
  std::optional<GripState> grip;
  Eigen::Vector3d wrench = Eigen::Vector3d::Zero();

  bool operator==(const TeacherInput&) const = default;
};

struct InputLogEntry {
  long tick = 0;
  std::vector<Command> commands;  // applied before the tick
  TeacherInput input;
  bool stepped = true;  // false for commands applied after the last tick

  bool operator==(const InputLogEntry&) const = default;
};

struct TickRecord {
  long tick = 0;
  Mode mode = Mode::Demo;
  int segment = 1;
  int t = 1;
  double sigma = 0.0;
  Eigen::Vector3d stiffness = Eigen::Vector3d::Zero();
  EndEffectorPose ee;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  GripState grip = GripState::Open;
  bool external = false;

  bool operator==(const TickRecord&) const = default;
};

/// Single-threaded tick loop coupling the session machine, the impedance
/// controller and the simulated world. Commands are applied only between ticks.
class Engine {
 public:
  Engine(SessionOptions options, WorldConfig world);

  /// Applies a command at the current tick boundary and logs it. Throws CommandError.
  std::vector<Event> apply(const Command& cmd);
  std::vector<Event> apply(CommandKind kind, bool confirm_overwrite = false);

  /// Advances one control tick.
  std::vector<Event> step(const TeacherInput& input = {});

  const SessionState& session() const { return session_; }
  const SceneState& scene() const { return scene_; }
  const WorldConfig& world() const { return world_; }
  long tick() const { return tick_; }
  /// Every tick's input plus a trailing unstepped entry for commands still pending.
  std::vector<InputLogEntry> input_log() const;
  const std::vector<TickRecord>& records() const { return records_; }
  const std::vector<Event>& events() const { return events_; }
  std::optional<double> last_sigma() const { return last_sigma_; }
  const Eigen::Vector3d& last_stiffness() const { return last_stiffness_; }

 private:
  void hold(const TeacherInput& input, TickRecord& rec);
  void drive(const Prediction& p, const Eigen::Vector3d& wrench, TickRecord& rec);
  void note_detectors(const DetectorReport& before, std::vector<Event>& out);

  SessionState session_;
  WorldConfig world_;
  SceneState scene_;
  long tick_ = 0;
  std::vector<Command> pending_log_;
  std::vector<InputLogEntry> log_;
  std::vector<TickRecord> records_;
  std::vector<Event> events_;
  std::optional<double> last_sigma_;
  Eigen::Vector3d last_stiffness_ = Eigen::Vector3d::Zero();
};

struct EpisodeResult {
  long tick_from = 0;
  long tick_to = 0;  // exclusive
  bool success = false;
  std::optional<int> stalled_segment;
  DetectorReport report;
};

using Supervisor = std::function<TeacherInput(const Engine&)>;

/// Verdict for the episode that started at `tick_from` and ends at the engine's current tick.
EpisodeResult close_episode(const Engine& engine, long tick_from);

/// Reset, then c_auto through every trained segment until the session pauses
/// at the final key-point or stalls. Throws CommandError on an empty dataset.
EpisodeResult run_full_auto(Engine& engine, const Supervisor& supervisor = {}, long max_ticks = 20000);

/// Re-applies an input log to a fresh engine.
Engine replay_log(const SessionOptions& options, const WorldConfig& world, const std::vector<InputLogEntry>& log);

}  // namespace st2

#endif  // ST2_ENGINE_HPP
