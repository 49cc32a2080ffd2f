#ifndef ST2_TEACHING_FLOW_HPP
#define ST2_TEACHING_FLOW_HPP

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "st2/controller.hpp"
#include "st2/core_model.hpp"
#include "st2/ggp_policy.hpp"

namespace st2 {

enum class Mode { Demo, Auto, Pause };
enum class Framework { Monolithic, St2 };
enum class CommandKind { Auto, Demo, InsertKP, Next, Reset };

std::string to_string(Mode m);
std::string to_string(Framework f);
std::string to_string(CommandKind k);
Mode mode_from_string(const std::string& s);
Framework framework_from_string(const std::string& s);
CommandKind command_from_string(const std::string& s);

struct Command {
  CommandKind kind = CommandKind::Demo;
  long tick = 0;
  /// Required for a demo takeover that would discard recorded segments.
  bool confirm_overwrite = false;

  bool operator==(const Command&) const = default;
};

/// Rejected command or invalid tick request. The session is left unchanged.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FlowAction { Root, Demonstrate, AutoExecute, Correction, Reset, Keypoint };
std::string to_string(FlowAction a);
FlowAction flow_action_from_string(const std::string& s);

struct FlowNode {
  int id = 0;
  int parent = -1;
  FlowAction action = FlowAction::Root;
  int segment_from = 0;
  int segment_to = 0;
  long tick_from = 0;
  long tick_to = 0;

  bool operator==(const FlowNode&) const = default;
};

/// Rooted branching record of a teaching session. Node 0 is the root.
class FlowTree {
 public:
  FlowTree();

  const std::vector<FlowNode>& nodes() const { return nodes_; }
  int current() const { return current_; }
  const FlowNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::vector<int> children(int id) const;

  /// Adds a child of `parent` and makes it current.
  int open(int parent, FlowAction action, int segment, long tick);
  /// Extends the current node to cover `segment` and `tick`.
  void extend(int segment, long tick);

  static FlowTree from_nodes(std::vector<FlowNode> nodes, int current);
  bool operator==(const FlowTree&) const = default;

 private:
  std::vector<FlowNode> nodes_;
  int current_ = 0;
};

/// Option termination beta_i: pose within (eps_pos, eps_ang) of the segment's last sample.
struct TerminationParams {
  double eps_pos = 0.005;
  double eps_ang = 0.05;
  int t_max = 400;  // ticks allowed beyond twice the segment length
  int n_stall = 20;
  double v_stall = 0.005;
};

enum class EventKind { SegmentClosed, PausedAtKeypoint, Stalled, DetectorFired, Retrained };
std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

struct Event {
  EventKind kind = EventKind::SegmentClosed;
  long tick = 0;
  int segment = 0;
  std::string detail;

  bool operator==(const Event&) const = default;
};

struct SessionOptions {
  Framework framework = Framework::St2;
  KernelParams kernel;
  ControllerGains gains;
  TerminationParams termination;
  bool retrain_mid_episode = false;
};

/// What the session observes from the world at the start of a tick.
struct Observation {
  EndEffectorPose pose;
  GripState grip = GripState::Open;
  double speed = 0.0;  // linear end-effector speed, m/s
  bool external_force = false;
  long tick = 0;
};

struct TickResult {
  std::optional<Prediction> prediction;  // set only in auto mode while executing
  std::vector<Event> events;
  bool stalled = false;
};

struct SessionState {
  SessionOptions options;
  Mode mode = Mode::Demo;
  int i = 1;  // current segment, 1-based
  int t = 1;  // next query / sample timestamp
  Dataset dataset;
  PolicySet policies;
  std::set<int> dirty;
  FlowTree tree;
  bool segment_done = false;  // current segment reached its termination condition
  bool run_through = false;   // c_auto: chain segments without pausing
  bool correcting = false;
  int ticks_in_segment = 0;
  int stall_ticks = 0;
  std::optional<Prediction> last_prediction;

  explicit SessionState(SessionOptions opts = {});

  int trained_segments() const { return static_cast<int>(policies.size()); }
  Segment& current_segment() { return dataset.segments.at(static_cast<std::size_t>(i - 1)); }
};

TickResult tick(SessionState& session, const Observation& obs);

/// Applies one of the five teaching commands. Throws CommandError when the
/// command is invalid for the framework or the current state.
std::vector<Event> handle_command(SessionState& session, const Command& cmd);

/// Retrains dirty segments; the result equals retraining everything.
std::vector<Event> retrain(SessionState& session, long tick = 0);

}  // namespace st2

#endif  // ST2_TEACHING_FLOW_HPP
