#include "st2/teaching_flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace st2 {

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const std::array<E, N>& all, const char* what) {
  for (E e : all)
    if (to_string(e) == s) return e;
  throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

}  // namespace

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Demo: return "demo";
    case Mode::Auto: return "auto";
    case Mode::Pause: return "pause";
  }
  return "?";
}

std::string to_string(Framework f) { return f == Framework::Monolithic ? "monolithic" : "st2"; }

std::string to_string(CommandKind k) {
  switch (k) {
    case CommandKind::Auto: return "auto";
    case CommandKind::Demo: return "demo";
    case CommandKind::InsertKP: return "insertKP";
    case CommandKind::Next: return "next";
    case CommandKind::Reset: return "reset";
  }
  return "?";
}

std::string to_string(FlowAction a) {
  switch (a) {
    case FlowAction::Root: return "root";
    case FlowAction::Demonstrate: return "demonstrate";
    case FlowAction::AutoExecute: return "auto_execute";
    case FlowAction::Correction: return "correction";
    case FlowAction::Reset: return "reset";
    case FlowAction::Keypoint: return "keypoint";
  }
  return "?";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::SegmentClosed: return "segment_closed";
    case EventKind::PausedAtKeypoint: return "paused_at_keypoint";
    case EventKind::Stalled: return "stalled";
    case EventKind::DetectorFired: return "detector_fired";
    case EventKind::Retrained: return "retrained";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  return parse_enum(s, std::array{Mode::Demo, Mode::Auto, Mode::Pause}, "mode");
}
Framework framework_from_string(const std::string& s) {
  return parse_enum(s, std::array{Framework::Monolithic, Framework::St2}, "framework");
}
CommandKind command_from_string(const std::string& s) {
  return parse_enum(s,
                    std::array{CommandKind::Auto, CommandKind::Demo, CommandKind::InsertKP, CommandKind::Next,
                               CommandKind::Reset},
                    "command");
}
FlowAction flow_action_from_string(const std::string& s) {
  return parse_enum(s,
                    std::array{FlowAction::Root, FlowAction::Demonstrate, FlowAction::AutoExecute,
                               FlowAction::Correction, FlowAction::Reset, FlowAction::Keypoint},
                    "flow action");
}
EventKind event_kind_from_string(const std::string& s) {
  return parse_enum(s,
                    std::array{EventKind::SegmentClosed, EventKind::PausedAtKeypoint, EventKind::Stalled,
                               EventKind::DetectorFired, EventKind::Retrained},
                    "event");
}

FlowTree::FlowTree() { nodes_.push_back(FlowNode{}); }

std::vector<int> FlowTree::children(int id) const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.parent == id) out.push_back(n.id);
  return out;
}

int FlowTree::open(int parent, FlowAction action, int segment, long tick) {
  FlowNode n;
  n.id = static_cast<int>(nodes_.size());
  n.parent = parent;
  n.action = action;
  n.segment_from = n.segment_to = segment;
  n.tick_from = n.tick_to = tick;
  nodes_.push_back(n);
  current_ = n.id;
  return n.id;
}

void FlowTree::extend(int segment, long tick) {
  auto& n = nodes_[static_cast<std::size_t>(current_)];
  n.segment_to = std::max(n.segment_to, segment);
  n.tick_to = std::max(n.tick_to, tick);
}

FlowTree FlowTree::from_nodes(std::vector<FlowNode> nodes, int current) {
  if (nodes.empty() || nodes.front().action != FlowAction::Root) throw std::invalid_argument("flow tree needs a root");
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].id != static_cast<int>(k)) throw std::invalid_argument("flow tree ids must be dense");
    if (k > 0 && (nodes[k].parent < 0 || nodes[k].parent >= static_cast<int>(k)))
      throw std::invalid_argument("flow tree parent must precede child");
  }
  if (current < 0 || current >= static_cast<int>(nodes.size())) throw std::invalid_argument("flow tree current out of range");
  FlowTree tree;
  tree.nodes_ = std::move(nodes);
  tree.current_ = current;
  return tree;
}

SessionState::SessionState(SessionOptions opts) : options(std::move(opts)) {
  options.kernel.validate();
  options.gains.validate();
  dataset.segments.push_back(Segment{.id = 1, .samples = {}, .corrections = {}});
  tree.open(0, FlowAction::Demonstrate, 1, 0);
}

namespace {

bool reached(const EndEffectorPose& p, const TimedState& end, GripState grip, const TerminationParams& term) {
  return std::hypot(p.x - end.pose.x, p.z - end.pose.z) <= term.eps_pos &&
         std::abs(angle_diff(p.theta, end.pose.theta)) <= term.eps_ang && grip == end.grip;
}

void open_or_extend(FlowTree& tree, FlowAction action, int segment, long tick) {
  if (tree.node(tree.current()).action == action)
    tree.extend(segment, tick);
  else
    tree.open(tree.current(), action, segment, tick);
}

void tick_demo(SessionState& s, const Observation& obs) {
  auto& seg = s.current_segment();
  if (seg.empty() && s.i > 1) {
    const auto& prev = s.dataset.segments[static_cast<std::size_t>(s.i - 2)].samples;
    if (!prev.empty()) seg.append(prev.back().pose, prev.back().grip);  // new segments start at the prior key-point
  }
  seg.append(obs.pose, obs.grip);
  s.t = static_cast<int>(seg.samples.size()) + 1;
  s.dirty.insert(s.i);
  open_or_extend(s.tree, FlowAction::Demonstrate, s.i, obs.tick);
}

void tick_auto(SessionState& s, const Observation& obs, TickResult& out) {
  const auto& term = s.options.termination;
  for (;;) {
    if (s.i > s.trained_segments()) throw CommandError("auto execution of untrained segment " + std::to_string(s.i));
    const auto& seg = s.dataset.segments[static_cast<std::size_t>(s.i - 1)];
    if (s.t > 1 && reached(obs.pose, seg.samples.back(), obs.grip, term)) {
      s.segment_done = true;
      s.correcting = false;
      out.events.push_back({EventKind::PausedAtKeypoint, obs.tick, s.i, {}});
      if (s.run_through && s.i < s.trained_segments()) {
        ++s.i;
        s.t = 1;
        s.segment_done = false;
        s.ticks_in_segment = 0;
        s.stall_ticks = 0;
        continue;
      }
      s.mode = Mode::Pause;
      s.run_through = false;
      auto ev = retrain(s, obs.tick);
      out.events.insert(out.events.end(), ev.begin(), ev.end());
      return;
    }
    break;
  }

  const TimedState query{obs.pose, obs.grip, s.t};
  const Prediction p = predict(*s.policies[static_cast<std::size_t>(s.i - 1)], query);
  s.last_prediction = p;

  auto& seg = s.current_segment();
  if (obs.external_force) {
    if (!s.correcting) {
      seg.corrections.emplace_back();
      s.correcting = true;
      s.tree.open(s.tree.current(), FlowAction::Correction, s.i, obs.tick);
    }
    seg.corrections.back().push_back(query);
    s.dirty.insert(s.i);
  } else if (s.correcting) {
    s.correcting = false;
    s.tree.open(s.tree.current(), FlowAction::AutoExecute, s.i, obs.tick);
  }
  s.tree.extend(s.i, obs.tick);

  s.stall_ticks = (p.sigma >= s.options.gains.sigma_th && obs.speed < term.v_stall) ? s.stall_ticks + 1 : 0;
  ++s.ticks_in_segment;
  const bool timeout = s.ticks_in_segment > 2 * static_cast<int>(seg.samples.size()) + term.t_max;
  if (s.stall_ticks >= term.n_stall || timeout) {
    s.mode = Mode::Pause;
    s.run_through = false;
    s.correcting = false;
    out.stalled = true;
    out.events.push_back({EventKind::Stalled, obs.tick, s.i, timeout ? "timeout" : "uncertainty"});
    auto ev = retrain(s, obs.tick);
    out.events.insert(out.events.end(), ev.begin(), ev.end());
    return;
  }

  ++s.t;
  if (s.options.retrain_mid_episode && !s.dirty.empty()) {
    auto ev = retrain(s, obs.tick);
    out.events.insert(out.events.end(), ev.begin(), ev.end());
  }
  out.prediction = p;
}

std::size_t kept_prefix(const SessionState& s) {
  const auto& seg = s.dataset.segments[static_cast<std::size_t>(s.i - 1)];
  if (!s.last_prediction) return 0;
  const std::size_t idx = s.last_prediction->nearest_index;
  if (idx < seg.samples.size()) return idx + 1;
  const auto& policy = *s.policies[static_cast<std::size_t>(s.i - 1)];
  const int t = policy.inputs[idx].t;
  return static_cast<std::size_t>(std::clamp(t, 1, static_cast<int>(seg.samples.size())));
}

std::vector<Event> command_demo(SessionState& s, const Command& cmd) {
  if (s.mode == Mode::Demo) return {};
  int target = s.i;
  std::size_t keep = 0;
  if (s.segment_done) {
    target = s.i + 1;
  } else if (s.t > 1 && s.i <= s.trained_segments()) {
    keep = kept_prefix(s);
  }
  if (s.options.framework == Framework::Monolithic && target > 1)
    throw CommandError("demo: a monolithic session has a single segment");

  auto& segs = s.dataset.segments;
  bool discards = false;
  for (std::size_t k = static_cast<std::size_t>(target); k < segs.size(); ++k) discards |= !segs[k].empty();
  if (static_cast<std::size_t>(target) <= segs.size()) {
    const auto& seg = segs[static_cast<std::size_t>(target - 1)];
    discards |= seg.samples.size() > keep || !seg.corrections.empty();
  }
  if (discards && !cmd.confirm_overwrite)
    throw CommandError("demo: taking over here overwrites recorded segments; confirm the overwrite");

  if (static_cast<std::size_t>(target) <= segs.size()) {
    auto& seg = segs[static_cast<std::size_t>(target - 1)];
    seg.samples.resize(keep);
    seg.corrections.clear();
    segs.resize(static_cast<std::size_t>(target));
  } else {
    segs.push_back(Segment{.id = target, .samples = {}, .corrections = {}});
  }
  if (s.policies.size() > static_cast<std::size_t>(target - 1)) s.policies.resize(static_cast<std::size_t>(target - 1));
  s.dirty.erase(s.dirty.lower_bound(target), s.dirty.end());
  if (keep > 0) s.dirty.insert(target);

  s.i = target;
  s.t = static_cast<int>(keep) + 1;
  s.mode = Mode::Demo;
  s.segment_done = s.run_through = s.correcting = false;
  s.ticks_in_segment = s.stall_ticks = 0;
  s.last_prediction.reset();
  s.tree.open(s.tree.current(), FlowAction::Demonstrate, target, cmd.tick);
  return {};
}

std::vector<Event> command_insert_kp(SessionState& s, const Command& cmd) {
  if (s.options.framework == Framework::Monolithic) throw CommandError("insertKP: not available in the monolithic framework");
  if (s.mode != Mode::Demo) throw CommandError("insertKP: only valid while demonstrating");
  if (s.current_segment().empty()) throw CommandError("insertKP: current segment has no samples");
  s.dirty.insert(s.i);
  std::vector<Event> out{{EventKind::SegmentClosed, cmd.tick, s.i, {}}};
  s.tree.open(s.tree.current(), FlowAction::Keypoint, s.i, cmd.tick);
  ++s.i;
  s.dataset.segments.push_back(Segment{.id = s.i, .samples = {}, .corrections = {}});
  s.t = 1;
  return out;
}

std::vector<Event> start_auto(SessionState& s, const Command& cmd, bool run_through) {
  const char* name = run_through ? "auto" : "next";
  if (s.mode == Mode::Demo) throw CommandError(std::string(name) + ": finish the demonstration first (insertKP or reset)");
  auto events = retrain(s, cmd.tick);
  int target = s.i;
  bool resume = false;
  if (s.segment_done)
    target = s.i + 1;
  else if (s.t > 1)
    resume = true;
  if (s.trained_segments() == 0) throw CommandError(std::string(name) + ": no trained segments");
  if (target > s.trained_segments()) throw CommandError(std::string(name) + ": no segment beyond the last key-point");
  s.i = target;
  if (!resume) {
    s.t = 1;
    s.ticks_in_segment = 0;
  }
  s.mode = Mode::Auto;
  s.run_through = run_through;
  s.segment_done = s.correcting = false;
  s.stall_ticks = 0;
  open_or_extend(s.tree, FlowAction::AutoExecute, target, cmd.tick);
  return events;
}

std::vector<Event> command_reset(SessionState& s, const Command& cmd) {
  auto& segs = s.dataset.segments;
  while (segs.size() > 1 && segs.back().empty()) segs.pop_back();
  s.mode = Mode::Pause;
  s.i = 1;
  s.t = 1;
  s.segment_done = s.run_through = s.correcting = false;
  s.ticks_in_segment = s.stall_ticks = 0;
  s.last_prediction.reset();
  s.tree.open(0, FlowAction::Reset, 1, cmd.tick);
  return retrain(s, cmd.tick);
}

}  // namespace

TickResult tick(SessionState& session, const Observation& obs) {
  TickResult out;
  switch (session.mode) {
    case Mode::Demo: tick_demo(session, obs); break;
    case Mode::Auto: tick_auto(session, obs, out); break;
    case Mode::Pause: break;
  }
  return out;
}

std::vector<Event> handle_command(SessionState& session, const Command& cmd) {
  switch (cmd.kind) {
    case CommandKind::Demo: return command_demo(session, cmd);
    case CommandKind::InsertKP: return command_insert_kp(session, cmd);
    case CommandKind::Next: return start_auto(session, cmd, false);
    case CommandKind::Auto: return start_auto(session, cmd, true);
    case CommandKind::Reset: return command_reset(session, cmd);
  }
  return {};
}

std::vector<Event> retrain(SessionState& session, long tick) {
  std::size_t trainable = 0;
  while (trainable < session.dataset.segments.size() && !session.dataset.segments[trainable].empty()) ++trainable;
  std::set<int> dirty;
  for (int id : session.dirty)
    if (id >= 1 && static_cast<std::size_t>(id) <= trainable) dirty.insert(id);
  if (dirty.empty() && session.policies.size() == trainable) {
    session.dirty.clear();
    return {};
  }
  session.policies = retrain_dirty(session.dataset, session.policies, dirty, session.options.kernel);
  std::string ids;
  for (int id : dirty) ids += (ids.empty() ? "" : ",") + std::to_string(id);
  session.dirty.clear();
  return {{EventKind::Retrained, tick, 0, ids}};
}

}  // namespace st2
