#include "st2/engine.hpp"

#include <cmath>

namespace st2 {

Engine::Engine(SessionOptions options, WorldConfig world)
    : session_(std::move(options)), world_(std::move(world)), scene_(initial_scene(world_.layout)) {}

std::vector<Event> Engine::apply(const Command& cmd) {
  Command stamped = cmd;
  stamped.tick = tick_;
  auto events = handle_command(session_, stamped);
  if (cmd.kind == CommandKind::Reset) {
    scene_ = initial_scene(world_.layout);
    last_sigma_.reset();
  }
  pending_log_.push_back(stamped);
  events_.insert(events_.end(), events.begin(), events.end());
  return events;
}

std::vector<InputLogEntry> Engine::input_log() const {
  std::vector<InputLogEntry> out = log_;
  if (!pending_log_.empty()) out.push_back({tick_, pending_log_, {}, false});
  return out;
}

std::vector<Event> Engine::apply(CommandKind kind, bool confirm_overwrite) {
  return apply(Command{.kind = kind, .tick = tick_, .confirm_overwrite = confirm_overwrite});
}

void Engine::note_detectors(const DetectorReport& before, std::vector<Event>& out) {
  for (const auto& [code, first] : scene_.report.first_tick)
    if (!before.has(code)) out.push_back({EventKind::DetectorFired, tick_, session_.i, to_string(code)});
}

void Engine::hold(const TeacherInput& input, TickRecord& rec) {
  if (session_.mode == Mode::Demo && input.grip) scene_ = apply_grip(scene_, *input.grip, world_.layout);
  const EndEffectorPose target = session_.mode == Mode::Demo && input.drag ? *input.drag : scene_.ee;
  scene_ = drag_step(scene_, target, world_.dt(), world_.layout);
  rec.stiffness.setZero();
}

void Engine::drive(const Prediction& p, const Eigen::Vector3d& wrench, TickRecord& rec) {
  const double speed = std::hypot(scene_.ee_velocity.x(), scene_.ee_velocity.y());
  if (p.mean.grip != scene_.grip && speed <= world_.layout.v_grasp) scene_ = apply_grip(scene_, p.mean.grip, world_.layout);
  const ImpedanceState imp = active_impedance(p.sigma, session_.options.gains);
  const auto& gains = session_.options.gains;
  ControlCommand cmd;
  const ControlLaw law = [&](const SceneState& s) {
    cmd = control_step(s.ee, s.ee_velocity, p.mean.pose, imp.K, imp.D, gains);
    return cmd;
  };
  scene_ = st2::step(scene_, law, wrench, world_.dt(), world_.layout, gains);
  rec.sigma = p.sigma;
  rec.stiffness = imp.K;
  rec.force = cmd.force;
  last_sigma_ = p.sigma;
  last_stiffness_ = imp.K;
}

std::vector<Event> Engine::step(const TeacherInput& input) {
  log_.push_back({tick_, std::move(pending_log_), input});
  pending_log_.clear();

  scene_.tick = tick_;
  const DetectorReport before = scene_.report;
  std::vector<Event> out;
  TickRecord rec;
  rec.tick = tick_;
  rec.mode = session_.mode;

  if (session_.mode == Mode::Auto) {
    const bool external = detect_external_force(input.wrench, session_.options.gains);
    rec.external = external;
    const Observation obs{scene_.ee, scene_.grip, std::hypot(scene_.ee_velocity.x(), scene_.ee_velocity.y()), external,
                          tick_};
    rec.segment = session_.i;
    rec.t = session_.t;
    TickResult res = st2::tick(session_, obs);
    out = std::move(res.events);
    if (res.prediction)
      drive(*res.prediction, input.wrench, rec);
    else
      hold(input, rec);
  } else if (session_.mode == Mode::Demo) {
    hold(input, rec);
    const Observation obs{scene_.ee, scene_.grip, std::hypot(scene_.ee_velocity.x(), scene_.ee_velocity.y()), false,
                          tick_};
    rec.segment = session_.i;
    rec.t = session_.t;
    TickResult res = st2::tick(session_, obs);
    out = std::move(res.events);
  } else {
    hold(input, rec);
    rec.segment = session_.i;
    rec.t = session_.t;
  }

  rec.ee = scene_.ee;
  rec.velocity = scene_.ee_velocity;
  rec.grip = scene_.grip;
  note_detectors(before, out);
  records_.push_back(rec);
  events_.insert(events_.end(), out.begin(), out.end());
  ++tick_;
  return out;
}

EpisodeResult run_full_auto(Engine& engine, const Supervisor& supervisor, long max_ticks) {
  engine.apply(CommandKind::Reset);
  engine.apply(CommandKind::Auto);
  const long from = engine.tick();
  for (long k = 0; k < max_ticks && engine.session().mode == Mode::Auto; ++k)
    engine.step(supervisor ? supervisor(engine) : TeacherInput{});
  return close_episode(engine, from);
}

EpisodeResult close_episode(const Engine& engine, long tick_from) {
  EpisodeResult res;
  res.tick_from = tick_from;
  res.tick_to = engine.tick();
  for (const auto& e : engine.events())
    if (e.kind == EventKind::Stalled && e.tick >= tick_from && !res.stalled_segment) res.stalled_segment = e.segment;
  if (engine.session().mode == Mode::Auto && !res.stalled_segment) res.stalled_segment = engine.session().i;
  const auto verdict = evaluate_success(engine.scene(), engine.world().layout);
  res.success = verdict.success && !res.stalled_segment;
  res.report = verdict.report;
  return res;
}

Engine replay_log(const SessionOptions& options, const WorldConfig& world, const std::vector<InputLogEntry>& log) {
  Engine engine(options, world);
  for (const auto& entry : log) {
    for (const auto& cmd : entry.commands) engine.apply(cmd);
    if (entry.stepped) engine.step(entry.input);
  }
  return engine;
}

}  // namespace st2
