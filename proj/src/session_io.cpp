#include "st2/session_io.hpp"

#include <fstream>
#include <sstream>

namespace st2 {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read_vec3(const json& j, const char* key, Eigen::Vector3d& v) {
  if (j.contains(key)) v = vec3_from(j.at(key));
}

json rect(const Rect& r) { return json::array({r.xmin, r.zmin, r.xmax, r.zmax}); }

void read_rect(const json& j, const char* key, Rect& r) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 4) throw std::invalid_argument(std::string(key) + ": expected 4 numbers");
  r = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
}

std::string grip_name(GripState g) { return g == GripState::Closed ? "closed" : "open"; }

GripState grip_from(const std::string& s) {
  if (s == "open") return GripState::Open;
  if (s == "closed") return GripState::Closed;
  throw std::invalid_argument("unknown grip state: " + s);
}

json carton_json(const Carton& c) {
  return {{"x", c.x}, {"z", c.z}, {"tilt", c.tilt}, {"status", to_string(c.status)}};
}

Carton carton_from(const json& j) {
  Carton c;
  read(j, "x", c.x);
  read(j, "z", c.z);
  read(j, "tilt", c.tilt);
  if (j.contains("status")) c.status = carton_status_from_string(j.at("status").get<std::string>());
  return c;
}

json layout_json(const SceneLayout& l) {
  json arm = {{"link_lengths", vec3(l.arm.link_lengths)},
              {"joint_limits", l.arm.joint_limits},
              {"base", json::array({l.arm.base.x(), l.arm.base.y()})}};
  return {{"arm", arm},
          {"table", rect(l.table)},
          {"box_left", rect(l.box_left)},
          {"box_right", rect(l.box_right)},
          {"shelf_plate", rect(l.shelf_plate)},
          {"shelf_panel", rect(l.shelf_panel)},
          {"carton_width", l.carton_width},
          {"carton_height", l.carton_height},
          {"carton_start", carton_json(l.carton_start)},
          {"grasp_depth", l.grasp_depth},
          {"hand_length", l.hand_length},
          {"hand_half_width", l.hand_half_width},
          {"home", pose_to_json(l.home)},
          {"inertia", vec3(l.inertia)},
          {"substeps", l.substeps},
          {"d_near", l.d_near},
          {"v_grasp", l.v_grasp},
          {"grasp_tol_pos", l.grasp_tol_pos},
          {"grasp_tol_ang", l.grasp_tol_ang},
          {"upright_tol", l.upright_tol},
          {"topple_tilt", l.topple_tilt},
          {"max_drop", l.max_drop},
          {"joint_limit_margin", l.joint_limit_margin},
          {"contact_tol", l.contact_tol}};
}

SceneLayout layout_from(const json& j) {
  SceneLayout l;
  if (j.contains("arm")) {
    const json& a = j.at("arm");
    read_vec3(a, "link_lengths", l.arm.link_lengths);
    read(a, "joint_limits", l.arm.joint_limits);
    if (a.contains("base")) l.arm.base = {a.at("base").at(0).get<double>(), a.at("base").at(1).get<double>()};
  }
  read_rect(j, "table", l.table);
  read_rect(j, "box_left", l.box_left);
  read_rect(j, "box_right", l.box_right);
  read_rect(j, "shelf_plate", l.shelf_plate);
  read_rect(j, "shelf_panel", l.shelf_panel);
  read(j, "carton_width", l.carton_width);
  read(j, "carton_height", l.carton_height);
  if (j.contains("carton_start")) l.carton_start = carton_from(j.at("carton_start"));
  read(j, "grasp_depth", l.grasp_depth);
  read(j, "hand_length", l.hand_length);
  read(j, "hand_half_width", l.hand_half_width);
  if (j.contains("home")) l.home = pose_from_json(j.at("home"));
  read_vec3(j, "inertia", l.inertia);
  read(j, "substeps", l.substeps);
  read(j, "d_near", l.d_near);
  read(j, "v_grasp", l.v_grasp);
  read(j, "grasp_tol_pos", l.grasp_tol_pos);
  read(j, "grasp_tol_ang", l.grasp_tol_ang);
  read(j, "upright_tol", l.upright_tol);
  read(j, "topple_tilt", l.topple_tilt);
  read(j, "max_drop", l.max_drop);
  read(j, "joint_limit_margin", l.joint_limit_margin);
  read(j, "contact_tol", l.contact_tol);
  if (l.substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  return l;
}

json samples_json(const std::vector<TimedState>& samples) {
  json out = json::array();
  for (const auto& s : samples)
    out.push_back(json::array({s.pose.x, s.pose.z, s.pose.theta, static_cast<int>(s.grip), s.t}));
  return out;
}

std::vector<TimedState> samples_from(const json& j) {
  std::vector<TimedState> out;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 5) throw std::invalid_argument("sample: expected [x, z, theta, grip, t]");
    TimedState s;
    s.pose.x = row[0].get<double>();
    s.pose.z = row[1].get<double>();
    s.pose.theta = row[2].get<double>();
    const int g = row[3].get<int>();
    if (g != 0 && g != 1) throw std::invalid_argument("sample: grip must be 0 or 1");
    s.grip = static_cast<GripState>(g);
    s.t = row[4].get<int>();
    out.push_back(s);
  }
  return out;
}

json dataset_json(const Dataset& d) {
  json segs = json::array();
  for (const auto& s : d.segments) {
    json corr = json::array();
    for (const auto& run : s.corrections) corr.push_back(samples_json(run));
    segs.push_back({{"id", s.id}, {"samples", samples_json(s.samples)}, {"corrections", corr}});
  }
  return {{"segments", segs}};
}

Dataset dataset_from(const json& j) {
  Dataset d;
  for (const auto& s : j.at("segments")) {
    Segment seg;
    seg.id = s.at("id").get<int>();
    seg.samples = samples_from(s.at("samples"));
    for (const auto& run : s.at("corrections")) seg.corrections.push_back(samples_from(run));
    d.segments.push_back(std::move(seg));
  }
  return d;
}

json report_json(const DetectorReport& r) {
  json out = json::object();
  for (const auto& [code, tick] : r.first_tick) out[to_string(code)] = tick;
  return out;
}

DetectorReport report_from(const json& j) {
  DetectorReport r;
  for (const auto& [key, value] : j.items()) r.raise(error_code_from_string(key), value.get<long>());
  return r;
}

json metrics_json(const EpisodeMetrics& m) {
  json counts = json::object();
  for (const auto& [code, n] : m.detector_counts) counts[to_string(code)] = n;
  return {{"trajectory_jerk", m.trajectory_jerk},
          {"torque_jerk", m.torque_jerk},
          {"execution_time", m.execution_time},
          {"success", m.success},
          {"detector_counts", counts}};
}

EpisodeMetrics metrics_from(const json& j) {
  EpisodeMetrics m;
  m.trajectory_jerk = j.at("trajectory_jerk").get<double>();
  m.torque_jerk = j.at("torque_jerk").get<double>();
  m.execution_time = j.at("execution_time").get<double>();
  m.success = j.at("success").get<bool>();
  for (const auto& [key, value] : j.at("detector_counts").items())
    m.detector_counts[error_code_from_string(key)] = value.get<long>();
  return m;
}

json episode_json(const EpisodeEntry& e) {
  const auto& r = e.result;
  return {{"tick_from", r.tick_from},
          {"tick_to", r.tick_to},
          {"success", r.success},
          {"stalled_segment", r.stalled_segment ? json(*r.stalled_segment) : json(nullptr)},
          {"report", report_json(r.report)},
          {"metrics", metrics_json(e.metrics)}};
}

EpisodeEntry episode_from(const json& j) {
  EpisodeEntry e;
  e.result.tick_from = j.at("tick_from").get<long>();
  e.result.tick_to = j.at("tick_to").get<long>();
  e.result.success = j.at("success").get<bool>();
  if (!j.at("stalled_segment").is_null()) e.result.stalled_segment = j.at("stalled_segment").get<int>();
  e.result.report = report_from(j.at("report"));
  e.metrics = metrics_from(j.at("metrics"));
  return e;
}

json final_json(const FinalState& f) {
  return {{"ee", pose_to_json(f.ee)},       {"velocity", vec3(f.velocity)},  {"grip", grip_name(f.grip)},
          {"joints", vec3(f.joints)},       {"carton", carton_json(f.carton)}, {"tick", f.tick}};
}

FinalState final_from(const json& j) {
  FinalState f;
  f.ee = pose_from_json(j.at("ee"));
  f.velocity = vec3_from(j.at("velocity"));
  f.grip = grip_from(j.at("grip").get<std::string>());
  f.joints = vec3_from(j.at("joints"));
  f.carton = carton_from(j.at("carton"));
  f.tick = j.at("tick").get<long>();
  return f;
}

}  // namespace

json pose_to_json(const EndEffectorPose& p) { return json::array({p.x, p.z, p.theta}); }

EndEffectorPose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("pose: expected [x, z, theta]");
  EndEffectorPose p;
  p.x = j[0].get<double>();
  p.z = j[1].get<double>();
  p.theta = normalize_angle(j[2].get<double>());
  return p;
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.session;
  const auto& k = s.kernel;
  const auto& g = s.gains;
  const auto& t = s.termination;
  const auto& tc = cfg.teacher;
  return {{"framework", to_string(s.framework)},
          {"kernel",
           {{"lambda_p", k.lambda_p},
            {"lambda_theta", k.lambda_theta},
            {"lambda_g", k.lambda_g},
            {"lambda_t", k.lambda_t},
            {"w_p", k.w_p},
            {"w_theta", k.w_theta},
            {"w_g", k.w_g}}},
          {"gains",
           {{"k_max", vec3(g.k_max)},
            {"sigma_th", g.sigma_th},
            {"f_th", g.f_th},
            {"v_max", g.v_max},
            {"w_max", g.w_max},
            {"f_max", g.f_max},
            {"compliant_drag", g.compliant_drag}}},
          {"termination",
           {{"eps_pos", t.eps_pos}, {"eps_ang", t.eps_ang}, {"t_max", t.t_max}, {"n_stall", t.n_stall}, {"v_stall", t.v_stall}}},
          {"retrain_mid_episode", s.retrain_mid_episode},
          {"world", {{"rate_hz", cfg.world.rate_hz}, {"layout", layout_json(cfg.world.layout)}}},
          {"teacher",
           {{"noise_sigma", tc.noise_sigma},
            {"noise_tau", tc.noise_tau},
            {"speed", tc.speed},
            {"angular_speed", tc.angular_speed},
            {"seed", tc.seed},
            {"strategy", to_string(tc.strategy)},
            {"correction",
             {{"delta", tc.correction.delta}, {"gain", tc.correction.gain}, {"max_force", tc.correction.max_force}}}}},
          {"fault", cfg.fault ? json{{"task", cfg.fault->task}, {"offset", cfg.fault->offset}} : json(nullptr)},
          {"max_trials", cfg.max_trials}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig cfg;
  auto& s = cfg.session;
  if (j.contains("framework")) s.framework = framework_from_string(j.at("framework").get<std::string>());
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    read(k, "lambda_p", s.kernel.lambda_p);
    read(k, "lambda_theta", s.kernel.lambda_theta);
    read(k, "lambda_g", s.kernel.lambda_g);
    read(k, "lambda_t", s.kernel.lambda_t);
    read(k, "w_p", s.kernel.w_p);
    read(k, "w_theta", s.kernel.w_theta);
    read(k, "w_g", s.kernel.w_g);
  }
  if (j.contains("gains")) {
    const json& g = j.at("gains");
    read_vec3(g, "k_max", s.gains.k_max);
    read(g, "sigma_th", s.gains.sigma_th);
    read(g, "f_th", s.gains.f_th);
    read(g, "v_max", s.gains.v_max);
    read(g, "w_max", s.gains.w_max);
    read(g, "f_max", s.gains.f_max);
    read(g, "compliant_drag", s.gains.compliant_drag);
  }
  if (j.contains("termination")) {
    const json& t = j.at("termination");
    read(t, "eps_pos", s.termination.eps_pos);
    read(t, "eps_ang", s.termination.eps_ang);
    read(t, "t_max", s.termination.t_max);
    read(t, "n_stall", s.termination.n_stall);
    read(t, "v_stall", s.termination.v_stall);
  }
  read(j, "retrain_mid_episode", s.retrain_mid_episode);
  if (j.contains("world")) {
    const json& w = j.at("world");
    read(w, "rate_hz", cfg.world.rate_hz);
    if (w.contains("layout")) cfg.world.layout = layout_from(w.at("layout"));
  }
  if (j.contains("teacher")) {
    const json& t = j.at("teacher");
    auto& tc = cfg.teacher;
    read(t, "noise_sigma", tc.noise_sigma);
    read(t, "noise_tau", tc.noise_tau);
    read(t, "speed", tc.speed);
    read(t, "angular_speed", tc.angular_speed);
    read(t, "seed", tc.seed);
    if (t.contains("strategy")) tc.strategy = strategy_from_string(t.at("strategy").get<std::string>());
    if (t.contains("correction")) {
      const json& c = t.at("correction");
      read(c, "delta", tc.correction.delta);
      read(c, "gain", tc.correction.gain);
      read(c, "max_force", tc.correction.max_force);
    }
  }
  if (j.contains("fault") && !j.at("fault").is_null()) {
    DemoFault f;
    read(j.at("fault"), "task", f.task);
    read(j.at("fault"), "offset", f.offset);
    if (f.task < 1 || f.task > 10) throw std::invalid_argument("fault task must be in 1..10");
    cfg.fault = f;
  }
  read(j, "max_trials", cfg.max_trials);
  s.kernel.validate();
  s.gains.validate();
  if (!(cfg.world.rate_hz > 0)) throw std::invalid_argument("rate_hz must be positive");
  if (cfg.max_trials < 1) throw std::invalid_argument("max_trials must be >= 1");
  if (cfg.teacher.noise_sigma < 0 || !(cfg.teacher.noise_tau > 0) || !(cfg.teacher.speed > 0) ||
      !(cfg.teacher.angular_speed > 0))
    throw std::invalid_argument("teacher: noise must be >= 0, tau and speeds positive");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  return config_from_json(json::parse(in));
}

json command_to_json(const Command& c) {
  return {{"kind", to_string(c.kind)}, {"tick", c.tick}, {"confirm_overwrite", c.confirm_overwrite}};
}

Command command_from_json(const json& j) {
  Command c;
  c.kind = command_from_string(j.at("kind").get<std::string>());
  read(j, "tick", c.tick);
  read(j, "confirm_overwrite", c.confirm_overwrite);
  return c;
}

json teacher_input_to_json(const TeacherInput& in) {
  return {{"drag", in.drag ? pose_to_json(*in.drag) : json(nullptr)},
          {"grip", in.grip ? json(grip_name(*in.grip)) : json(nullptr)},
          {"wrench", vec3(in.wrench)}};
}

TeacherInput teacher_input_from_json(const json& j) {
  TeacherInput in;
  if (j.contains("drag") && !j.at("drag").is_null()) in.drag = pose_from_json(j.at("drag"));
  if (j.contains("grip") && !j.at("grip").is_null()) in.grip = grip_from(j.at("grip").get<std::string>());
  read_vec3(j, "wrench", in.wrench);
  return in;
}

json flow_tree_to_json(const FlowTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes())
    nodes.push_back({{"id", n.id},
                     {"parent", n.parent},
                     {"action", to_string(n.action)},
                     {"segment_from", n.segment_from},
                     {"segment_to", n.segment_to},
                     {"tick_from", n.tick_from},
                     {"tick_to", n.tick_to}});
  return {{"current", tree.current()}, {"nodes", nodes}};
}

FlowTree flow_tree_from_json(const json& j) {
  std::vector<FlowNode> nodes;
  for (const auto& n : j.at("nodes"))
    nodes.push_back({n.at("id").get<int>(), n.at("parent").get<int>(),
                     flow_action_from_string(n.at("action").get<std::string>()), n.at("segment_from").get<int>(),
                     n.at("segment_to").get<int>(), n.at("tick_from").get<long>(), n.at("tick_to").get<long>()});
  return FlowTree::from_nodes(std::move(nodes), j.at("current").get<int>());
}

json session_to_json(const SessionFile& f) {
  json log = json::array();
  for (const auto& e : f.input_log) {
    json cmds = json::array();
    for (const auto& c : e.commands) cmds.push_back(command_to_json(c));
    json entry = {{"tick", e.tick}, {"commands", cmds}, {"input", teacher_input_to_json(e.input)}};
    if (!e.stepped) entry["stepped"] = false;
    log.push_back(std::move(entry));
  }
  json episodes = json::array();
  for (const auto& e : f.episodes) episodes.push_back(episode_json(e));
  return {{"format_version", f.format_version},
          {"config", config_to_json(f.config)},
          {"input_log", log},
          {"dataset", dataset_json(f.dataset)},
          {"flow_tree", flow_tree_to_json(f.flow_tree)},
          {"episodes", episodes},
          {"final_state", final_json(f.final_state)}};
}

namespace {

template <typename F>
auto section(const json& j, const char* name, F&& parse) {
  if (!j.contains(name)) throw SessionLoadError(name, "missing section");
  try {
    return parse(j.at(name));
  } catch (const SessionLoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw SessionLoadError(name, e.what());
  }
}

}  // namespace

SessionFile session_from_json(const json& j) {
  if (!j.is_object()) throw SessionLoadError("format_version", "not a session object");
  SessionFile f;
  f.format_version = section(j, "format_version", [](const json& v) { return v.get<int>(); });
  if (f.format_version != kFormatVersion)
    throw SessionLoadError("format_version", "unsupported version " + std::to_string(f.format_version));
  f.config = section(j, "config", config_from_json);
  f.input_log = section(j, "input_log", [](const json& v) {
    std::vector<InputLogEntry> log;
    for (const auto& e : v) {
      InputLogEntry entry;
      entry.tick = e.at("tick").get<long>();
      for (const auto& c : e.at("commands")) entry.commands.push_back(command_from_json(c));
      entry.input = teacher_input_from_json(e.at("input"));
      read(e, "stepped", entry.stepped);
      log.push_back(std::move(entry));
    }
    return log;
  });
  f.dataset = section(j, "dataset", dataset_from);
  f.flow_tree = section(j, "flow_tree", flow_tree_from_json);
  f.episodes = section(j, "episodes", [](const json& v) {
    std::vector<EpisodeEntry> out;
    for (const auto& e : v) out.push_back(episode_from(e));
    return out;
  });
  f.final_state = section(j, "final_state", final_from);
  return f;
}

void save_session(const std::filesystem::path& path, const SessionFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << session_to_json(file).dump(1) << "\n";
}

SessionFile load_session(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SessionLoadError("file", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    // a truncated file is blamed on the last section whose key made it to disk
    std::ifstream again(path);
    std::stringstream buf;
    buf << again.rdbuf();
    const std::string text = buf.str();
    std::string last;
    std::size_t last_pos = 0;
    for (const char* name : {"format_version", "config", "input_log", "dataset", "flow_tree", "episodes", "final_state"}) {
      const std::size_t pos = text.find(std::string("\"") + name + "\":");
      if (pos != std::string::npos && (last.empty() || pos > last_pos)) {
        last = name;
        last_pos = pos;
      }
    }
    if (!last.empty()) throw SessionLoadError(last, std::string("truncated or corrupt: ") + e.what());
    throw SessionLoadError("file", e.what());
  }
  return session_from_json(j);
}

FinalState final_state(const SceneState& scene) {
  return {scene.ee, scene.ee_velocity, scene.grip, scene.joints, scene.carton, scene.tick};
}

EpisodeEntry measure_episode(const Engine& engine, const EpisodeResult& result) {
  return {result, episode_metrics(engine.records(), result.tick_from, result.tick_to, engine.world().dt(),
                                  result.success, result.report)};
}

SessionFile capture_session(const Engine& engine, const ExperimentConfig& cfg, std::vector<EpisodeEntry> episodes) {
  SessionFile f;
  f.config = cfg;
  f.config.session = engine.session().options;
  f.config.world = engine.world();
  f.input_log = engine.input_log();
  f.dataset = engine.session().dataset;
  f.flow_tree = engine.session().tree;
  f.episodes = std::move(episodes);
  f.final_state = final_state(engine.scene());
  return f;
}

ReplayOutcome replay_session(const SessionFile& file) {
  Engine engine(file.config.session, file.config.world);
  std::vector<EpisodeEntry> episodes;
  std::size_t next = 0;
  auto close_due = [&] {
    while (next < file.episodes.size() && file.episodes[next].result.tick_to == engine.tick()) {
      episodes.push_back(measure_episode(engine, close_episode(engine, file.episodes[next].result.tick_from)));
      ++next;
    }
  };
  for (const auto& entry : file.input_log) {
    for (const auto& cmd : entry.commands) engine.apply(cmd);
    if (entry.stepped) {
      engine.step(entry.input);
      close_due();
    }
  }

  ReplayOutcome out;
  out.regenerated = capture_session(engine, file.config, std::move(episodes));
  const auto& r = out.regenerated;
  if (r.input_log != file.input_log) out.mismatches.push_back("input_log");
  if (r.dataset != file.dataset) out.mismatches.push_back("dataset");
  if (r.flow_tree != file.flow_tree) out.mismatches.push_back("flow_tree");
  bool same_episodes = r.episodes.size() == file.episodes.size();
  for (std::size_t k = 0; same_episodes && k < r.episodes.size(); ++k) {
    const auto& a = r.episodes[k];
    const auto& b = file.episodes[k];
    same_episodes = a.metrics == b.metrics && a.result.tick_from == b.result.tick_from &&
                    a.result.tick_to == b.result.tick_to && a.result.success == b.result.success &&
                    a.result.stalled_segment == b.result.stalled_segment && a.result.report == b.result.report;
  }
  if (!same_episodes) out.mismatches.push_back("episodes");
  if (!(r.final_state == file.final_state)) out.mismatches.push_back("final_state");
  return out;
}

}  // namespace st2
