#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "st2/host.hpp"
#include "st2/scripted.hpp"

using namespace st2;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("st2_tests_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Message msg(MessageKind kind, std::int64_t seq, json payload = json::object()) { return {kind, seq, std::move(payload)}; }

std::vector<Message> of_kind(const std::vector<Message>& all, MessageKind kind) {
  std::vector<Message> out;
  for (const auto& m : all)
    if (m.kind == kind) out.push_back(m);
  return out;
}

ExperimentConfig quick_config(std::uint64_t seed = 3) {
  ExperimentConfig cfg;
  cfg.teacher.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("frames encode and decode") {
  const Message m = msg(MessageKind::Command, 4, {{"kind", "auto"}});
  const std::string frame = encode_frame(m);
  const auto nl = frame.find('\n');
  REQUIRE(nl != std::string::npos);
  CHECK(std::stoul(frame.substr(0, nl)) == frame.size() - nl - 1);
  const json body = json::parse(frame.substr(nl + 1));
  CHECK(body.at("kind") == "command");
  CHECK(body.at("seq") == 4);

  FrameDecoder dec;
  const std::string two = frame + encode_frame(msg(MessageKind::Hello, 5, {{"version", 1}}));
  for (char c : two) dec.feed(std::string_view(&c, 1));
  const auto a = dec.next();
  const auto b = dec.next();
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->kind == MessageKind::Command);
  CHECK(a->payload == m.payload);
  CHECK(b->kind == MessageKind::Hello);
  CHECK_FALSE(dec.next());
  CHECK(dec.buffered() == 0);
}

TEST_CASE("decoder rejects bad frames and keeps going") {
  SUBCASE("non-increasing seq") {
    FrameDecoder dec;
    dec.feed(encode_frame(msg(MessageKind::Hello, 2)) + encode_frame(msg(MessageKind::Hello, 2)) +
             encode_frame(msg(MessageKind::Hello, 3)));
    CHECK(dec.next());
    CHECK_THROWS_AS(dec.next(), ProtocolError);
    CHECK(dec.next()->seq == 3);
  }
  SUBCASE("unknown kind") {
    FrameDecoder dec;
    const std::string body = R"({"kind":"teleport","seq":1,"payload":{}})";
    dec.feed(std::to_string(body.size()) + "\n" + body + encode_frame(msg(MessageKind::Hello, 2)));
    CHECK_THROWS_AS(dec.next(), ProtocolError);
    CHECK(dec.next()->seq == 2);
  }
  SUBCASE("bad json and bad length") {
    FrameDecoder dec;
    dec.feed("5\n{oops" + std::string("x\n") + encode_frame(msg(MessageKind::Hello, 1)));
    CHECK_THROWS_AS(dec.next(), ProtocolError);
    CHECK_THROWS_AS(dec.next(), ProtocolError);
    CHECK(dec.next()->kind == MessageKind::Hello);
  }
  SUBCASE("header without newline") {
    FrameDecoder dec;
    dec.feed(std::string(40, '9'));
    CHECK_THROWS_AS(dec.next(), ProtocolError);
  }
  CHECK_THROWS_AS(message_kind_from_string("teleport"), ProtocolError);
  for (auto k : {MessageKind::Hello, MessageKind::StateUpdate, MessageKind::Command, MessageKind::TeacherInput,
                 MessageKind::Event, MessageKind::SnapshotRequest, MessageKind::Snapshot, MessageKind::Error})
    CHECK(message_kind_from_string(to_string(k)) == k);
}

TEST_CASE("host streams one state update per tick") {
  SessionHost host(quick_config());
  host.receive(msg(MessageKind::Hello, 1, {{"version", kProtocolVersion}}));
  const auto hello = host.drain();
  REQUIRE(hello.size() == 1);
  CHECK(hello[0].kind == MessageKind::Hello);
  CHECK(hello[0].payload.at("rate_hz") == 20.0);

  const int ticks = static_cast<int>(10.0 * host.engine().world().rate_hz);
  std::vector<Message> out;
  for (int k = 0; k < ticks; ++k) {
    host.advance();
    for (auto& m : host.drain()) out.push_back(std::move(m));
  }
  const auto updates = of_kind(out, MessageKind::StateUpdate);
  CHECK(updates.size() == 200);
  for (std::size_t k = 0; k < updates.size(); ++k) CHECK(updates[k].payload.at("tick") == static_cast<long>(k + 1));
  for (std::size_t k = 1; k < out.size(); ++k) CHECK(out[k].seq > out[k - 1].seq);
  CHECK(hello[0].seq < out.front().seq);
}

TEST_CASE("host applies commands and teacher input at the tick boundary") {
  SessionHost host(quick_config());
  std::int64_t seq = 0;
  host.receive(msg(MessageKind::Hello, ++seq, {{"version", kProtocolVersion}}));
  host.drain();

  const EndEffectorPose start = host.engine().scene().ee;
  const EndEffectorPose target(start.x + 0.01, start.z, start.theta);
  host.receive(msg(MessageKind::TeacherInput, ++seq, teacher_input_to_json({target, std::nullopt, {}})));
  host.advance();
  auto out = host.drain();
  auto upd = of_kind(out, MessageKind::StateUpdate).at(0).payload;
  CHECK(upd.at("mode") == "demo");
  CHECK(upd.at("scene").at("ee").at(0).get<double>() == doctest::Approx(target.x).epsilon(1e-6));

  host.receive(msg(MessageKind::Command, ++seq, command_to_json({CommandKind::InsertKP, 0})));
  host.receive(msg(MessageKind::Command, ++seq, command_to_json({CommandKind::Reset, 0})));
  CHECK(host.engine().session().i == 1);  // queued, not yet applied
  host.advance();
  out = host.drain();
  upd = of_kind(out, MessageKind::StateUpdate).at(0).payload;
  CHECK(upd.at("mode") == "pause");
  CHECK(upd.at("segments") == 1);
  const auto events = of_kind(out, MessageKind::Event);
  REQUIRE(events.size() >= 2);
  CHECK(events[0].payload.at("kind") == "segment_closed");
  CHECK(events[1].payload.at("kind") == "retrained");

  host.receive(msg(MessageKind::Command, ++seq, command_to_json({CommandKind::Demo, 0, true})));
  host.advance();
  CHECK(of_kind(host.drain(), MessageKind::StateUpdate).at(0).payload.at("mode") == "demo");

  host.receive(msg(MessageKind::SnapshotRequest, ++seq));
  const auto snap = of_kind(host.drain(), MessageKind::Snapshot);
  REQUIRE(snap.size() == 1);
  const SessionFile file = session_from_json(snap[0].payload);
  CHECK(file.input_log.size() == 3);
  CHECK(file.flow_tree == host.engine().session().tree);
}

TEST_CASE("monolithic host rejects insertKP and leaves the session unchanged") {
  ExperimentConfig cfg = quick_config();
  cfg.session.framework = Framework::Monolithic;
  SessionHost host(cfg);
  host.receive(msg(MessageKind::Hello, 1, {{"version", kProtocolVersion}}));
  for (int k = 0; k < 5; ++k) host.advance();
  host.drain();
  const json before = session_to_json(host.snapshot());
  const std::size_t nodes_before = host.engine().session().tree.nodes().size();
  host.receive(msg(MessageKind::Command, 2, command_to_json({CommandKind::InsertKP, 0})));
  host.advance();
  const auto out = host.drain();
  const auto errors = of_kind(out, MessageKind::Error);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].payload.at("code") == "command_rejected");
  CHECK(host.engine().session().i == 1);
  CHECK(host.engine().session().dataset.segments.size() == 1);
  const json after = session_to_json(host.snapshot());
  CHECK(host.engine().session().tree.nodes().size() == nodes_before);
  CHECK(after.at("dataset").at("segments").size() == before.at("dataset").at("segments").size());
  CHECK(of_kind(out, MessageKind::StateUpdate).at(0).payload.at("segments") == 1);
}

TEST_CASE("host handshake and malformed input") {
  SUBCASE("version mismatch is refused") {
    SessionHost host(quick_config());
    host.receive(msg(MessageKind::Hello, 1, {{"version", kProtocolVersion + 1}}));
    const auto out = host.drain();
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind == MessageKind::Error);
    CHECK(out[0].payload.at("code") == "version_mismatch");
    CHECK(host.refused());
    CHECK_FALSE(host.greeted());
  }
  SUBCASE("messages before hello") {
    SessionHost host(quick_config());
    host.receive(msg(MessageKind::Command, 1, command_to_json({CommandKind::Reset, 0})));
    const auto out = host.drain();
    REQUIRE(out.size() == 1);
    CHECK(out[0].payload.at("code") == "not_greeted");
  }
  SUBCASE("malformed frames keep the connection usable") {
    SessionHost host(quick_config());
    host.receive_bytes(encode_frame(msg(MessageKind::Hello, 1, {{"version", kProtocolVersion}})));
    host.drain();
    host.receive_bytes("7\n{broken");
    host.receive_bytes(encode_frame(msg(MessageKind::Command, 2, {{"kind", "warp"}})));
    host.receive_bytes(encode_frame(msg(MessageKind::StateUpdate, 3)));
    auto out = host.drain();
    REQUIRE(out.size() == 3);
    CHECK(out[0].payload.at("code") == "malformed");
    CHECK(out[1].payload.at("code") == "malformed");
    CHECK(out[2].payload.at("code") == "unexpected_kind");
    CHECK_FALSE(host.refused());
    host.receive_bytes(encode_frame(msg(MessageKind::SnapshotRequest, 4)));
    out = host.drain();
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind == MessageKind::Snapshot);
  }
}

TEST_CASE("config files are lenient about missing keys and strict about values") {
  const ExperimentConfig defaults;
  const ExperimentConfig partial = config_from_json(json::parse(R"({"framework":"monolithic","max_trials":2})"));
  CHECK(partial.session.framework == Framework::Monolithic);
  CHECK(partial.max_trials == 2);
  CHECK(partial.teacher.seed == defaults.teacher.seed);
  CHECK(config_to_json(config_from_json(config_to_json(partial))) == config_to_json(partial));
  CHECK_THROWS(config_from_json(json::parse(R"({"framework":"spiral"})")));
  CHECK_THROWS(config_from_json(json::parse(R"({"kernel":{"lambda_t":-1}})")));
}

TEST_CASE("session files round trip and replay identically") {
  const fs::path dir = scratch_dir("roundtrip");
  for (auto fw : {Framework::St2, Framework::Monolithic}) {
    ExperimentConfig cfg = quick_config(5);
    cfg.session.framework = fw;
    const ScriptedResult r = run_scripted(cfg);
    REQUIRE_FALSE(r.error);
    const fs::path path = dir / (run_label(cfg) + ".json");
    save_session(path, r.session);
    const SessionFile back = load_session(path);
    CHECK(session_to_json(back) == session_to_json(r.session));
    const ReplayOutcome replay = replay_session(back);
    CHECK(replay.identical());
    CHECK(session_to_json(replay.regenerated) == session_to_json(r.session));
  }
}

TEST_CASE("truncated or tampered session files name the failing section") {
  const fs::path dir = scratch_dir("truncated");
  const ScriptedResult r = run_scripted(quick_config());
  REQUIRE_FALSE(r.error);
  const json full = session_to_json(r.session);
  std::ostringstream text;
  text << full.dump(1);
  const std::string body = text.str();

  const fs::path cut = dir / "cut.json";
  for (const std::string name : {"dataset", "input_log", "final_state"}) {
    std::ofstream(cut) << body.substr(0, body.find("\"" + name + "\"") + name.size() + 40);
    try {
      load_session(cut);
      FAIL("expected a load error");
    } catch (const SessionLoadError& e) {
      CHECK(e.section() == name);
    }
  }

  json missing = full;
  missing.erase("episodes");
  CHECK_THROWS_AS(session_from_json(missing), SessionLoadError);
  try {
    session_from_json(missing);
  } catch (const SessionLoadError& e) {
    CHECK(e.section() == "episodes");
  }

  json future = full;
  future["format_version"] = kFormatVersion + 1;
  try {
    session_from_json(future);
    FAIL("expected a load error");
  } catch (const SessionLoadError& e) {
    CHECK(e.section() == "format_version");
  }

  json tampered = full;
  tampered["final_state"]["tick"] = 1;
  const ReplayOutcome replay = replay_session(session_from_json(tampered));
  CHECK_FALSE(replay.identical());
  CHECK(replay.mismatches == std::vector<std::string>{"final_state"});
  CHECK_THROWS_AS(load_session(dir / "absent.json"), SessionLoadError);
}

TEST_CASE("scripted batch report has one row per run plus aggregates") {
  std::vector<ReportRow> rows;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExperimentConfig cfg = quick_config(seed);
    cfg.teacher.strategy = seed % 2 ? Strategy::EveryWaypoint : Strategy::User03Style;
    const ScriptedResult r = run_scripted(cfg);
    CHECK(r.row.label == run_label(cfg));
    CHECK(r.row.trials == static_cast<int>(r.outcomes.size()));
    CHECK(report_row(r.session, r.row.label).score == r.row.score);
    rows.push_back(r.row);
  }
  std::ostringstream out;
  write_report_csv(out, rows);
  std::istringstream in(out.str());
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 23);
  CHECK(lines[21].rfind("mean,", 0) == 0);
  CHECK(lines[22].rfind("std,", 0) == 0);
}
