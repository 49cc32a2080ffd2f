#include "st2/host.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace st2 {

using nlohmann::json;

json event_payload(const Event& e) {
  return {{"kind", to_string(e.kind)}, {"tick", e.tick}, {"segment", e.segment}, {"detail", e.detail}};
}

json state_update_payload(const Engine& engine) {
  const auto& s = engine.session();
  const auto& sc = engine.scene();
  json flags = json::array();
  for (const auto& [code, tick] : sc.report.first_tick) flags.push_back(to_string(code));
  const auto sigma = engine.last_sigma();
  const auto& K = engine.last_stiffness();
  return {{"tick", engine.tick()},
          {"mode", to_string(s.mode)},
          {"framework", to_string(s.options.framework)},
          {"i", s.i},
          {"t", s.t},
          {"segments", s.dataset.size()},
          {"sigma", sigma ? json(*sigma) : json(nullptr)},
          {"K", json::array({K.x(), K.y(), K.z()})},
          {"scene",
           {{"ee", pose_to_json(sc.ee)},
            {"velocity", json::array({sc.ee_velocity.x(), sc.ee_velocity.y(), sc.ee_velocity.z()})},
            {"grip", sc.grip == GripState::Closed ? "closed" : "open"},
            {"joints", json::array({sc.joints.x(), sc.joints.y(), sc.joints.z()})},
            {"carton",
             {{"x", sc.carton.x}, {"z", sc.carton.z}, {"tilt", sc.carton.tilt}, {"status", to_string(sc.carton.status)}}},
            {"flags", flags}}}};
}

SessionHost::SessionHost(ExperimentConfig cfg) : cfg_(std::move(cfg)), engine_(cfg_.session, cfg_.world) {}

void SessionHost::send(MessageKind kind, json payload) { outbox_.push_back({kind, ++seq_, std::move(payload)}); }

void SessionHost::error(const std::string& code, const std::string& message) {
  send(MessageKind::Error, {{"code", code}, {"message", message}});
}

void SessionHost::receive(const Message& m) {
  if (refused_) return;
  if (m.kind == MessageKind::Hello) {
    const json& p = m.payload;
    if (!p.is_object() || !p.contains("version") || !p["version"].is_number_integer() ||
        p["version"].get<int>() != kProtocolVersion) {
      error("version_mismatch", "server speaks protocol version " + std::to_string(kProtocolVersion));
      refused_ = true;
      return;
    }
    greeted_ = true;
    send(MessageKind::Hello, {{"version", kProtocolVersion},
                              {"framework", to_string(cfg_.session.framework)},
                              {"rate_hz", cfg_.world.rate_hz}});
    return;
  }
  if (!greeted_) {
    error("not_greeted", "send hello first");
    return;
  }
  try {
    switch (m.kind) {
      case MessageKind::Command: {
        Command c = command_from_json(m.payload);
        queued_.push_back(c);
        break;
      }
      case MessageKind::TeacherInput:
        input_ = teacher_input_from_json(m.payload);
        break;
      case MessageKind::SnapshotRequest:
        send(MessageKind::Snapshot, session_to_json(snapshot()));
        break;
      default:
        error("unexpected_kind", "clients may not send " + to_string(m.kind));
    }
  } catch (const std::exception& e) {
    error("malformed", e.what());
  }
}

void SessionHost::receive_bytes(std::string_view bytes) {
  decoder_.feed(bytes);
  for (;;) {
    try {
      auto m = decoder_.next();
      if (!m) return;
      receive(*m);
    } catch (const ProtocolError& e) {
      error("malformed", e.what());
    }
  }
}

void SessionHost::advance() {
  for (const auto& c : queued_) {
    try {
      for (const auto& e : engine_.apply(c)) send(MessageKind::Event, event_payload(e));
    } catch (const CommandError& e) {
      error("command_rejected", e.what());
    }
  }
  queued_.clear();
  const TeacherInput in = input_.value_or(TeacherInput{});
  input_.reset();
  for (const auto& e : engine_.step(in)) send(MessageKind::Event, event_payload(e));
  send(MessageKind::StateUpdate, state_update_payload(engine_));
}

std::vector<Message> SessionHost::drain() { return std::exchange(outbox_, {}); }

SessionFile SessionHost::snapshot() const { return capture_session(engine_, cfg_, {}); }

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

int serve(const ExperimentConfig& cfg, const std::string& listen, const std::filesystem::path& session_out,
          std::ostream& log) {
  std::string host = "127.0.0.1";
  std::string port = listen;
  if (const auto colon = listen.rfind(':'); colon != std::string::npos) {
    host = listen.substr(0, colon);
    port = listen.substr(colon + 1);
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(std::stoi(port)));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    log << "bad listen address " << listen << "\n";
    return 2;
  }
  const int server = ::socket(AF_INET, SOCK_STREAM, 0);
  const int one = 1;
  ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(server, 1) != 0) {
    log << "cannot listen on " << listen << ": " << std::strerror(errno) << "\n";
    ::close(server);
    return 1;
  }
  log << "listening on " << host << ":" << port << "\n";

  for (;;) {
    const int client = ::accept(server, nullptr, nullptr);
    if (client < 0) continue;
    SessionHost session(cfg);
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(cfg.world.dt()));
    auto next_tick = std::chrono::steady_clock::now() + period;
    bool open = true;
    while (open && !session.refused()) {
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - std::chrono::steady_clock::now());
      pollfd pfd{client, POLLIN, 0};
      if (::poll(&pfd, 1, static_cast<int>(std::max<long>(0, wait.count()))) > 0) {
        char buf[4096];
        const ssize_t n = ::recv(client, buf, sizeof buf, 0);
        if (n <= 0)
          open = false;
        else
          session.receive_bytes({buf, static_cast<std::size_t>(n)});
      }
      if (!session.greeted()) next_tick = std::chrono::steady_clock::now() + period;
      if (open && session.greeted() && std::chrono::steady_clock::now() >= next_tick) {
        session.advance();
        next_tick += period;
      }
      for (const auto& m : session.drain())
        if (!send_all(client, encode_frame(m))) open = false;
    }
    ::close(client);
    if (session.refused()) {
      log << "refused client with mismatched protocol version\n";
      continue;
    }
    if (session.greeted()) {
      save_session(session_out, session.snapshot());
      log << "session written to " << session_out.string() << "\n";
      break;
    }
  }
  ::close(server);
  return 0;
}

}  // namespace st2
