#ifndef ST2_HOST_HPP
#define ST2_HOST_HPP

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "st2/protocol.hpp"
#include "st2/session_io.hpp"

namespace st2 {

/// One interactive session behind the wire protocol. The caller owns the clock:
/// every advance() is one control tick, so the host runs identically under a
/// simulated or a real-time clock.
class SessionHost {
 public:
  explicit SessionHost(ExperimentConfig cfg);

  /// Inbound message from the client. Commands and teacher inputs are queued
  /// for the next tick boundary; everything else is answered immediately.
  void receive(const Message& m);
  /// Raw stream bytes; framing errors become error messages.
  void receive_bytes(std::string_view bytes);

  /// Applies queued commands, steps one tick, and emits events plus one state_update.
  void advance();

  /// Outbound messages accumulated since the last drain.
  std::vector<Message> drain();

  bool greeted() const { return greeted_; }
  /// Set after a hello with the wrong protocol version; the connection must be closed.
  bool refused() const { return refused_; }

  const Engine& engine() const { return engine_; }
  SessionFile snapshot() const;

 private:
  void send(MessageKind kind, nlohmann::json payload);
  void error(const std::string& code, const std::string& message);

  ExperimentConfig cfg_;
  Engine engine_;
  FrameDecoder decoder_;
  std::vector<Command> queued_;
  std::optional<TeacherInput> input_;
  std::vector<Message> outbox_;
  std::int64_t seq_ = 0;
  bool greeted_ = false;
  bool refused_ = false;
};

nlohmann::json state_update_payload(const Engine& engine);
nlohmann::json event_payload(const Event& e);

/// Serves one client at a time on "host:port" with a real-time tick clock.
/// Writes the session file when a greeted client disconnects, then returns.
int serve(const ExperimentConfig& cfg, const std::string& listen, const std::filesystem::path& session_out,
          std::ostream& log);

}  // namespace st2

#endif  // ST2_HOST_HPP
