#include "st2/protocol.hpp"

#include <array>
#include <charconv>

namespace st2 {

namespace {

constexpr std::array kKinds{MessageKind::Hello,   MessageKind::StateUpdate,     MessageKind::Command,
                            MessageKind::TeacherInput, MessageKind::Event, MessageKind::SnapshotRequest,
                            MessageKind::Snapshot, MessageKind::Error};

constexpr std::size_t kMaxFrame = 64u << 20;

}  // namespace

std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::Hello: return "hello";
    case MessageKind::StateUpdate: return "state_update";
    case MessageKind::Command: return "command";
    case MessageKind::TeacherInput: return "teacher_input";
    case MessageKind::Event: return "event";
    case MessageKind::SnapshotRequest: return "snapshot_request";
    case MessageKind::Snapshot: return "snapshot";
    case MessageKind::Error: return "error";
  }
  return "?";
}

MessageKind message_kind_from_string(const std::string& s) {
  for (auto k : kKinds)
    if (to_string(k) == s) return k;
  throw ProtocolError("unknown message kind: " + s);
}

std::string encode_frame(const Message& m) {
  const std::string body = nlohmann::json{{"kind", to_string(m.kind)}, {"seq", m.seq}, {"payload", m.payload}}.dump();
  return std::to_string(body.size()) + "\n" + body;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Message> FrameDecoder::next() {
  const auto nl = buffer_.find('\n');
  if (nl == std::string::npos) {
    if (buffer_.size() > 20) {
      buffer_.clear();
      throw ProtocolError("frame header too long");
    }
    return std::nullopt;
  }
  std::size_t len = 0;
  const auto [ptr, ec] = std::from_chars(buffer_.data(), buffer_.data() + nl, len);
  if (ec != std::errc{} || ptr != buffer_.data() + nl || nl == 0 || len > kMaxFrame) {
    buffer_.erase(0, nl + 1);
    throw ProtocolError("bad frame length");
  }
  if (buffer_.size() < nl + 1 + len) return std::nullopt;
  const std::string body = buffer_.substr(nl + 1, len);
  buffer_.erase(0, nl + 1 + len);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("malformed json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() || !j.contains("seq") ||
      !j["seq"].is_number_integer())
    throw ProtocolError("message needs a string kind and an integer seq");
  Message m;
  m.kind = message_kind_from_string(j["kind"].get<std::string>());
  m.seq = j["seq"].get<std::int64_t>();
  if (j.contains("payload")) m.payload = j["payload"];
  if (last_seq_ && m.seq <= *last_seq_) throw ProtocolError("seq not increasing: " + std::to_string(m.seq));
  last_seq_ = m.seq;
  return m;
}

}  // namespace st2
