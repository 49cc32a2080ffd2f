#ifndef ST2_PROTOCOL_HPP
#define ST2_PROTOCOL_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace st2 {

constexpr int kProtocolVersion = 1;

enum class MessageKind { Hello, StateUpdate, Command, TeacherInput, Event, SnapshotRequest, Snapshot, Error };
std::string to_string(MessageKind k);
/// Throws ProtocolError on an unknown kind.
MessageKind message_kind_from_string(const std::string& s);

struct Message {
  MessageKind kind = MessageKind::Hello;
  std::int64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "<byte length>\n<json>" where the json is {"kind", "seq", "payload"}.
std::string encode_frame(const Message& m);

/// Incremental frame reader for one direction of a byte stream.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);

  /// Next complete message, or nullopt when more bytes are needed. Throws
  /// ProtocolError for a malformed frame or a non-increasing seq; the bad frame
  /// is consumed so decoding can continue.
  std::optional<Message> next();

  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
  std::optional<std::int64_t> last_seq_;
};

}  // namespace st2

#endif  // ST2_PROTOCOL_HPP
