#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace music::wire {

// ---------------------------------------------------------------------------
// Message types
//
// The wire vocabulary: edge -> cloud KeepAlive / SensorData / ImageData, and
// cloud -> edge Command. Frames are UTF-8 JSON objects, one per line. The
// isData / isImage / keep_alive_status booleans are fixed per message type and
// are produced and consumed by the codec, not stored here.
// ---------------------------------------------------------------------------

struct KeepAliveMsg {
  int battery_life = 0;  // percent, 0..100
  std::string imei;
  std::string ip;  // address as seen by the device; transport address wins for routing
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<std::string> sensors;

  bool operator==(const KeepAliveMsg&) const = default;
};

struct ImageDataMsg {
  std::string imei;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string encoded_image;  // base64

  bool operator==(const ImageDataMsg&) const = default;
};

struct SensorRecord {
  std::string measurement_unit;
  std::string name;
  // Epoch milliseconds. Optional on the wire so legacy records without a
  // timestamp still decode; everything this artifact produces sets it.
  std::optional<std::int64_t> timestamp_ms;
  // Value fields: {"value": v} for scalar sensors, {"x","y","z"} for the
  // accelerometer, {"latitude","longitude"} for GPS fixes. Extra named
  // channels (and the sim's "pad" field) ride along unchanged.
  std::map<std::string, double> values;
  std::optional<std::string> pad;  // size filler, see sim config record_bytes_target

  bool operator==(const SensorRecord&) const = default;
};

struct SensorSession {
  std::string sensor_name;
  std::vector<SensorRecord> records;

  bool operator==(const SensorSession&) const = default;
};

struct SensorDataMsg {
  std::string imei;
  double latitude = 0.0;
  double longitude = 0.0;
  // sensor name -> sessions recorded for that sensor. An empty map is the
  // end-of-send marker.
  std::map<std::string, std::vector<SensorSession>> sensor_data;

  bool operator==(const SensorDataMsg&) const = default;
  bool is_end_marker() const { return sensor_data.empty(); }
};

enum class CommandType { Start, Stop, Send, CaptureImage };

std::string_view to_string(CommandType t);
std::optional<CommandType> command_type_from_string(std::string_view s);

struct SensorStartEntry {
  std::string name;
  double frequency_hz = 0.0;

  bool operator==(const SensorStartEntry&) const = default;
};

struct CommandMsg {
  CommandType type = CommandType::Stop;
  std::vector<SensorStartEntry> sensors;  // START only
  bool compress = false;                  // SEND only; omitted from the frame when false

  bool operator==(const CommandMsg&) const = default;
};

using Message = std::variant<KeepAliveMsg, SensorDataMsg, ImageDataMsg, CommandMsg>;

const std::string& message_imei(const Message& m);  // "" for commands
std::string_view message_kind(const Message& m);    // "keepalive" | "sensor_data" | "image" | "command"

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frame is not valid JSON.
class ParseError : public WireError {
 public:
  using WireError::WireError;
};

// JSON is well-formed but does not match any message schema.
class SchemaError : public WireError {
 public:
  using WireError::WireError;
};

// messageType value outside the supported command set.
class UnsupportedCommandError : public WireError {
 public:
  using WireError::WireError;
};

// A field violates its type invariant (range, emptiness, base64, ordering).
class InvariantError : public WireError {
 public:
  using WireError::WireError;
};

class FrameTooLargeError : public WireError {
 public:
  using WireError::WireError;
};

// ---------------------------------------------------------------------------
// Codec
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;  // 16 MiB

// One newline-terminated frame holding the message's canonical JSON (sorted
// keys, no interior newlines). Throws InvariantError when the message violates
// its type invariants.
std::string encode(const Message& msg);

// Same message wrapped in the DEFLATE envelope:
//   {"compressedPayload":"<base64(deflate(canonical JSON))>"}
// decode() unwraps it transparently.
std::string encode_compressed(const Message& msg);

// Accepts a frame with or without the trailing newline. Unwraps the
// compression envelope, resolves the message kind by discriminator
// (messageType, then keep_alive_status, then isImage, then isData) and
// validates invariants.
Message decode(std::string_view frame);

// Canonical JSON of a single sensor record; the simulator sizes its padding
// against this.
std::string record_json(const SensorRecord& rec);

// ---------------------------------------------------------------------------
// Stream framing
// ---------------------------------------------------------------------------

// Splits a byte stream into newline-terminated frames. Partial trailing data
// is carried between push() calls; the concatenation of all emitted frames
// plus carry() equals the concatenation of all inputs.
class FrameSplitter {
 public:
  explicit FrameSplitter(std::size_t max_frame_bytes = kMaxFrameBytes)
      : cap_(max_frame_bytes) {}

  // Returns the complete frames (each including its trailing newline).
  // Throws FrameTooLargeError once the carried partial frame exceeds the cap.
  std::vector<std::string> push(std::string_view chunk);

  const std::string& carry() const { return carry_; }

 private:
  std::string carry_;
  std::size_t cap_;
};

}  // namespace music::wire
