#include "music/wire.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "music/base64.hpp"
#include "music/compress.hpp"

namespace music::wire {

using nlohmann::json;

namespace {

constexpr const char* kCompressedKey = "compressedPayload";

[[noreturn]] void schema_fail(const std::string& what) { throw SchemaError("schema error: " + what); }
[[noreturn]] void invariant_fail(const std::string& what) {
  throw InvariantError("invariant violation: " + what);
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) schema_fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double require_number(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number()) schema_fail(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

bool require_bool(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_boolean()) schema_fail(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

bool flag_is_true(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && it->is_boolean() && it->get<bool>();
}

void check_latlon(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0)) invariant_fail("latitude out of [-90,90]");
  if (!(lon >= -180.0 && lon <= 180.0)) invariant_fail("longitude out of [-180,180]");
}

void check_flag(const json& obj, const char* key, bool expected) {
  auto it = obj.find(key);
  if (it == obj.end()) return;  // discriminator chain already picked the type
  if (!it->is_boolean() || it->get<bool>() != expected)
    invariant_fail(std::string("field '") + key + "' must be " + (expected ? "true" : "false"));
}

// --- validation -------------------------------------------------------------

void validate(const KeepAliveMsg& m) {
  if (m.imei.empty()) invariant_fail("imei must be non-empty");
  if (m.battery_life < 0 || m.battery_life > 100) invariant_fail("battery_life out of [0,100]");
  check_latlon(m.latitude, m.longitude);
}

void validate(const ImageDataMsg& m) {
  if (m.imei.empty()) invariant_fail("imei must be non-empty");
  check_latlon(m.latitude, m.longitude);
  if (!util::is_valid_base64(m.encoded_image))
    invariant_fail("encodedImageString is not valid base64");
}

void validate(const SensorDataMsg& m) {
  if (m.imei.empty()) invariant_fail("imei must be non-empty");
  check_latlon(m.latitude, m.longitude);
  for (const auto& [sensor, sessions] : m.sensor_data) {
    for (const auto& session : sessions) {
      if (session.sensor_name != sensor)
        invariant_fail("session sensorName '" + session.sensor_name +
                       "' does not match its map key '" + sensor + "'");
      std::int64_t prev = INT64_MIN;
      for (const auto& rec : session.records) {
        if (rec.timestamp_ms) {
          if (*rec.timestamp_ms < prev)
            invariant_fail("record timestamps must be non-decreasing within a session");
          prev = *rec.timestamp_ms;
        }
      }
    }
  }
}

void validate(const CommandMsg& m) {
  if (m.type == CommandType::Start) {
    for (const auto& e : m.sensors)
      if (!(e.frequency_hz > 0.0)) invariant_fail("frequency must be > 0 for START entry");
  }
}

// --- encode -----------------------------------------------------------------

json record_to_json(const SensorRecord& rec) {
  json j;
  j["measurement_unit"] = rec.measurement_unit;
  j["name"] = rec.name;
  if (rec.timestamp_ms) j["timestamp"] = *rec.timestamp_ms;
  if (rec.pad) j["pad"] = *rec.pad;
  for (const auto& [k, v] : rec.values) j[k] = v;
  return j;
}

json to_json(const KeepAliveMsg& m) {
  json j;
  j["battery_life"] = m.battery_life;
  j["imei"] = m.imei;
  j["ip"] = m.ip;
  j["isData"] = false;
  j["isImage"] = false;
  j["keep_alive_status"] = true;
  j["latitude"] = m.latitude;
  j["longitude"] = m.longitude;
  j["sensors"] = m.sensors;
  return j;
}

json to_json(const ImageDataMsg& m) {
  json j;
  j["encodedImageString"] = m.encoded_image;
  j["imei"] = m.imei;
  j["isData"] = false;
  j["isImage"] = true;
  j["latitude"] = m.latitude;
  j["longitude"] = m.longitude;
  return j;
}

json to_json(const SensorDataMsg& m) {
  json j;
  j["imei"] = m.imei;
  j["isData"] = true;
  j["isImage"] = false;
  j["latitude"] = m.latitude;
  j["longitude"] = m.longitude;
  json data = json::object();
  for (const auto& [sensor, sessions] : m.sensor_data) {
    json arr = json::array();
    for (const auto& session : sessions) {
      json s;
      s["sensorName"] = session.sensor_name;
      json recs = json::array();
      for (const auto& rec : session.records) recs.push_back(record_to_json(rec));
      s["sensorSessionData"] = std::move(recs);
      arr.push_back(std::move(s));
    }
    data[sensor] = std::move(arr);
  }
  j["sensorData"] = std::move(data);
  return j;
}

json to_json(const CommandMsg& m) {
  json j;
  j["messageType"] = std::string(to_string(m.type));
  if (m.type == CommandType::Start) {
    json arr = json::array();
    for (const auto& e : m.sensors) {
      json s;
      s["frequency"] = e.frequency_hz;
      s["name"] = e.name;
      arr.push_back(std::move(s));
    }
    j["sensors"] = std::move(arr);
  }
  if (m.type == CommandType::Send && m.compress) j["compress"] = true;
  return j;
}

// --- decode -----------------------------------------------------------------

SensorRecord record_from_json(const json& j) {
  if (!j.is_object()) schema_fail("sensor record must be an object");
  SensorRecord rec;
  rec.measurement_unit = require_string(j, "measurement_unit");
  rec.name = require_string(j, "name");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "measurement_unit" || key == "name") continue;
    if (key == "timestamp") {
      if (!it->is_number_integer()) schema_fail("record timestamp must be an integer");
      rec.timestamp_ms = it->get<std::int64_t>();
    } else if (key == "pad") {
      if (!it->is_string()) schema_fail("record pad must be a string");
      rec.pad = it->get<std::string>();
    } else if (it->is_number()) {
      rec.values[key] = it->get<double>();
    } else {
      schema_fail("record field '" + key + "' must be numeric");
    }
  }
  return rec;
}

Message decode_keepalive(const json& j) {
  KeepAliveMsg m;
  const double battery = require_number(j, "battery_life");
  if (battery != std::floor(battery)) schema_fail("battery_life must be an integer");
  m.battery_life = static_cast<int>(battery);
  m.imei = require_string(j, "imei");
  m.ip = require_string(j, "ip");
  m.latitude = require_number(j, "latitude");
  m.longitude = require_number(j, "longitude");
  const json& sensors = require(j, "sensors");
  if (!sensors.is_array()) schema_fail("field 'sensors' must be an array");
  for (const auto& s : sensors) {
    if (!s.is_string()) schema_fail("sensors entries must be strings");
    m.sensors.push_back(s.get<std::string>());
  }
  check_flag(j, "isData", false);
  check_flag(j, "isImage", false);
  validate(m);
  return m;
}

Message decode_image(const json& j) {
  ImageDataMsg m;
  m.imei = require_string(j, "imei");
  m.latitude = require_number(j, "latitude");
  m.longitude = require_number(j, "longitude");
  m.encoded_image = require_string(j, "encodedImageString");
  check_flag(j, "isData", false);
  validate(m);
  return m;
}

Message decode_sensor_data(const json& j) {
  SensorDataMsg m;
  m.imei = require_string(j, "imei");
  m.latitude = require_number(j, "latitude");
  m.longitude = require_number(j, "longitude");
  const json& data = require(j, "sensorData");
  if (!data.is_object()) schema_fail("field 'sensorData' must be an object");
  for (auto it = data.begin(); it != data.end(); ++it) {
    if (!it->is_array()) schema_fail("sensorData entries must be arrays of sessions");
    std::vector<SensorSession> sessions;
    for (const auto& sj : *it) {
      if (!sj.is_object()) schema_fail("session must be an object");
      SensorSession session;
      session.sensor_name = require_string(sj, "sensorName");
      const json& recs = require(sj, "sensorSessionData");
      if (!recs.is_array()) schema_fail("sensorSessionData must be an array");
      for (const auto& rj : recs) session.records.push_back(record_from_json(rj));
      sessions.push_back(std::move(session));
    }
    m.sensor_data[it.key()] = std::move(sessions);
  }
  check_flag(j, "isImage", false);
  validate(m);
  return m;
}

Message decode_command(const json& j) {
  CommandMsg m;
  const std::string type = require_string(j, "messageType");
  auto parsed = command_type_from_string(type);
  if (!parsed) throw UnsupportedCommandError("unsupported command '" + type + "'");
  m.type = *parsed;
  if (m.type == CommandType::Start) {
    if (auto it = j.find("sensors"); it != j.end()) {
      if (!it->is_array()) schema_fail("field 'sensors' must be an array");
      for (const auto& sj : *it) {
        if (!sj.is_object()) schema_fail("sensors entries must be objects");
        SensorStartEntry e;
        e.name = require_string(sj, "name");
        e.frequency_hz = require_number(sj, "frequency");
        m.sensors.push_back(std::move(e));
      }
    } else if (j.contains("sensor")) {
      // Singular form as printed in the paper's command listing.
      SensorStartEntry e;
      e.name = require_string(j, "sensor");
      e.frequency_hz = require_number(j, "frequency");
      m.sensors.push_back(std::move(e));
    } else {
      schema_fail("START requires 'sensors' (or legacy 'sensor'/'frequency')");
    }
  }
  if (m.type == CommandType::Send && j.contains("compress")) m.compress = require_bool(j, "compress");
  validate(m);
  return m;
}

}  // namespace

std::string_view to_string(CommandType t) {
  switch (t) {
    case CommandType::Start: return "START";
    case CommandType::Stop: return "STOP";
    case CommandType::Send: return "SEND";
    case CommandType::CaptureImage: return "CAPTURE_IMAGE";
  }
  return "?";
}

std::optional<CommandType> command_type_from_string(std::string_view s) {
  if (s == "START") return CommandType::Start;
  if (s == "STOP") return CommandType::Stop;
  if (s == "SEND") return CommandType::Send;
  if (s == "CAPTURE_IMAGE") return CommandType::CaptureImage;
  return std::nullopt;
}

const std::string& message_imei(const Message& m) {
  static const std::string empty;
  return std::visit(
      [](const auto& v) -> const std::string& {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CommandMsg>)
          return empty;
        else
          return v.imei;
      },
      m);
}

std::string_view message_kind(const Message& m) {
  switch (m.index()) {
    case 0: return "keepalive";
    case 1: return "sensor_data";
    case 2: return "image";
    default: return "command";
  }
}

std::string record_json(const SensorRecord& rec) { return record_to_json(rec).dump(); }

std::string encode(const Message& msg) {
  json j = std::visit(
      [](const auto& m) {
        validate(m);
        return to_json(m);
      },
      msg);
  std::string text = j.dump();
  text.push_back('\n');
  return text;
}

std::string encode_compressed(const Message& msg) {
  std::string inner = encode(msg);
  inner.pop_back();  // envelope gets its own newline
  json j;
  j[kCompressedKey] = util::base64_encode(util::deflate_bytes(inner));
  std::string text = j.dump();
  text.push_back('\n');
  return text;
}

Message decode(std::string_view frame) {
  while (!frame.empty() && (frame.back() == '\n' || frame.back() == '\r')) frame.remove_suffix(1);
  json j = json::parse(frame, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON frame");
  if (!j.is_object()) schema_fail("frame must be a JSON object");

  if (auto it = j.find(kCompressedKey); it != j.end()) {
    if (!it->is_string()) schema_fail("compressedPayload must be a string");
    auto raw = util::base64_decode(it->get<std::string>());
    if (!raw) invariant_fail("compressedPayload is not valid base64");
    std::string inner;
    try {
      inner = util::inflate_bytes(*raw, kMaxFrameBytes);
    } catch (const util::CompressError& e) {
      throw ParseError(std::string("cannot inflate compressedPayload: ") + e.what());
    }
    return decode(inner);
  }

  if (j.contains("messageType")) return decode_command(j);
  if (flag_is_true(j, "keep_alive_status")) return decode_keepalive(j);
  if (flag_is_true(j, "isImage")) return decode_image(j);
  if (flag_is_true(j, "isData")) return decode_sensor_data(j);
  schema_fail("no message discriminator (messageType/keep_alive_status/isImage/isData)");
}

std::vector<std::string> FrameSplitter::push(std::string_view chunk) {
  std::vector<std::string> frames;
  std::size_t start = 0;
  while (start < chunk.size()) {
    std::size_t nl = chunk.find('\n', start);
    if (nl == std::string_view::npos) {
      carry_.append(chunk.substr(start));
      break;
    }
    std::string frame = std::move(carry_);
    carry_.clear();
    frame.append(chunk.substr(start, nl - start + 1));
    frames.push_back(std::move(frame));
    start = nl + 1;
  }
  if (carry_.size() > cap_) {
    carry_.clear();
    throw FrameTooLargeError("partial frame exceeds " + std::to_string(cap_) + " bytes");
  }
  return frames;
}

}  // namespace music::wire
