#include "music/edge_node.hpp"

#include <algorithm>
#include <cmath>

#include "music/base64.hpp"
#include "music/log.hpp"

namespace music::sim {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

EdgeNode::EdgeNode(EdgeNodeConfig cfg, EdgeEnv* env, std::uint64_t scenario_seed,
                   const FieldModel* field)
    : cfg_(std::move(cfg)),
      env_(env),
      field_(field),
      path_(cfg_.waypoints),
      rng_(scenario_seed ^ fnv1a(cfg_.imei)),
      battery_pct_(cfg_.battery.start_pct) {}

GeoPoint EdgeNode::position_now() const { return path_.position_at(env_->scheduler().now_ms()); }

bool EdgeNode::muted_at(std::int64_t t_ms) const {
  for (const auto& w : cfg_.keepalive_mutes)
    if (t_ms >= w.from_ms && t_ms < w.to_ms) return true;
  return false;
}

void EdgeNode::drain_to(std::int64_t t_ms) {
  if (t_ms <= last_drain_ms_) return;
  const double hours = static_cast<double>(t_ms - last_drain_ms_) / 3.6e6;
  battery_pct_ = std::max(0.0, battery_pct_ - cfg_.battery.base_drain_pct_per_h * hours);
  last_drain_ms_ = t_ms;
}

void EdgeNode::start() {
  last_drain_ms_ = env_->scheduler().now_ms();
  connect();
  arm_keepalive();
  for (const std::int64_t at : cfg_.churn_at_ms)
    env_->scheduler().schedule_at(at, [this] { churn(); });
}

void EdgeNode::connect() {
  if (!powered()) return;
  address_ = env_->open_connections(*this);
  ++churn_count_;
  send_keepalive();  // announce on connect: identity, address, battery, location
}

void EdgeNode::churn() {
  drain_to(env_->scheduler().now_ms());
  if (!powered()) return;
  env_->close_connections(*this);
  // Session buffer and recording state live here, untouched by the reconnect.
  env_->scheduler().schedule_after(cfg_.reconnect_delay_ms, [this] { connect(); });
}

void EdgeNode::arm_keepalive() {
  env_->scheduler().schedule_after(cfg_.keepalive_period_ms, [this] {
    send_keepalive();
    if (powered()) arm_keepalive();
  });
}

void EdgeNode::send_keepalive() {
  const std::int64_t now = env_->scheduler().now_ms();
  drain_to(now);
  if (!powered() || !env_->connections_open(*this) || muted_at(now)) return;

  wire::KeepAliveMsg msg;
  msg.battery_life = static_cast<int>(std::floor(battery_pct_));
  msg.imei = cfg_.imei;
  msg.ip = address_;
  const GeoPoint pos = path_.position_at(now);
  msg.latitude = pos.latitude;
  msg.longitude = pos.longitude;
  for (const auto& s : cfg_.sensors) msg.sensors.push_back(s.name);

  send_frame(wire::encode(wire::Message{msg}), /*is_data=*/false);
  ++counters_.keepalives_sent;
}

void EdgeNode::on_command_frame(std::string_view frame) {
  drain_to(env_->scheduler().now_ms());
  if (!powered()) return;  // device is off; command falls on deaf ears
  try {
    const wire::Message msg = wire::decode(frame);
    if (const auto* cmd = std::get_if<wire::CommandMsg>(&msg)) {
      ++counters_.commands_received;
      handle_command(*cmd);
    }
  } catch (const wire::WireError& e) {
    MUSIC_LOG_WARN("node %s: dropping bad command frame: %s", cfg_.imei.c_str(), e.what());
  }
}

void EdgeNode::handle_command(const wire::CommandMsg& cmd) {
  switch (cmd.type) {
    case wire::CommandType::Start:
      handle_start(cmd);
      break;
    case wire::CommandType::Stop:
      if (recording_) materialize_recording(env_->scheduler().now_ms());
      break;
    case wire::CommandType::Send:
      handle_send(cmd.compress);
      break;
    case wire::CommandType::CaptureImage:
      capture_image();
      break;
  }
}

void EdgeNode::handle_start(const wire::CommandMsg& cmd) {
  if (recording_) {
    MUSIC_LOG_WARN("node %s: START while recording, ignored", cfg_.imei.c_str());
    return;
  }
  LiveSession session;
  session.started_ms = env_->scheduler().now_ms();
  for (const auto& e : cmd.sensors) {
    // the device knows its own fidelity limits
    for (const auto& s : cfg_.sensors) {
      if (s.name == e.name) {
        session.entries.push_back({e.name, std::min(e.frequency_hz, s.max_frequency_hz)});
        break;
      }
    }
  }
  recording_ = std::move(session);
}

void EdgeNode::materialize_recording(std::int64_t stop_ms) {
  if (!recording_) return;
  std::uint64_t produced = 0;
  for (const auto& entry : recording_->entries) {
    const SensorGenConfig* cfg = nullptr;
    for (const auto& s : cfg_.sensors)
      if (s.name == entry.name) cfg = &s;
    if (!cfg || entry.frequency_hz <= 0.0) continue;

    const auto interval_ms =
        std::max<std::int64_t>(1, std::llround(1000.0 / entry.frequency_hz));
    wire::SensorSession session;
    session.sensor_name = entry.name;
    for (std::int64_t t = recording_->started_ms + interval_ms; t <= stop_ms;
         t += interval_ms) {
      static const FieldModel kNoField{};
      session.records.push_back(
          generate_record(*cfg, field_ ? *field_ : kNoField, path_.position_at(t), t, rng_));
    }
    produced += session.records.size();
    if (!session.records.empty()) buffer_[entry.name].push_back(std::move(session));
  }
  counters_.samples_generated += produced;
  battery_pct_ =
      std::max(0.0, battery_pct_ - cfg_.battery.per_sample_pct * static_cast<double>(produced));
  recording_.reset();
}

std::size_t EdgeNode::buffered_sample_count() const {
  std::size_t n = 0;
  for (const auto& [_, sessions] : buffer_)
    for (const auto& s : sessions) n += s.records.size();
  return n;
}

void EdgeNode::handle_send(bool compress) {
  const std::int64_t now = env_->scheduler().now_ms();
  const GeoPoint pos = path_.position_at(now);

  if (!buffer_.empty()) {
    wire::SensorDataMsg data;
    data.imei = cfg_.imei;
    data.latitude = pos.latitude;
    data.longitude = pos.longitude;
    data.sensor_data = buffer_;
    const std::size_t samples = buffered_sample_count();
    const wire::Message msg{data};
    const std::string frame = compress ? wire::encode_compressed(msg) : wire::encode(msg);
    if (env_->connections_open(*this)) {
      send_frame(frame, /*is_data=*/true);
      ++counters_.data_msgs_sent;
      counters_.samples_delivered += samples;
      buffer_.clear();
    } else {
      // connection down: keep the buffer, the next SEND retries
      MUSIC_LOG_WARN("node %s: SEND with connection down, buffering", cfg_.imei.c_str());
      return;
    }
  }

  // end-of-send marker: an empty-session data message
  wire::SensorDataMsg marker;
  marker.imei = cfg_.imei;
  marker.latitude = pos.latitude;
  marker.longitude = pos.longitude;
  if (env_->connections_open(*this)) {
    send_frame(wire::encode(wire::Message{marker}), /*is_data=*/true);
    ++counters_.data_msgs_sent;
  }
}

void EdgeNode::capture_image() {
  if (!env_->connections_open(*this)) return;
  const std::int64_t now = env_->scheduler().now_ms();
  const GeoPoint pos = path_.position_at(now);
  wire::ImageDataMsg msg;
  msg.imei = cfg_.imei;
  msg.latitude = pos.latitude;
  msg.longitude = pos.longitude;
  msg.encoded_image = util::base64_encode(generate_image(cfg_.image, rng_));
  send_frame(wire::encode(wire::Message{msg}), /*is_data=*/true);
  ++counters_.images_sent;
}

void EdgeNode::send_frame(std::string_view frame, bool is_data) {
  counters_.tx_bytes += frame.size();
  battery_pct_ = std::max(
      0.0, battery_pct_ - cfg_.battery.per_kib_tx_pct * static_cast<double>(frame.size()) / 1024.0);
  env_->uplink(*this, frame);
  (void)is_data;
}

void EdgeNode::finalize(std::int64_t end_ms) {
  drain_to(end_ms);
  if (recording_ && powered()) materialize_recording(end_ms);
  counters_.samples_buffered = buffered_sample_count();
}

}  // namespace music::sim
