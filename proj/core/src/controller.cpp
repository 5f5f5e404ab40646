#include "music/controller.hpp"

#include <algorithm>

#include "music/log.hpp"

namespace music::ctrl {

std::string_view to_string(DispatchStatus s) {
  switch (s) {
    case DispatchStatus::Ok: return "ok";
    case DispatchStatus::NotFound: return "not_found";
    case DispatchStatus::NodeDead: return "node_dead";
    case DispatchStatus::InvalidTransition: return "invalid_transition";
    case DispatchStatus::NoChannel: return "no_channel";
  }
  return "?";
}

template <typename Fn>
void ControllerCore::update_record(const std::string& imei, Fn&& fn) {
  auto it = nodes_.find(imei);
  auto next = it == nodes_.end() ? std::make_shared<NodeRecord>()
                                 : std::make_shared<NodeRecord>(*it->second);
  fn(*next);
  nodes_[imei] = std::move(next);
}

void ControllerCore::on_keepalive(const wire::KeepAliveMsg& msg, const std::string& addr,
                                  std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  const bool known = nodes_.count(msg.imei) > 0;
  update_record(msg.imei, [&](NodeRecord& n) {
    if (!known) {
      n.imei = msg.imei;
      n.first_seen_ms = now_ms;
      n.session.phase_since_ms = now_ms;  // idle since registration
    }
    n.last_addr = addr;
    n.reported_ip = msg.ip;
    n.last_seen_ms = std::max(n.last_seen_ms, now_ms);
    n.battery = msg.battery_life;
    n.location = {msg.latitude, msg.longitude};
    n.sensors = msg.sensors;
    n.alive = true;
  });
  if (!known)
    MUSIC_LOG_INFO("registered node %s at %s (battery %d%%)", msg.imei.c_str(), addr.c_str(),
                   msg.battery_life);
}

DataResult ControllerCore::on_data(const wire::Message& msg, std::int64_t now_ms,
                                   std::string_view wire_frame) {
  const std::string& imei = wire::message_imei(msg);
  const std::string frame = wire_frame.empty() ? wire::encode(msg) : std::string(wire_frame);

  DataResult result;
  bool completed = false;
  {
    std::lock_guard lock(mu_);
    auto it = nodes_.find(imei);
    if (it == nodes_.end()) {
      result.unknown_sender = true;
    } else {
      const auto* sensor_data = std::get_if<wire::SensorDataMsg>(&msg);
      if (sensor_data && sensor_data->is_end_marker()) {
        update_record(imei, [&](NodeRecord& n) {
          completed = apply_send_complete(n.session, now_ms);
        });
      }
      result.stored = true;
      result.session_completed = completed;
    }
  }

  if (result.unknown_sender) {
    if (store_) store_->quarantine(msg, now_ms, frame);
    return result;
  }
  if (store_) store_->append(imei, std::make_shared<const wire::Message>(msg), now_ms, frame);
  if (completed && on_session_complete_) on_session_complete_(imei, now_ms);
  return result;
}

std::vector<std::string> ControllerCore::liveness_sweep(std::int64_t now_ms) {
  std::vector<std::string> newly_dead;
  std::lock_guard lock(mu_);
  for (const auto& [imei, record] : nodes_) {
    if (record->alive && now_ms - record->last_seen_ms > cfg_.liveness_timeout_ms) {
      update_record(imei, [](NodeRecord& n) { n.alive = false; });
      newly_dead.push_back(imei);
      MUSIC_LOG_INFO("node %s marked dead (silent %lld ms)", imei.c_str(),
                     static_cast<long long>(now_ms - record->last_seen_ms));
    }
  }
  return newly_dead;
}

DispatchStatus ControllerCore::dispatch(const std::string& imei, const wire::CommandMsg& cmd,
                                        std::int64_t now_ms) {
  std::string frame;
  {
    std::lock_guard lock(mu_);
    auto it = nodes_.find(imei);
    if (it == nodes_.end()) return DispatchStatus::NotFound;
    if (!it->second->alive) return DispatchStatus::NodeDead;

    auto next = std::make_shared<NodeRecord>(*it->second);
    if (apply_command(next->session, cmd, now_ms) != TransitionResult::Invalid) {
      // fallthrough, committed below after the write succeeds
    } else {
      return DispatchStatus::InvalidTransition;
    }

    auto ch = command_channels_.find(imei);
    if (ch == command_channels_.end()) return DispatchStatus::NoChannel;
    frame = wire::encode(wire::Message{cmd});
    if (!ch->second->send_frame(frame)) {
      command_channels_.erase(ch);
      return DispatchStatus::NoChannel;
    }
    nodes_[imei] = std::move(next);
  }
  if (command_observer_) command_observer_(imei, cmd, frame.size(), now_ms);
  return DispatchStatus::Ok;
}

std::shared_ptr<const NodeRecord> ControllerCore::node(const std::string& imei) const {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(imei);
  return it == nodes_.end() ? nullptr : it->second;
}

RegistrySnapshot ControllerCore::snapshot(std::int64_t now_ms) const {
  RegistrySnapshot snap;
  snap.taken_at_ms = now_ms;
  std::lock_guard lock(mu_);
  snap.nodes.reserve(nodes_.size());
  for (const auto& [_, record] : nodes_) snap.nodes.push_back(record);
  return snap;
}

void ControllerCore::bind_command_channel(const std::string& imei,
                                          std::shared_ptr<CommandSink> sink) {
  std::lock_guard lock(mu_);
  command_channels_[imei] = std::move(sink);
}

void ControllerCore::unbind_command_channel(const std::string& imei, const CommandSink* sink) {
  std::lock_guard lock(mu_);
  auto it = command_channels_.find(imei);
  if (it != command_channels_.end() && it->second.get() == sink) command_channels_.erase(it);
}

bool ControllerCore::has_command_channel(const std::string& imei) const {
  std::lock_guard lock(mu_);
  return command_channels_.count(imei) > 0;
}

}  // namespace music::ctrl
