#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "music/geo.hpp"
#include "music/session.hpp"

namespace music::ctrl {

// Controller-side mirror of one edge node. Records are immutable once
// published; updates replace the whole record so snapshots are never torn.
struct NodeRecord {
  std::string imei;
  std::string last_addr;    // observed transport address (authoritative for routing)
  std::string reported_ip;  // "ip" field from the last KeepAlive
  std::int64_t last_seen_ms = 0;
  std::int64_t first_seen_ms = 0;
  int battery = 0;
  GeoPoint location;
  std::vector<std::string> sensors;  // as advertised by the node
  SessionState session;
  bool alive = true;
};

struct RegistrySnapshot {
  std::int64_t taken_at_ms = 0;
  std::vector<std::shared_ptr<const NodeRecord>> nodes;  // sorted by imei

  const NodeRecord* find(const std::string& imei) const {
    for (const auto& n : nodes)
      if (n->imei == imei) return n.get();
    return nullptr;
  }
};

}  // namespace music::ctrl
