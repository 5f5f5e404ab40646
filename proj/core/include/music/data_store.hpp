#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "music/wire.hpp"

namespace music::ctrl {

struct DataEntry {
  std::int64_t received_at_ms = 0;
  std::shared_ptr<const wire::Message> message;  // SensorDataMsg or ImageDataMsg
};

// Per-imei append-only log of received data messages. When a directory is
// configured, every entry is also persisted as one wire-format JSON line in
// <dir>/<imei>.jsonl (quarantined messages go to <dir>/quarantine.jsonl),
// which makes the logs replayable through the same codec.
class DataStore {
 public:
  struct Config {
    std::optional<std::string> dir;
    std::size_t max_entries_per_node = 100000;  // in-memory window cap; files keep everything
  };

  DataStore() = default;
  explicit DataStore(Config cfg);
  ~DataStore();

  void append(const std::string& imei, std::shared_ptr<const wire::Message> msg,
              std::int64_t now_ms, std::string_view wire_frame);
  void quarantine(const wire::Message& msg, std::int64_t now_ms, std::string_view wire_frame);

  // Copy of the entries received at or after since_ms, in receive order.
  std::vector<DataEntry> entries_since(const std::string& imei, std::int64_t since_ms) const;
  std::vector<std::string> imeis() const;
  std::size_t entry_count(const std::string& imei) const;
  std::size_t quarantine_count() const;

  void flush();

 private:
  std::ofstream& file_for(const std::string& imei);

  Config cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::deque<DataEntry>> entries_;
  std::map<std::string, std::unique_ptr<std::ofstream>> files_;
  std::unique_ptr<std::ofstream> quarantine_file_;
  std::size_t quarantined_ = 0;
};

}  // namespace music::ctrl
