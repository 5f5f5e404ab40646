#include "music/data_store.hpp"

#include <filesystem>

#include "music/log.hpp"

namespace music::ctrl {

DataStore::DataStore(Config cfg) : cfg_(std::move(cfg)) {
  if (cfg_.dir) std::filesystem::create_directories(*cfg_.dir);
}

DataStore::~DataStore() { flush(); }

std::ofstream& DataStore::file_for(const std::string& imei) {
  auto it = files_.find(imei);
  if (it == files_.end()) {
    auto f = std::make_unique<std::ofstream>(*cfg_.dir + "/" + imei + ".jsonl", std::ios::app);
    it = files_.emplace(imei, std::move(f)).first;
  }
  return *it->second;
}

void DataStore::append(const std::string& imei, std::shared_ptr<const wire::Message> msg,
                       std::int64_t now_ms, std::string_view wire_frame) {
  std::lock_guard lock(mu_);
  auto& dq = entries_[imei];
  dq.push_back({now_ms, std::move(msg)});
  while (dq.size() > cfg_.max_entries_per_node) dq.pop_front();
  if (cfg_.dir) {
    auto& f = file_for(imei);
    f << wire_frame;
    if (wire_frame.empty() || wire_frame.back() != '\n') f << '\n';
    f.flush();  // whole lines only; a crash never leaves a torn record
  }
}

void DataStore::quarantine(const wire::Message& msg, std::int64_t now_ms,
                           std::string_view wire_frame) {
  std::lock_guard lock(mu_);
  ++quarantined_;
  MUSIC_LOG_WARN("quarantined %s message from unknown imei '%s'",
                 std::string(wire::message_kind(msg)).c_str(),
                 wire::message_imei(msg).c_str());
  if (cfg_.dir) {
    if (!quarantine_file_)
      quarantine_file_ =
          std::make_unique<std::ofstream>(*cfg_.dir + "/quarantine.jsonl", std::ios::app);
    *quarantine_file_ << wire_frame;
    if (wire_frame.empty() || wire_frame.back() != '\n') *quarantine_file_ << '\n';
    quarantine_file_->flush();
  }
  (void)now_ms;
}

std::vector<DataEntry> DataStore::entries_since(const std::string& imei,
                                                std::int64_t since_ms) const {
  std::lock_guard lock(mu_);
  std::vector<DataEntry> out;
  auto it = entries_.find(imei);
  if (it == entries_.end()) return out;
  for (const auto& e : it->second)
    if (e.received_at_ms >= since_ms) out.push_back(e);
  return out;
}

std::vector<std::string> DataStore::imeis() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [imei, _] : entries_) out.push_back(imei);
  return out;
}

std::size_t DataStore::entry_count(const std::string& imei) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(imei);
  return it == entries_.end() ? 0 : it->second.size();
}

std::size_t DataStore::quarantine_count() const {
  std::lock_guard lock(mu_);
  return quarantined_;
}

void DataStore::flush() {
  std::lock_guard lock(mu_);
  for (auto& [_, f] : files_) f->flush();
  if (quarantine_file_) quarantine_file_->flush();
}

}  // namespace music::ctrl
