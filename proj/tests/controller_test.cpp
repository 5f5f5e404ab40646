#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "music/controller.hpp"

using namespace music;
using namespace music::ctrl;
using namespace music::wire;

namespace {

KeepAliveMsg keepalive(const std::string& imei, int battery = 95, double lat = 28.55,
                       double lon = 77.19) {
  KeepAliveMsg m;
  m.battery_life = battery;
  m.imei = imei;
  m.ip = "172.16.19.89";
  m.latitude = lat;
  m.longitude = lon;
  m.sensors = {"Accelerometer", "Compass"};
  return m;
}

SensorDataMsg end_marker(const std::string& imei) {
  SensorDataMsg m;
  m.imei = imei;
  m.latitude = 28.55;
  m.longitude = 77.19;
  return m;
}

SensorDataMsg data_with_samples(const std::string& imei, int n) {
  SensorDataMsg m = end_marker(imei);
  SensorSession session;
  session.sensor_name = "gps";
  for (int i = 0; i < n; ++i) {
    SensorRecord rec;
    rec.measurement_unit = "degrees";
    rec.name = "gps";
    rec.timestamp_ms = 1000 + i;
    rec.values["latitude"] = 28.55;
    rec.values["longitude"] = 77.19;
    session.records.push_back(rec);
  }
  m.sensor_data["gps"] = {session};
  return m;
}

class RecordingSink final : public CommandSink {
 public:
  bool send_frame(std::string_view frame) override {
    if (closed) return false;
    frames.emplace_back(frame);
    return true;
  }
  std::vector<std::string> frames;
  bool closed = false;
};

struct Fixture {
  Fixture() : store(), controller({10'000, 30'000}, &store) {
    sink = std::make_shared<RecordingSink>();
  }
  void add_node(const std::string& imei, std::int64_t now = 0, int battery = 95) {
    controller.on_keepalive(keepalive(imei, battery), "10.0.0.1:40001", now);
    controller.bind_command_channel(imei, sink);
  }
  DataStore store;
  ControllerCore controller;
  std::shared_ptr<RecordingSink> sink;
};

}  // namespace

TEST_CASE("keepalive registers an unknown node with the listing's values") {
  Fixture f;
  f.controller.on_keepalive(keepalive("353323062860043"), "172.16.19.89:41001", 0);
  auto snap = f.controller.snapshot(0);
  REQUIRE(snap.nodes.size() == 1);
  const NodeRecord& n = *snap.nodes[0];
  CHECK(n.imei == "353323062860043");
  CHECK(n.battery == 95);
  CHECK(n.sensors == std::vector<std::string>{"Accelerometer", "Compass"});
  CHECK(n.alive);
  CHECK(n.session.phase == SessionPhase::Idle);
  CHECK(n.last_addr == "172.16.19.89:41001");
  CHECK(n.reported_ip == "172.16.19.89");
}

TEST_CASE("keepalive from a new address re-routes without changing identity") {
  Fixture f;
  f.add_node("n1", 0);
  f.controller.on_keepalive(keepalive("n1"), "10.9.9.9:5999", 10'000);
  auto snap = f.controller.snapshot(10'000);
  REQUIRE(snap.nodes.size() == 1);  // same identity
  CHECK(snap.nodes[0]->last_addr == "10.9.9.9:5999");
  CHECK(snap.nodes[0]->last_seen_ms == 10'000);
}

TEST_CASE("last_seen is monotone even if a late keepalive arrives") {
  Fixture f;
  f.add_node("n1", 0);
  f.controller.on_keepalive(keepalive("n1"), "a", 10'000);
  f.controller.on_keepalive(keepalive("n1"), "a", 4'000);  // stale delivery
  CHECK(f.controller.snapshot(0).nodes[0]->last_seen_ms == 10'000);
}

TEST_CASE("liveness sweep marks only nodes past the timeout") {
  Fixture f;
  f.add_node("quiet", 0);
  f.add_node("chatty", 0);
  f.controller.on_keepalive(keepalive("chatty"), "a", 30'000);

  SUBCASE("empty registry yields an empty sweep") {
    DataStore store2;
    ControllerCore empty({10'000, 30'000}, &store2);
    CHECK(empty.liveness_sweep(99'000).empty());
  }

  // quiet node silent for 35 s against a 30 s timeout
  auto dead = f.controller.liveness_sweep(35'000);
  CHECK(dead == std::vector<std::string>{"quiet"});
  CHECK_FALSE(f.controller.node("quiet")->alive);
  CHECK(f.controller.node("chatty")->alive);

  // second sweep reports nothing new
  CHECK(f.controller.liveness_sweep(36'000).empty());

  // revival keepalive restores command flow
  f.controller.on_keepalive(keepalive("quiet"), "a", 40'000);
  CHECK(f.controller.node("quiet")->alive);
}

TEST_CASE("dispatch: errors and the session state machine") {
  Fixture f;
  f.add_node("n1", 0);

  CommandMsg start{CommandType::Start, {{"Accelerometer", 20.0}}, false};
  CommandMsg stop{CommandType::Stop, {}, false};
  CommandMsg send{CommandType::Send, {}, false};

  CHECK(f.controller.dispatch("ghost", start, 0) == DispatchStatus::NotFound);

  CHECK(f.controller.dispatch("n1", stop, 0) == DispatchStatus::InvalidTransition);
  CHECK(f.controller.dispatch("n1", send, 0) == DispatchStatus::InvalidTransition);

  CHECK(f.controller.dispatch("n1", start, 1'000) == DispatchStatus::Ok);
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::Recording);
  CHECK(f.controller.dispatch("n1", start, 2'000) == DispatchStatus::InvalidTransition);

  CHECK(f.controller.dispatch("n1", stop, 21'000) == DispatchStatus::Ok);
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::AwaitingSend);

  CHECK(f.controller.dispatch("n1", send, 21'000) == DispatchStatus::Ok);
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::AwaitingSend);  // unchanged
  CHECK(f.controller.node("n1")->session.send_issued);

  REQUIRE(f.sink->frames.size() == 3);
  CHECK(f.sink->frames[1] == "{\"messageType\":\"STOP\"}\n");
}

TEST_CASE("commands to dead nodes are suppressed until revival") {
  Fixture f;
  f.add_node("n1", 0);
  f.controller.liveness_sweep(31'000);
  REQUIRE_FALSE(f.controller.node("n1")->alive);

  CommandMsg start{CommandType::Start, {{"Accelerometer", 20.0}}, false};
  CHECK(f.controller.dispatch("n1", start, 31'000) == DispatchStatus::NodeDead);
  CHECK(f.sink->frames.empty());  // zero frames written to a dead node's channel

  f.controller.on_keepalive(keepalive("n1"), "a", 32'000);
  CHECK(f.controller.dispatch("n1", start, 32'000) == DispatchStatus::Ok);
  CHECK(f.sink->frames.size() == 1);
}

TEST_CASE("dispatch without a command channel reports NoChannel") {
  Fixture f;
  f.controller.on_keepalive(keepalive("n1"), "a", 0);  // no bind
  CommandMsg start{CommandType::Start, {{"Accelerometer", 20.0}}, false};
  CHECK(f.controller.dispatch("n1", start, 0) == DispatchStatus::NoChannel);
}

TEST_CASE("the end-of-send marker completes the session; other data does not") {
  Fixture f;
  f.add_node("n1", 0);
  f.controller.dispatch("n1", CommandMsg{CommandType::Start, {{"Compass", 10.0}}, false}, 0);
  f.controller.dispatch("n1", CommandMsg{CommandType::Stop, {}, false}, 20'000);

  std::string completed_imei;
  f.controller.set_session_complete_handler(
      [&](const std::string& imei, std::int64_t) { completed_imei = imei; });

  // data before SEND: stored, no completion
  auto r1 = f.controller.on_data(Message{data_with_samples("n1", 3)}, 20'500);
  CHECK(r1.stored);
  CHECK_FALSE(r1.session_completed);

  f.controller.dispatch("n1", CommandMsg{CommandType::Send, {}, false}, 21'000);

  // a non-empty data message after SEND is payload, not the marker
  auto r2 = f.controller.on_data(Message{data_with_samples("n1", 5)}, 21'100);
  CHECK(r2.stored);
  CHECK_FALSE(r2.session_completed);
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::AwaitingSend);

  // the empty-session marker closes it
  auto r3 = f.controller.on_data(Message{end_marker("n1")}, 21'200);
  CHECK(r3.session_completed);
  CHECK(completed_imei == "n1");
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::Idle);

  // marker while idle is absorbed without a transition
  auto r4 = f.controller.on_data(Message{end_marker("n1")}, 22'000);
  CHECK(r4.stored);
  CHECK_FALSE(r4.session_completed);
}

TEST_CASE("image data is appended without touching the session") {
  Fixture f;
  f.add_node("n1", 0);
  ImageDataMsg img;
  img.imei = "n1";
  img.latitude = 28.5;
  img.longitude = 77.2;
  img.encoded_image = "aGk=";
  auto r = f.controller.on_data(Message{img}, 500);
  CHECK(r.stored);
  CHECK_FALSE(r.session_completed);
  CHECK(f.store.entry_count("n1") == 1);
  CHECK(f.controller.node("n1")->session.phase == SessionPhase::Idle);
}

TEST_CASE("data from an unknown imei is quarantined") {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "music_quarantine_test";
  std::filesystem::remove_all(dir);
  DataStore store({dir.string(), 1000});
  ControllerCore controller({10'000, 30'000}, &store);

  auto r = controller.on_data(Message{data_with_samples("stranger", 2)}, 100);
  CHECK(r.unknown_sender);
  CHECK_FALSE(r.stored);
  CHECK(store.quarantine_count() == 1);

  std::ifstream q(dir / "quarantine.jsonl");
  std::string line;
  REQUIRE(std::getline(q, line));
  CHECK(std::get<SensorDataMsg>(decode(line)).imei == "stranger");
  std::filesystem::remove_all(dir);
}

TEST_CASE("data store preserves per-node receive order and filters by time") {
  Fixture f;
  f.add_node("n1", 0);
  for (int i = 0; i < 5; ++i)
    f.controller.on_data(Message{data_with_samples("n1", i + 1)}, 1000 * i);
  const auto all = f.store.entries_since("n1", INT64_MIN);
  REQUIRE(all.size() == 5);
  for (int i = 1; i < 5; ++i) CHECK(all[i].received_at_ms > all[i - 1].received_at_ms);
  CHECK(f.store.entries_since("n1", 3000).size() == 2);
}

TEST_CASE("snapshot is consistent: 3 nodes, empty system, no torn records") {
  Fixture f;
  CHECK(f.controller.snapshot(0).nodes.empty());

  f.add_node("a", 0);
  f.add_node("b", 0);
  f.add_node("c", 0);
  CHECK(f.controller.snapshot(0).nodes.size() == 3);

  // stress: battery and longitude always written as a matched pair
  f.controller.on_keepalive(keepalive("a", 0, 28.0, 0.0), "x", 1);
  std::atomic<bool> go{true};
  std::thread writer([&] {
    std::mt19937_64 rng(1);
    while (go.load()) {
      const int v = static_cast<int>(rng() % 100);
      f.controller.on_keepalive(keepalive("a", v, 28.0, static_cast<double>(v)), "x", 50'000);
    }
  });
  for (int i = 0; i < 2000; ++i) {
    auto snap = f.controller.snapshot(0);
    const NodeRecord* n = snap.find("a");
    REQUIRE(n != nullptr);
    CHECK(n->battery == static_cast<int>(n->location.longitude));
  }
  go = false;
  writer.join();
}

TEST_CASE("property: random command traces never corrupt the session machine") {
  Fixture f;
  f.add_node("n1", 0);
  std::mt19937_64 rng(7);
  SessionPhase expected = SessionPhase::Idle;
  bool expected_sent = false;

  for (int i = 0; i < 3000; ++i) {
    const int pick = static_cast<int>(rng() % 5);
    const std::int64_t now = 100 * i;
    if (pick == 4) {
      auto r = f.controller.on_data(Message{end_marker("n1")}, now);
      if (expected == SessionPhase::AwaitingSend && expected_sent) {
        CHECK(r.session_completed);
        expected = SessionPhase::Idle;
        expected_sent = false;
      } else {
        CHECK_FALSE(r.session_completed);
      }
    } else {
      CommandMsg cmd;
      cmd.type = static_cast<CommandType>(pick);
      if (cmd.type == CommandType::Start) cmd.sensors = {{"Compass", 10.0}};
      const auto status = f.controller.dispatch("n1", cmd, now);
      switch (cmd.type) {
        case CommandType::Start:
          if (expected == SessionPhase::Idle) {
            CHECK(status == DispatchStatus::Ok);
            expected = SessionPhase::Recording;
          } else {
            CHECK(status == DispatchStatus::InvalidTransition);
          }
          break;
        case CommandType::Stop:
          if (expected == SessionPhase::Recording) {
            CHECK(status == DispatchStatus::Ok);
            expected = SessionPhase::AwaitingSend;
            expected_sent = false;
          } else {
            CHECK(status == DispatchStatus::InvalidTransition);
          }
          break;
        case CommandType::Send:
          if (expected == SessionPhase::AwaitingSend) {
            CHECK(status == DispatchStatus::Ok);
            expected_sent = true;
          } else {
            CHECK(status == DispatchStatus::InvalidTransition);
          }
          break;
        case CommandType::CaptureImage:
          CHECK(status == DispatchStatus::Ok);
          break;
      }
    }
    CHECK(f.controller.node("n1")->session.phase == expected);
  }
}

TEST_CASE("per-imei logs replay through the wire codec") {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "music_store_test";
  std::filesystem::remove_all(dir);
  {
    DataStore store({dir.string(), 1000});
    ControllerCore controller({10'000, 30'000}, &store);
    controller.on_keepalive(keepalive("n1"), "a", 0);
    for (int i = 0; i < 10; ++i)
      controller.on_data(Message{data_with_samples("n1", 2)}, 100 * i);
  }
  std::ifstream log(dir / "n1.jsonl");
  REQUIRE(log.good());
  std::string line;
  int count = 0;
  while (std::getline(log, line)) {
    const Message m = decode(line);  // throws on a torn line
    CHECK(std::get<SensorDataMsg>(m).imei == "n1");
    ++count;
  }
  CHECK(count == 10);
  std::filesystem::remove_all(dir);
}
