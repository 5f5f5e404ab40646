#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "music/command_scheduler.hpp"
#include "music/controller.hpp"
#include "music/edge_node.hpp"
#include "music/metrics.hpp"
#include "music/policy_loop.hpp"
#include "music/scenario.hpp"
#include "music/sim_scheduler.hpp"

namespace music::sim {

// Whole-system run under the virtual clock: controller core + command
// scheduler + policy loop on one side, the simulated fleet on the other,
// joined by an in-process transport that carries real encoded frames (so
// byte accounting measures actual wire sizes). Single-sequenced and seeded:
// the same scenario and seed reproduce byte-identical reports.
class Simulation final : public EdgeEnv {
 public:
  struct Options {
    std::optional<std::string> out_dir;  // write data logs + report files here
    std::optional<std::uint64_t> seed_override;
    std::optional<double> accel_override;
  };

  explicit Simulation(Scenario scenario, Options options = {});
  ~Simulation() override;

  report::MetricsReport run();

  // Probe invoked after every policy tick (testing hook).
  using TickProbe = std::function<void(const policy::PolicyContext&, const cmd::SensingPolicy&)>;
  void set_tick_probe(TickProbe probe) { tick_probe_ = std::move(probe); }

  ctrl::ControllerCore& controller() { return *controller_; }
  SimScheduler& sim_scheduler() { return *scheduler_; }
  cmd::CommandScheduler& commands() { return *commands_; }
  EdgeNode* node(const std::string& imei);
  const Scenario& scenario() const { return scenario_; }

  // EdgeEnv
  Scheduler& scheduler() override { return *scheduler_; }
  std::string open_connections(EdgeNode& node) override;
  void close_connections(EdgeNode& node) override;
  bool connections_open(const EdgeNode& node) const override;
  void uplink(EdgeNode& node, std::string_view frame) override;

 private:
  struct Link {
    std::string addr;
    bool open = false;
    int generation = 0;
    wire::FrameSplitter splitter;
  };
  class SimCommandSink;

  void route_uplink(const std::string& imei, int generation, const std::string& chunk);
  void on_policy_tick(const policy::PolicyContext& ctx, const cmd::SensingPolicy& next,
                      const cmd::CompileResult& batch);
  void housekeeping();
  void finalize_report();
  policy::PolicyContext full_context(std::int64_t now_ms);
  void export_traces();

  Scenario scenario_;
  Options options_;

  std::unique_ptr<SimScheduler> scheduler_;
  std::unique_ptr<ctrl::DataStore> store_;
  std::unique_ptr<ctrl::ControllerCore> controller_;
  std::unique_ptr<cmd::CommandScheduler> commands_;
  std::unique_ptr<policy::Policy> policy_;
  std::unique_ptr<policy::PolicyLoop> loop_;

  std::map<std::string, std::unique_ptr<EdgeNode>> nodes_;
  std::map<std::string, std::shared_ptr<Link>> links_;

  report::MetricsReport report_;
  TickProbe tick_probe_;
  bool ran_ = false;
};

}  // namespace music::sim
