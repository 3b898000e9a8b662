#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "seg6/netsim.hpp"
#include "seg6/usecases.hpp"

namespace seg6::scenario {

using Json = nlohmann::json;

/// Configuration problem; `where` is a JSON pointer or a line/column hint.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where.empty() ? message : where + ": " + message),
        where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct NodeSpec {
  std::string id;
  Ipv6Address address;
};

struct LinkSpec {
  std::string id;
  std::string a;
  std::string b;
  double bandwidth_mbps = 1000;
  double rtt_mean_ms = 0;
  double rtt_stddev_ms = 0;
};

/// An element of the scenario that is interpreted while building: routes,
/// SIDs, transit routes and daemons keep their JSON and location.
struct Item {
  std::string path;  // JSON pointer
  Json body;
};

struct GeneratorSpec {
  std::string src;
  Ipv6Address dst;
  double rate_pps = 1000;
  size_t payload_size = 64;
  uint64_t count = 0;
  double start_ms = 0;
  uint32_t flow = 0;
  uint16_t src_port = 10000;
  uint32_t flow_label = 0;
};

struct ScenarioConfig {
  std::string name;
  uint64_t seed = 1;
  double duration_ms = 1000;
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<Item> routes;
  std::vector<Item> sids;
  std::vector<Item> transit;
  std::vector<Item> daemons;
  std::vector<GeneratorSpec> generators;
  std::string config_hash;  // of the canonical document, before overrides

  const NodeSpec* find_node(const std::string& id) const;
};

/// Throws ConfigError. Structure and id references are checked here,
/// behavior parameters when building.
ScenarioConfig parse_scenario(const Json& doc);
ScenarioConfig parse_scenario_text(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

/// 16 hex digits of FNV-1a 64 over the canonical (sorted-key, compact)
/// serialization.
std::string config_hash(const Json& doc);

struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<double> duration_ms;
  std::optional<uint32_t> dm_ratio;       // every dm_transit program
  std::optional<bool> compensation;       // every twd_prober daemon
  std::optional<uint64_t> packet_count;   // every generator
  std::set<std::string> disable_oamp;     // node ids whose End.OAMP SIDs are skipped
};

void apply_overrides(ScenarioConfig& cfg, const Overrides& o);

/** @brief A simulation built from a scenario plus handles to its daemons. */
struct BuiltScenario {
  std::unique_ptr<sim::Simulation> sim;
  std::vector<usecases::OwdCollector*> collectors;
  std::vector<usecases::TwdProber*> probers;
  std::vector<usecases::OampResponder*> responders;
  std::map<Ipv6Address, Ipv6Address> oamp_sids;  // node address -> End.OAMP SID
  std::vector<sim::UdpStream> streams;
};

/// Throws ConfigError. Traffic generators are registered but the
/// simulation is not run.
BuiltScenario build_simulation(const ScenarioConfig& cfg, sim::TraceOptions trace = {});

}  // namespace seg6::scenario
