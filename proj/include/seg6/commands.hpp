#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "seg6/scenario.hpp"
#include "seg6/usecases.hpp"

namespace seg6::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kPartial = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kRuntimeAnomaly = 3;
}  // namespace exit_code

struct Metric {
  std::string name;
  double value = 0;
  std::string unit;
};

struct Report {
  std::string experiment;
  std::string scenario;
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<Metric> metrics;
  std::vector<std::string> table_header;
  std::vector<std::vector<std::string>> table;
  std::string trace_path;
  int exit_code = exit_code::kOk;

  void add(std::string name, double value, std::string unit);
  const Metric* find(const std::string& name) const;
  /// Throws std::out_of_range for a missing metric.
  double value(const std::string& name) const;
};

enum class Format { kText, kTsv };

void write_report(std::ostream& os, const Report& r, Format format);

struct RunOptions {
  scenario::Overrides overrides;
  std::string out_dir;  // empty: nothing written
  Format format = Format::kText;
};

/// Each command throws scenario::ConfigError for configuration problems.
Report cmd_run(scenario::ScenarioConfig cfg, const RunOptions& opts);
Report cmd_owd(scenario::ScenarioConfig cfg, const RunOptions& opts);
Report cmd_hybrid(scenario::ScenarioConfig cfg, const RunOptions& opts);

struct TracerouteRequest {
  std::string src;     // node id
  std::string target;  // address or node id
  usecases::TracerouteOptions options;
};

Report cmd_traceroute(scenario::ScenarioConfig cfg, const TracerouteRequest& req,
                      const RunOptions& opts);

inline constexpr const char* kBenchFunctions[] = {"plain",          "end_native",
                                                  "end_program_noop", "end_t_program",
                                                  "tag_increment",  "add_tlv"};

struct BenchOptions {
  std::vector<std::string> functions;  // empty: all
  uint64_t packets = 200'000;           // per function
  size_t batch = 1024;
};

/// Packets per second of the in-process pipeline for each function, best
/// batch over interleaved rounds, plus throughput relative to plain
/// forwarding. Throws std::invalid_argument for an unknown function.
Report cmd_bench(const BenchOptions& opts);

}  // namespace seg6::cli
