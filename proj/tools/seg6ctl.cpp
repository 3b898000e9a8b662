// seg6ctl: run SRv6 dataplane scenarios and experiments.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seg6/commands.hpp"

namespace {

using seg6::cli::Format;
using seg6::cli::Report;
using seg6::cli::RunOptions;

struct Common {
  std::string scenario;
  uint64_t seed = 0;
  double duration_ms = 0;
  std::string out;
  std::string format = "text";
};

void add_common(CLI::App* cmd, Common& c, bool needs_scenario = true) {
  if (needs_scenario) {
    cmd->add_option("scenario", c.scenario, "Scenario JSON file")->required();
  }
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--duration", c.duration_ms, "Override the run duration (ms)");
  cmd->add_option("--out", c.out, "Directory for trace.tsv and the report");
  cmd->add_option("--format", c.format, "Report format")
      ->check(CLI::IsMember({"text", "tsv"}));
}

RunOptions run_options(CLI::App* cmd, const Common& c) {
  RunOptions o;
  if (cmd->count("--seed") > 0) o.overrides.seed = c.seed;
  if (cmd->count("--duration") > 0) o.overrides.duration_ms = c.duration_ms;
  o.out_dir = c.out;
  o.format = c.format == "tsv" ? Format::kTsv : Format::kText;
  return o;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SRv6 programmable dataplane simulator"};
  app.require_subcommand(1);

  Common run_c, owd_c, hyb_c, tr_c, bench_c;
  auto* run = app.add_subcommand("run", "Run a scenario for its duration");
  add_common(run, run_c);

  auto* owd = app.add_subcommand("owd", "One-way delay monitoring experiment");
  add_common(owd, owd_c);
  uint32_t ratio = 0;
  uint64_t packets = 0;
  owd->add_option("--ratio", ratio, "Probe one packet out of N")->check(CLI::PositiveNumber);
  owd->add_option("--packets", packets, "Override generator packet counts");

  auto* hybrid = app.add_subcommand("hybrid", "Hybrid access aggregation experiment");
  add_common(hybrid, hyb_c);
  std::string compensation;
  hybrid->add_option("--compensation", compensation, "Delay compensation")
      ->check(CLI::IsMember({"on", "off"}));

  auto* tr = app.add_subcommand("traceroute", "ECMP-aware traceroute");
  add_common(tr, tr_c);
  seg6::cli::TracerouteRequest req;
  std::vector<std::string> no_oamp;
  double timeout_ms = 3000;
  tr->add_option("--src", req.src, "Source node id")->required();
  tr->add_option("--target", req.target, "Target address or node id")->required();
  tr->add_option("--no-oamp", no_oamp, "Node ids whose End.OAMP SID is removed");
  tr->add_option("--flow-port", req.options.src_port, "Probe UDP source port (flow key)");
  tr->add_option("--timeout", timeout_ms, "Per-probe timeout (ms)");

  auto* bench = app.add_subcommand("bench", "Pipeline throughput per endpoint function");
  add_common(bench, bench_c, false);
  std::string functions;
  seg6::cli::BenchOptions bopts;
  bench->add_option("--functions", functions, "Comma-separated function list");
  bench->add_option("--packets", bopts.packets, "Packets per function");
  bench->add_option("--batch", bopts.batch, "Packets per timed batch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return seg6::cli::exit_code::kConfigError;
  }

  Report report;
  Format format = Format::kText;
  try {
    if (run->parsed()) {
      auto o = run_options(run, run_c);
      format = o.format;
      report = seg6::cli::cmd_run(seg6::scenario::load_scenario(run_c.scenario), o);
    } else if (owd->parsed()) {
      auto o = run_options(owd, owd_c);
      format = o.format;
      if (owd->count("--ratio") > 0) o.overrides.dm_ratio = ratio;
      if (owd->count("--packets") > 0) o.overrides.packet_count = packets;
      report = seg6::cli::cmd_owd(seg6::scenario::load_scenario(owd_c.scenario), o);
    } else if (hybrid->parsed()) {
      auto o = run_options(hybrid, hyb_c);
      format = o.format;
      if (!compensation.empty()) o.overrides.compensation = compensation == "on";
      report = seg6::cli::cmd_hybrid(seg6::scenario::load_scenario(hyb_c.scenario), o);
    } else if (tr->parsed()) {
      auto o = run_options(tr, tr_c);
      format = o.format;
      o.overrides.disable_oamp.insert(no_oamp.begin(), no_oamp.end());
      req.options.timeout_ns = static_cast<uint64_t>(timeout_ms * 1e6);
      report = seg6::cli::cmd_traceroute(seg6::scenario::load_scenario(tr_c.scenario), req, o);
    } else {
      format = bench_c.format == "tsv" ? Format::kTsv : Format::kText;
      bopts.functions = split(functions);
      report = seg6::cli::cmd_bench(bopts);
    }
  } catch (const seg6::scenario::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return seg6::cli::exit_code::kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return seg6::cli::exit_code::kConfigError;
  }
  seg6::cli::write_report(std::cout, report, format);
  if (report.exit_code == seg6::cli::exit_code::kRuntimeAnomaly) {
    std::cerr << "runtime anomaly, see report\n";
  }
  return report.exit_code;
}
