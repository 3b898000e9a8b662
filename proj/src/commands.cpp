#include "seg6/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "seg6/pipeline.hpp"

namespace seg6::cli {

namespace fs = std::filesystem;

void Report::add(std::string name, double value, std::string unit) {
  metrics.push_back({std::move(name), value, std::move(unit)});
}

const Metric* Report::find(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

double Report::value(const std::string& name) const {
  const Metric* m = find(name);
  if (m == nullptr) throw std::out_of_range("no metric " + name);
  return m->value;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string ms(uint64_t ns) { return fmt(static_cast<double>(ns) / 1e6); }

}  // namespace

void write_report(std::ostream& os, const Report& r, Format format) {
  if (format == Format::kTsv) {
    os << "experiment\t" << r.experiment << '\n';
    os << "scenario\t" << r.scenario << '\n';
    os << "config_hash\t" << r.config_hash << '\n';
    for (const auto& [k, v] : r.parameters) os << "param\t" << k << '\t' << v << '\n';
    for (const auto& m : r.metrics) {
      os << "metric\t" << m.name << '\t' << fmt(m.value) << '\t' << m.unit << '\n';
    }
    if (!r.table_header.empty()) {
      os << "columns";
      for (const auto& h : r.table_header) os << '\t' << h;
      os << '\n';
    }
    for (const auto& row : r.table) {
      os << "row";
      for (const auto& c : row) os << '\t' << c;
      os << '\n';
    }
    if (!r.trace_path.empty()) os << "trace\t" << r.trace_path << '\n';
    return;
  }
  os << "experiment   " << r.experiment << '\n';
  if (!r.scenario.empty()) os << "scenario     " << r.scenario << '\n';
  if (!r.config_hash.empty()) os << "config hash  " << r.config_hash << '\n';
  for (const auto& [k, v] : r.parameters) os << "  " << k << " = " << v << '\n';
  size_t w = 0;
  for (const auto& m : r.metrics) w = std::max(w, m.name.size());
  for (const auto& m : r.metrics) {
    os << "  " << std::left << std::setw(static_cast<int>(w)) << m.name << "  " << fmt(m.value);
    if (!m.unit.empty()) os << ' ' << m.unit;
    os << '\n';
  }
  if (!r.table.empty()) {
    std::vector<size_t> widths(r.table_header.size(), 0);
    for (size_t i = 0; i < r.table_header.size(); ++i) widths[i] = r.table_header[i].size();
    for (const auto& row : r.table) {
      for (size_t i = 0; i < row.size() && i < widths.size(); ++i) {
        widths[i] = std::max(widths[i], row[i].size());
      }
    }
    auto line = [&](const std::vector<std::string>& cells) {
      os << "  ";
      for (size_t i = 0; i < cells.size(); ++i) {
        if (i + 1 < cells.size() && i < widths.size()) {
          os << std::left << std::setw(static_cast<int>(widths[i])) << cells[i] << "  ";
        } else {
          os << cells[i];
        }
      }
      os << '\n';
    };
    os << '\n';
    line(r.table_header);
    for (const auto& row : r.table) line(row);
  }
  if (!r.trace_path.empty()) os << "trace        " << r.trace_path << '\n';
}

namespace {

/// Output files for one command; the trace is streamed while running.
class Outputs {
 public:
  Outputs(const RunOptions& opts, bool keep_trace) : opts_(opts) {
    trace_opts_.retain = keep_trace;
    if (opts.out_dir.empty()) return;
    fs::create_directories(opts.out_dir);
    trace_path_ = (fs::path(opts.out_dir) / "trace.tsv").string();
    trace_.open(trace_path_, std::ios::binary | std::ios::trunc);
    if (!trace_) throw std::runtime_error("cannot write " + trace_path_);
    trace_opts_.stream = &trace_;
  }

  sim::TraceOptions trace_options() const { return trace_opts_; }

  void finish(Report& r) {
    if (opts_.out_dir.empty()) return;
    trace_.close();
    r.trace_path = trace_path_;
    const char* ext = opts_.format == Format::kTsv ? "report.tsv" : "report.txt";
    std::ofstream out(fs::path(opts_.out_dir) / ext, std::ios::binary | std::ios::trunc);
    write_report(out, r, opts_.format);
  }

 private:
  const RunOptions& opts_;
  sim::TraceOptions trace_opts_;
  std::string trace_path_;
  std::ofstream trace_;
};

Report base_report(const char* experiment, const scenario::ScenarioConfig& cfg) {
  Report r;
  r.experiment = experiment;
  r.scenario = cfg.name;
  r.config_hash = cfg.config_hash;
  r.parameters.emplace_back("seed", std::to_string(cfg.seed));
  r.parameters.emplace_back("duration_ms", fmt(cfg.duration_ms));
  return r;
}

uint64_t duration_ns(const scenario::ScenarioConfig& cfg) {
  return static_cast<uint64_t>(std::llround(cfg.duration_ms * 1e6));
}

void add_counters(Report& r, const sim::SimStats& s) {
  const uint64_t injected = s.total_injected();
  const uint64_t delivered = s.total_delivered();
  const uint64_t dropped = s.total_dropped();
  r.add("packets_injected", static_cast<double>(injected), "packets");
  r.add("packets_forwarded", static_cast<double>(s.total_forwarded()), "hops");
  r.add("packets_delivered", static_cast<double>(delivered), "packets");
  r.add("packets_dropped", static_cast<double>(dropped), "packets");
  r.add("packets_in_flight", static_cast<double>(injected - delivered - dropped), "packets");
  r.add("events_emitted", static_cast<double>(s.events_emitted), "events");
  r.add("events_dropped", static_cast<double>(s.events_dropped), "events");
}

bool drop_storm(const sim::SimStats& s) {
  return s.total_injected() > 0 && 2 * s.total_dropped() > s.total_injected();
}

}  // namespace

// ---------------------------------------------------------------------------

Report cmd_run(scenario::ScenarioConfig cfg, const RunOptions& opts) {
  scenario::apply_overrides(cfg, opts.overrides);
  Outputs out(opts, false);
  auto built = scenario::build_simulation(cfg, out.trace_options());
  const sim::SimStats s = built.sim->run_until(duration_ns(cfg));

  Report r = base_report("run", cfg);
  add_counters(r, s);
  r.table_header = {"node", "injected", "forwarded", "delivered", "dropped"};
  for (size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& c = s.nodes[i];
    r.table.push_back({built.sim->node(static_cast<NodeId>(i)).name(), std::to_string(c.injected),
                       std::to_string(c.forwarded), std::to_string(c.delivered),
                       std::to_string(c.dropped)});
  }
  if (drop_storm(s)) r.exit_code = exit_code::kRuntimeAnomaly;
  out.finish(r);
  return r;
}

Report cmd_owd(scenario::ScenarioConfig cfg, const RunOptions& opts) {
  scenario::apply_overrides(cfg, opts.overrides);
  Outputs out(opts, false);
  auto built = scenario::build_simulation(cfg, out.trace_options());
  if (built.collectors.empty()) {
    throw scenario::ConfigError("/daemons", "owd needs an owd_collector daemon");
  }
  const sim::SimStats s = built.sim->run_until(duration_ns(cfg));

  std::vector<usecases::DelayRecord> records;
  uint64_t malformed = 0;
  for (auto* c : built.collectors) {
    c->flush(*built.sim);
    records.insert(records.end(), c->records().begin(), c->records().end());
    malformed += c->malformed();
  }

  Report r = base_report("owd", cfg);
  if (opts.overrides.dm_ratio) {
    r.parameters.emplace_back("ratio", "1:" + std::to_string(*opts.overrides.dm_ratio));
  }
  r.add("probes", static_cast<double>(records.size()), "probes");
  usecases::DelaySummary sum;
  if (!records.empty()) sum = usecases::summarize(records);
  r.add("owd_mean", sum.mean_ns / 1e6, "ms");
  r.add("owd_min", static_cast<double>(sum.min_ns) / 1e6, "ms");
  r.add("owd_max", static_cast<double>(sum.max_ns) / 1e6, "ms");
  r.add("owd_p99", static_cast<double>(sum.p99_ns) / 1e6, "ms");
  r.add("owd_mean_ns", sum.mean_ns, "ns");
  r.add("owd_p99_ns", static_cast<double>(sum.p99_ns), "ns");
  r.add("malformed_events", static_cast<double>(malformed), "events");
  add_counters(r, s);

  std::map<uint32_t, std::vector<usecases::DelayRecord>> by_path;
  for (const auto& d : records) by_path[d.path_id].push_back(d);
  r.table_header = {"path", "probes", "mean_ms", "min_ms", "max_ms", "p99_ms"};
  for (const auto& [path, recs] : by_path) {
    const auto ps = usecases::summarize(recs);
    r.table.push_back({std::to_string(path), std::to_string(ps.count), fmt(ps.mean_ns / 1e6),
                       ms(static_cast<uint64_t>(ps.min_ns)), ms(static_cast<uint64_t>(ps.max_ns)),
                       ms(static_cast<uint64_t>(ps.p99_ns))});
  }
  if (records.empty()) r.exit_code = exit_code::kPartial;
  if (drop_storm(s)) r.exit_code = exit_code::kRuntimeAnomaly;
  out.finish(r);
  return r;
}

Report cmd_hybrid(scenario::ScenarioConfig cfg, const RunOptions& opts) {
  scenario::apply_overrides(cfg, opts.overrides);
  Outputs out(opts, true);
  auto built = scenario::build_simulation(cfg, out.trace_options());
  if (built.probers.empty()) throw scenario::ConfigError("/daemons", "hybrid needs a twd_prober");
  if (built.streams.empty()) throw scenario::ConfigError("/generators", "hybrid needs a flow");
  sim::Simulation& sim = *built.sim;
  const sim::UdpStream& flow = built.streams.front();
  const auto sink = sim.node_by_address(flow.dst);
  if (!sink) throw scenario::ConfigError("/generators/0/dst", "no node owns this address");
  const usecases::TwdProber& prober = *built.probers.front();

  const sim::SimStats s = sim.run_until(duration_ns(cfg));

  Report r = base_report("hybrid", cfg);
  r.parameters.emplace_back("compensation", prober.config().compensation ? "on" : "off");

  double max_rtt_ms = 0;
  for (const auto& l : prober.config().links) {
    for (const auto& spec : cfg.links) {
      if (spec.id == sim.link(l.link).name()) max_rtt_ms = std::max(max_rtt_ms, spec.rtt_mean_ms);
    }
  }
  sim::GoodputOptions gopts;
  gopts.stall_penalty_ns = static_cast<uint64_t>(std::llround(max_rtt_ms * 1e6));
  r.parameters.emplace_back("stall_penalty_ms", fmt(max_rtt_ms));

  const NodeId box = prober.config().node;
  for (size_t i = 0; i < prober.config().links.size(); ++i) {
    const sim::Link& l = sim.link(prober.config().links[i].link);
    r.add("link_" + l.name() + "_packets", static_cast<double>(l.packets_sent(box)), "packets");
  }
  for (size_t i = 0; i < prober.config().links.size(); ++i) {
    const LinkId id = prober.config().links[i].link;
    uint64_t n = 0;
    for (const auto& t : sim.trace()) {
      if (t.node == box && t.direction == sim::TraceDirection::kEgress && t.link == id &&
          t.flow == flow.flow_id) {
        ++n;
      }
    }
    r.add("link_" + sim.link(id).name() + "_flow_packets", static_cast<double>(n), "packets");
  }
  const auto arrivals = sim::sink_records(sim.trace(), flow.flow_id, *sink);
  std::vector<uint32_t> seqs;
  for (const auto& a : arrivals) seqs.push_back(a.seq);
  double reorder = 0;
  double goodput = 0;
  if (arrivals.size() >= 2) {
    reorder = sim::reorder_fraction(seqs);
    goodput = sim::goodput_estimate(sim.trace(), flow.flow_id, *sink, gopts);
  } else {
    r.exit_code = exit_code::kPartial;
  }
  r.add("flow_packets_received", static_cast<double>(arrivals.size()), "packets");
  r.add("reorder_fraction", reorder, "ratio");
  r.add("gap_events", static_cast<double>(sim::count_gap_events(seqs, gopts.gap_threshold)),
        "events");
  r.add("goodput_estimate", goodput / 1e6, "Mbit/s");
  r.add("twd_samples", static_cast<double>(prober.samples().size()), "samples");
  const auto final_delays = prober.compensator().applied_delays();
  for (size_t i = 0; i < prober.config().links.size(); ++i) {
    const sim::Link& l = sim.link(prober.config().links[i].link);
    const auto e = prober.compensator().ewma(i);
    r.add("twd_ewma_" + l.name(), e ? *e / 1e6 : 0.0, "ms");
    r.add("applied_delay_" + l.name(),
          prober.config().compensation ? static_cast<double>(final_delays[i]) / 1e6 : 0.0, "ms");
  }
  add_counters(r, s);

  r.table_header = {"time_ms", "link", "applied_delay_ms"};
  for (const auto& c : prober.changes()) {
    r.table.push_back({ms(c.time_ns), sim.link(prober.config().links[c.link].link).name(),
                       ms(c.delay_ns)});
  }
  if (drop_storm(s)) r.exit_code = exit_code::kRuntimeAnomaly;
  out.finish(r);
  return r;
}

Report cmd_traceroute(scenario::ScenarioConfig cfg, const TracerouteRequest& req,
                      const RunOptions& opts) {
  scenario::apply_overrides(cfg, opts.overrides);
  Outputs out(opts, false);
  auto built = scenario::build_simulation(cfg, out.trace_options());
  sim::Simulation& sim = *built.sim;
  const auto src = sim.find_node(req.src);
  if (!src) throw scenario::ConfigError("--src", "unknown node '" + req.src + "'");
  Ipv6Address target;
  if (auto n = sim.find_node(req.target)) {
    target = sim.node(*n).address();
  } else {
    try {
      target = Ipv6Address::parse(req.target);
    } catch (const std::exception&) {
      throw scenario::ConfigError("--target", "not a node id or address: '" + req.target + "'");
    }
  }

  const auto res = usecases::multipath_traceroute(sim, *src, target, built.oamp_sids, req.options);

  Report r = base_report("traceroute", cfg);
  r.parameters.emplace_back("src", req.src);
  r.parameters.emplace_back("target", target.to_string());
  r.parameters.emplace_back("flow_src_port", std::to_string(req.options.src_port));
  r.add("hops", static_cast<double>(res.hops.size()), "hops");
  r.add("probes", static_cast<double>(res.probes), "probes");
  r.add("timeouts", static_cast<double>(res.timeouts), "probes");
  r.add("reached", res.reached ? 1 : 0, "bool");
  r.table_header = {"depth", "hop", "node", "method", "nexthops"};
  for (const auto& h : res.hops) {
    std::string nhs;
    for (const auto& n : h.nexthops) nhs += (nhs.empty() ? "" : ",") + n.to_string();
    if (nhs.empty()) nhs = "-";
    const auto node = sim.node_by_address(h.address);
    r.table.push_back({std::to_string(h.depth), h.address.to_string(),
                       node ? sim.node(*node).name() : "?", usecases::to_string(h.method), nhs});
  }
  if (!res.reached) r.exit_code = exit_code::kPartial;
  out.finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Bench

namespace {

struct BenchSetup {
  std::unique_ptr<Node> node;
  std::map<std::string, Packet> templates;
};

BenchSetup make_bench_setup() {
  const auto router = Ipv6Address::parse("fc00:100::1");
  const auto sink = Ipv6Address::parse("fc00:200::1");
  const auto source = Ipv6Address::parse("fc00:300::1");
  BenchSetup b;
  b.node = std::make_unique<Node>(0, "bench", router);
  Node& n = *b.node;
  const Nexthop out{Ipv6Address::parse("fc00:200::fe"), 0};
  n.fib().insert({Prefix::parse("fc00:200::/64"), {out}, kMainTable});
  n.fib().insert({Prefix::parse("fc00:200::/64"), {out}, 100});
  n.fib().insert({Prefix::parse("::/0"), {out}, kMainTable});

  const std::pair<const char*, const char*> sids[] = {
      {"end_native", "fc00:100::10"},    {"end_program_noop", "fc00:100::11"},
      {"end_t_program", "fc00:100::12"}, {"tag_increment", "fc00:100::13"},
      {"add_tlv", "fc00:100::14"}};
  usecases::install_noop(n, "noop");
  usecases::install_end_t_program(n, "end_t", 100);
  usecases::install_tag_increment(n, "tag_increment");
  usecases::install_add_tlv(n, "add_tlv");
  n.add_local_sid({Ipv6Address::parse(sids[0].second), behavior::End{}});
  n.add_local_sid({Ipv6Address::parse(sids[1].second), behavior::EndBpf{"noop"}});
  n.add_local_sid({Ipv6Address::parse(sids[2].second), behavior::EndBpf{"end_t"}});
  n.add_local_sid({Ipv6Address::parse(sids[3].second), behavior::EndBpf{"tag_increment"}});
  n.add_local_sid({Ipv6Address::parse(sids[4].second), behavior::EndBpf{"add_tlv"}});

  auto make = [&](const Ipv6Address& sid, bool plain) {
    Packet p = make_udp_packet(source, sid, 4000, 5000, Bytes(64, 0xab));
    const Ipv6Address path[] = {sid, sink};
    p.layers[0].srhs.push_back(Srh::from_path(path));
    if (plain) {
      // same size, already past the SID: routed on the final segment
      p.layers[0].srhs[0].segments_left = 0;
      p.outer().dst = sink;
    }
    relink_next_headers(p);
    update_lengths(p);
    return p;
  };
  b.templates["plain"] = make(Ipv6Address::parse(sids[0].second), true);
  for (const auto& [name, sid] : sids) b.templates[name] = make(Ipv6Address::parse(sid), false);
  return b;
}

}  // namespace

Report cmd_bench(const BenchOptions& opts) {
  std::vector<std::string> fns = opts.functions;
  if (fns.empty()) fns.assign(std::begin(kBenchFunctions), std::end(kBenchFunctions));
  BenchSetup setup = make_bench_setup();
  for (const auto& f : fns) {
    if (setup.templates.count(f) == 0) throw std::invalid_argument("unknown bench function " + f);
  }
  const size_t batch = std::max<size_t>(opts.batch, 1);
  const uint64_t rounds = std::max<uint64_t>(opts.packets / batch, 1);
  using clock = std::chrono::steady_clock;

  std::map<std::string, double> best_ns;
  std::map<std::string, uint64_t> forwarded;
  for (const auto& f : fns) best_ns[f] = std::numeric_limits<double>::infinity();
  std::vector<Packet> work;
  work.reserve(batch);

  // one untimed warm-up round, then interleaved rounds with rotating order
  for (uint64_t round = 0; round <= rounds; ++round) {
    for (size_t k = 0; k < fns.size(); ++k) {
      const std::string& f = fns[(k + round) % fns.size()];
      const Packet& tmpl = setup.templates[f];
      work.assign(batch, tmpl);
      uint64_t ok = 0;
      const auto t0 = clock::now();
      for (Packet& p : work) {
        const ForwardingDecision d = process_ingress(*setup.node, p, 0);
        ok += std::holds_alternative<Forward>(d) ? 1 : 0;
      }
      const double ns = std::chrono::duration<double, std::nano>(clock::now() - t0).count();
      if (round == 0) continue;
      best_ns[f] = std::min(best_ns[f], ns);
      forwarded[f] += ok;
    }
  }

  Report r;
  r.experiment = "bench";
  r.parameters.emplace_back("packets_per_function", std::to_string(rounds * batch));
  r.parameters.emplace_back("batch", std::to_string(batch));
  r.parameters.emplace_back("estimator", "best batch");
  const double plain_pps =
      best_ns.count("plain") != 0 ? static_cast<double>(batch) * 1e9 / best_ns["plain"] : 0;
  r.table_header = {"function", "pps", "relative_to_plain", "forwarded"};
  for (const auto& f : fns) {
    const double pps = static_cast<double>(batch) * 1e9 / best_ns[f];
    r.add("pps_" + f, pps, "packets/s");
    if (plain_pps > 0) r.add("relative_" + f, pps / plain_pps, "ratio");
    r.table.push_back({f, fmt(std::round(pps)), plain_pps > 0 ? fmt(pps / plain_pps) : "-",
                       std::to_string(forwarded[f])});
    if (forwarded[f] != rounds * batch) r.exit_code = exit_code::kRuntimeAnomaly;
  }
  return r;
}

}  // namespace seg6::cli
