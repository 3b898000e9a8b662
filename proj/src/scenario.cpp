#include "seg6/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seg6/behaviors.hpp"

namespace seg6::scenario {

namespace {

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string child(const std::string& path, size_t index) {
  return path + "/" + std::to_string(index);
}

const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(child(path, key), "missing required key");
  return *it;
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

uint64_t as_uint(const Json& v, const std::string& path, uint64_t max = UINT64_MAX) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
    throw ConfigError(path, "expected a non-negative integer");
  }
  const uint64_t x = v.get<uint64_t>();
  if (x > max) throw ConfigError(path, "value out of range");
  return x;
}

bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const Json& obj, const std::string& key, const std::string& path) {
  return as_string(require(obj, key, path), child(path, key));
}

template <typename T, typename F>
T get_or(const Json& obj, const std::string& key, const std::string& path, T fallback, F conv) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return static_cast<T>(conv(*it, child(path, key)));
}

double number_or(const Json& obj, const std::string& key, const std::string& path, double d) {
  return get_or<double>(obj, key, path, d, as_number);
}

uint64_t uint_or(const Json& obj, const std::string& key, const std::string& path, uint64_t d,
                 uint64_t max = UINT64_MAX) {
  return get_or<uint64_t>(obj, key, path, d,
                          [max](const Json& v, const std::string& p) { return as_uint(v, p, max); });
}

Ipv6Address as_address(const Json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  try {
    return Ipv6Address::parse(s);
  } catch (const std::exception&) {
    throw ConfigError(path, "invalid IPv6 address '" + s + "'");
  }
}

Prefix as_prefix(const Json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  try {
    return Prefix::parse(s);
  } catch (const std::exception&) {
    throw ConfigError(path, "invalid IPv6 prefix '" + s + "'");
  }
}

const Json& require_array(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_array()) throw ConfigError(child(path, key), "expected an array");
  return v;
}

std::vector<Item> items(const Json& doc, const std::string& key) {
  std::vector<Item> out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  const std::string path = "/" + key;
  if (!it->is_array()) throw ConfigError(path, "expected an array");
  for (size_t i = 0; i < it->size(); ++i) {
    const Json& e = (*it)[i];
    if (!e.is_object()) throw ConfigError(child(path, i), "expected an object");
    out.push_back({child(path, i), e});
  }
  return out;
}

std::vector<Ipv6Address> address_list(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty address list");
  std::vector<Ipv6Address> out;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(as_address(v[i], child(path, i)));
  return out;
}

Srh srh_from(const Json& obj, const std::string& path) {
  const auto segs = address_list(require(obj, "segments", path), child(path, "segments"));
  if (segs.size() > 255) throw ConfigError(child(path, "segments"), "too many segments");
  return Srh::from_path(segs);
}

// ---------------------------------------------------------------------------

class Builder {
 public:
  Builder(const ScenarioConfig& cfg, sim::TraceOptions trace) : cfg_(cfg) {
    out_.sim = std::make_unique<sim::Simulation>(cfg.seed);
    out_.sim->set_trace_options(trace);
  }

  BuiltScenario build() {
    for (const auto& n : cfg_.nodes) sim().add_node(n.id, n.address);
    for (size_t i = 0; i < cfg_.links.size(); ++i) {
      const LinkSpec& l = cfg_.links[i];
      sim().add_link(sim::link_from_rtt(l.id, node_id(l.a, ""), node_id(l.b, ""),
                                        l.bandwidth_mbps, l.rtt_mean_ms, l.rtt_stddev_ms));
    }
    for (const auto& r : cfg_.routes) add_route(r);
    for (const auto& s : cfg_.sids) add_sid(s);
    for (const auto& t : cfg_.transit) add_transit(t);
    for (const auto& d : cfg_.daemons) add_daemon(d);
    for (const auto& g : cfg_.generators) {
      sim::UdpStream s;
      s.src = node_id(g.src, "");
      s.dst = g.dst;
      s.rate_pps = g.rate_pps;
      s.payload_size = g.payload_size;
      s.count = g.count;
      s.start_ns = static_cast<uint64_t>(std::llround(g.start_ms * 1e6));
      s.flow_id = g.flow;
      s.src_port = g.src_port;
      s.flow_label = g.flow_label;
      sim().add_stream(s);
      out_.streams.push_back(s);
    }
    return std::move(out_);
  }

 private:
  sim::Simulation& sim() { return *out_.sim; }

  NodeId node_id(const std::string& id, const std::string& path) {
    auto n = sim().find_node(id);
    if (!n) throw ConfigError(path, "unknown node '" + id + "'");
    return *n;
  }

  Nexthop nexthop(NodeId from, const Json& nh, const std::string& path) {
    const std::string via = get_string(nh, "via", path);
    const std::string link = get_string(nh, "link", path);
    const NodeId v = node_id(via, child(path, "via"));
    auto l = sim().find_link(link);
    if (!l) throw ConfigError(child(path, "link"), "unknown link '" + link + "'");
    const sim::Link& lk = sim().link(*l);
    if (!lk.attached(from) || lk.peer(from) != v) {
      throw ConfigError(child(path, "link"),
                        "link '" + link + "' does not connect " + sim().node(from).name() +
                            " and " + via);
    }
    return Nexthop{sim().node(v).address(), *l};
  }

  void add_route(const Item& it) {
    const NodeId n = node_id(get_string(it.body, "node", it.path), child(it.path, "node"));
    FibEntry e;
    e.prefix = as_prefix(require(it.body, "prefix", it.path), child(it.path, "prefix"));
    e.table_id = static_cast<TableId>(uint_or(it.body, "table", it.path, kMainTable, UINT32_MAX));
    const Json& nhs = require_array(it.body, "nexthops", it.path);
    if (nhs.empty()) throw ConfigError(child(it.path, "nexthops"), "empty nexthop list");
    for (size_t i = 0; i < nhs.size(); ++i) {
      e.nexthops.push_back(nexthop(n, nhs[i], child(child(it.path, "nexthops"), i)));
    }
    sim().node(n).fib().insert(std::move(e));
  }

  /// Installs a program on the node, returns its instance name.
  std::string install_program(Node& node, const Json& body, const std::string& path) {
    const std::string type = get_string(body, "program", path);
    const std::string name = body.contains("name") ? get_string(body, "name", path) : type;
    static const Json kEmpty = Json::object();
    const Json& params = body.contains("params") ? body["params"] : kEmpty;
    const std::string pp = child(path, "params");
    if (!params.is_object()) throw ConfigError(pp, "expected an object");
    if (node.find_program(name) != nullptr) {
      throw ConfigError(path, "program instance '" + name + "' already installed on " +
                                  node.name() + "; set a distinct \"name\"");
    }
    try {
      if (type == "noop") {
        usecases::install_noop(node, name);
      } else if (type == "end_t") {
        usecases::install_end_t_program(
            node, name, static_cast<TableId>(uint_or(params, "table", pp, 0, UINT32_MAX)));
      } else if (type == "tag_increment") {
        usecases::install_tag_increment(node, name);
      } else if (type == "add_tlv") {
        usecases::install_add_tlv(node, name);
      } else if (type == "dm_transit") {
        usecases::DmTransitConfig c;
        c.ratio = static_cast<uint32_t>(uint_or(params, "ratio", pp, 100, UINT32_MAX));
        if (c.ratio == 0) throw ConfigError(child(pp, "ratio"), "must be at least 1");
        c.path = address_list(require(params, "segments", pp), child(pp, "segments"));
        c.controller = as_address(require(params, "controller", pp), child(pp, "controller"));
        c.controller_port = static_cast<uint16_t>(
            uint_or(params, "controller_port", pp, usecases::kCollectorPort, UINT16_MAX));
        c.route_id = static_cast<uint32_t>(uint_or(params, "route_id", pp, 0, UINT32_MAX));
        usecases::install_dm_transit(node, name, c);
      } else if (type == "end_dm") {
        usecases::EndDmConfig c;
        c.path_id = static_cast<uint32_t>(uint_or(params, "path_id", pp, 0, UINT32_MAX));
        c.table = static_cast<TableId>(uint_or(params, "table", pp, 0, UINT32_MAX));
        usecases::install_end_dm(node, name, c);
      } else if (type == "wrr") {
        usecases::WrrConfig c;
        const Json& paths = require_array(params, "paths", pp);
        for (size_t i = 0; i < paths.size(); ++i) {
          const auto segs = address_list(paths[i], child(child(pp, "paths"), i));
          c.paths.push_back(Srh::from_path(segs));
        }
        const Json& w = require_array(params, "weights", pp);
        for (size_t i = 0; i < w.size(); ++i) {
          c.weights.push_back(
              static_cast<uint32_t>(as_uint(w[i], child(child(pp, "weights"), i), UINT32_MAX)));
        }
        if (c.weights.size() != c.paths.size()) {
          throw ConfigError(child(pp, "weights"), "need one weight per path");
        }
        uint64_t total = 0;
        for (auto x : c.weights) total += x;
        if (total == 0) throw ConfigError(child(pp, "weights"), "need a positive weight");
        if (params.contains("src")) c.outer_src = as_address(params["src"], child(pp, "src"));
        usecases::install_wrr(node, name, c);
      } else if (type == "end_oamp") {
        usecases::install_end_oamp(node, name);
      } else {
        throw ConfigError(child(path, "program"), "unknown program type '" + type + "'");
      }
    } catch (const InvariantViolation& e) {
      throw ConfigError(pp, e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(pp, e.what());
    }
    return name;
  }

  void add_sid(const Item& it) {
    const NodeId n = node_id(get_string(it.body, "node", it.path), child(it.path, "node"));
    Node& node = sim().node(n);
    LocalSidEntry e;
    e.sid = as_address(require(it.body, "sid", it.path), child(it.path, "sid"));
    const std::string b = get_string(it.body, "behavior", it.path);
    const auto table = [&] {
      return static_cast<TableId>(uint_or(it.body, "table", it.path, 0, UINT32_MAX));
    };
    const auto src = [&] {
      return it.body.contains("src") ? as_address(it.body["src"], child(it.path, "src"))
                                     : Ipv6Address();
    };
    if (b == "End") {
      e.behavior = behavior::End{};
    } else if (b == "End.X") {
      e.behavior = behavior::EndX{
          nexthop(n, require(it.body, "nexthop", it.path), child(it.path, "nexthop"))};
    } else if (b == "End.T") {
      e.behavior = behavior::EndT{table()};
    } else if (b == "End.DT6") {
      e.behavior = behavior::EndDT6{table()};
    } else if (b == "End.B6") {
      e.behavior = behavior::EndB6{srh_from(it.body, it.path)};
    } else if (b == "End.B6.Encaps") {
      e.behavior = behavior::EndB6Encaps{srh_from(it.body, it.path), src()};
    } else if (b == "End.BPF") {
      const std::string type = get_string(it.body, "program", it.path);
      e.behavior = behavior::EndBpf{install_program(node, it.body, it.path)};
      if (type == "end_oamp") out_.oamp_sids[node.address()] = e.sid;
    } else {
      throw ConfigError(child(it.path, "behavior"), "unknown behavior '" + b + "'");
    }
    try {
      node.add_local_sid(std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(child(it.path, "sid"), ex.what());
    }
  }

  void add_transit(const Item& it) {
    const NodeId n = node_id(get_string(it.body, "node", it.path), child(it.path, "node"));
    Node& node = sim().node(n);
    TransitEntry e;
    e.prefix = as_prefix(require(it.body, "prefix", it.path), child(it.path, "prefix"));
    const std::string b = get_string(it.body, "behavior", it.path);
    if (b == "T.Insert") {
      e.behavior = behavior::TInsert{srh_from(it.body, it.path)};
    } else if (b == "T.Encaps") {
      const Ipv6Address src =
          it.body.contains("src") ? as_address(it.body["src"], child(it.path, "src")) : Ipv6Address();
      e.behavior = behavior::TEncaps{srh_from(it.body, it.path), src};
    } else if (b == "LWT.BPF") {
      e.behavior = behavior::LwtProgram{install_program(node, it.body, it.path)};
    } else {
      throw ConfigError(child(it.path, "behavior"), "unknown transit behavior '" + b + "'");
    }
    try {
      node.add_transit(std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(child(it.path, "prefix"), ex.what());
    }
  }

  uint64_t interval(const Json& body, const std::string& path, double default_ms) {
    const double ms = number_or(body, "interval_ms", path, default_ms);
    if (!(ms > 0)) throw ConfigError(child(path, "interval_ms"), "must be positive");
    return static_cast<uint64_t>(std::llround(ms * 1e6));
  }

  void add_daemon(const Item& it) {
    const std::string type = get_string(it.body, "type", it.path);
    const NodeId n = node_id(get_string(it.body, "node", it.path), child(it.path, "node"));
    if (type == "owd_collector") {
      const std::string ch =
          it.body.contains("channel") ? get_string(it.body, "channel", it.path) : "end_dm";
      auto d = std::make_unique<usecases::OwdCollector>(n, ch, interval(it.body, it.path, 1));
      out_.collectors.push_back(d.get());
      sim().add_daemon(std::move(d), 0);
    } else if (type == "oamp_responder") {
      const std::string ch =
          it.body.contains("channel") ? get_string(it.body, "channel", it.path) : "end_oamp";
      auto d = std::make_unique<usecases::OampResponder>(n, ch, interval(it.body, it.path, 1));
      out_.responders.push_back(d.get());
      sim().add_daemon(std::move(d), 0);
    } else if (type == "twd_prober") {
      usecases::TwdProberConfig c;
      c.node = n;
      c.interval_ns = interval(it.body, it.path, 100);
      c.alpha = number_or(it.body, "alpha", it.path, 0.3);
      if (!(c.alpha > 0 && c.alpha <= 1)) {
        throw ConfigError(child(it.path, "alpha"), "must be in (0, 1]");
      }
      c.compensation = get_or<bool>(it.body, "compensation", it.path, true, as_bool);
      c.port = static_cast<uint16_t>(uint_or(it.body, "port", it.path, usecases::kTwdPort, 65535));
      const Json& links = require_array(it.body, "links", it.path);
      if (links.empty()) throw ConfigError(child(it.path, "links"), "need at least one link");
      for (size_t i = 0; i < links.size(); ++i) {
        const std::string lp = child(child(it.path, "links"), i);
        const std::string name = get_string(links[i], "link", lp);
        auto l = sim().find_link(name);
        if (!l) throw ConfigError(child(lp, "link"), "unknown link '" + name + "'");
        if (!sim().link(*l).attached(n)) {
          throw ConfigError(child(lp, "link"), "link '" + name + "' is not attached to the node");
        }
        usecases::TwdLink tl;
        tl.link = *l;
        tl.echo_sid = as_address(require(links[i], "echo_sid", lp), child(lp, "echo_sid"));
        tl.return_sid = as_address(require(links[i], "return_sid", lp), child(lp, "return_sid"));
        c.links.push_back(tl);
      }
      auto d = std::make_unique<usecases::TwdProber>(c);
      d->attach(sim());
      out_.probers.push_back(d.get());
      sim().add_daemon(std::move(d), 0);
    } else {
      throw ConfigError(child(it.path, "type"), "unknown daemon type '" + type + "'");
    }
  }

 private:
  const ScenarioConfig& cfg_;
  BuiltScenario out_;
};

}  // namespace

const NodeSpec* ScenarioConfig::find_node(const std::string& id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::string config_hash(const Json& doc) {
  const std::string s = doc.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig parse_scenario(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("", "scenario must be a JSON object");
  ScenarioConfig cfg;
  cfg.config_hash = config_hash(doc);
  cfg.name = doc.contains("name") ? as_string(doc["name"], "/name") : "scenario";
  cfg.seed = uint_or(doc, "seed", "", 1);
  cfg.duration_ms = number_or(doc, "duration_ms", "", 1000);
  if (!(cfg.duration_ms > 0)) throw ConfigError("/duration_ms", "must be positive");

  const Json& nodes = require_array(doc, "nodes", "");
  for (size_t i = 0; i < nodes.size(); ++i) {
    const std::string p = child("/nodes", i);
    NodeSpec n;
    n.id = get_string(nodes[i], "id", p);
    n.address = as_address(require(nodes[i], "address", p), child(p, "address"));
    if (cfg.find_node(n.id)) throw ConfigError(child(p, "id"), "duplicate node id '" + n.id + "'");
    for (const auto& o : cfg.nodes) {
      if (o.address == n.address) throw ConfigError(child(p, "address"), "duplicate address");
    }
    cfg.nodes.push_back(n);
  }
  auto check_node = [&](const std::string& id, const std::string& p) {
    if (!cfg.find_node(id)) throw ConfigError(p, "unknown node '" + id + "'");
  };

  if (doc.contains("links")) {
    const Json& links = require_array(doc, "links", "");
    for (size_t i = 0; i < links.size(); ++i) {
      const std::string p = child("/links", i);
      LinkSpec l;
      l.id = get_string(links[i], "id", p);
      const Json& ends = require_array(links[i], "endpoints", p);
      if (ends.size() != 2) throw ConfigError(child(p, "endpoints"), "expected two node ids");
      l.a = as_string(ends[0], child(child(p, "endpoints"), 0));
      l.b = as_string(ends[1], child(child(p, "endpoints"), 1));
      check_node(l.a, child(child(p, "endpoints"), 0));
      check_node(l.b, child(child(p, "endpoints"), 1));
      if (l.a == l.b) throw ConfigError(child(p, "endpoints"), "endpoints must differ");
      l.bandwidth_mbps = number_or(links[i], "bandwidth_mbps", p, 1000);
      l.rtt_mean_ms = number_or(links[i], "rtt_mean_ms", p, 0);
      l.rtt_stddev_ms = number_or(links[i], "rtt_stddev_ms", p, 0);
      if (!(l.bandwidth_mbps > 0)) throw ConfigError(child(p, "bandwidth_mbps"), "must be positive");
      if (l.rtt_mean_ms < 0 || l.rtt_stddev_ms < 0) {
        throw ConfigError(p, "delays must be non-negative");
      }
      for (const auto& o : cfg.links) {
        if (o.id == l.id) throw ConfigError(child(p, "id"), "duplicate link id '" + l.id + "'");
      }
      cfg.links.push_back(l);
    }
  }

  cfg.routes = items(doc, "routes");
  cfg.sids = items(doc, "sids");
  cfg.transit = items(doc, "transit");
  cfg.daemons = items(doc, "daemons");
  for (const auto* group : {&cfg.routes, &cfg.sids, &cfg.transit, &cfg.daemons}) {
    for (const auto& it : *group) {
      const std::string p = child(it.path, "node");
      check_node(get_string(it.body, "node", it.path), p);
    }
  }

  for (const auto& it : items(doc, "generators")) {
    GeneratorSpec g;
    g.src = get_string(it.body, "src", it.path);
    check_node(g.src, child(it.path, "src"));
    g.dst = as_address(require(it.body, "dst", it.path), child(it.path, "dst"));
    g.rate_pps = number_or(it.body, "rate_pps", it.path, 1000);
    if (!(g.rate_pps > 0)) throw ConfigError(child(it.path, "rate_pps"), "must be positive");
    g.payload_size = uint_or(it.body, "payload_size", it.path, 64, 65000);
    if (g.payload_size < 8) throw ConfigError(child(it.path, "payload_size"), "must be at least 8");
    g.count = uint_or(it.body, "count", it.path, 0);
    g.start_ms = number_or(it.body, "start_ms", it.path, 0);
    g.flow = static_cast<uint32_t>(uint_or(it.body, "flow", it.path, 0, UINT32_MAX - 1));
    g.src_port = static_cast<uint16_t>(uint_or(it.body, "src_port", it.path, 10000 + g.flow, 65535));
    g.flow_label = static_cast<uint32_t>(uint_or(it.body, "flow_label", it.path, 0, 0xFFFFF));
    cfg.generators.push_back(g);
  }
  return cfg;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // nlohmann reports "... at line L, column C: ..."
    throw ConfigError("", std::string("JSON syntax error: ") + e.what());
  }
  return parse_scenario(doc);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + (e.where().empty() ? "" : ":" + e.where()),
                      std::string(e.what()).substr(e.where().empty() ? 0 : e.where().size() + 2));
  }
}

void apply_overrides(ScenarioConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.duration_ms) {
    if (!(*o.duration_ms > 0)) throw ConfigError("--duration", "must be positive");
    cfg.duration_ms = *o.duration_ms;
  }
  if (o.packet_count) {
    for (auto& g : cfg.generators) g.count = *o.packet_count;
  }
  if (o.dm_ratio) {
    if (*o.dm_ratio == 0) throw ConfigError("--ratio", "must be at least 1");
    for (auto* group : {&cfg.sids, &cfg.transit}) {
      for (auto& it : *group) {
        if (it.body.value("program", "") == "dm_transit") it.body["params"]["ratio"] = *o.dm_ratio;
      }
    }
  }
  if (o.compensation) {
    for (auto& d : cfg.daemons) {
      if (d.body.value("type", "") == "twd_prober") d.body["compensation"] = *o.compensation;
    }
  }
  for (const auto& id : o.disable_oamp) {
    if (!cfg.find_node(id)) throw ConfigError("--no-oamp", "unknown node '" + id + "'");
  }
  if (!o.disable_oamp.empty()) {
    std::vector<Item> kept;
    for (auto& it : cfg.sids) {
      const bool oamp = it.body.value("program", "") == "end_oamp";
      if (oamp && o.disable_oamp.count(it.body.value("node", "")) != 0) continue;
      kept.push_back(std::move(it));
    }
    cfg.sids = std::move(kept);
  }
}

BuiltScenario build_simulation(const ScenarioConfig& cfg, sim::TraceOptions trace) {
  Builder b(cfg, trace);
  try {
    return b.build();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  } catch (const InvariantViolation& e) {
    throw ConfigError("", e.what());
  }
}

}  // namespace seg6::scenario
