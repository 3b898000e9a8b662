#include "seg6/usecases.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "seg6/pipeline.hpp"

namespace seg6::usecases {

namespace {

Bytes be32_bytes(uint32_t v) {
  Bytes b(4);
  put_be32(b.data(), v);
  return b;
}

void append_address(Bytes& out, const Ipv6Address& a) {
  out.insert(out.end(), a.octets().begin(), a.octets().end());
}

Ipv6Address read_address(const uint8_t* p) {
  Ipv6Address::Octets o;
  std::copy(p, p + 16, o.begin());
  return Ipv6Address(o);
}

}  // namespace

// ---------------------------------------------------------------------------
// TLVs

Tlv make_dm_tlv(uint64_t tx_ns) {
  Tlv t{tlv::kDelayMeasurement, Bytes(tlv::kDelayMeasurementLength)};
  put_be64(t.value.data(), tx_ns);
  return t;
}

Tlv make_controller_tlv(const Ipv6Address& addr, uint16_t port) {
  Tlv t{tlv::kController, {}};
  append_address(t.value, addr);
  t.value.resize(tlv::kControllerLength);
  put_be16(t.value.data() + 16, port);
  return t;
}

std::optional<uint64_t> read_dm_tlv(const Srh& srh) {
  auto t = find_tlv(srh, tlv::kDelayMeasurement);
  if (!t || t->value.size() != tlv::kDelayMeasurementLength) return std::nullopt;
  return get_be64(t->value.data());
}

std::optional<std::pair<Ipv6Address, uint16_t>> read_controller_tlv(const Srh& srh) {
  auto t = find_tlv(srh, tlv::kController);
  if (!t || t->value.size() != tlv::kControllerLength) return std::nullopt;
  return std::make_pair(read_address(t->value.data()), get_be16(t->value.data() + 16));
}

Srh make_dm_srh(std::span<const Ipv6Address> path, uint64_t tx_ns, const Ipv6Address& controller,
                uint16_t port) {
  const Tlv tlvs[] = {make_dm_tlv(tx_ns), make_controller_tlv(controller, port)};
  return Srh::from_path(path, encode_tlv_region(tlvs));
}

// ---------------------------------------------------------------------------
// OWD

void install_dm_transit(Node& node, const std::string& name, const DmTransitConfig& cfg) {
  if (cfg.ratio == 0) throw std::invalid_argument("dm_transit ratio must be positive");
  if (cfg.path.size() < 2) {
    throw std::invalid_argument("dm_transit path needs the End.DM SID and a final segment");
  }
  const std::string map = name + ".counter";
  node.maps().declare(map, 4, 8);
  node.register_program(name, [cfg, map](ProgramContext& ctx) {
    const Bytes key = be32_bytes(cfg.route_id);
    Bytes value;
    uint64_t count = 0;
    if (ctx.map_get(map, key, value) == HelperStatus::kOk) count = get_be64(value.data());
    value.assign(8, 0);
    put_be64(value.data(), count + 1);
    ctx.map_put(map, key, value);
    if (count % cfg.ratio != 0) return ProgramOutcome::kOk;
    const Srh srh = make_dm_srh(cfg.path, ctx.timestamp(), cfg.controller, cfg.controller_port);
    ctx.push_encap(EncapMode::kEncaps, srh);
    return ProgramOutcome::kOk;
  });
}

Bytes encode_owd_event(const OwdEvent& ev) {
  Bytes out(kOwdEventSize);
  put_be32(out.data(), ev.path_id);
  put_be64(out.data() + 4, ev.tx_ns);
  put_be64(out.data() + 12, ev.rx_ns);
  std::copy(ev.controller.octets().begin(), ev.controller.octets().end(), out.begin() + 20);
  put_be16(out.data() + 36, ev.controller_port);
  return out;
}

std::optional<OwdEvent> decode_owd_event(std::span<const uint8_t> p) {
  if (p.size() != kOwdEventSize) return std::nullopt;
  OwdEvent ev;
  ev.path_id = get_be32(p.data());
  ev.tx_ns = get_be64(p.data() + 4);
  ev.rx_ns = get_be64(p.data() + 12);
  ev.controller = read_address(p.data() + 20);
  ev.controller_port = get_be16(p.data() + 36);
  return ev;
}

void install_end_dm(Node& node, const std::string& name, const EndDmConfig& cfg) {
  node.register_program(name, [cfg](ProgramContext& ctx) {
    const Srh* srh = ctx.packet().outer_srh();
    if (srh == nullptr) return ProgramOutcome::kDrop;
    const auto tx = read_dm_tlv(*srh);
    const auto ctrl = read_controller_tlv(*srh);
    if (!tx || !ctrl) return ProgramOutcome::kDrop;
    if (srh->segments_left > 0) return ProgramOutcome::kOk;

    OwdEvent ev{cfg.path_id, *tx, ctx.packet().meta.rx_timestamp_ns, ctrl->first, ctrl->second};
    ctx.emit_event(encode_owd_event(ev));
    ActionParams params;
    params.table = cfg.table;
    if (ctx.action(SegAction::kEndDT6, params) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    return ProgramOutcome::kRedirect;
  });
}

std::vector<DelayRecord> collect_delay_records(std::span<const EmittedEvent> events,
                                               uint64_t* malformed) {
  std::vector<DelayRecord> out;
  for (const auto& e : events) {
    auto ev = decode_owd_event(e.payload);
    if (!ev) {
      if (malformed != nullptr) ++*malformed;
      continue;
    }
    DelayRecord r;
    r.path_id = ev->path_id;
    r.tx_ns = ev->tx_ns;
    r.rx_ns = ev->rx_ns;
    r.owd_ns = static_cast<int64_t>(ev->rx_ns) - static_cast<int64_t>(ev->tx_ns);
    r.controller = ev->controller;
    r.controller_port = ev->controller_port;
    r.reporter = e.node;
    out.push_back(r);
  }
  return out;
}

DelaySummary summarize(std::span<const DelayRecord> records) {
  if (records.empty()) throw sim::InsufficientData("no delay records");
  std::vector<int64_t> v;
  v.reserve(records.size());
  double sum = 0;
  for (const auto& r : records) {
    v.push_back(r.owd_ns);
    sum += static_cast<double>(r.owd_ns);
  }
  std::sort(v.begin(), v.end());
  DelaySummary s;
  s.count = v.size();
  s.mean_ns = sum / static_cast<double>(v.size());
  s.min_ns = v.front();
  s.max_ns = v.back();
  // nearest-rank percentile
  const size_t rank = static_cast<size_t>(std::ceil(0.99 * static_cast<double>(v.size())));
  s.p99_ns = v[std::max<size_t>(rank, 1) - 1];
  return s;
}

void OwdCollector::on_tick(sim::Simulation& sim, uint64_t) { flush(sim); }

void OwdCollector::flush(sim::Simulation& sim) {
  const auto events = sim.node(node_).events(channel_).drain();
  auto recs = collect_delay_records(events, &malformed_);
  records_.insert(records_.end(), recs.begin(), recs.end());
}

// ---------------------------------------------------------------------------
// WRR

std::vector<size_t> iwrr_schedule(std::span<const uint32_t> weights) {
  uint32_t g = 0;
  for (uint32_t w : weights) g = std::gcd(g, w);
  if (g == 0) throw std::invalid_argument("iwrr needs a positive weight");
  uint32_t max_w = 0;
  for (uint32_t w : weights) max_w = std::max(max_w, w / g);
  std::vector<size_t> out;
  for (uint32_t round = 1; round <= max_w; ++round) {
    for (size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] / g >= round) out.push_back(i);
    }
  }
  return out;
}

void install_wrr(Node& node, const std::string& name, const WrrConfig& cfg) {
  if (cfg.paths.empty() || cfg.paths.size() != cfg.weights.size()) {
    throw std::invalid_argument("wrr needs one weight per path");
  }
  for (const auto& p : cfg.paths) {
    if (auto v = validate_srh(p)) throw InvariantViolation("wrr path SRH invalid: " + v->detail);
  }
  const std::string map = name + ".state";
  node.maps().declare(map, 4, 4);
  const auto schedule = iwrr_schedule(cfg.weights);
  node.register_program(name, [cfg, map, schedule](ProgramContext& ctx) {
    const Bytes key(4, 0);
    Bytes value;
    uint32_t cursor = 0;
    if (ctx.map_get(map, key, value) == HelperStatus::kOk) cursor = get_be32(value.data());
    const size_t path = schedule[cursor % schedule.size()];
    value.assign(4, 0);
    put_be32(value.data(), static_cast<uint32_t>((cursor + 1) % schedule.size()));
    if (ctx.map_put(map, key, value) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    if (ctx.push_encap(EncapMode::kEncaps, cfg.paths[path], cfg.outer_src) != HelperStatus::kOk) {
      return ProgramOutcome::kDrop;
    }
    return ProgramOutcome::kOk;
  });
}

Compensator::Compensator(size_t links, double alpha) : alpha_(alpha), ewma_(links) {
  if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("alpha must be in (0, 1]");
}

void Compensator::update(size_t link, double twd_ns) {
  auto& e = ewma_.at(link);
  e = e ? alpha_ * twd_ns + (1 - alpha_) * *e : twd_ns;
}

bool Compensator::ready() const {
  return std::all_of(ewma_.begin(), ewma_.end(), [](const auto& e) { return e.has_value(); });
}

std::vector<uint64_t> Compensator::applied_delays() const {
  std::vector<uint64_t> out(ewma_.size(), 0);
  if (!ready()) return out;
  double slowest = 0;
  for (const auto& e : ewma_) slowest = std::max(slowest, *e);
  for (size_t i = 0; i < ewma_.size(); ++i) {
    out[i] = static_cast<uint64_t>(std::llround(std::max(0.0, (slowest - *ewma_[i]) / 2)));
  }
  return out;
}

TwdProber::TwdProber(TwdProberConfig cfg)
    : cfg_(std::move(cfg)), comp_(cfg_.links.size(), cfg_.alpha), applied_(cfg_.links.size(), 0) {
  if (cfg_.links.empty()) throw std::invalid_argument("twd prober needs at least one link");
}

void TwdProber::attach(sim::Simulation& sim) {
  sim.bind_port(cfg_.node, cfg_.port, [this](sim::Simulation& s, NodeId, const Packet& p,
                                             uint64_t now) { on_reply(s, p, now); });
}

void TwdProber::on_tick(sim::Simulation& sim, uint64_t now_ns) {
  const Ipv6Address self = sim.node(cfg_.node).address();
  for (size_t i = 0; i < cfg_.links.size(); ++i) {
    const TwdLink& l = cfg_.links[i];
    const Ipv6Address path[] = {l.echo_sid, l.return_sid, self};
    Bytes payload(8, 0);
    const uint32_t id = next_probe_++;
    put_be32(payload.data(), id);
    put_be32(payload.data() + 4, static_cast<uint32_t>(i));
    Packet p = make_udp_packet(self, l.echo_sid, cfg_.port, cfg_.port, std::move(payload));
    p.layers[0].srhs.push_back(make_dm_srh(path, now_ns, self, cfg_.port));
    relink_next_headers(p);
    update_lengths(p);
    in_flight_[id] = applied_[i];
    sim.inject(cfg_.node, std::move(p), now_ns);
  }
}

void TwdProber::on_reply(sim::Simulation& sim, const Packet& p, uint64_t now_ns) {
  const Srh* srh = p.outer_srh();
  if (srh == nullptr || p.payload.size() < 8) return;
  const auto tx = read_dm_tlv(*srh);
  if (!tx || *tx > now_ns) return;
  const uint32_t id = get_be32(p.payload.data());
  const size_t link = get_be32(p.payload.data() + 4);
  auto it = in_flight_.find(id);
  if (it == in_flight_.end() || link >= cfg_.links.size()) return;
  const uint64_t raw = now_ns - *tx;
  const uint64_t twd = raw > it->second ? raw - it->second : 0;
  in_flight_.erase(it);
  samples_.push_back({now_ns, link, twd});
  comp_.update(link, static_cast<double>(twd));
  if (!cfg_.compensation) return;
  const auto delays = comp_.applied_delays();
  for (size_t i = 0; i < delays.size(); ++i) {
    if (delays[i] == applied_[i]) continue;
    applied_[i] = delays[i];
    sim.set_qdisc_delay(cfg_.node, cfg_.links[i].link, delays[i]);
    changes_.push_back({now_ns, i, delays[i]});
  }
}

// ---------------------------------------------------------------------------
// OAMP

Bytes encode_oamp_reply(const OampReply& r) {
  Bytes out(6);
  put_be32(out.data(), r.hop_id);
  put_be16(out.data() + 4, static_cast<uint16_t>(r.nexthops.size()));
  for (const auto& a : r.nexthops) append_address(out, a);
  return out;
}

std::optional<OampReply> decode_oamp_reply(std::span<const uint8_t> p) {
  if (p.size() < 6) return std::nullopt;
  OampReply r;
  r.hop_id = get_be32(p.data());
  const size_t count = get_be16(p.data() + 4);
  if (p.size() != 6 + 16 * count) return std::nullopt;
  for (size_t i = 0; i < count; ++i) r.nexthops.push_back(read_address(p.data() + 6 + 16 * i));
  return r;
}

void install_end_oamp(Node& node, const std::string& name) {
  node.register_program(name, [](ProgramContext& ctx) {
    const Srh* srh = ctx.packet().outer_srh();
    if (srh == nullptr || srh->segments.empty()) return ProgramOutcome::kDrop;
    const auto ctrl = read_controller_tlv(*srh);
    if (!ctrl) return ProgramOutcome::kDrop;
    OampReply reply;
    reply.hop_id = ctx.node_id();
    std::vector<Nexthop> nexthops;
    if (ctx.ecmp_nexthops(srh->final_segment(), nexthops) == HelperStatus::kOk) {
      for (const auto& nh : nexthops) {
        if (reply.nexthops.size() == kMaxOampNexthops) break;
        reply.nexthops.push_back(nh.address);
      }
    }
    Bytes ev = encode_oamp_reply(reply);
    append_address(ev, ctrl->first);
    ev.resize(ev.size() + 2);
    put_be16(ev.data() + ev.size() - 2, ctrl->second);
    ctx.emit_event(ev);
    return ProgramOutcome::kDrop;
  });
}

void OampResponder::on_tick(sim::Simulation& sim, uint64_t now_ns) {
  Node& n = sim.node(node_);
  for (const auto& e : n.events(channel_).drain()) {
    if (e.payload.size() < 6 + 18) continue;
    const size_t body = e.payload.size() - 18;
    const Ipv6Address ctrl = read_address(e.payload.data() + body);
    const uint16_t port = get_be16(e.payload.data() + body + 16);
    Bytes reply(e.payload.begin(), e.payload.begin() + static_cast<std::ptrdiff_t>(body));
    if (!decode_oamp_reply(reply)) continue;
    sim.inject(node_, make_udp_packet(n.address(), ctrl, kOampReplyPort, port, std::move(reply)),
               now_ns);
    ++replies_;
  }
}

Packet make_oamp_probe(const Ipv6Address& prober, uint16_t reply_port, const Ipv6Address& sid,
                       const Ipv6Address& target) {
  const Ipv6Address path[] = {sid, target};
  const Tlv tlvs[] = {make_controller_tlv(prober, reply_port)};
  Packet p = make_udp_packet(prober, sid, reply_port, kOampProbePort, Bytes(8, 0));
  p.layers[0].srhs.push_back(Srh::from_path(path, encode_tlv_region(tlvs)));
  relink_next_headers(p);
  update_lengths(p);
  return p;
}

const char* to_string(HopMethod m) noexcept {
  switch (m) {
    case HopMethod::kSource: return "source";
    case HopMethod::kOamp: return "oamp";
    case HopMethod::kIcmp: return "icmp";
    case HopMethod::kTarget: return "target";
    case HopMethod::kUnknown: return "unknown";
  }
  return "?";
}

const TraceHop* TracerouteResult::find(const Ipv6Address& a) const {
  for (const auto& h : hops) {
    if (h.address == a) return &h;
  }
  return nullptr;
}

std::vector<std::pair<Ipv6Address, Ipv6Address>> TracerouteResult::edges() const {
  std::set<std::pair<Ipv6Address, Ipv6Address>> s;
  for (const auto& h : hops) {
    for (const auto& n : h.nexthops) s.emplace(h.address, n);
  }
  return {s.begin(), s.end()};
}

namespace {

struct ProbeReply {
  Ipv6Address from;
  bool icmp = false;
  uint8_t icmp_type = 0;
  std::optional<OampReply> oamp;
};

/// Sends one probe and runs the simulation until a reply arrives or the
/// timeout expires.
std::optional<ProbeReply> probe(sim::Simulation& sim, NodeId src, Packet p,
                                const TracerouteOptions& opts) {
  std::optional<ProbeReply> got;
  const size_t h = sim.add_listener(src, [&](sim::Simulation&, NodeId, const Packet& r, uint64_t) {
    if (got) return;
    ProbeReply pr;
    pr.from = r.outer().src;
    if (r.udp) {
      if (r.udp->dst_port != opts.src_port || r.udp->src_port != kOampReplyPort) return;
      pr.oamp = decode_oamp_reply(r.payload);
      if (!pr.oamp) return;
    } else if (is_icmp_error(r)) {
      pr.icmp = true;
      pr.icmp_type = r.payload[0];
    } else {
      return;
    }
    got = pr;
  });
  const uint64_t deadline = sim.now() + opts.timeout_ns;
  sim.inject(src, std::move(p), sim.now());
  while (!got && sim.now() < deadline) {
    sim.run_until(std::min(deadline, sim.now() + opts.poll_ns));
  }
  sim.remove_listener(h);
  return got;
}

Packet udp_probe(const Ipv6Address& src, const Ipv6Address& target, uint8_t hop_limit,
                 const TracerouteOptions& opts) {
  Packet p = make_udp_packet(src, target, opts.src_port, opts.dst_port, Bytes(8, 0), hop_limit);
  p.outer().flow_label = opts.flow_label & 0xFFFFF;
  return p;
}

}  // namespace

TracerouteResult multipath_traceroute(sim::Simulation& sim, NodeId src, const Ipv6Address& target,
                                      const std::map<Ipv6Address, Ipv6Address>& oamp_sids,
                                      const TracerouteOptions& opts) {
  TracerouteResult res;
  const Node& origin = sim.node(src);
  const Ipv6Address self = origin.address();

  TraceHop first{self, 0, HopMethod::kSource, {}};
  if (auto list = origin.fib().ecmp_list(target)) {
    for (const auto& nh : *list) first.nexthops.push_back(nh.address);
  }
  res.hops.push_back(first);
  std::set<Ipv6Address> seen{self};
  std::vector<size_t> frontier{0};

  while (!frontier.empty()) {
    std::vector<size_t> next;
    for (size_t idx : frontier) {
      // copy: res.hops may grow below
      const std::vector<Ipv6Address> nhs = res.hops[idx].nexthops;
      const uint32_t depth = res.hops[idx].depth + 1;
      for (const auto& a : nhs) {
        if (!seen.insert(a).second) continue;
        TraceHop hop{a, depth, HopMethod::kUnknown, {}};
        if (a == target) {
          hop.method = HopMethod::kTarget;
          res.reached = true;
        } else if (depth < opts.max_depth) {
          auto sid = oamp_sids.find(a);
          std::optional<ProbeReply> r;
          ++res.probes;
          if (sid != oamp_sids.end()) {
            r = probe(sim, src, make_oamp_probe(self, opts.src_port, sid->second, target), opts);
            if (r && r->oamp) {
              hop.method = HopMethod::kOamp;
              hop.nexthops = r->oamp->nexthops;
            }
          } else {
            r = probe(sim, src, udp_probe(self, target, static_cast<uint8_t>(depth + 1), opts),
                      opts);
            if (r && r->icmp) {
              hop.method = HopMethod::kIcmp;
              hop.nexthops.push_back(r->from);
            }
          }
          if (!r) ++res.timeouts;
        }
        res.hops.push_back(hop);
        next.push_back(res.hops.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  return res;
}

std::vector<std::optional<Ipv6Address>> classic_traceroute(sim::Simulation& sim, NodeId src,
                                                           const Ipv6Address& target,
                                                           const TracerouteOptions& opts) {
  std::vector<std::optional<Ipv6Address>> path;
  const Ipv6Address self = sim.node(src).address();
  for (uint32_t ttl = 1; ttl <= opts.max_depth; ++ttl) {
    auto r = probe(sim, src, udp_probe(self, target, static_cast<uint8_t>(ttl), opts), opts);
    if (!r || !r->icmp) {
      path.emplace_back();
      continue;
    }
    path.emplace_back(r->from);
    if (r->from == target) break;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Benchmark programs

void install_noop(Node& node, const std::string& name) {
  node.register_program(name, [](ProgramContext&) { return ProgramOutcome::kOk; });
}

void install_end_t_program(Node& node, const std::string& name, TableId table) {
  node.register_program(name, [table](ProgramContext& ctx) {
    ActionParams params;
    params.table = table;
    if (ctx.action(SegAction::kEndT, params) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    return ProgramOutcome::kRedirect;
  });
}

void install_tag_increment(Node& node, const std::string& name) {
  node.register_program(name, [](ProgramContext& ctx) {
    const Srh* srh = ctx.packet().outer_srh();
    if (srh == nullptr) return ProgramOutcome::kDrop;
    uint8_t tag[2];
    put_be16(tag, static_cast<uint16_t>(srh->tag + 1));
    if (ctx.store_bytes(srh_offset::kTag, tag) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    return ProgramOutcome::kOk;
  });
}

void install_add_tlv(Node& node, const std::string& name) {
  node.register_program(name, [](ProgramContext& ctx) {
    if (ctx.packet().outer_srh() == nullptr) return ProgramOutcome::kDrop;
    if (ctx.adjust_srh(8) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    const uint8_t tlv[8] = {kOpaqueTlvType, 6, 0xde, 0xad, 0xbe, 0xef, 0, 0};
    const size_t off = ctx.packet().outer_srh()->tlv_offset();
    if (ctx.store_bytes(off, tlv) != HelperStatus::kOk) return ProgramOutcome::kDrop;
    return ProgramOutcome::kOk;
  });
}

}  // namespace seg6::usecases
