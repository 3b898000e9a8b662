#include "seg6/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seg6/pipeline.hpp"

namespace seg6::sim {

namespace {

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr uint16_t kTracerouteFirstPort = 33434;
constexpr uint16_t kTracerouteLastPort = 33534;

}  // namespace

// ---------------------------------------------------------------------------
// Rng

Rng Rng::for_stream(uint64_t seed, uint64_t stream) {
  return Rng(mix64(seed + 0x9E3779B97F4A7C15ULL) ^ mix64(stream * 0xD1B54A32D192ED03ULL + 1));
}

uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix64(state_);
}

double Rng::next_unit() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::next_gaussian(double mean, double stddev) {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return mean + stddev * z;
  }
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return mean + stddev * r * std::cos(theta);
}

// ---------------------------------------------------------------------------
// Link

LinkConfig link_from_rtt(std::string name, NodeId a, NodeId b, double bandwidth_mbps,
                         double rtt_mean_ms, double rtt_stddev_ms) {
  LinkConfig cfg;
  cfg.name = std::move(name);
  cfg.a = a;
  cfg.b = b;
  cfg.bandwidth_bps = static_cast<uint64_t>(std::llround(bandwidth_mbps * 1e6));
  cfg.delay_mean_ns = static_cast<uint64_t>(std::llround(rtt_mean_ms * 1e6 / 2));
  cfg.delay_stddev_ns = static_cast<uint64_t>(std::llround(rtt_stddev_ms * 1e6 / 2));
  return cfg;
}

Link::Link(LinkId id, const LinkConfig& cfg, uint64_t seed) : id_(id), cfg_(cfg) {
  if (cfg_.bandwidth_bps == 0) throw std::invalid_argument("link bandwidth must be positive");
  if (cfg_.a == cfg_.b) throw std::invalid_argument("link endpoints must differ");
  ab_.rng = Rng::for_stream(seed, stream_id(id, true));
  ba_.rng = Rng::for_stream(seed, stream_id(id, false));
}

uint64_t Link::serialization_ns(size_t octets) const noexcept {
  const unsigned __int128 bits = static_cast<unsigned __int128>(octets) * 8 * kNsPerSec;
  return static_cast<uint64_t>((bits + cfg_.bandwidth_bps / 2) / cfg_.bandwidth_bps);
}

Link::Direction& Link::dir(NodeId from) {
  if (from == cfg_.a) return ab_;
  if (from == cfg_.b) return ba_;
  throw UnknownLink("node " + std::to_string(from) + " is not attached to link " + cfg_.name);
}

const Link::Direction& Link::dir(NodeId from) const {
  return const_cast<Link*>(this)->dir(from);
}

uint64_t Link::transmit(NodeId from, size_t octets, uint64_t now_ns) {
  Direction& d = dir(from);
  const uint64_t start = std::max(now_ns, d.busy_until);
  const uint64_t ser = serialization_ns(octets);
  d.busy_until = start + ser;
  double prop = static_cast<double>(cfg_.delay_mean_ns);
  if (cfg_.delay_stddev_ns > 0) {
    prop = d.rng.next_gaussian(prop, static_cast<double>(cfg_.delay_stddev_ns));
  }
  const uint64_t prop_ns = prop <= 0 ? 0 : static_cast<uint64_t>(std::llround(prop));
  const uint64_t delivery = std::max(start + ser + prop_ns + d.qdisc_delay_ns, d.last_delivery);
  d.last_delivery = delivery;
  ++d.packets;
  d.octets += octets;
  return delivery;
}

void Link::set_qdisc_delay(NodeId from, uint64_t delay_ns) { dir(from).qdisc_delay_ns = delay_ns; }
uint64_t Link::qdisc_delay(NodeId from) const { return dir(from).qdisc_delay_ns; }
uint64_t Link::packets_sent(NodeId from) const { return dir(from).packets; }
uint64_t Link::octets_sent(NodeId from) const { return dir(from).octets; }

const char* to_string(TraceDirection d) noexcept {
  switch (d) {
    case TraceDirection::kIngress: return "ingress";
    case TraceDirection::kEgress: return "egress";
    case TraceDirection::kDrop: return "drop";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Stats

uint64_t SimStats::total_injected() const {
  uint64_t n = 0;
  for (const auto& c : nodes) n += c.injected;
  return n;
}
uint64_t SimStats::total_forwarded() const {
  uint64_t n = 0;
  for (const auto& c : nodes) n += c.forwarded;
  return n;
}
uint64_t SimStats::total_delivered() const {
  uint64_t n = 0;
  for (const auto& c : nodes) n += c.delivered;
  return n;
}
uint64_t SimStats::total_dropped() const {
  uint64_t n = 0;
  for (const auto& c : nodes) n += c.dropped;
  return n;
}

// ---------------------------------------------------------------------------
// Generators

uint64_t UdpStream::injection_time(uint64_t index) const {
  return start_ns + static_cast<uint64_t>(std::llround(static_cast<double>(index) * 1e9 / rate_pps));
}

Packet UdpStream::make_packet(const Ipv6Address& src_addr, uint64_t index) const {
  Bytes payload(payload_size, 0);
  put_be32(payload.data(), static_cast<uint32_t>(index));
  put_be32(payload.data() + 4, flow_id);
  Packet p = make_udp_packet(src_addr, dst, src_port, kStreamPort, std::move(payload));
  p.outer().flow_label = flow_label & 0xFFFFF;
  return p;
}

UdpStream udp_stream(NodeId src, const Ipv6Address& dst, double rate_pps, size_t payload_size,
                     uint64_t count) {
  if (!(rate_pps > 0)) throw std::invalid_argument("stream rate must be positive");
  if (payload_size < 8) throw std::invalid_argument("stream payload must hold seq and flow");
  UdpStream s;
  s.src = src;
  s.dst = dst;
  s.rate_pps = rate_pps;
  s.payload_size = payload_size;
  s.count = count;
  return s;
}

// ---------------------------------------------------------------------------
// Simulation

enum class EventKind : uint8_t { kArrive, kInject, kTick, kStream };

struct Simulation::Event {
  uint64_t time = 0;
  uint64_t seq = 0;
  EventKind kind = EventKind::kArrive;
  NodeId node = kNoNode;
  uint64_t index = 0;
  Packet packet;
};

namespace {
struct Later {
  template <typename E>
  bool operator()(const E& a, const E& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};
}  // namespace

Simulation::Simulation(uint64_t seed) : seed_(seed) {}
Simulation::~Simulation() = default;

NodeId Simulation::add_node(const std::string& name, const Ipv6Address& address) {
  if (find_node(name)) throw std::invalid_argument("duplicate node name: " + name);
  if (node_by_address(address)) {
    throw std::invalid_argument("duplicate node address: " + address.to_string());
  }
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::make_unique<Node>(id, name, address));
  counters_.emplace_back();
  return id;
}

std::optional<NodeId> Simulation::find_node(const std::string& name) const {
  for (const auto& n : nodes_) {
    if (n->name() == name) return n->id();
  }
  return std::nullopt;
}

std::optional<NodeId> Simulation::node_by_address(const Ipv6Address& addr) const {
  for (const auto& n : nodes_) {
    if (n->address() == addr) return n->id();
  }
  return std::nullopt;
}

LinkId Simulation::add_link(const LinkConfig& cfg) {
  if (cfg.a >= nodes_.size() || cfg.b >= nodes_.size()) {
    throw std::invalid_argument("link endpoint does not exist");
  }
  if (find_link(cfg.name)) throw std::invalid_argument("duplicate link name: " + cfg.name);
  const auto id = static_cast<LinkId>(links_.size());
  links_.push_back(std::make_unique<Link>(id, cfg, seed_));
  return id;
}

std::optional<LinkId> Simulation::find_link(const std::string& name) const {
  for (const auto& l : links_) {
    if (l->name() == name) return l->id();
  }
  return std::nullopt;
}

void Simulation::set_qdisc_delay(NodeId node, LinkId link, uint64_t delay_ns) {
  if (link >= links_.size()) throw UnknownLink("no link " + std::to_string(link));
  links_[link]->set_qdisc_delay(node, delay_ns);
}

void Simulation::schedule(Event ev) {
  ev.seq = next_seq_++;
  heap_.push_back(std::move(ev));
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

void Simulation::inject(NodeId node, Packet packet, uint64_t at_ns) {
  if (node >= nodes_.size()) throw std::out_of_range("no node " + std::to_string(node));
  Event ev;
  ev.time = std::max(at_ns, now_);
  ev.kind = EventKind::kInject;
  ev.node = node;
  ev.packet = std::move(packet);
  schedule(std::move(ev));
}

void Simulation::add_stream(const UdpStream& stream) {
  if (stream.src >= nodes_.size()) throw std::out_of_range("stream source does not exist");
  if (!(stream.rate_pps > 0) || stream.payload_size < 8) {
    throw std::invalid_argument("invalid stream parameters");
  }
  streams_.push_back(stream);
  if (stream.count == 0) return;
  Event ev;
  ev.time = std::max(stream.injection_time(0), now_);
  ev.kind = EventKind::kStream;
  ev.node = static_cast<NodeId>(streams_.size() - 1);
  ev.index = 0;
  schedule(std::move(ev));
}

void Simulation::add_daemon(std::unique_ptr<Daemon> daemon, uint64_t first_tick_ns) {
  daemons_.push_back(std::move(daemon));
  Event ev;
  ev.time = std::max(first_tick_ns, now_);
  ev.kind = EventKind::kTick;
  ev.index = daemons_.size() - 1;
  schedule(std::move(ev));
}

void Simulation::bind_port(NodeId node, uint16_t port, PacketHandler handler) {
  ports_[{node, port}] = std::move(handler);
}

void Simulation::unbind_port(NodeId node, uint16_t port) { ports_.erase({node, port}); }

size_t Simulation::add_listener(NodeId node, PacketHandler handler) {
  const size_t h = next_listener_++;
  listeners_.emplace(h, std::make_pair(node, std::move(handler)));
  return h;
}

void Simulation::remove_listener(size_t handle) { listeners_.erase(handle); }

bool Simulation::idle() const noexcept {
  return std::none_of(heap_.begin(), heap_.end(),
                      [](const Event& e) { return e.kind != EventKind::kTick; });
}

SimStats Simulation::run_until(uint64_t t_ns) {
  while (!heap_.empty() && heap_.front().time <= t_ns) {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.time;
    process(ev);
  }
  now_ = std::max(now_, t_ns);
  return stats();
}

SimStats Simulation::stats() const {
  SimStats s;
  s.now_ns = now_;
  s.nodes = counters_;
  for (const auto& n : nodes_) {
    s.events_emitted += n->events_pushed();
    s.events_dropped += n->events_dropped();
  }
  return s;
}

void Simulation::process(Event& ev) {
  switch (ev.kind) {
    case EventKind::kArrive: {
      Node& n = *nodes_[ev.node];
      record(ev.node, TraceDirection::kIngress, ev.packet);
      const ForwardingDecision d = process_ingress(n, ev.packet, now_);
      handle_decision(ev.node, ev.packet, d);
      drain_outbox(ev.node);
      break;
    }
    case EventKind::kInject: {
      ++counters_[ev.node].injected;
      const ForwardingDecision d = process_local_output(*nodes_[ev.node], ev.packet, now_);
      handle_decision(ev.node, ev.packet, d);
      drain_outbox(ev.node);
      break;
    }
    case EventKind::kStream: {
      const UdpStream& s = streams_[ev.node];
      Packet p = s.make_packet(nodes_[s.src]->address(), ev.index);
      if (ev.index + 1 < s.count) {
        Event next;
        next.time = std::max(s.injection_time(ev.index + 1), now_);
        next.kind = EventKind::kStream;
        next.node = ev.node;
        next.index = ev.index + 1;
        schedule(std::move(next));
      }
      ++counters_[s.src].injected;
      const ForwardingDecision d = process_local_output(*nodes_[s.src], p, now_);
      handle_decision(s.src, p, d);
      drain_outbox(s.src);
      break;
    }
    case EventKind::kTick: {
      Daemon& d = *daemons_[ev.index];
      d.on_tick(*this, now_);
      const uint64_t interval = d.interval_ns();
      if (interval > 0) {
        Event next;
        next.time = now_ + interval;
        next.kind = EventKind::kTick;
        next.index = ev.index;
        schedule(std::move(next));
      }
      break;
    }
  }
}

void Simulation::handle_decision(NodeId node, Packet& packet, const ForwardingDecision& d) {
  NodeCounters& c = counters_[node];
  if (const auto* f = std::get_if<Forward>(&d)) {
    if (f->link >= links_.size() || !links_[f->link]->attached(node)) {
      ++c.dropped;
      ++c.drop_reasons[DropReason::kNoRoute];
      record(node, TraceDirection::kDrop, packet);
      return;
    }
    Link& l = *links_[f->link];
    ++c.forwarded;
    record(node, TraceDirection::kEgress, packet, f->link);
    const size_t size = encoded_size(packet);
    Event ev;
    ev.time = l.transmit(node, size, now_);
    ev.kind = EventKind::kArrive;
    ev.node = l.peer(node);
    ev.packet = std::move(packet);
    schedule(std::move(ev));
  } else if (const auto* dr = std::get_if<Drop>(&d)) {
    ++c.dropped;
    ++c.drop_reasons[dr->reason];
    record(node, TraceDirection::kDrop, packet);
  } else {
    ++c.delivered;
    deliver_local(node, packet);
  }
}

void Simulation::drain_outbox(NodeId node) {
  Node& n = *nodes_[node];
  while (!n.outbox().empty()) {
    std::vector<Packet> pending;
    pending.swap(n.outbox());
    for (Packet& p : pending) {
      ++counters_[node].injected;
      const ForwardingDecision d = process_local_output(n, p, now_);
      handle_decision(node, p, d);
    }
  }
}

void Simulation::deliver_local(NodeId node, Packet& packet) {
  std::vector<PacketHandler> matched;
  for (const auto& [_, entry] : listeners_) {
    if (entry.first == node) matched.push_back(entry.second);
  }
  for (const auto& h : matched) h(*this, node, packet, now_);
  if (!packet.udp) return;
  auto it = ports_.find({node, packet.udp->dst_port});
  if (it != ports_.end()) {
    PacketHandler h = it->second;
    h(*this, node, packet, now_);
    return;
  }
  const uint16_t port = packet.udp->dst_port;
  if (port >= kTracerouteFirstPort && port <= kTracerouteLastPort) {
    Node& n = *nodes_[node];
    n.outbox().push_back(make_icmp_error(n.address(), packet, icmp::kDestinationUnreachable,
                                         icmp::kPortUnreachable, n.default_hop_limit()));
  }
}

void Simulation::record(NodeId node, TraceDirection dir, const Packet& p, LinkId link) {
  if (!trace_opts_.retain && trace_opts_.stream == nullptr) return;
  TraceRecord r;
  r.time_ns = now_;
  r.node = node;
  r.direction = dir;
  r.link = link;
  r.size = static_cast<uint32_t>(encoded_size(p));
  if (p.udp) {
    r.payload_size = static_cast<uint32_t>(p.payload.size());
    if (p.udp->dst_port == kStreamPort && p.payload.size() >= 8) {
      r.seq = get_be32(p.payload.data());
      r.flow = get_be32(p.payload.data() + 4);
    }
  }
  if (trace_opts_.stream != nullptr) write_trace_record(*trace_opts_.stream, r);
  if (trace_opts_.retain) trace_.push_back(r);
}

void Simulation::write_trace_record(std::ostream& os, const TraceRecord& r) const {
  os << r.time_ns << '\t' << nodes_.at(r.node)->name() << '\t' << to_string(r.direction) << '\t';
  if (r.flow == kNoFlow) {
    os << '-';
  } else {
    os << r.flow;
  }
  os << '\t' << r.seq << '\t' << r.size << '\n';
}

void Simulation::write_trace(std::ostream& os) const {
  for (const auto& r : trace_) write_trace_record(os, r);
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<TraceRecord> sink_records(const std::vector<TraceRecord>& trace, uint32_t flow,
                                      NodeId sink) {
  std::vector<TraceRecord> out;
  for (const auto& r : trace) {
    if (r.node == sink && r.flow == flow && r.direction == TraceDirection::kIngress) {
      out.push_back(r);
    }
  }
  return out;
}

double reorder_fraction(std::span<const uint32_t> seqs) {
  if (seqs.size() < 2) throw InsufficientData("reorder fraction needs at least two arrivals");
  uint64_t late = 0;
  uint32_t highest = seqs[0];
  for (size_t i = 1; i < seqs.size(); ++i) {
    if (seqs[i] < highest) {
      ++late;
    } else {
      highest = seqs[i];
    }
  }
  return static_cast<double>(late) / static_cast<double>(seqs.size());
}

double reorder_fraction(const std::vector<TraceRecord>& trace, uint32_t flow, NodeId sink) {
  std::vector<uint32_t> seqs;
  for (const auto& r : sink_records(trace, flow, sink)) seqs.push_back(r.seq);
  return reorder_fraction(seqs);
}

uint64_t count_gap_events(std::span<const uint32_t> seqs, uint32_t gap_threshold) {
  std::vector<bool> seen;
  uint64_t expected = 0;
  uint64_t penalized_hole = UINT64_MAX;
  uint64_t events = 0;
  for (uint32_t s : seqs) {
    if (s >= seen.size()) seen.resize(static_cast<size_t>(s) + 1, false);
    if (s > expected + gap_threshold && penalized_hole != expected) {
      ++events;
      penalized_hole = expected;
    }
    seen[s] = true;
    while (expected < seen.size() && seen[expected]) ++expected;
  }
  return events;
}

double goodput_estimate(const std::vector<TraceRecord>& trace, uint32_t flow, NodeId sink,
                        const GoodputOptions& opts) {
  const auto recs = sink_records(trace, flow, sink);
  if (recs.size() < 2) throw InsufficientData("goodput needs at least two arrivals");
  std::vector<uint32_t> seqs;
  double bits = 0;
  for (const auto& r : recs) {
    seqs.push_back(r.seq);
    bits += 8.0 * r.payload_size;
  }
  const uint64_t stalls = count_gap_events(seqs, opts.gap_threshold);
  const double span_ns = static_cast<double>(recs.back().time_ns - recs.front().time_ns) +
                         static_cast<double>(stalls) * static_cast<double>(opts.stall_penalty_ns);
  if (span_ns <= 0) throw InsufficientData("arrivals span no time");
  return bits * 1e9 / span_ns;
}

}  // namespace seg6::sim
