#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seg6/node.hpp"
#include "seg6/packet.hpp"

namespace seg6::sim {

inline constexpr uint64_t kNsPerMs = 1'000'000;
inline constexpr uint64_t kNsPerSec = 1'000'000'000;

/// UDP destination port used by traffic generators; payloads on this port
/// start with seq:4 || flow:4 (big-endian).
inline constexpr uint16_t kStreamPort = 9000;
inline constexpr uint32_t kNoFlow = 0xFFFFFFFF;
inline constexpr LinkId kNoLink = 0xFFFFFFFF;

/** @brief splitmix64 generator with a Box-Muller normal sampler. */
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  /// Independent stream derived from a run seed and a stream id.
  static Rng for_stream(uint64_t seed, uint64_t stream);

  uint64_t next_u64();
  /// Uniform in (0, 1).
  double next_unit();
  double next_gaussian(double mean, double stddev);

 private:
  uint64_t state_;
  std::optional<double> spare_;
};

class UnknownLink : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinkConfig {
  std::string name;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  uint64_t bandwidth_bps = 1'000'000'000;
  uint64_t delay_mean_ns = 0;    // one way
  uint64_t delay_stddev_ns = 0;  // one way
};

/// Converts a round-trip spec to one-way parameters: RTT/2 and stddev/2.
LinkConfig link_from_rtt(std::string name, NodeId a, NodeId b, double bandwidth_mbps,
                         double rtt_mean_ms, double rtt_stddev_ms);

/**
 * @brief Point-to-point link with independent state per direction.
 *
 * Delivery time of a packet sent at `now`:
 *   max(now, busy_until) + serialization + max(0, N(mean, stddev)) + qdisc
 * clamped so a direction never delivers out of transmission order. Queues
 * are unbounded.
 */
class Link {
 public:
  Link(LinkId id, const LinkConfig& cfg, uint64_t seed);

  LinkId id() const noexcept { return id_; }
  const std::string& name() const noexcept { return cfg_.name; }
  const LinkConfig& config() const noexcept { return cfg_; }
  bool attached(NodeId n) const noexcept { return n == cfg_.a || n == cfg_.b; }
  NodeId peer(NodeId n) const noexcept { return n == cfg_.a ? cfg_.b : cfg_.a; }

  uint64_t serialization_ns(size_t octets) const noexcept;

  /// Returns the delivery time at the peer of `from`.
  uint64_t transmit(NodeId from, size_t octets, uint64_t now_ns);

  void set_qdisc_delay(NodeId from, uint64_t delay_ns);
  uint64_t qdisc_delay(NodeId from) const;

  uint64_t packets_sent(NodeId from) const;
  uint64_t octets_sent(NodeId from) const;

  /// RNG stream id of the direction leaving `from`.
  static uint64_t stream_id(LinkId id, bool from_a) noexcept {
    return (static_cast<uint64_t>(id) << 1) | (from_a ? 0u : 1u);
  }

 private:
  struct Direction {
    uint64_t busy_until = 0;
    uint64_t last_delivery = 0;
    uint64_t qdisc_delay_ns = 0;
    uint64_t packets = 0;
    uint64_t octets = 0;
    Rng rng;
  };
  Direction& dir(NodeId from);
  const Direction& dir(NodeId from) const;

  LinkId id_;
  LinkConfig cfg_;
  Direction ab_;
  Direction ba_;
};

enum class TraceDirection { kIngress, kEgress, kDrop };

const char* to_string(TraceDirection d) noexcept;

struct TraceRecord {
  uint64_t time_ns = 0;
  NodeId node = kNoNode;
  TraceDirection direction = TraceDirection::kIngress;
  uint32_t flow = kNoFlow;
  uint32_t seq = 0;
  uint32_t size = 0;
  uint32_t payload_size = 0;  // UDP payload octets
  LinkId link = kNoLink;      // egress only; not part of the TSV output

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct NodeCounters {
  uint64_t injected = 0;
  uint64_t forwarded = 0;
  uint64_t delivered = 0;
  uint64_t dropped = 0;
  std::map<DropReason, uint64_t> drop_reasons;
};

struct SimStats {
  uint64_t now_ns = 0;
  std::vector<NodeCounters> nodes;
  uint64_t events_emitted = 0;
  uint64_t events_dropped = 0;

  uint64_t total_injected() const;
  uint64_t total_forwarded() const;
  uint64_t total_delivered() const;
  uint64_t total_dropped() const;
};

/// Periodic userspace process attached to a node.
class Daemon {
 public:
  virtual ~Daemon() = default;
  virtual void on_tick(class Simulation& sim, uint64_t now_ns) = 0;
  virtual uint64_t interval_ns() const = 0;
};

/** @brief Constant-rate UDP flow. */
struct UdpStream {
  NodeId src = kNoNode;
  Ipv6Address dst;
  double rate_pps = 1000;
  size_t payload_size = 64;
  uint64_t count = 0;
  uint64_t start_ns = 0;
  uint32_t flow_id = 0;
  uint16_t src_port = 10000;
  uint32_t flow_label = 0;

  uint64_t injection_time(uint64_t index) const;
  Packet make_packet(const Ipv6Address& src_addr, uint64_t index) const;
};

/// Generator of `count` packets at a fixed gap of 1/rate, sequence numbers
/// 0..count-1 in the payload. Throws std::invalid_argument if rate <= 0 or
/// payload_size < 8.
UdpStream udp_stream(NodeId src, const Ipv6Address& dst, double rate_pps,
                     size_t payload_size, uint64_t count);

using PacketHandler = std::function<void(class Simulation&, NodeId, const Packet&, uint64_t)>;

struct TraceOptions {
  bool retain = true;
  std::ostream* stream = nullptr;  // TSV lines as they are produced
};

/**
 * @brief Deterministic discrete-event simulator.
 *
 * Events are processed in (time, insertion sequence) order on a single
 * thread. Nodes process packets instantly; links carry all delay.
 */
class Simulation {
 public:
  explicit Simulation(uint64_t seed = 1);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  uint64_t seed() const noexcept { return seed_; }
  uint64_t now() const noexcept { return now_; }

  NodeId add_node(const std::string& name, const Ipv6Address& address);
  Node& node(NodeId id) { return *nodes_.at(id); }
  const Node& node(NodeId id) const { return *nodes_.at(id); }
  size_t node_count() const noexcept { return nodes_.size(); }
  std::optional<NodeId> find_node(const std::string& name) const;
  std::optional<NodeId> node_by_address(const Ipv6Address& addr) const;

  LinkId add_link(const LinkConfig& cfg);
  Link& link(LinkId id) { return *links_.at(id); }
  const Link& link(LinkId id) const { return *links_.at(id); }
  size_t link_count() const noexcept { return links_.size(); }
  std::optional<LinkId> find_link(const std::string& name) const;

  /// Throws UnknownLink if the link is not attached to the node.
  void set_qdisc_delay(NodeId node, LinkId link, uint64_t delay_ns);

  /// Schedules a locally originated packet at `node`.
  void inject(NodeId node, Packet packet, uint64_t at_ns);

  void add_stream(const UdpStream& stream);

  /// First tick at `first_tick_ns`, then every interval.
  void add_daemon(std::unique_ptr<Daemon> daemon, uint64_t first_tick_ns = 0);
  Daemon& daemon(size_t index) { return *daemons_.at(index); }
  size_t daemon_count() const noexcept { return daemons_.size(); }

  /// UDP packets delivered to `node` on `port`.
  void bind_port(NodeId node, uint16_t port, PacketHandler handler);
  void unbind_port(NodeId node, uint16_t port);

  /// Every packet delivered locally to `node`. Returns a handle.
  size_t add_listener(NodeId node, PacketHandler handler);
  void remove_listener(size_t handle);

  /// Processes every event with time <= t_ns, then sets the clock to t_ns.
  SimStats run_until(uint64_t t_ns);

  SimStats stats() const;
  bool idle() const noexcept;

  void set_trace_options(TraceOptions opts) { trace_opts_ = opts; }
  const std::vector<TraceRecord>& trace() const noexcept { return trace_; }
  void write_trace(std::ostream& os) const;
  void write_trace_record(std::ostream& os, const TraceRecord& r) const;

 private:
  struct Event;
  void schedule(Event ev);
  void process(Event& ev);
  void handle_decision(NodeId node, Packet& packet, const ForwardingDecision& d);
  void drain_outbox(NodeId node);
  void deliver_local(NodeId node, Packet& packet);
  void record(NodeId node, TraceDirection dir, const Packet& p, LinkId link = kNoLink);

  uint64_t seed_;
  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<Link>> links_;
  std::vector<NodeCounters> counters_;
  std::vector<std::unique_ptr<Daemon>> daemons_;
  std::vector<UdpStream> streams_;
  std::map<std::pair<NodeId, uint16_t>, PacketHandler> ports_;
  std::map<size_t, std::pair<NodeId, PacketHandler>> listeners_;
  size_t next_listener_ = 0;
  std::vector<Event> heap_;
  std::vector<TraceRecord> trace_;
  TraceOptions trace_opts_;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ingress records of `flow` at `sink`, in processing order.
std::vector<TraceRecord> sink_records(const std::vector<TraceRecord>& trace, uint32_t flow,
                                      NodeId sink);

/// Fraction of arrivals whose sequence number is below the highest one
/// already seen. Throws InsufficientData with fewer than two arrivals.
double reorder_fraction(const std::vector<TraceRecord>& trace, uint32_t flow, NodeId sink);
double reorder_fraction(std::span<const uint32_t> arrival_seqs);

struct GoodputOptions {
  uint32_t gap_threshold = 3;
  uint64_t stall_penalty_ns = 30 * kNsPerMs;
};

/**
 * @brief Reorder-sensitive goodput in bit/s.
 *
 * Delivered UDP payload bits divided by (arrival span + penalties). The
 * receiver tracks the lowest missing sequence number; the first arrival
 * more than `gap_threshold` ahead of it costs one stall penalty, once per
 * hole (a receiver-side model of a spurious fast retransmit).
 */
double goodput_estimate(const std::vector<TraceRecord>& trace, uint32_t flow, NodeId sink,
                        const GoodputOptions& opts = {});

/// Number of stall penalties for an arrival sequence.
uint64_t count_gap_events(std::span<const uint32_t> arrival_seqs, uint32_t gap_threshold);

}  // namespace seg6::sim
