#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seg6/netsim.hpp"
#include "seg6/node.hpp"
#include "seg6/program.hpp"

namespace seg6::usecases {

// ---------------------------------------------------------------------------
// Custom SRH TLVs

namespace tlv {
inline constexpr uint8_t kDelayMeasurement = 1;  // value: tx timestamp, be64 ns
inline constexpr uint8_t kController = 2;        // value: address:16 || port:2
inline constexpr size_t kDelayMeasurementLength = 8;
inline constexpr size_t kControllerLength = 18;
}  // namespace tlv

Tlv make_dm_tlv(uint64_t tx_ns);
Tlv make_controller_tlv(const Ipv6Address& addr, uint16_t port);

/// Both return nullopt when the TLV is missing or has the wrong length.
std::optional<uint64_t> read_dm_tlv(const Srh& srh);
std::optional<std::pair<Ipv6Address, uint16_t>> read_controller_tlv(const Srh& srh);

/// Builds an SRH for `path` (travel order) carrying DM and controller TLVs,
/// padded to a multiple of 8 octets.
Srh make_dm_srh(std::span<const Ipv6Address> path, uint64_t tx_ns, const Ipv6Address& controller,
                uint16_t port);

inline constexpr uint16_t kCollectorPort = 5000;
inline constexpr uint16_t kTwdPort = 862;
inline constexpr uint16_t kOampProbePort = 6000;
inline constexpr uint16_t kOampReplyPort = 6001;

// ---------------------------------------------------------------------------
// One-way delay monitoring

struct DmTransitConfig {
  uint32_t ratio = 100;                // one probe every `ratio` packets
  std::vector<Ipv6Address> path;       // travel order: ..., End.DM SID, final segment
  Ipv6Address controller;
  uint16_t controller_port = kCollectorPort;
  uint32_t route_id = 0;
};

/// Transit program: counts packets per route in map `<name>.counter` and
/// encapsulates every ratio-th one (counter mod ratio == 0) with a DM SRH.
/// Failures leave the packet untouched.
void install_dm_transit(Node& node, const std::string& name, const DmTransitConfig& cfg);

struct EndDmConfig {
  uint32_t path_id = 0;
  TableId table = kMainTable;
};

/// Endpoint program. Last segment: emits an OWD event and decapsulates
/// (End.DT6). Otherwise the probe is forwarded untouched (two-way mode).
void install_end_dm(Node& node, const std::string& name, const EndDmConfig& cfg);

inline constexpr size_t kOwdEventSize = 4 + 8 + 8 + 16 + 2;

struct OwdEvent {
  uint32_t path_id = 0;
  uint64_t tx_ns = 0;
  uint64_t rx_ns = 0;
  Ipv6Address controller;
  uint16_t controller_port = 0;
};

Bytes encode_owd_event(const OwdEvent& ev);
std::optional<OwdEvent> decode_owd_event(std::span<const uint8_t> payload);

struct DelayRecord {
  uint32_t path_id = 0;
  uint64_t tx_ns = 0;
  uint64_t rx_ns = 0;
  int64_t owd_ns = 0;
  Ipv6Address controller;
  uint16_t controller_port = 0;
  NodeId reporter = kNoNode;
};

/// Converts drained events; malformed payloads are counted, not returned.
std::vector<DelayRecord> collect_delay_records(std::span<const EmittedEvent> events,
                                               uint64_t* malformed = nullptr);

struct DelaySummary {
  size_t count = 0;
  double mean_ns = 0;
  int64_t min_ns = 0;
  int64_t max_ns = 0;
  int64_t p99_ns = 0;
};

/// Throws sim::InsufficientData on an empty input.
DelaySummary summarize(std::span<const DelayRecord> records);

/** @brief Daemon draining one End.DM event channel into DelayRecords. */
class OwdCollector : public sim::Daemon {
 public:
  OwdCollector(NodeId node, std::string channel, uint64_t interval_ns = sim::kNsPerMs)
      : node_(node), channel_(std::move(channel)), interval_ns_(interval_ns) {}

  void on_tick(sim::Simulation& sim, uint64_t now_ns) override;
  uint64_t interval_ns() const override { return interval_ns_; }

  /// Drains whatever is still queued.
  void flush(sim::Simulation& sim);

  const std::vector<DelayRecord>& records() const noexcept { return records_; }
  uint64_t malformed() const noexcept { return malformed_; }

 private:
  NodeId node_;
  std::string channel_;
  uint64_t interval_ns_;
  std::vector<DelayRecord> records_;
  uint64_t malformed_ = 0;
};

// ---------------------------------------------------------------------------
// Hybrid access: weighted round robin and delay compensation

/// Interleaved weighted round robin over weights reduced by their gcd:
/// round r serves every path whose weight is at least r.
std::vector<size_t> iwrr_schedule(std::span<const uint32_t> weights);

struct WrrConfig {
  std::vector<Srh> paths;  // encapsulation SRH per path
  std::vector<uint32_t> weights;
  Ipv6Address outer_src;   // unspecified: node address
};

/// Transit program: cursor kept in map `<name>.state`, each packet
/// encapsulated on the path given by the IWRR schedule.
void install_wrr(Node& node, const std::string& name, const WrrConfig& cfg);

/**
 * @brief EWMA of per-link two-way delay and the extra delay that equalizes
 * the links.
 *
 * Once every link has a sample, link i gets (max_ewma - ewma_i) / 2 of
 * added one-way delay; the slowest link gets none.
 */
class Compensator {
 public:
  Compensator(size_t links, double alpha);

  void update(size_t link, double twd_ns);
  std::optional<double> ewma(size_t link) const { return ewma_.at(link); }
  bool ready() const;
  /// Zero for every link until ready().
  std::vector<uint64_t> applied_delays() const;

 private:
  double alpha_;
  std::vector<std::optional<double>> ewma_;
};

struct TwdLink {
  LinkId link = 0;
  Ipv6Address echo_sid;    // End.DM SID at the far end, not last segment
  Ipv6Address return_sid;  // End SID at the prober node
};

struct TwdProberConfig {
  NodeId node = kNoNode;
  std::vector<TwdLink> links;
  uint64_t interval_ns = 100 * sim::kNsPerMs;
  double alpha = 0.3;
  bool compensation = true;
  uint16_t port = kTwdPort;
};

struct TwdSample {
  uint64_t time_ns = 0;
  size_t link = 0;
  uint64_t twd_ns = 0;
};

struct DelayChange {
  uint64_t time_ns = 0;
  size_t link = 0;
  uint64_t delay_ns = 0;
};

/**
 * @brief Periodic two-way delay prober with optional compensation.
 *
 * Each tick sends one probe per link along [echo_sid, return_sid, node].
 * The measured delay excludes the compensation delay that was applied when
 * the probe left, so the estimate tracks the links themselves.
 */
class TwdProber : public sim::Daemon {
 public:
  explicit TwdProber(TwdProberConfig cfg);

  /// Binds the reply port; call once before running.
  void attach(sim::Simulation& sim);

  void on_tick(sim::Simulation& sim, uint64_t now_ns) override;
  uint64_t interval_ns() const override { return cfg_.interval_ns; }

  const TwdProberConfig& config() const noexcept { return cfg_; }
  const Compensator& compensator() const noexcept { return comp_; }
  const std::vector<TwdSample>& samples() const noexcept { return samples_; }
  const std::vector<DelayChange>& changes() const noexcept { return changes_; }

 private:
  void on_reply(sim::Simulation& sim, const Packet& p, uint64_t now_ns);

  TwdProberConfig cfg_;
  Compensator comp_;
  std::vector<uint64_t> applied_;
  std::map<uint32_t, uint64_t> in_flight_;  // probe id -> applied delay at send
  uint32_t next_probe_ = 0;
  std::vector<TwdSample> samples_;
  std::vector<DelayChange> changes_;
};

// ---------------------------------------------------------------------------
// ECMP discovery

inline constexpr size_t kMaxOampNexthops = 14;

struct OampReply {
  uint32_t hop_id = 0;
  std::vector<Ipv6Address> nexthops;  // empty: no route to the target
};

/// hop_id:4 || count:2 || count x address:16
Bytes encode_oamp_reply(const OampReply& r);
std::optional<OampReply> decode_oamp_reply(std::span<const uint8_t> payload);

/// Endpoint program: reports the ECMP nexthops towards the final segment.
/// The event is the reply payload followed by controller address:16 ||
/// port:2 so the responder knows where to send it. The probe is dropped.
void install_end_oamp(Node& node, const std::string& name);

/** @brief Turns End.OAMP events into UDP replies sent by the node. */
class OampResponder : public sim::Daemon {
 public:
  OampResponder(NodeId node, std::string channel, uint64_t interval_ns = sim::kNsPerMs)
      : node_(node), channel_(std::move(channel)), interval_ns_(interval_ns) {}

  void on_tick(sim::Simulation& sim, uint64_t now_ns) override;
  uint64_t interval_ns() const override { return interval_ns_; }
  uint64_t replies() const noexcept { return replies_; }

 private:
  NodeId node_;
  std::string channel_;
  uint64_t interval_ns_;
  uint64_t replies_ = 0;
};

Packet make_oamp_probe(const Ipv6Address& prober, uint16_t reply_port, const Ipv6Address& sid,
                       const Ipv6Address& target);

enum class HopMethod { kSource, kOamp, kIcmp, kTarget, kUnknown };

const char* to_string(HopMethod m) noexcept;

struct TraceHop {
  Ipv6Address address;
  uint32_t depth = 0;
  HopMethod method = HopMethod::kUnknown;
  std::vector<Ipv6Address> nexthops;
};

struct TracerouteOptions {
  uint16_t src_port = 33000;   // probe flow key and reply port
  uint16_t dst_port = 33434;
  uint32_t flow_label = 0;
  uint64_t timeout_ns = 3 * sim::kNsPerSec;
  uint32_t max_depth = 30;
  uint64_t poll_ns = sim::kNsPerMs;
};

struct TracerouteResult {
  std::vector<TraceHop> hops;  // discovery order
  bool reached = false;
  uint64_t probes = 0;
  uint64_t timeouts = 0;

  const TraceHop* find(const Ipv6Address& a) const;
  /// (from, to) pairs of the discovered DAG, sorted.
  std::vector<std::pair<Ipv6Address, Ipv6Address>> edges() const;
};

/**
 * @brief Breadth-first ECMP path discovery from `src` towards `target`.
 *
 * Hops with an End.OAMP SID (keyed by hop address in `oamp_sids`) report
 * all their nexthops at once. Other hops are expanded with a hop-limited
 * UDP probe on a fixed flow key, which reveals one nexthop. A probe without
 * an answer within the timeout yields an unknown hop.
 */
TracerouteResult multipath_traceroute(sim::Simulation& sim, NodeId src, const Ipv6Address& target,
                                      const std::map<Ipv6Address, Ipv6Address>& oamp_sids,
                                      const TracerouteOptions& opts = {});

/// Hop-by-hop addresses seen by hop-limited probes on one flow key,
/// ending at the target; nullopt marks a silent hop.
std::vector<std::optional<Ipv6Address>> classic_traceroute(sim::Simulation& sim, NodeId src,
                                                           const Ipv6Address& target,
                                                           const TracerouteOptions& opts = {});

// ---------------------------------------------------------------------------
// Benchmark programs

void install_noop(Node& node, const std::string& name);
/// End.T through the action helper, then REDIRECT.
void install_end_t_program(Node& node, const std::string& name, TableId table);
/// Increments the SRH tag.
void install_tag_increment(Node& node, const std::string& name);
/// Grows the SRH by 8 octets and writes an opaque TLV there.
void install_add_tlv(Node& node, const std::string& name);

inline constexpr uint8_t kOpaqueTlvType = 0x7E;

}  // namespace seg6::usecases
