#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "seg6/address.hpp"
#include "seg6/packet.hpp"
#include "seg6/prefix_table.hpp"
#include "seg6/program_state.hpp"

namespace seg6 {

// ---------------------------------------------------------------------------
// Forwarding decisions

enum class DropReason {
  kHopLimitExceeded,
  kNoRoute,
  kNoSrh,
  kSegmentsExhausted,
  kNotLastSegment,
  kNoInnerHeader,
  kSrhPresent,
  kInvariantViolation,
  kInvalidSrhAfterProgram,
  kRedirectWithoutDestination,
  kProgramDrop,
  kUnknownProgram,
};

const char* to_string(DropReason r) noexcept;

struct Forward {
  LinkId link = 0;
  Ipv6Address nexthop;
  friend bool operator==(const Forward&, const Forward&) = default;
};

struct Drop {
  DropReason reason = DropReason::kNoRoute;
  friend bool operator==(const Drop&, const Drop&) = default;
};

struct LocalDeliver {
  friend bool operator==(const LocalDeliver&, const LocalDeliver&) = default;
};

using ForwardingDecision = std::variant<Forward, Drop, LocalDeliver>;

std::string to_string(const ForwardingDecision& d);

// ---------------------------------------------------------------------------
// Tables

struct FibEntry {
  Prefix prefix;
  std::vector<Nexthop> nexthops;
  TableId table_id = kMainTable;
};

/// Flow identity used for ECMP selection.
struct FlowKey {
  Ipv6Address src;
  Ipv6Address dst;
  uint32_t flow_label = 0;
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
};

/// Outer addresses and flow label, innermost UDP ports.
FlowKey flow_key_of(const Packet& p);

/// 64-bit FNV-1a over src, dst, flow_label, src_port, dst_port.
uint64_t flow_hash(const FlowKey& key);

/** @brief Per-node FIB: one LPM table per table id, ECMP nexthop lists. */
class Fib {
 public:
  /// Replaces an existing (prefix, table) entry. Throws std::invalid_argument
  /// when the nexthop list is empty.
  void insert(FibEntry entry);
  bool remove(const Prefix& prefix, TableId table = kMainTable);

  bool has_table(TableId table) const { return tables_.count(table) != 0; }

  /// Longest match; ECMP member chosen by flow_hash(key) mod n.
  std::optional<Nexthop> lookup(const Ipv6Address& addr, TableId table,
                                const FlowKey& key) const;

  /// Full nexthop list of the longest match, insertion order.
  std::optional<std::vector<Nexthop>> ecmp_list(const Ipv6Address& addr,
                                                TableId table = kMainTable) const;

  /// Entry chosen by longest-prefix match (for tests and reports).
  std::optional<FibEntry> match(const Ipv6Address& addr, TableId table = kMainTable) const;

  size_t size() const;

 private:
  std::map<TableId, PrefixTable<std::vector<Nexthop>>> tables_;
};

namespace behavior {
struct End {};
struct EndX {
  Nexthop nexthop;
};
struct EndT {
  TableId table = kMainTable;
};
struct EndB6 {
  Srh srh;
};
struct EndB6Encaps {
  Srh srh;
  Ipv6Address src;
};
struct EndDT6 {
  TableId table = kMainTable;
};
struct EndBpf {
  std::string program;
};

struct TInsert {
  Srh srh;
};
struct TEncaps {
  Srh srh;
  Ipv6Address src;
};
struct LwtProgram {
  std::string program;
};
}  // namespace behavior

using LocalBehavior = std::variant<behavior::End, behavior::EndX, behavior::EndT,
                                   behavior::EndB6, behavior::EndB6Encaps,
                                   behavior::EndDT6, behavior::EndBpf>;

using TransitBehavior =
    std::variant<behavior::TInsert, behavior::TEncaps, behavior::LwtProgram>;

struct LocalSidEntry {
  Ipv6Address sid;
  LocalBehavior behavior;
};

struct TransitEntry {
  Prefix prefix;
  TransitBehavior behavior;
};

class ProgramContext;
using Program = std::function<ProgramOutcome(ProgramContext&)>;

// ---------------------------------------------------------------------------

/**
 * @brief Dataplane state of one node.
 *
 * Tables are filled during scenario setup and treated as read-only while
 * packets are processed.
 */
class Node {
 public:
  Node(NodeId id, std::string name, Ipv6Address address)
      : id_(id), name_(std::move(name)), address_(address) {}

  NodeId id() const noexcept { return id_; }
  const std::string& name() const noexcept { return name_; }
  const Ipv6Address& address() const noexcept { return address_; }

  uint8_t default_hop_limit() const noexcept { return default_hop_limit_; }
  void set_default_hop_limit(uint8_t v) noexcept { default_hop_limit_ = v; }

  bool is_local_address(const Ipv6Address& a) const { return a == address_; }

  Fib& fib() noexcept { return fib_; }
  const Fib& fib() const noexcept { return fib_; }

  /// Throws std::invalid_argument if the SID is already bound.
  void add_local_sid(LocalSidEntry entry);
  const LocalBehavior* find_local_sid(const Ipv6Address& sid) const;

  /// Throws std::invalid_argument if the prefix is already bound.
  void add_transit(TransitEntry entry);
  const TransitBehavior* match_transit(const Ipv6Address& dst) const;

  void register_program(const std::string& name, Program program);
  const Program* find_program(const std::string& name) const;

  MapStore& maps() noexcept { return maps_; }
  const MapStore& maps() const noexcept { return maps_; }

  /// Event queue fed by the named program; created on first use.
  EventQueue& events(const std::string& channel);
  const EventQueue* find_events(const std::string& channel) const;
  uint64_t events_pushed() const;
  uint64_t events_dropped() const;

  /// Locally generated control packets (ICMPv6 errors) awaiting routing.
  std::vector<Packet>& outbox() noexcept { return outbox_; }

 private:
  NodeId id_;
  std::string name_;
  Ipv6Address address_;
  uint8_t default_hop_limit_ = 64;
  Fib fib_;
  std::unordered_map<Ipv6Address, LocalBehavior> sids_;
  PrefixTable<TransitBehavior> transit_;
  std::map<std::string, Program> programs_;
  MapStore maps_;
  std::map<std::string, std::unique_ptr<EventQueue>> events_;
  std::vector<Packet> outbox_;
};

}  // namespace seg6
