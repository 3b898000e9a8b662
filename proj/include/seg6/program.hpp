#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seg6/node.hpp"
#include "seg6/packet.hpp"
#include "seg6/program_state.hpp"

namespace seg6 {

enum class Hook { kEndpoint, kTransit };

/// Endpoint functions reachable through ProgramContext::action().
enum class SegAction { kEndX, kEndT, kEndB6, kEndB6Encaps, kEndDT6 };

struct ActionParams {
  Nexthop nexthop;        // End.X
  TableId table = 0;      // End.T, End.DT6
  Srh srh;                // End.B6, End.B6.Encaps
  Ipv6Address outer_src;  // End.B6.Encaps; unspecified means the node address
};

enum class EncapMode { kInsert, kEncaps };

/**
 * @brief Execution context handed to a pluggable program.
 *
 * The program reads the whole packet through packet() but can only change
 * it through the helpers below, which confine writes to the SRH flags, tag
 * and TLV area and keep every length field consistent. At the endpoint hook
 * the SRH has already been advanced when the program starts.
 */
class ProgramContext {
 public:
  ProgramContext(Node& node, Packet& packet, Hook hook, uint64_t now_ns,
                 std::string event_channel);

  const Packet& packet() const noexcept { return packet_; }
  Hook hook() const noexcept { return hook_; }
  NodeId node_id() const noexcept { return node_.id(); }
  const Ipv6Address& node_address() const noexcept { return node_.address(); }
  uint64_t now_ns() const noexcept { return now_ns_; }
  bool pending_action_taken() const noexcept { return action_taken_; }

  /// Writes at an offset relative to the start of the outer SRH. The whole
  /// range must fall inside the flags/tag octets or the TLV area.
  HelperStatus store_bytes(size_t offset, std::span<const uint8_t> data);

  /// Grows (delta > 0, zero-filled) or shrinks the TLV area at its start.
  /// delta must be a multiple of 8.
  HelperStatus adjust_srh(int delta);

  /// Runs one endpoint function body (no second advance) and stores the
  /// resulting destination in the packet metadata. Endpoint hook only, at
  /// most once per run.
  HelperStatus action(SegAction action, const ActionParams& params);

  /// Inserts or encapsulates an SRH. Transit hook only.
  HelperStatus push_encap(EncapMode mode, const Srh& srh,
                          const Ipv6Address& outer_src = Ipv6Address());

  uint64_t timestamp() const noexcept { return now_ns_; }

  /// ECMP nexthops of `addr` in the node's main table.
  HelperStatus ecmp_nexthops(const Ipv6Address& addr, std::vector<Nexthop>& out) const;

  HelperStatus map_get(std::string_view map, std::span<const uint8_t> key,
                       Bytes& value_out) const;
  HelperStatus map_put(std::string_view map, std::span<const uint8_t> key,
                       std::span<const uint8_t> value);

  /// Queues an event (<= 256 octets) for the daemon listening on this
  /// program's channel.
  HelperStatus emit_event(std::span<const uint8_t> payload);

  const Node& node() const noexcept { return node_; }

  friend ForwardingDecision finalize(ProgramContext& ctx, ProgramOutcome outcome);

 private:
  Srh* outer_srh() noexcept { return packet_.outer_srh(); }

  Node& node_;
  Packet& packet_;
  Hook hook_;
  uint64_t now_ns_;
  std::string channel_;
  bool action_taken_ = false;
};

/// Applies the program's return code: validates a modified SRH, then
/// forwards by lookup (OK), drops (DROP) or uses the stored destination
/// (REDIRECT).
ForwardingDecision finalize(ProgramContext& ctx, ProgramOutcome outcome);

/// Endpoint hook: advances the SRH, runs the program, finalizes.
ForwardingDecision run_endpoint_program(Node& node, const Program& program,
                                        const std::string& name, Packet& packet,
                                        uint64_t now_ns);

/// Transit hook on a matched route.
ForwardingDecision run_transit_program(Node& node, const Program& program,
                                       const std::string& name, Packet& packet,
                                       uint64_t now_ns);

}  // namespace seg6
