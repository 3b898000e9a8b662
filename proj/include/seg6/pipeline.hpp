#pragma once

#include <cstdint>
#include <optional>

#include "seg6/node.hpp"
#include "seg6/packet.hpp"

namespace seg6 {

namespace icmp {
inline constexpr uint8_t kDestinationUnreachable = 1;
inline constexpr uint8_t kPortUnreachable = 4;
inline constexpr uint8_t kTimeExceeded = 3;
inline constexpr size_t kQuotedOctets = 64;
}  // namespace icmp

/**
 * @brief Full ingress pipeline of a node.
 *
 * Order: packets for the node's own address are delivered; hop limit is
 * checked and decremented; then a local SID match dispatches its behavior,
 * else a transit route is applied, else the packet is forwarded by FIB
 * lookup. Hop-limit expiry queues an ICMPv6 time-exceeded in the outbox.
 */
ForwardingDecision process_ingress(Node& node, Packet& packet, uint64_t now_ns);

/// Path for packets the node originates: transit match and FIB lookup, no
/// hop-limit processing and no SID dispatch.
ForwardingDecision process_local_output(Node& node, Packet& packet, uint64_t now_ns);

/// Final forwarding step shared by native behaviors and programs: the stored
/// destination if any, else lookup of dst in the pending table (main table
/// by default, no fallback).
ForwardingDecision resolve_forwarding(const Node& node, Packet& packet);

/// Lookup honoring local addresses: a local destination resolves to
/// {dst, kLocalLink}.
std::optional<Nexthop> resolve_destination(const Node& node, const Ipv6Address& dst,
                                           TableId table, const FlowKey& key);

/// True for ICMPv6 error messages (types below 128), which never trigger
/// another error.
bool is_icmp_error(const Packet& p);

/// Minimal ICMPv6 error quoting the first 64 octets of the offender.
Packet make_icmp_error(const Ipv6Address& src, const Packet& offender, uint8_t type,
                       uint8_t code, uint8_t hop_limit = 64);

}  // namespace seg6
