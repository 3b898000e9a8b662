#pragma once

#include <optional>

#include "seg6/node.hpp"
#include "seg6/packet.hpp"

namespace seg6 {

// Native SRv6 endpoint functions and transit behaviors. Each returns the
// reason to drop the packet, or nullopt when it may proceed to forwarding.
// Configured SRHs that break their invariants throw InvariantViolation.

inline constexpr uint8_t kDefaultHopLimit = 64;

/// First SRH after the outer IPv6 header with segments left; exhausted
/// routing headers are skipped.
Srh* active_srh(Packet& p);

std::optional<DropReason> end(Packet& p);
std::optional<DropReason> end_x(Packet& p, const Nexthop& nexthop);
std::optional<DropReason> end_t(Packet& p, TableId table);
std::optional<DropReason> end_b6(Packet& p, const Srh& srh);
std::optional<DropReason> end_b6_encaps(Packet& p, const Srh& srh, const Ipv6Address& src,
                                        uint8_t hop_limit = kDefaultHopLimit);
std::optional<DropReason> end_dt6(Packet& p, TableId table);

std::optional<DropReason> t_insert(Packet& p, const Srh& srh);
void t_encaps(Packet& p, const Srh& srh, const Ipv6Address& src,
              uint8_t hop_limit = kDefaultHopLimit);

// Behavior bodies without the segment advance.

/// Splices `srh` after the outer IPv6 header with the current destination
/// appended as the final segment, then points dst at the active segment.
void insert_srh(Packet& p, const Srh& srh);

/// Pushes a new outer IPv6 header carrying `srh`.
void encapsulate(Packet& p, const Srh& srh, const Ipv6Address& src,
                 uint8_t hop_limit = kDefaultHopLimit);

/// Removes the outer IPv6 header and its routing headers.
std::optional<DropReason> decapsulate(Packet& p, TableId table);

}  // namespace seg6
