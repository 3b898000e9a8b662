#include "seg6/pipeline.hpp"

#include <algorithm>
#include <type_traits>

#include "seg6/behaviors.hpp"
#include "seg6/program.hpp"

namespace seg6 {

namespace {

void reset_meta(Node& node, Packet& p, uint64_t now_ns) {
  p.meta = PacketMeta{};
  p.meta.ingress_node = node.id();
  p.meta.rx_timestamp_ns = now_ns;
}

ForwardingDecision after_behavior(const Node& node, Packet& p,
                                  std::optional<DropReason> drop) {
  if (drop) return Drop{*drop};
  return resolve_forwarding(node, p);
}

ForwardingDecision dispatch_local(Node& node, const LocalBehavior& behavior, Packet& p,
                                  uint64_t now_ns) {
  try {
    return std::visit(
        [&](const auto& b) -> ForwardingDecision {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, behavior::End>) {
            return after_behavior(node, p, end(p));
          } else if constexpr (std::is_same_v<T, behavior::EndX>) {
            return after_behavior(node, p, end_x(p, b.nexthop));
          } else if constexpr (std::is_same_v<T, behavior::EndT>) {
            return after_behavior(node, p, end_t(p, b.table));
          } else if constexpr (std::is_same_v<T, behavior::EndB6>) {
            return after_behavior(node, p, end_b6(p, b.srh));
          } else if constexpr (std::is_same_v<T, behavior::EndB6Encaps>) {
            const Ipv6Address src = b.src.is_unspecified() ? node.address() : b.src;
            return after_behavior(node, p,
                                  end_b6_encaps(p, b.srh, src, node.default_hop_limit()));
          } else if constexpr (std::is_same_v<T, behavior::EndDT6>) {
            return after_behavior(node, p, end_dt6(p, b.table));
          } else {
            const Program* prog = node.find_program(b.program);
            if (prog == nullptr) return Drop{DropReason::kUnknownProgram};
            return run_endpoint_program(node, *prog, b.program, p, now_ns);
          }
        },
        behavior);
  } catch (const InvariantViolation&) {
    return Drop{DropReason::kInvariantViolation};
  }
}

ForwardingDecision apply_transit_and_forward(Node& node, Packet& p, uint64_t now_ns) {
  const TransitBehavior* t = node.match_transit(p.outer().dst);
  if (t == nullptr) return resolve_forwarding(node, p);
  try {
    return std::visit(
        [&](const auto& b) -> ForwardingDecision {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, behavior::TInsert>) {
            return after_behavior(node, p, t_insert(p, b.srh));
          } else if constexpr (std::is_same_v<T, behavior::TEncaps>) {
            t_encaps(p, b.srh, b.src.is_unspecified() ? node.address() : b.src,
                     node.default_hop_limit());
            return resolve_forwarding(node, p);
          } else {
            const Program* prog = node.find_program(b.program);
            if (prog == nullptr) return Drop{DropReason::kUnknownProgram};
            return run_transit_program(node, *prog, b.program, p, now_ns);
          }
        },
        *t);
  } catch (const InvariantViolation&) {
    return Drop{DropReason::kInvariantViolation};
  }
}

}  // namespace

bool is_icmp_error(const Packet& p) {
  if (p.udp || p.layers.empty() || p.payload.empty()) return false;
  const HeaderLayer& inner = p.layers.back();
  const uint8_t proto = inner.srhs.empty() ? inner.ip.next_header : inner.srhs.back().next_header;
  return proto == proto::kIcmpv6 && p.payload[0] < 128;
}

std::optional<Nexthop> resolve_destination(const Node& node, const Ipv6Address& dst,
                                           TableId table, const FlowKey& key) {
  if (node.is_local_address(dst)) return Nexthop{dst, kLocalLink};
  return node.fib().lookup(dst, table, key);
}

ForwardingDecision resolve_forwarding(const Node& node, Packet& p) {
  std::optional<Nexthop> nh = p.meta.pending_destination;
  if (!nh) {
    nh = resolve_destination(node, p.outer().dst, p.meta.pending_table.value_or(kMainTable),
                             flow_key_of(p));
  }
  if (!nh) return Drop{DropReason::kNoRoute};
  if (nh->link == kLocalLink) return LocalDeliver{};
  return Forward{nh->link, nh->address};
}

ForwardingDecision process_ingress(Node& node, Packet& p, uint64_t now_ns) {
  reset_meta(node, p, now_ns);
  if (node.is_local_address(p.outer().dst)) return LocalDeliver{};
  if (p.outer().hop_limit <= 1) {
    if (!is_icmp_error(p)) {
      node.outbox().push_back(make_icmp_error(node.address(), p, icmp::kTimeExceeded, 0,
                                              node.default_hop_limit()));
    }
    return Drop{DropReason::kHopLimitExceeded};
  }
  --p.outer().hop_limit;
  if (const LocalBehavior* b = node.find_local_sid(p.outer().dst)) {
    return dispatch_local(node, *b, p, now_ns);
  }
  return apply_transit_and_forward(node, p, now_ns);
}

ForwardingDecision process_local_output(Node& node, Packet& p, uint64_t now_ns) {
  reset_meta(node, p, now_ns);
  if (node.is_local_address(p.outer().dst)) return LocalDeliver{};
  return apply_transit_and_forward(node, p, now_ns);
}

Packet make_icmp_error(const Ipv6Address& src, const Packet& offender, uint8_t type,
                       uint8_t code, uint8_t hop_limit) {
  Bytes quoted;
  try {
    quoted = encode_packet(offender);
  } catch (const InvariantViolation&) {
  }
  quoted.resize(std::min(quoted.size(), icmp::kQuotedOctets));
  Packet reply;
  HeaderLayer l;
  l.ip.src = src;
  l.ip.dst = offender.outer().src;
  l.ip.hop_limit = hop_limit;
  l.ip.next_header = proto::kIcmpv6;
  reply.layers.push_back(std::move(l));
  reply.payload = {type, code, 0, 0, 0, 0, 0, 0};
  reply.payload.insert(reply.payload.end(), quoted.begin(), quoted.end());
  update_payload_lengths(reply);
  return reply;
}

}  // namespace seg6
