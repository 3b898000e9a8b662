#include "seg6/program.hpp"

#include <algorithm>
#include <optional>

#include "seg6/behaviors.hpp"
#include "seg6/pipeline.hpp"

namespace seg6 {

namespace {

HelperStatus from_drop(DropReason r) {
  switch (r) {
    case DropReason::kNoSrh: return HelperStatus::kNoSrh;
    case DropReason::kSegmentsExhausted: return HelperStatus::kSegmentsExhausted;
    case DropReason::kNotLastSegment: return HelperStatus::kNotLastSegment;
    case DropReason::kNoInnerHeader: return HelperStatus::kNoInnerHeader;
    case DropReason::kSrhPresent: return HelperStatus::kSrhPresent;
    case DropReason::kNoRoute: return HelperStatus::kNoRoute;
    default: return HelperStatus::kInvalidArgument;
  }
}

// Every layer: an action may have pushed a modified SRH below a new outer
// header.
bool srhs_valid(const Packet& p) {
  try {
    check_packet_invariants(p);
  } catch (const InvariantViolation&) {
    return false;
  }
  for (const auto& layer : p.layers) {
    if (!std::all_of(layer.srhs.begin(), layer.srhs.end(),
                     [](const Srh& s) { return !validate_srh(s).has_value(); })) {
      return false;
    }
  }
  return true;
}

}  // namespace

ProgramContext::ProgramContext(Node& node, Packet& packet, Hook hook, uint64_t now_ns,
                               std::string event_channel)
    : node_(node),
      packet_(packet),
      hook_(hook),
      now_ns_(now_ns),
      channel_(std::move(event_channel)) {}

HelperStatus ProgramContext::store_bytes(size_t offset, std::span<const uint8_t> data) {
  Srh* srh = outer_srh();
  if (srh == nullptr) return HelperStatus::kNoSrh;
  if (data.empty()) return HelperStatus::kInvalidArgument;
  const size_t end = offset + data.size();
  if (end < offset) return HelperStatus::kWriteOutOfBounds;

  if (offset >= srh_offset::kFlags && end <= srh_offset::kSegments) {
    for (size_t i = 0; i < data.size(); ++i) {
      size_t at = offset + i;
      if (at == srh_offset::kFlags) {
        srh->flags = data[i];
      } else if (at == srh_offset::kTag) {
        srh->tag = static_cast<uint16_t>((data[i] << 8) | (srh->tag & 0x00FF));
      } else {
        srh->tag = static_cast<uint16_t>((srh->tag & 0xFF00) | data[i]);
      }
    }
  } else if (offset >= srh->tlv_offset() && end <= srh->encoded_size()) {
    std::copy(data.begin(), data.end(), srh->tlv_bytes.begin() + (offset - srh->tlv_offset()));
  } else {
    return HelperStatus::kWriteOutOfBounds;
  }
  packet_.meta.srh_dirty = true;
  return HelperStatus::kOk;
}

HelperStatus ProgramContext::adjust_srh(int delta) {
  Srh* srh = outer_srh();
  if (srh == nullptr) return HelperStatus::kNoSrh;
  if (delta % 8 != 0) return HelperStatus::kBadDelta;
  if (delta < 0 && static_cast<size_t>(-delta) > srh->tlv_bytes.size()) {
    return HelperStatus::kBadDelta;
  }
  const long new_size = static_cast<long>(srh->encoded_size()) + delta;
  if (new_size / 8 - 1 > 255) return HelperStatus::kSizeOverflow;
  if (delta == 0) return HelperStatus::kOk;
  if (delta > 0) {
    srh->tlv_bytes.insert(srh->tlv_bytes.begin(), static_cast<size_t>(delta), 0);
  } else {
    srh->tlv_bytes.erase(srh->tlv_bytes.begin(), srh->tlv_bytes.begin() + (-delta));
  }
  srh->hdr_ext_len = static_cast<uint8_t>(new_size / 8 - 1);
  update_payload_lengths(packet_);
  packet_.meta.srh_dirty = true;
  return HelperStatus::kOk;
}

HelperStatus ProgramContext::action(SegAction action, const ActionParams& params) {
  if (hook_ != Hook::kEndpoint) return HelperStatus::kWrongHook;
  if (action_taken_) return HelperStatus::kActionAlreadyTaken;
  action_taken_ = true;

  // Mutating actions work on a copy that is committed only on success.
  std::optional<Packet> scratch;
  if (action == SegAction::kEndB6 || action == SegAction::kEndB6Encaps ||
      action == SegAction::kEndDT6) {
    scratch = packet_;
  }
  Packet& work = scratch ? *scratch : packet_;
  TableId lookup_table = kMainTable;
  try {
    switch (action) {
      case SegAction::kEndX:
        packet_.meta.pending_destination = params.nexthop;
        return HelperStatus::kOk;
      case SegAction::kEndT:
        lookup_table = params.table;
        break;
      case SegAction::kEndB6:
        insert_srh(work, params.srh);
        break;
      case SegAction::kEndB6Encaps:
        encapsulate(work, params.srh,
                    params.outer_src.is_unspecified() ? node_.address() : params.outer_src,
                    node_.default_hop_limit());
        break;
      case SegAction::kEndDT6: {
        for (const auto& s : work.layers[0].srhs) {
          if (s.segments_left != 0) return HelperStatus::kNotLastSegment;
        }
        if (auto drop = decapsulate(work, params.table)) return from_drop(*drop);
        lookup_table = params.table;
        break;
      }
    }
  } catch (const InvariantViolation&) {
    return HelperStatus::kInvalidArgument;
  }
  auto nh = resolve_destination(node_, work.outer().dst, lookup_table, flow_key_of(work));
  if (!nh) return HelperStatus::kNoRoute;
  if (scratch) packet_ = std::move(*scratch);
  packet_.meta.pending_destination = *nh;
  return HelperStatus::kOk;
}

HelperStatus ProgramContext::push_encap(EncapMode mode, const Srh& srh,
                                        const Ipv6Address& outer_src) {
  if (hook_ != Hook::kTransit) return HelperStatus::kWrongHook;
  try {
    if (mode == EncapMode::kInsert) {
      if (auto drop = t_insert(packet_, srh)) return from_drop(*drop);
    } else {
      t_encaps(packet_, srh, outer_src.is_unspecified() ? node_.address() : outer_src,
               node_.default_hop_limit());
    }
  } catch (const InvariantViolation&) {
    return HelperStatus::kInvalidArgument;
  }
  packet_.meta.srh_dirty = true;
  return HelperStatus::kOk;
}

HelperStatus ProgramContext::ecmp_nexthops(const Ipv6Address& addr,
                                           std::vector<Nexthop>& out) const {
  auto list = node_.fib().ecmp_list(addr, kMainTable);
  if (!list) return HelperStatus::kNoRoute;
  out = std::move(*list);
  return HelperStatus::kOk;
}

HelperStatus ProgramContext::map_get(std::string_view map, std::span<const uint8_t> key,
                                     Bytes& value_out) const {
  return node_.maps().get(map, key, value_out);
}

HelperStatus ProgramContext::map_put(std::string_view map, std::span<const uint8_t> key,
                                     std::span<const uint8_t> value) {
  return node_.maps().put(map, key, value);
}

HelperStatus ProgramContext::emit_event(std::span<const uint8_t> payload) {
  if (payload.size() > kMaxEventPayload) return HelperStatus::kPayloadTooLarge;
  node_.events(channel_).push(EmittedEvent{node_.id(), now_ns_, Bytes(payload.begin(), payload.end())});
  return HelperStatus::kOk;
}

ForwardingDecision finalize(ProgramContext& ctx, ProgramOutcome outcome) {
  Packet& p = ctx.packet_;
  if (outcome == ProgramOutcome::kDrop) return Drop{DropReason::kProgramDrop};
  if (p.meta.srh_dirty && !srhs_valid(p)) {
    return Drop{DropReason::kInvalidSrhAfterProgram};
  }
  if (outcome == ProgramOutcome::kRedirect) {
    if (!p.meta.pending_destination) return Drop{DropReason::kRedirectWithoutDestination};
    return resolve_forwarding(ctx.node_, p);
  }
  p.meta.pending_destination.reset();
  return resolve_forwarding(ctx.node_, p);
}

ForwardingDecision run_endpoint_program(Node& node, const Program& program,
                                        const std::string& name, Packet& packet,
                                        uint64_t now_ns) {
  if (auto drop = end(packet)) return Drop{*drop};
  ProgramContext ctx(node, packet, Hook::kEndpoint, now_ns, name);
  ProgramOutcome outcome = program(ctx);
  return finalize(ctx, outcome);
}

ForwardingDecision run_transit_program(Node& node, const Program& program,
                                       const std::string& name, Packet& packet,
                                       uint64_t now_ns) {
  ProgramContext ctx(node, packet, Hook::kTransit, now_ns, name);
  ProgramOutcome outcome = program(ctx);
  return finalize(ctx, outcome);
}

}  // namespace seg6
