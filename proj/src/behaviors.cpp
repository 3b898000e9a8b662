#include "seg6/behaviors.hpp"

namespace seg6 {

namespace {

void require_valid(const Srh& srh) {
  if (auto v = validate_srh(srh)) {
    throw InvariantViolation(std::string("configured SRH invalid: ") + to_string(v->code) +
                             " (" + v->detail + ")");
  }
}

}  // namespace

Srh* active_srh(Packet& p) {
  if (p.layers.empty()) return nullptr;
  for (auto& s : p.layers[0].srhs) {
    if (s.segments_left > 0) return &s;
  }
  return nullptr;
}

std::optional<DropReason> end(Packet& p) {
  if (p.layers.empty() || p.layers[0].srhs.empty()) return DropReason::kNoSrh;
  Srh* srh = active_srh(p);
  if (srh == nullptr) return DropReason::kSegmentsExhausted;
  --srh->segments_left;
  p.outer().dst = srh->active_segment();
  return std::nullopt;
}

std::optional<DropReason> end_x(Packet& p, const Nexthop& nexthop) {
  if (auto drop = end(p)) return drop;
  p.meta.pending_destination = nexthop;
  return std::nullopt;
}

std::optional<DropReason> end_t(Packet& p, TableId table) {
  if (auto drop = end(p)) return drop;
  p.meta.pending_table = table;
  return std::nullopt;
}

std::optional<DropReason> end_b6(Packet& p, const Srh& srh) {
  require_valid(srh);
  if (auto drop = end(p)) return drop;
  insert_srh(p, srh);
  return std::nullopt;
}

std::optional<DropReason> end_b6_encaps(Packet& p, const Srh& srh, const Ipv6Address& src,
                                        uint8_t hop_limit) {
  require_valid(srh);
  if (auto drop = end(p)) return drop;
  encapsulate(p, srh, src, hop_limit);
  return std::nullopt;
}

std::optional<DropReason> end_dt6(Packet& p, TableId table) {
  if (p.layers.empty()) return DropReason::kNoInnerHeader;
  for (const auto& s : p.layers[0].srhs) {
    if (s.segments_left != 0) return DropReason::kNotLastSegment;
  }
  return decapsulate(p, table);
}

std::optional<DropReason> t_insert(Packet& p, const Srh& srh) {
  require_valid(srh);
  if (!p.layers.empty() && !p.layers[0].srhs.empty()) return DropReason::kSrhPresent;
  insert_srh(p, srh);
  return std::nullopt;
}

void t_encaps(Packet& p, const Srh& srh, const Ipv6Address& src, uint8_t hop_limit) {
  require_valid(srh);
  encapsulate(p, srh, src, hop_limit);
}

void insert_srh(Packet& p, const Srh& srh) {
  require_valid(srh);
  if (srh.segments.size() >= 256) throw InvariantViolation("inserted SRH has too many segments");
  Srh copy = srh;
  copy.segments.insert(copy.segments.begin(), p.outer().dst);
  copy.sync_lengths();
  copy.segments_left = static_cast<uint8_t>(srh.segments_left + 1);
  p.outer().dst = copy.active_segment();
  p.layers[0].srhs.insert(p.layers[0].srhs.begin(), std::move(copy));
  relink_next_headers(p);
  update_payload_lengths(p);
  p.meta.srh_dirty = true;
}

void encapsulate(Packet& p, const Srh& srh, const Ipv6Address& src, uint8_t hop_limit) {
  require_valid(srh);
  HeaderLayer outer;
  outer.ip.traffic_class = p.outer().traffic_class;
  outer.ip.flow_label = p.outer().flow_label;
  outer.ip.hop_limit = hop_limit;
  outer.ip.src = src;
  outer.ip.dst = srh.active_segment();
  outer.srhs.push_back(srh);
  p.layers.insert(p.layers.begin(), std::move(outer));
  relink_next_headers(p);
  update_payload_lengths(p);
  p.meta.srh_dirty = true;
}

std::optional<DropReason> decapsulate(Packet& p, TableId table) {
  if (p.layers.size() < 2) return DropReason::kNoInnerHeader;
  p.layers.erase(p.layers.begin());
  p.meta.pending_destination.reset();
  p.meta.pending_table = table;
  return std::nullopt;
}

}  // namespace seg6
