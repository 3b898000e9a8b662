#include "seg6/packet.hpp"

#include <algorithm>
#include <cstring>

namespace seg6 {

namespace {

uint8_t transport_protocol(const Packet& p) {
  if (p.udp) return proto::kUdp;
  // Opaque payload: whatever the last next_header of the innermost layer
  // names. A freshly built packet without UDP defaults to "no next header".
  const HeaderLayer& last = p.layers.back();
  uint8_t nh = last.srhs.empty() ? last.ip.next_header
                                 : last.srhs.back().next_header;
  if (nh == proto::kRouting || nh == proto::kIpv6InIpv6 || nh == proto::kUdp) {
    return proto::kNoNextHeader;
  }
  return nh;
}

uint8_t expected_after(const Packet& p, size_t layer, size_t srh_index) {
  const HeaderLayer& l = p.layers[layer];
  if (srh_index < l.srhs.size()) return proto::kRouting;
  if (layer + 1 < p.layers.size()) return proto::kIpv6InIpv6;
  return transport_protocol(p);
}

size_t transport_size(const Packet& p) {
  return (p.udp ? kUdpHeaderSize : 0) + p.payload.size();
}

size_t size_after_layer(const Packet& p, size_t layer) {
  size_t n = transport_size(p);
  for (size_t i = p.layers.size(); i-- > layer + 1;) {
    n += kIpv6HeaderSize;
    for (const auto& s : p.layers[i].srhs) n += s.encoded_size();
  }
  for (const auto& s : p.layers[layer].srhs) n += s.encoded_size();
  return n;
}

void check_srh_structure(const Srh& srh) {
  if (srh.routing_type != kSrhRoutingType) {
    throw InvariantViolation("SRH routing_type must be 4");
  }
  if (srh.segments.empty() || srh.segments.size() != srh.last_entry + 1u) {
    throw InvariantViolation("SRH segment count != last_entry + 1");
  }
  if (srh.segments_left > srh.last_entry) {
    throw InvariantViolation("SRH segments_left > last_entry");
  }
  if (srh.encoded_size() != 8u * (srh.hdr_ext_len + 1u)) {
    throw InvariantViolation("SRH size does not match hdr_ext_len");
  }
  if (!parse_tlv_region(srh.tlv_bytes)) {
    throw InvariantViolation("SRH TLV walk overruns the header");
  }
}

uint32_t ones_complement_add(uint32_t sum, const uint8_t* data, size_t n) {
  size_t i = 0;
  for (; i + 1 < n; i += 2) sum += static_cast<uint32_t>(data[i] << 8 | data[i + 1]);
  if (i < n) sum += static_cast<uint32_t>(data[i] << 8);
  return sum;
}

uint16_t fold(uint32_t sum) {
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<uint16_t>(sum);
}

uint16_t compute_udp_checksum(const Ipv6Address& src, const Ipv6Address& dst,
                              const UdpHeader& udp, std::span<const uint8_t> payload) {
  uint32_t upper_len = static_cast<uint32_t>(kUdpHeaderSize + payload.size());
  uint8_t pseudo[40];
  std::memcpy(pseudo, src.octets().data(), 16);
  std::memcpy(pseudo + 16, dst.octets().data(), 16);
  put_be32(pseudo + 32, upper_len);
  pseudo[36] = pseudo[37] = pseudo[38] = 0;
  pseudo[39] = proto::kUdp;
  uint8_t hdr[8];
  put_be16(hdr, udp.src_port);
  put_be16(hdr + 2, udp.dst_port);
  put_be16(hdr + 4, static_cast<uint16_t>(upper_len));
  put_be16(hdr + 6, 0);
  uint32_t sum = ones_complement_add(0, pseudo, sizeof(pseudo));
  sum = ones_complement_add(sum, hdr, sizeof(hdr));
  sum = ones_complement_add(sum, payload.data(), payload.size());
  uint16_t c = static_cast<uint16_t>(~fold(sum));
  return c == 0 ? 0xFFFF : c;
}

const Ipv6Address& pseudo_destination(const HeaderLayer& l) {
  return l.srhs.empty() ? l.ip.dst : l.srhs.back().final_segment();
}

}  // namespace

// ---------------------------------------------------------------------------

Srh Srh::from_path(std::span<const Ipv6Address> path, Bytes tlvs) {
  if (path.empty() || path.size() > 256) {
    throw InvariantViolation("SRH needs between 1 and 256 segments");
  }
  Srh srh;
  srh.segments.assign(path.rbegin(), path.rend());
  srh.tlv_bytes = std::move(tlvs);
  srh.sync_lengths();
  srh.segments_left = srh.last_entry;
  return srh;
}

void Srh::sync_lengths() {
  if (segments.empty() || segments.size() > 256) {
    throw InvariantViolation("SRH needs between 1 and 256 segments");
  }
  size_t size = encoded_size();
  if (size % 8 != 0 || size / 8 - 1 > 255) {
    throw InvariantViolation("SRH size not representable in hdr_ext_len");
  }
  last_entry = static_cast<uint8_t>(segments.size() - 1);
  hdr_ext_len = static_cast<uint8_t>(size / 8 - 1);
}

// ---------------------------------------------------------------------------
// TLVs

void append_tlv(Bytes& out, const Tlv& tlv) {
  if (tlv.type == tlv_type::kPad1) {
    if (!tlv.value.empty()) throw InvariantViolation("Pad1 carries no value");
    out.push_back(0);
    return;
  }
  if (tlv.value.size() > 255) throw InvariantViolation("TLV value > 255 octets");
  out.push_back(tlv.type);
  out.push_back(static_cast<uint8_t>(tlv.value.size()));
  out.insert(out.end(), tlv.value.begin(), tlv.value.end());
}

void pad_tlv_region(Bytes& region) {
  size_t rem = (8 - region.size() % 8) % 8;
  if (rem == 1) {
    region.push_back(tlv_type::kPad1);
  } else if (rem >= 2) {
    region.push_back(tlv_type::kPadN);
    region.push_back(static_cast<uint8_t>(rem - 2));
    region.insert(region.end(), rem - 2, 0);
  }
}

Bytes encode_tlv_region(std::span<const Tlv> tlvs) {
  Bytes out;
  for (const auto& t : tlvs) append_tlv(out, t);
  pad_tlv_region(out);
  return out;
}

std::optional<std::vector<Tlv>> parse_tlv_region(std::span<const uint8_t> region) {
  std::vector<Tlv> out;
  size_t i = 0;
  while (i < region.size()) {
    uint8_t type = region[i];
    if (type == tlv_type::kPad1) {
      out.push_back(Tlv{});
      ++i;
      continue;
    }
    if (i + 2 > region.size()) return std::nullopt;
    size_t len = region[i + 1];
    if (i + 2 + len > region.size()) return std::nullopt;
    out.push_back(Tlv{type, Bytes(region.begin() + i + 2, region.begin() + i + 2 + len)});
    i += 2 + len;
  }
  return out;
}

std::optional<Tlv> find_tlv(const Srh& srh, uint8_t type) {
  auto tlvs = parse_tlv_region(srh.tlv_bytes);
  if (!tlvs) return std::nullopt;
  for (auto& t : *tlvs) {
    if (t.type == type) return std::move(t);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation

const char* to_string(SrhError e) noexcept {
  switch (e) {
    case SrhError::kBadRoutingType: return "BadRoutingType";
    case SrhError::kSegmentCountMismatch: return "SegmentCountMismatch";
    case SrhError::kSegmentsLeftOutOfRange: return "SegmentsLeftOutOfRange";
    case SrhError::kLengthMismatch: return "LengthMismatch";
    case SrhError::kTlvMisaligned: return "TlvMisaligned";
    case SrhError::kTlvWalkOverrun: return "TlvWalkOverrun";
    case SrhError::kRawFillInvalid: return "RawFillInvalid";
  }
  return "?";
}

std::optional<SrhViolation> validate_srh(const Srh& srh) {
  auto fail = [](SrhError code, std::string detail) {
    return std::optional<SrhViolation>(SrhViolation{code, std::move(detail)});
  };
  if (srh.routing_type != kSrhRoutingType) {
    return fail(SrhError::kBadRoutingType,
                "routing_type " + std::to_string(srh.routing_type));
  }
  if (srh.segments.empty() || srh.segments.size() != srh.last_entry + 1u) {
    return fail(SrhError::kSegmentCountMismatch,
                std::to_string(srh.segments.size()) + " segments, last_entry " +
                    std::to_string(srh.last_entry));
  }
  if (srh.segments_left > srh.last_entry) {
    return fail(SrhError::kSegmentsLeftOutOfRange,
                "segments_left " + std::to_string(srh.segments_left) +
                    " > last_entry " + std::to_string(srh.last_entry));
  }
  if (srh.tlv_bytes.size() % 8 != 0) {
    return fail(SrhError::kTlvMisaligned,
                std::to_string(srh.tlv_bytes.size()) + " TLV octets");
  }
  if (srh.encoded_size() != 8u * (srh.hdr_ext_len + 1u)) {
    return fail(SrhError::kLengthMismatch,
                "size " + std::to_string(srh.encoded_size()) + " vs hdr_ext_len " +
                    std::to_string(srh.hdr_ext_len));
  }
  const auto& region = srh.tlv_bytes;
  size_t i = 0;
  size_t pad1_run = 0;
  while (i < region.size()) {
    if (region[i] == tlv_type::kPad1) {
      if (++pad1_run > 1) {
        return fail(SrhError::kRawFillInvalid,
                    "run of Pad1 octets at TLV offset " + std::to_string(i - 1));
      }
      ++i;
      continue;
    }
    pad1_run = 0;
    if (i + 2 > region.size() || i + 2 + region[i + 1] > region.size()) {
      return fail(SrhError::kTlvWalkOverrun,
                  "TLV at offset " + std::to_string(i) + " overruns the header");
    }
    i += 2 + region[i + 1];
  }
  return std::nullopt;
}

void check_packet_invariants(const Packet& p) {
  if (p.layers.empty()) throw InvariantViolation("packet has no IPv6 header");
  for (size_t li = 0; li < p.layers.size(); ++li) {
    const HeaderLayer& l = p.layers[li];
    if (l.ip.flow_label > 0xFFFFF) throw InvariantViolation("flow_label > 20 bits");
    if (l.ip.next_header != expected_after(p, li, 0)) {
      throw InvariantViolation("IPv6 next_header inconsistent with the chain");
    }
    for (size_t si = 0; si < l.srhs.size(); ++si) {
      check_srh_structure(l.srhs[si]);
      if (l.srhs[si].next_header != expected_after(p, li, si + 1)) {
        throw InvariantViolation("SRH next_header inconsistent with the chain");
      }
    }
    if (size_after_layer(p, li) > 0xFFFF) {
      throw InvariantViolation("payload exceeds 65535 octets");
    }
  }
}

// ---------------------------------------------------------------------------
// Codec

void relink_next_headers(Packet& p) {
  uint8_t transport = transport_protocol(p);
  for (size_t li = 0; li < p.layers.size(); ++li) {
    HeaderLayer& l = p.layers[li];
    uint8_t tail = li + 1 < p.layers.size() ? proto::kIpv6InIpv6 : transport;
    if (l.srhs.empty()) {
      l.ip.next_header = tail;
      continue;
    }
    l.ip.next_header = proto::kRouting;
    for (size_t si = 0; si < l.srhs.size(); ++si) {
      l.srhs[si].next_header = si + 1 < l.srhs.size() ? proto::kRouting : tail;
    }
  }
}

void update_payload_lengths(Packet& p) {
  size_t n = transport_size(p);
  for (size_t li = p.layers.size(); li-- > 0;) {
    for (const auto& s : p.layers[li].srhs) n += s.encoded_size();
    p.layers[li].ip.payload_length = static_cast<uint16_t>(n);
    n += kIpv6HeaderSize;
  }
}

void update_lengths(Packet& p) {
  update_payload_lengths(p);
  if (p.udp) {
    p.udp->length = static_cast<uint16_t>(kUdpHeaderSize + p.payload.size());
    p.udp->checksum = udp_checksum(p);
  }
}

size_t encoded_size(const Packet& p) {
  return p.layers.empty() ? 0 : kIpv6HeaderSize + size_after_layer(p, 0);
}

Bytes encode_packet(const Packet& p) {
  Bytes out;
  encode_packet_into(p, out);
  return out;
}

void encode_packet_into(const Packet& p, Bytes& out) {
  check_packet_invariants(p);
  out.clear();
  out.reserve(encoded_size(p));
  for (size_t li = 0; li < p.layers.size(); ++li) {
    const HeaderLayer& l = p.layers[li];
    size_t base = out.size();
    out.resize(base + kIpv6HeaderSize);
    uint8_t* h = out.data() + base;
    uint32_t vtf = (6u << 28) | (static_cast<uint32_t>(l.ip.traffic_class) << 20) |
                   (l.ip.flow_label & 0xFFFFF);
    put_be32(h, vtf);
    put_be16(h + 4, static_cast<uint16_t>(size_after_layer(p, li)));
    h[6] = l.ip.next_header;
    h[7] = l.ip.hop_limit;
    std::memcpy(h + 8, l.ip.src.octets().data(), 16);
    std::memcpy(h + 24, l.ip.dst.octets().data(), 16);
    for (const Srh& s : l.srhs) {
      out.push_back(s.next_header);
      out.push_back(s.hdr_ext_len);
      out.push_back(s.routing_type);
      out.push_back(s.segments_left);
      out.push_back(s.last_entry);
      out.push_back(s.flags);
      out.push_back(static_cast<uint8_t>(s.tag >> 8));
      out.push_back(static_cast<uint8_t>(s.tag));
      for (const auto& seg : s.segments) {
        out.insert(out.end(), seg.octets().begin(), seg.octets().end());
      }
      out.insert(out.end(), s.tlv_bytes.begin(), s.tlv_bytes.end());
    }
  }
  if (p.udp) {
    size_t base = out.size();
    out.resize(base + kUdpHeaderSize);
    uint8_t* u = out.data() + base;
    put_be16(u, p.udp->src_port);
    put_be16(u + 2, p.udp->dst_port);
    put_be16(u + 4, static_cast<uint16_t>(kUdpHeaderSize + p.payload.size()));
    put_be16(u + 6, udp_checksum(p));
  }
  out.insert(out.end(), p.payload.begin(), p.payload.end());
}

Packet decode_packet(std::span<const uint8_t> b, DecodeReport* report) {
  Packet p;
  size_t off = 0;
  uint8_t next = proto::kIpv6InIpv6;
  while (next == proto::kIpv6InIpv6) {
    if (b.size() - off < kIpv6HeaderSize) throw ParseError(off, "truncated IPv6 header");
    const uint8_t* h = b.data() + off;
    uint32_t vtf = get_be32(h);
    if ((vtf >> 28) != 6) throw ParseError(off, "IP version is not 6");
    HeaderLayer layer;
    layer.ip.traffic_class = static_cast<uint8_t>(vtf >> 20);
    layer.ip.flow_label = vtf & 0xFFFFF;
    layer.ip.payload_length = get_be16(h + 4);
    layer.ip.next_header = h[6];
    layer.ip.hop_limit = h[7];
    std::memcpy(layer.ip.src.octets().data(), h + 8, 16);
    std::memcpy(layer.ip.dst.octets().data(), h + 24, 16);
    if (layer.ip.payload_length != b.size() - off - kIpv6HeaderSize) {
      throw ParseError(off + 4, "payload_length does not match remaining octets");
    }
    off += kIpv6HeaderSize;
    next = layer.ip.next_header;
    while (next == proto::kRouting) {
      if (b.size() - off < kSrhFixedSize) throw ParseError(off, "truncated routing header");
      const uint8_t* r = b.data() + off;
      Srh s;
      s.next_header = r[0];
      s.hdr_ext_len = r[1];
      s.routing_type = r[2];
      s.segments_left = r[3];
      s.last_entry = r[4];
      s.flags = r[5];
      s.tag = get_be16(r + 6);
      if (s.routing_type != kSrhRoutingType) {
        throw ParseError(off + 2, "unsupported routing_type " + std::to_string(s.routing_type));
      }
      size_t size = 8u * (s.hdr_ext_len + 1u);
      if (b.size() - off < size) throw ParseError(off, "truncated SRH");
      size_t seg_bytes = 16u * (s.last_entry + 1u);
      if (kSrhFixedSize + seg_bytes > size) {
        throw ParseError(off + 1, "hdr_ext_len too small for last_entry");
      }
      if (s.segments_left > s.last_entry) {
        throw ParseError(off + 3, "segments_left exceeds last_entry");
      }
      s.segments.resize(s.last_entry + 1u);
      for (size_t i = 0; i < s.segments.size(); ++i) {
        std::memcpy(s.segments[i].octets().data(), r + 8 + 16 * i, 16);
      }
      s.tlv_bytes.assign(r + 8 + seg_bytes, r + size);
      if (!parse_tlv_region(s.tlv_bytes)) {
        throw ParseError(off + 8 + seg_bytes, "TLV walk overruns the SRH");
      }
      off += size;
      next = s.next_header;
      layer.srhs.push_back(std::move(s));
    }
    p.layers.push_back(std::move(layer));
  }
  if (next == proto::kUdp) {
    if (b.size() - off < kUdpHeaderSize) throw ParseError(off, "truncated UDP header");
    const uint8_t* u = b.data() + off;
    UdpHeader udp{get_be16(u), get_be16(u + 2), get_be16(u + 4), get_be16(u + 6)};
    if (udp.length != b.size() - off) throw ParseError(off + 4, "UDP length mismatch");
    off += kUdpHeaderSize;
    p.udp = udp;
  }
  p.payload.assign(b.begin() + off, b.end());
  if (p.udp && report != nullptr) {
    report->udp_checksum_mismatch = udp_checksum(p) != p.udp->checksum;
  }
  return p;
}

uint16_t udp_checksum(const Packet& p) {
  if (!p.udp || p.layers.empty()) throw NoTransport();
  const HeaderLayer& inner = p.layers.back();
  return compute_udp_checksum(inner.ip.src, pseudo_destination(inner), *p.udp, p.payload);
}

Packet make_udp_packet(const Ipv6Address& src, const Ipv6Address& dst,
                       uint16_t src_port, uint16_t dst_port, Bytes payload,
                       uint8_t hop_limit) {
  Packet p;
  HeaderLayer l;
  l.ip.src = src;
  l.ip.dst = dst;
  l.ip.hop_limit = hop_limit;
  l.ip.next_header = proto::kUdp;
  p.layers.push_back(std::move(l));
  p.udp = UdpHeader{src_port, dst_port, 0, 0};
  p.payload = std::move(payload);
  update_lengths(p);
  return p;
}

}  // namespace seg6
