#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seg6/address.hpp"

namespace seg6 {

using Bytes = std::vector<uint8_t>;
using NodeId = uint32_t;
using LinkId = uint32_t;
using TableId = uint32_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
/// Link id used in a pending destination that resolves to the node itself.
inline constexpr LinkId kLocalLink = std::numeric_limits<LinkId>::max();
inline constexpr TableId kMainTable = 0;

namespace proto {
inline constexpr uint8_t kIpv6InIpv6 = 41;
inline constexpr uint8_t kRouting = 43;
inline constexpr uint8_t kUdp = 17;
inline constexpr uint8_t kIcmpv6 = 58;
inline constexpr uint8_t kNoNextHeader = 59;
}  // namespace proto

inline constexpr size_t kIpv6HeaderSize = 40;
inline constexpr size_t kSrhFixedSize = 8;
inline constexpr size_t kUdpHeaderSize = 8;
inline constexpr uint8_t kSrhRoutingType = 4;

// Byte offsets inside an encoded SRH.
namespace srh_offset {
inline constexpr size_t kNextHeader = 0;
inline constexpr size_t kHdrExtLen = 1;
inline constexpr size_t kRoutingType = 2;
inline constexpr size_t kSegmentsLeft = 3;
inline constexpr size_t kLastEntry = 4;
inline constexpr size_t kFlags = 5;
inline constexpr size_t kTag = 6;
inline constexpr size_t kSegments = 8;
}  // namespace srh_offset

class ParseError : public std::runtime_error {
 public:
  ParseError(size_t offset, const std::string& reason)
      : std::runtime_error("parse error at offset " + std::to_string(offset) +
                           ": " + reason),
        offset_(offset),
        reason_(reason) {}

  size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  size_t offset_;
  std::string reason_;
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoTransport : public std::runtime_error {
 public:
  NoTransport() : std::runtime_error("packet carries no UDP layer") {}
};

struct Ipv6Header {
  uint8_t traffic_class = 0;
  uint32_t flow_label = 0;  // 20 bits
  uint16_t payload_length = 0;
  uint8_t next_header = proto::kNoNextHeader;
  uint8_t hop_limit = 64;
  Ipv6Address src;
  Ipv6Address dst;

  friend bool operator==(const Ipv6Header&, const Ipv6Header&) = default;
};

/**
 * @brief Segment Routing Header (routing type 4).
 *
 * Segments are kept in wire order, which is the reverse of the path:
 * segments[0] is the final segment and segments[segments_left] is the
 * active one.
 */
struct SegmentRoutingHeader {
  uint8_t next_header = proto::kNoNextHeader;
  uint8_t hdr_ext_len = 0;
  uint8_t routing_type = kSrhRoutingType;
  uint8_t segments_left = 0;
  uint8_t last_entry = 0;
  uint8_t flags = 0;
  uint16_t tag = 0;
  std::vector<Ipv6Address> segments;
  Bytes tlv_bytes;

  /// Builds an SRH from a path given in travel order. The first element
  /// becomes the active segment.
  static SegmentRoutingHeader from_path(std::span<const Ipv6Address> path,
                                        Bytes tlvs = {});

  size_t encoded_size() const noexcept {
    return kSrhFixedSize + 16 * segments.size() + tlv_bytes.size();
  }
  size_t tlv_offset() const noexcept {
    return kSrhFixedSize + 16 * segments.size();
  }

  /// Recomputes last_entry and hdr_ext_len from the segment and TLV sizes.
  void sync_lengths();

  const Ipv6Address& active_segment() const { return segments.at(segments_left); }
  const Ipv6Address& final_segment() const { return segments.at(0); }

  friend bool operator==(const SegmentRoutingHeader&,
                         const SegmentRoutingHeader&) = default;
};

using Srh = SegmentRoutingHeader;

/// One IPv6 header and the routing headers that directly follow it.
struct HeaderLayer {
  Ipv6Header ip;
  std::vector<Srh> srhs;

  friend bool operator==(const HeaderLayer&, const HeaderLayer&) = default;
};

struct UdpHeader {
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint16_t length = 0;
  uint16_t checksum = 0;

  friend bool operator==(const UdpHeader&, const UdpHeader&) = default;
};

struct Nexthop {
  Ipv6Address address;
  LinkId link = 0;

  friend bool operator==(const Nexthop&, const Nexthop&) = default;
};

struct PacketMeta {
  std::optional<Nexthop> pending_destination;
  std::optional<TableId> pending_table;
  uint64_t rx_timestamp_ns = 0;
  NodeId ingress_node = kNoNode;
  bool srh_dirty = false;
};

/**
 * @brief Structured packet: IPv6 headers outer to inner, an optional UDP
 * header and the transport payload.
 *
 * When `udp` is empty the payload is carried opaquely under the protocol
 * number found in the last next_header field. Equality ignores `meta`.
 */
struct Packet {
  std::vector<HeaderLayer> layers;
  std::optional<UdpHeader> udp;
  Bytes payload;
  PacketMeta meta;

  Ipv6Header& outer() { return layers.at(0).ip; }
  const Ipv6Header& outer() const { return layers.at(0).ip; }

  /// First routing header after the outermost IPv6 header, if any.
  Srh* outer_srh() {
    return layers.empty() || layers[0].srhs.empty() ? nullptr
                                                    : &layers[0].srhs[0];
  }
  const Srh* outer_srh() const {
    return layers.empty() || layers[0].srhs.empty() ? nullptr
                                                    : &layers[0].srhs[0];
  }

  friend bool operator==(const Packet& a, const Packet& b) {
    return a.layers == b.layers && a.udp == b.udp && a.payload == b.payload;
  }
};

// ---------------------------------------------------------------------------
// TLVs

namespace tlv_type {
inline constexpr uint8_t kPad1 = 0;
inline constexpr uint8_t kPadN = 4;
}  // namespace tlv_type

struct Tlv {
  uint8_t type = 0;
  Bytes value;

  size_t encoded_size() const noexcept {
    return type == tlv_type::kPad1 ? 1 : 2 + value.size();
  }
  friend bool operator==(const Tlv&, const Tlv&) = default;
};

/// Appends the encoding of `tlv`. Throws InvariantViolation if the value is
/// longer than 255 octets or a Pad1 carries a value.
void append_tlv(Bytes& out, const Tlv& tlv);

/// Pads `region` with one Pad1 or one PadN up to a multiple of 8 octets.
void pad_tlv_region(Bytes& region);

/// Encodes the TLVs then pads to 8-octet alignment.
Bytes encode_tlv_region(std::span<const Tlv> tlvs);

/// Walks a TLV region. Returns nullopt if a record runs past the end.
std::optional<std::vector<Tlv>> parse_tlv_region(std::span<const uint8_t> region);

/// First TLV of the given type, if the region walks cleanly.
std::optional<Tlv> find_tlv(const Srh& srh, uint8_t type);

// ---------------------------------------------------------------------------
// Validation

enum class SrhError {
  kBadRoutingType,
  kSegmentCountMismatch,
  kSegmentsLeftOutOfRange,
  kLengthMismatch,
  kTlvMisaligned,
  kTlvWalkOverrun,
  kRawFillInvalid,
};

const char* to_string(SrhError e) noexcept;

struct SrhViolation {
  SrhError code;
  std::string detail;
};

/**
 * @brief Checks every SRH invariant and returns the first violation.
 *
 * The TLV walk must end exactly at the region boundary, and a run of two or
 * more consecutive Pad1 octets is rejected as raw (unfilled) space: padding
 * longer than one octet has to be a PadN record.
 */
std::optional<SrhViolation> validate_srh(const Srh& srh);

/// Checks structure only (no Pad1 run rule). Throws InvariantViolation.
void check_packet_invariants(const Packet& p);

// ---------------------------------------------------------------------------
// Codec

/// Rewrites every next_header field from the packet structure.
void relink_next_headers(Packet& p);

/// Recomputes IPv6 payload lengths, UDP length and checksum in place.
void update_lengths(Packet& p);

/// Recomputes only the IPv6 payload_length fields.
void update_payload_lengths(Packet& p);

size_t encoded_size(const Packet& p);

/// Encodes with payload lengths, UDP length and checksum recomputed.
/// Throws InvariantViolation.
Bytes encode_packet(const Packet& p);
void encode_packet_into(const Packet& p, Bytes& out);

struct DecodeReport {
  bool udp_checksum_mismatch = false;
};

/// Throws ParseError. A UDP checksum mismatch is only reported.
Packet decode_packet(std::span<const uint8_t> bytes,
                     DecodeReport* report = nullptr);

/// UDP checksum over the IPv6 pseudo-header of the innermost header. The
/// pseudo-header destination is the final segment when that header carries
/// an SRH. Throws NoTransport.
uint16_t udp_checksum(const Packet& p);

/// Plain IPv6/UDP packet with lengths and checksum filled in.
Packet make_udp_packet(const Ipv6Address& src, const Ipv6Address& dst,
                       uint16_t src_port, uint16_t dst_port, Bytes payload,
                       uint8_t hop_limit = 64);

// Big-endian helpers used by codec, helpers and event layouts.
inline void put_be16(uint8_t* p, uint16_t v) {
  p[0] = static_cast<uint8_t>(v >> 8);
  p[1] = static_cast<uint8_t>(v);
}
inline void put_be32(uint8_t* p, uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<uint8_t>(v >> (24 - 8 * i));
}
inline void put_be64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (56 - 8 * i));
}
inline uint16_t get_be16(const uint8_t* p) {
  return static_cast<uint16_t>((p[0] << 8) | p[1]);
}
inline uint32_t get_be32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}
inline uint64_t get_be64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace seg6
