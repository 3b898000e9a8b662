#include <gtest/gtest.h>

#include <array>
#include <string>

#include "seg6/packet.hpp"
#include "test_support.hpp"

namespace seg6 {
namespace {

using testing::A;
using testing::TestRng;

// Reference checksum: plain word-by-word sum over pseudo-header and
// datagram, folded once at the end.
uint16_t reference_udp_checksum(const Ipv6Address& src, const Ipv6Address& dst,
                                const UdpHeader& udp, const Bytes& payload) {
  Bytes buf;
  buf.insert(buf.end(), src.octets().begin(), src.octets().end());
  buf.insert(buf.end(), dst.octets().begin(), dst.octets().end());
  const uint32_t len = static_cast<uint32_t>(kUdpHeaderSize + payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) buf.push_back(static_cast<uint8_t>(len >> shift));
  buf.insert(buf.end(), {0, 0, 0, proto::kUdp});
  buf.push_back(static_cast<uint8_t>(udp.src_port >> 8));
  buf.push_back(static_cast<uint8_t>(udp.src_port));
  buf.push_back(static_cast<uint8_t>(udp.dst_port >> 8));
  buf.push_back(static_cast<uint8_t>(udp.dst_port));
  buf.push_back(static_cast<uint8_t>(len >> 8));
  buf.push_back(static_cast<uint8_t>(len));
  buf.insert(buf.end(), {0, 0});
  buf.insert(buf.end(), payload.begin(), payload.end());
  if (buf.size() % 2) buf.push_back(0);
  uint64_t sum = 0;
  for (size_t i = 0; i < buf.size(); i += 2) sum += (uint64_t{buf[i]} << 8) | buf[i + 1];
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  const uint16_t c = static_cast<uint16_t>(~sum);
  return c == 0 ? 0xFFFF : c;
}

class GoldenVector : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenVector, DecodesAndReencodesByteExact) {
  const Bytes wire = testing::read_hex_file(testing::vector_path(GetParam()));
  ASSERT_FALSE(wire.empty());
  DecodeReport report;
  const Packet p = decode_packet(wire, &report);
  EXPECT_FALSE(report.udp_checksum_mismatch);
  EXPECT_EQ(testing::hex(encode_packet(p)), testing::hex(wire));
  for (const auto& layer : p.layers) {
    for (const auto& srh : layer.srhs) EXPECT_FALSE(validate_srh(srh).has_value());
  }
}

INSTANTIATE_TEST_SUITE_P(Vectors, GoldenVector,
                         ::testing::Values("plain_udp", "udp_tc_flow_label", "srh_two_segments",
                                           "srh_dm_controller_tlvs", "srh_pad1_padn",
                                           "encap_sl0", "icmp_opaque"));

TEST(PacketCodec, BuildsTwoSegmentVectorFromStructure) {
  const std::array<Ipv6Address, 2> path{A("fc00:b::d1"), A("fc00:2::1")};
  Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 10000, 9000,
                             Bytes{'h', 'e', 'l', 'l', 'o', ' ', 's', 'r', 'v', '6'});
  Srh srh = Srh::from_path(path);
  srh.tag = 5;
  p.layers[0].srhs.push_back(srh);
  p.outer().dst = path[0];
  relink_next_headers(p);
  update_lengths(p);
  const Bytes expected = testing::read_hex_file(testing::vector_path("srh_two_segments"));
  EXPECT_EQ(testing::hex(encode_packet(p)), testing::hex(expected));
}

TEST(PacketCodec, DecodedVectorFields) {
  const Packet p =
      decode_packet(testing::read_hex_file(testing::vector_path("udp_tc_flow_label")));
  EXPECT_EQ(p.outer().traffic_class, 0x2E);
  EXPECT_EQ(p.outer().flow_label, 0x12345u);
  EXPECT_EQ(p.outer().hop_limit, 7);
  ASSERT_TRUE(p.udp.has_value());
  EXPECT_EQ(p.udp->src_port, 53);
  EXPECT_EQ(p.udp->dst_port, 5353);
  EXPECT_TRUE(p.payload.empty());

  const Packet e = decode_packet(testing::read_hex_file(testing::vector_path("encap_sl0")));
  ASSERT_EQ(e.layers.size(), 2u);
  ASSERT_EQ(e.layers[0].srhs.size(), 1u);
  EXPECT_EQ(e.layers[0].srhs[0].segments_left, 0);
  EXPECT_EQ(e.layers[0].ip.next_header, proto::kRouting);
  EXPECT_EQ(e.layers[0].srhs[0].next_header, proto::kIpv6InIpv6);
  EXPECT_EQ(e.layers[1].ip.dst, A("fc00:2::1"));
  EXPECT_EQ(e.payload.size(), 64u);

  const Packet icmp = decode_packet(testing::read_hex_file(testing::vector_path("icmp_opaque")));
  EXPECT_FALSE(icmp.udp.has_value());
  EXPECT_EQ(icmp.outer().next_header, proto::kIcmpv6);
  EXPECT_EQ(icmp.payload.size(), 48u);
}

TEST(SrhLengths, TwoSegmentsNoTlvs) {
  const std::array<Ipv6Address, 2> path{A("fc00::1"), A("fc00::2")};
  const Srh s = Srh::from_path(path);
  EXPECT_EQ(s.encoded_size(), 40u);
  EXPECT_EQ(s.hdr_ext_len, 4);
  EXPECT_EQ(s.last_entry, 1);
  EXPECT_EQ(s.segments_left, 1);
  EXPECT_EQ(s.active_segment(), A("fc00::1"));
  EXPECT_EQ(s.final_segment(), A("fc00::2"));
}

TEST(SrhLengths, TwoSegmentsEightOctetsOfTlvs) {
  const std::array<Ipv6Address, 2> path{A("fc00::1"), A("fc00::2")};
  const std::vector<Tlv> tlvs{Tlv{9, Bytes(6, 0xAB)}};
  const Srh s = Srh::from_path(path, encode_tlv_region(tlvs));
  EXPECT_EQ(s.tlv_bytes.size(), 8u);
  EXPECT_EQ(s.hdr_ext_len, 5);
}

TEST(PacketCodec, RandomPacketsRoundTrip) {
  TestRng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Packet p = testing::random_packet(rng);
    const Bytes wire = encode_packet(p);
    ASSERT_EQ(wire.size(), encoded_size(p));
    DecodeReport report;
    const Packet q = decode_packet(wire, &report);
    ASSERT_EQ(q, p) << "case " << i;
    ASSERT_FALSE(report.udp_checksum_mismatch);
    ASSERT_EQ(encode_packet(q), wire);
  }
}

TEST(PacketCodec, MutatedBytesNeverEscapeParseError) {
  TestRng rng(12);
  size_t parsed = 0;
  size_t rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    Bytes wire = encode_packet(testing::random_packet(rng));
    const auto flips = rng.range(1, 4);
    for (uint64_t f = 0; f < flips; ++f) wire[rng.range(0, wire.size() - 1)] ^= rng.byte() | 1;
    if (rng.range(0, 4) == 0) wire.resize(rng.range(0, wire.size()));
    try {
      const Packet p = decode_packet(wire);
      EXPECT_NO_THROW(check_packet_invariants(p));
      ++parsed;
    } catch (const ParseError&) {
      ++rejected;
    }
  }
  EXPECT_EQ(parsed + rejected, 1000u);
  EXPECT_GT(rejected, 0u);
}

TEST(PacketCodec, HdrExtLenTooSmallForSegments) {
  Bytes wire = testing::read_hex_file(testing::vector_path("srh_two_segments"));
  // hdr_ext_len 4 -> 2 claims 24 octets for two segments; keep the IPv6
  // payload length consistent so the SRH check is what fails.
  wire[kIpv6HeaderSize + srh_offset::kHdrExtLen] = 2;
  EXPECT_THROW(decode_packet(wire), ParseError);
}

TEST(PacketCodec, TlvWalkPastHeaderEnd) {
  Bytes wire = testing::read_hex_file(testing::vector_path("srh_dm_controller_tlvs"));
  const Packet p = decode_packet(wire);
  const Srh& s = p.layers[0].srhs[0];
  // The trailing PadN claims one more octet than the region holds.
  const size_t pad_len_at = kIpv6HeaderSize + s.encoded_size() - s.tlv_bytes.back() - 1;
  ASSERT_EQ(wire[pad_len_at - 1], tlv_type::kPadN);
  wire[pad_len_at] += 1;
  try {
    decode_packet(wire);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("TLV"), std::string::npos);
  }
}

TEST(PacketCodec, TruncatedInputs) {
  const Bytes wire = testing::read_hex_file(testing::vector_path("srh_two_segments"));
  for (size_t n : {size_t{0}, size_t{10}, size_t{39}, size_t{45}, wire.size() - 1}) {
    EXPECT_THROW(decode_packet(std::span<const uint8_t>(wire.data(), n)), ParseError) << n;
  }
  Bytes bad_version = wire;
  bad_version[0] = 0x40;
  EXPECT_THROW(decode_packet(bad_version), ParseError);
  Bytes bad_type = wire;
  bad_type[kIpv6HeaderSize + srh_offset::kRoutingType] = 3;
  EXPECT_THROW(decode_packet(bad_type), ParseError);
}

TEST(PacketCodec, ChecksumMismatchIsOnlyReported) {
  Bytes wire = testing::read_hex_file(testing::vector_path("plain_udp"));
  wire.back() ^= 0xFF;
  DecodeReport report;
  const Packet p = decode_packet(wire, &report);
  EXPECT_TRUE(report.udp_checksum_mismatch);
  EXPECT_EQ(p.payload.back(), 7 ^ 0xFF);
}

TEST(ValidateSrh, FreshlyDecodedIsValid) {
  const Packet p =
      decode_packet(testing::read_hex_file(testing::vector_path("srh_dm_controller_tlvs")));
  EXPECT_FALSE(validate_srh(p.layers[0].srhs[0]).has_value());
}

TEST(ValidateSrh, ZeroFilledGrowthIsRawFill) {
  const std::array<Ipv6Address, 2> path{A("fc00::1"), A("fc00::2")};
  Srh s = Srh::from_path(path);
  s.tlv_bytes.assign(8, 0);
  s.sync_lengths();
  const auto v = validate_srh(s);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->code, SrhError::kRawFillInvalid);
}

TEST(ValidateSrh, SinglePad1FollowedByPadNIsValid) {
  const std::array<Ipv6Address, 1> path{A("fc00::1")};
  Srh s = Srh::from_path(path, Bytes{0, 4, 5, 0, 0, 0, 0, 0});
  EXPECT_FALSE(validate_srh(s).has_value());
}

TEST(ValidateSrh, SegmentsLeftBeyondLastEntry) {
  const std::array<Ipv6Address, 2> path{A("fc00::1"), A("fc00::2")};
  Srh s = Srh::from_path(path);
  s.segments_left = static_cast<uint8_t>(s.last_entry + 1);
  const auto v = validate_srh(s);
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(v->code, SrhError::kSegmentsLeftOutOfRange);
}

TEST(ValidateSrh, OtherViolations) {
  const std::array<Ipv6Address, 2> path{A("fc00::1"), A("fc00::2")};
  Srh s = Srh::from_path(path);
  s.routing_type = 3;
  EXPECT_EQ(validate_srh(s)->code, SrhError::kBadRoutingType);

  s = Srh::from_path(path);
  s.last_entry = 0;
  EXPECT_EQ(validate_srh(s)->code, SrhError::kSegmentCountMismatch);

  s = Srh::from_path(path);
  s.hdr_ext_len = 6;
  EXPECT_EQ(validate_srh(s)->code, SrhError::kLengthMismatch);

  s = Srh::from_path(path);
  s.tlv_bytes = {9, 1, 0};
  EXPECT_THROW(s.sync_lengths(), InvariantViolation);
  EXPECT_EQ(validate_srh(s)->code, SrhError::kTlvMisaligned);

  s = Srh::from_path(path);
  s.tlv_bytes = {9, 7, 0, 0, 0, 0, 0, 0};
  s.sync_lengths();
  EXPECT_EQ(validate_srh(s)->code, SrhError::kTlvWalkOverrun);
}

TEST(Tlvs, EncodePadsToEightOctets) {
  const std::vector<Tlv> one{Tlv{1, Bytes(8, 0)}};
  const Bytes r = encode_tlv_region(one);
  ASSERT_EQ(r.size(), 16u);
  EXPECT_EQ(r[10], tlv_type::kPadN);
  EXPECT_EQ(r[11], 4);

  const std::vector<Tlv> seven{Tlv{1, Bytes(5, 0)}};
  const Bytes r7 = encode_tlv_region(seven);
  ASSERT_EQ(r7.size(), 8u);
  EXPECT_EQ(r7[7], tlv_type::kPad1);

  const auto parsed = parse_tlv_region(r);
  ASSERT_TRUE(parsed.has_value());
  ASSERT_EQ(parsed->size(), 2u);
  EXPECT_EQ((*parsed)[0], one[0]);
}

TEST(Tlvs, ValueLongerThan255Rejected) {
  Bytes out;
  EXPECT_THROW(append_tlv(out, Tlv{9, Bytes(256, 0)}), InvariantViolation);
  EXPECT_THROW(append_tlv(out, Tlv{tlv_type::kPad1, Bytes{1}}), InvariantViolation);
}

TEST(Tlvs, FindTlvSkipsPadding) {
  const Packet p =
      decode_packet(testing::read_hex_file(testing::vector_path("srh_dm_controller_tlvs")));
  const auto dm = find_tlv(p.layers[0].srhs[0], 1);
  ASSERT_TRUE(dm.has_value());
  EXPECT_EQ(get_be64(dm->value.data()), 1'500'000u);
  EXPECT_FALSE(find_tlv(p.layers[0].srhs[0], 77).has_value());
}

TEST(UdpChecksum, AllZeroPayloadMatchesReference) {
  const Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 4000, 5000, Bytes(32, 0));
  EXPECT_EQ(p.udp->checksum,
            reference_udp_checksum(A("fc00:1::1"), A("fc00:2::1"), *p.udp, p.payload));
}

TEST(UdpChecksum, RandomPacketsMatchReference) {
  TestRng rng(13);
  for (int i = 0; i < 200; ++i) {
    Packet p = make_udp_packet(rng.address(), rng.address(), static_cast<uint16_t>(rng.next()),
                               static_cast<uint16_t>(rng.next()), rng.bytes(rng.range(0, 41)));
    EXPECT_EQ(udp_checksum(p),
              reference_udp_checksum(p.outer().src, p.outer().dst, *p.udp, p.payload));
  }
}

TEST(UdpChecksum, SrhUsesFinalSegment) {
  const std::array<Ipv6Address, 2> path{A("fc00:b::d1"), A("fc00:2::1")};
  Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 1, 2, Bytes{1, 2, 3});
  const uint16_t before = p.udp->checksum;
  p.layers[0].srhs.push_back(Srh::from_path(path));
  p.outer().dst = path[0];
  relink_next_headers(p);
  update_lengths(p);
  EXPECT_EQ(p.udp->checksum, before);
  EXPECT_EQ(p.udp->checksum,
            reference_udp_checksum(A("fc00:1::1"), A("fc00:2::1"), *p.udp, p.payload));
}

TEST(UdpChecksum, DependsOnDestination) {
  Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 1, 2, Bytes(8, 0));
  const uint16_t before = udp_checksum(p);
  p.outer().dst = A("fc00:2::2");
  EXPECT_NE(udp_checksum(p), before);
}

TEST(UdpChecksum, StableAcrossRoundTrip) {
  const Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 1, 2, Bytes{9, 9, 9});
  const Packet q = decode_packet(encode_packet(p));
  EXPECT_EQ(q.udp->checksum, p.udp->checksum);
}

TEST(UdpChecksum, NoUdpThrows) {
  const Packet p = decode_packet(testing::read_hex_file(testing::vector_path("icmp_opaque")));
  EXPECT_THROW(udp_checksum(p), NoTransport);
}

TEST(PacketInvariants, DetectsBrokenChain) {
  Packet p = make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), 1, 2, {});
  p.outer().next_header = proto::kRouting;
  EXPECT_THROW(check_packet_invariants(p), InvariantViolation);
  EXPECT_THROW(encode_packet(p), InvariantViolation);
  p.outer().next_header = proto::kUdp;
  p.outer().flow_label = 0x100000;
  EXPECT_THROW(check_packet_invariants(p), InvariantViolation);
}

TEST(Ipv6AddressText, ParseAndFormat) {
  EXPECT_EQ(A("fc00:b::d1").to_string(), "fc00:b::d1");
  EXPECT_EQ(A("::").to_string(), "::");
  EXPECT_EQ(A("2001:db8:0:0:1:0:0:1").to_string(), "2001:db8::1:0:0:1");
  EXPECT_THROW(Ipv6Address::parse("fc00::1::2"), std::invalid_argument);
  EXPECT_THROW(Ipv6Address::parse("g::1"), std::invalid_argument);
  EXPECT_EQ(Prefix::parse("2001:db8::1/32").to_string(), "2001:db8::/32");
  EXPECT_THROW(Prefix::parse("::/129"), std::invalid_argument);
}

}  // namespace
}  // namespace seg6
