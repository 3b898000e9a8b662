#include "seg6/address.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cstring>
#include <stdexcept>

namespace seg6 {

Ipv6Address Ipv6Address::parse(std::string_view text) {
  std::string buf(text);
  Octets octets{};
  if (inet_pton(AF_INET6, buf.c_str(), octets.data()) != 1) {
    throw std::invalid_argument("invalid IPv6 address: " + buf);
  }
  return Ipv6Address(octets);
}

std::string Ipv6Address::to_string() const {
  char buf[INET6_ADDRSTRLEN];
  inet_ntop(AF_INET6, octets_.data(), buf, sizeof(buf));
  return buf;
}

Ipv6Address Ipv6Address::masked(unsigned length) const noexcept {
  if (length >= 128) return *this;
  Octets out = octets_;
  unsigned full = length / 8;
  unsigned rem = length % 8;
  if (rem != 0) {
    out[full] &= static_cast<uint8_t>(0xFFu << (8 - rem));
    ++full;
  }
  for (unsigned i = full; i < 16; ++i) out[i] = 0;
  return Ipv6Address(out);
}

Prefix::Prefix(const Ipv6Address& addr, unsigned len) {
  if (len > 128) throw std::invalid_argument("prefix length > 128");
  length = static_cast<uint8_t>(len);
  address = addr.masked(len);
}

Prefix Prefix::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    return Prefix(Ipv6Address::parse(text), 128);
  }
  unsigned len = 0;
  auto tail = text.substr(slash + 1);
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), len);
  if (ec != std::errc() || ptr != tail.data() + tail.size()) {
    throw std::invalid_argument("invalid prefix length: " + std::string(text));
  }
  return Prefix(Ipv6Address::parse(text.substr(0, slash)), len);
}

std::string Prefix::to_string() const {
  return address.to_string() + "/" + std::to_string(length);
}

size_t Ipv6AddressHash::operator()(const Ipv6Address& a) const noexcept {
  uint64_t hi = 0;
  uint64_t lo = 0;
  std::memcpy(&hi, a.octets().data(), 8);
  std::memcpy(&lo, a.octets().data() + 8, 8);
  uint64_t h = hi * 0x9E3779B97F4A7C15ull;
  h ^= lo + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
  return static_cast<size_t>(h);
}

}  // namespace seg6
