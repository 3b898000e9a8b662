#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace seg6 {

/** @brief 128-bit IPv6 address held in network byte order. */
class Ipv6Address {
 public:
  using Octets = std::array<uint8_t, 16>;

  constexpr Ipv6Address() noexcept = default;
  constexpr explicit Ipv6Address(const Octets& octets) noexcept
      : octets_(octets) {}

  /// Throws std::invalid_argument on malformed text.
  static Ipv6Address parse(std::string_view text);

  std::string to_string() const;

  constexpr const Octets& octets() const noexcept { return octets_; }
  constexpr Octets& octets() noexcept { return octets_; }

  constexpr bool is_unspecified() const noexcept {
    for (auto b : octets_) {
      if (b != 0) return false;
    }
    return true;
  }

  /// Copy of this address with every bit past `length` cleared.
  Ipv6Address masked(unsigned length) const noexcept;

  /// Value of bit `index` counted from the most significant bit.
  constexpr bool bit(unsigned index) const noexcept {
    return (octets_[index / 8] >> (7 - index % 8)) & 1u;
  }

  friend constexpr auto operator<=>(const Ipv6Address&,
                                    const Ipv6Address&) = default;

 private:
  Octets octets_{};
};

/** @brief An address prefix `addr/length`; the address is stored masked. */
struct Prefix {
  Ipv6Address address;
  uint8_t length = 0;

  Prefix() = default;
  /// Throws std::invalid_argument when length > 128.
  Prefix(const Ipv6Address& addr, unsigned len);

  /// Parses "2001:db8::/32"; a bare address is a /128.
  static Prefix parse(std::string_view text);

  bool contains(const Ipv6Address& addr) const noexcept {
    return addr.masked(length) == address;
  }

  std::string to_string() const;

  friend auto operator<=>(const Prefix&, const Prefix&) = default;
};

struct Ipv6AddressHash {
  size_t operator()(const Ipv6Address& a) const noexcept;
};

}  // namespace seg6

template <>
struct std::hash<seg6::Ipv6Address> : seg6::Ipv6AddressHash {};
