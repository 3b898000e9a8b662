#pragma once

#include <algorithm>
#include <array>
#include <bitset>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seg6/address.hpp"

namespace seg6 {

/**
 * @brief Longest-prefix-match table.
 *
 * One hash map per prefix length; lookups probe the populated lengths from
 * longest to shortest, so cost is bounded by the number of distinct lengths.
 */
template <typename Value>
class PrefixTable {
 public:
  /// Inserts or replaces the value for `prefix`.
  void insert(const Prefix& prefix, Value value) {
    auto& bucket = buckets_[prefix.length];
    auto [it, inserted] = bucket.insert_or_assign(prefix.address, std::move(value));
    (void)it;
    if (inserted) {
      ++size_;
      if (!populated_.test(prefix.length)) {
        populated_.set(prefix.length);
        lengths_.insert(std::upper_bound(lengths_.begin(), lengths_.end(), prefix.length,
                                         std::greater<>()),
                        prefix.length);
      }
    }
  }

  bool erase(const Prefix& prefix) {
    auto& bucket = buckets_[prefix.length];
    if (bucket.erase(prefix.address) == 0) return false;
    --size_;
    if (bucket.empty()) {
      populated_.reset(prefix.length);
      lengths_.erase(std::find(lengths_.begin(), lengths_.end(), prefix.length));
    }
    return true;
  }

  const Value* find_exact(const Prefix& prefix) const {
    const auto& bucket = buckets_[prefix.length];
    auto it = bucket.find(prefix.address);
    return it == bucket.end() ? nullptr : &it->second;
  }

  /// Longest matching prefix and its value.
  std::optional<std::pair<Prefix, const Value*>> lookup(const Ipv6Address& addr) const {
    for (uint8_t len : lengths_) {
      const auto& bucket = buckets_[len];
      auto key = addr.masked(len);
      auto it = bucket.find(key);
      if (it != bucket.end()) return std::make_pair(Prefix(key, len), &it->second);
    }
    return std::nullopt;
  }

  size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (size_t len = 0; len <= 128; ++len) {
      for (const auto& [addr, value] : buckets_[len]) {
        fn(Prefix(addr, static_cast<unsigned>(len)), value);
      }
    }
  }

 private:
  std::array<std::unordered_map<Ipv6Address, Value>, 129> buckets_;
  std::bitset<129> populated_;
  std::vector<uint8_t> lengths_;  // populated lengths, longest first
  size_t size_ = 0;
};

}  // namespace seg6
