#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seg6/packet.hpp"

namespace seg6 {

/** @brief Return code of a pluggable program. */
enum class ProgramOutcome { kOk, kDrop, kRedirect };

const char* to_string(ProgramOutcome o) noexcept;

/** @brief Status returned by helpers and map operations. */
enum class HelperStatus {
  kOk,
  kNotFound,
  kUnknownMap,
  kWidthMismatch,
  kWriteOutOfBounds,
  kBadDelta,
  kSizeOverflow,
  kActionAlreadyTaken,
  kWrongHook,
  kNoSrh,
  kNoRoute,
  kSrhPresent,
  kSegmentsExhausted,
  kNotLastSegment,
  kNoInnerHeader,
  kInvalidArgument,
  kPayloadTooLarge,
};

const char* to_string(HelperStatus s) noexcept;

/**
 * @brief Node-local persistent key/value maps.
 *
 * Each map has fixed key and value widths declared at creation. Not
 * thread-safe; only the simulator thread touches it.
 */
class MapStore {
 public:
  /// Declaring an existing map with the same widths is a no-op; different
  /// widths yield kWidthMismatch.
  HelperStatus declare(std::string_view name, size_t key_width, size_t value_width);

  HelperStatus get(std::string_view name, std::span<const uint8_t> key,
                   Bytes& value_out) const;
  HelperStatus put(std::string_view name, std::span<const uint8_t> key,
                   std::span<const uint8_t> value);

  bool contains(std::string_view name) const { return maps_.count(std::string(name)) != 0; }

 private:
  struct Map {
    size_t key_width = 0;
    size_t value_width = 0;
    std::unordered_map<std::string, Bytes> entries;
  };
  std::map<std::string, Map, std::less<>> maps_;
};

struct EmittedEvent {
  NodeId node = kNoNode;
  uint64_t timestamp_ns = 0;
  Bytes payload;
};

inline constexpr size_t kMaxEventPayload = 256;
inline constexpr size_t kEventQueueCapacity = 4096;

/**
 * @brief Bounded event queue, one producer and one consumer.
 *
 * On overflow the oldest unread event is discarded and counted.
 */
class EventQueue {
 public:
  explicit EventQueue(size_t capacity = kEventQueueCapacity) : capacity_(capacity) {}

  void push(EmittedEvent ev);
  std::vector<EmittedEvent> drain();

  size_t size() const;
  uint64_t dropped() const;
  uint64_t pushed() const;

 private:
  mutable std::mutex mu_;
  std::deque<EmittedEvent> events_;
  size_t capacity_;
  uint64_t dropped_ = 0;
  uint64_t pushed_ = 0;
};

}  // namespace seg6
