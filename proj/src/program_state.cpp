#include "seg6/program_state.hpp"

namespace seg6 {

const char* to_string(ProgramOutcome o) noexcept {
  switch (o) {
    case ProgramOutcome::kOk: return "OK";
    case ProgramOutcome::kDrop: return "DROP";
    case ProgramOutcome::kRedirect: return "REDIRECT";
  }
  return "?";
}

const char* to_string(HelperStatus s) noexcept {
  switch (s) {
    case HelperStatus::kOk: return "Ok";
    case HelperStatus::kNotFound: return "NotFound";
    case HelperStatus::kUnknownMap: return "UnknownMap";
    case HelperStatus::kWidthMismatch: return "WidthMismatch";
    case HelperStatus::kWriteOutOfBounds: return "WriteOutOfBounds";
    case HelperStatus::kBadDelta: return "BadDelta";
    case HelperStatus::kSizeOverflow: return "SizeOverflow";
    case HelperStatus::kActionAlreadyTaken: return "ActionAlreadyTaken";
    case HelperStatus::kWrongHook: return "WrongHook";
    case HelperStatus::kNoSrh: return "NoSrh";
    case HelperStatus::kNoRoute: return "NoRoute";
    case HelperStatus::kSrhPresent: return "SrhPresent";
    case HelperStatus::kSegmentsExhausted: return "SegmentsExhausted";
    case HelperStatus::kNotLastSegment: return "NotLastSegment";
    case HelperStatus::kNoInnerHeader: return "NoInnerHeader";
    case HelperStatus::kInvalidArgument: return "InvalidArgument";
    case HelperStatus::kPayloadTooLarge: return "PayloadTooLarge";
  }
  return "?";
}

HelperStatus MapStore::declare(std::string_view name, size_t key_width,
                               size_t value_width) {
  auto it = maps_.find(name);
  if (it != maps_.end()) {
    return it->second.key_width == key_width && it->second.value_width == value_width
               ? HelperStatus::kOk
               : HelperStatus::kWidthMismatch;
  }
  Map m;
  m.key_width = key_width;
  m.value_width = value_width;
  maps_.emplace(std::string(name), std::move(m));
  return HelperStatus::kOk;
}

HelperStatus MapStore::get(std::string_view name, std::span<const uint8_t> key,
                           Bytes& value_out) const {
  auto it = maps_.find(name);
  if (it == maps_.end()) return HelperStatus::kUnknownMap;
  if (key.size() != it->second.key_width) return HelperStatus::kWidthMismatch;
  auto e = it->second.entries.find(std::string(key.begin(), key.end()));
  if (e == it->second.entries.end()) return HelperStatus::kNotFound;
  value_out = e->second;
  return HelperStatus::kOk;
}

HelperStatus MapStore::put(std::string_view name, std::span<const uint8_t> key,
                           std::span<const uint8_t> value) {
  auto it = maps_.find(name);
  if (it == maps_.end()) return HelperStatus::kUnknownMap;
  if (key.size() != it->second.key_width || value.size() != it->second.value_width) {
    return HelperStatus::kWidthMismatch;
  }
  it->second.entries[std::string(key.begin(), key.end())] = Bytes(value.begin(), value.end());
  return HelperStatus::kOk;
}

void EventQueue::push(EmittedEvent ev) {
  std::lock_guard<std::mutex> lock(mu_);
  if (events_.size() >= capacity_) {
    events_.pop_front();
    ++dropped_;
  }
  events_.push_back(std::move(ev));
  ++pushed_;
}

std::vector<EmittedEvent> EventQueue::drain() {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<EmittedEvent> out(std::make_move_iterator(events_.begin()),
                                std::make_move_iterator(events_.end()));
  events_.clear();
  return out;
}

size_t EventQueue::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_.size();
}

uint64_t EventQueue::dropped() const {
  std::lock_guard<std::mutex> lock(mu_);
  return dropped_;
}

uint64_t EventQueue::pushed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return pushed_;
}

}  // namespace seg6
