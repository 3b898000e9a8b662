#include "seg6/node.hpp"

#include <stdexcept>

namespace seg6 {

const char* to_string(DropReason r) noexcept {
  switch (r) {
    case DropReason::kHopLimitExceeded: return "HopLimitExceeded";
    case DropReason::kNoRoute: return "NoRoute";
    case DropReason::kNoSrh: return "NoSrh";
    case DropReason::kSegmentsExhausted: return "SegmentsExhausted";
    case DropReason::kNotLastSegment: return "NotLastSegment";
    case DropReason::kNoInnerHeader: return "NoInnerHeader";
    case DropReason::kSrhPresent: return "SrhPresent";
    case DropReason::kInvariantViolation: return "InvariantViolation";
    case DropReason::kInvalidSrhAfterProgram: return "InvalidSrhAfterProgram";
    case DropReason::kRedirectWithoutDestination: return "RedirectWithoutDestination";
    case DropReason::kProgramDrop: return "ProgramDrop";
    case DropReason::kUnknownProgram: return "UnknownProgram";
  }
  return "?";
}

std::string to_string(const ForwardingDecision& d) {
  if (const auto* f = std::get_if<Forward>(&d)) {
    return "Forward(link " + std::to_string(f->link) + ", " + f->nexthop.to_string() + ")";
  }
  if (const auto* drop = std::get_if<Drop>(&d)) {
    return std::string("Drop(") + to_string(drop->reason) + ")";
  }
  return "LocalDeliver";
}

FlowKey flow_key_of(const Packet& p) {
  FlowKey k;
  k.src = p.outer().src;
  k.dst = p.outer().dst;
  k.flow_label = p.outer().flow_label;
  if (p.udp) {
    k.src_port = p.udp->src_port;
    k.dst_port = p.udp->dst_port;
  }
  return k;
}

uint64_t flow_hash(const FlowKey& key) {
  constexpr uint64_t kOffset = 0xcbf29ce484222325ull;
  constexpr uint64_t kPrime = 0x100000001b3ull;
  uint8_t buf[16 + 16 + 4 + 2 + 2];
  std::copy(key.src.octets().begin(), key.src.octets().end(), buf);
  std::copy(key.dst.octets().begin(), key.dst.octets().end(), buf + 16);
  put_be32(buf + 32, key.flow_label);
  put_be16(buf + 36, key.src_port);
  put_be16(buf + 38, key.dst_port);
  uint64_t h = kOffset;
  for (uint8_t b : buf) {
    h ^= b;
    h *= kPrime;
  }
  return h;
}

// ---------------------------------------------------------------------------

void Fib::insert(FibEntry entry) {
  if (entry.nexthops.empty()) throw std::invalid_argument("FIB entry without nexthops");
  tables_[entry.table_id].insert(entry.prefix, std::move(entry.nexthops));
}

bool Fib::remove(const Prefix& prefix, TableId table) {
  auto it = tables_.find(table);
  return it != tables_.end() && it->second.erase(prefix);
}

std::optional<Nexthop> Fib::lookup(const Ipv6Address& addr, TableId table,
                                   const FlowKey& key) const {
  auto it = tables_.find(table);
  if (it == tables_.end()) return std::nullopt;
  auto hit = it->second.lookup(addr);
  if (!hit) return std::nullopt;
  const auto& nhs = *hit->second;
  if (nhs.size() == 1) return nhs.front();
  return nhs[flow_hash(key) % nhs.size()];
}

std::optional<std::vector<Nexthop>> Fib::ecmp_list(const Ipv6Address& addr,
                                                   TableId table) const {
  auto it = tables_.find(table);
  if (it == tables_.end()) return std::nullopt;
  auto hit = it->second.lookup(addr);
  if (!hit) return std::nullopt;
  return *hit->second;
}

std::optional<FibEntry> Fib::match(const Ipv6Address& addr, TableId table) const {
  auto it = tables_.find(table);
  if (it == tables_.end()) return std::nullopt;
  auto hit = it->second.lookup(addr);
  if (!hit) return std::nullopt;
  return FibEntry{hit->first, *hit->second, table};
}

size_t Fib::size() const {
  size_t n = 0;
  for (const auto& [id, t] : tables_) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------

void Node::add_local_sid(LocalSidEntry entry) {
  if (!sids_.emplace(entry.sid, std::move(entry.behavior)).second) {
    throw std::invalid_argument("SID " + entry.sid.to_string() + " already bound on " + name_);
  }
}

const LocalBehavior* Node::find_local_sid(const Ipv6Address& sid) const {
  if (sids_.empty()) return nullptr;
  auto it = sids_.find(sid);
  return it == sids_.end() ? nullptr : &it->second;
}

void Node::add_transit(TransitEntry entry) {
  if (transit_.find_exact(entry.prefix) != nullptr) {
    throw std::invalid_argument("transit prefix " + entry.prefix.to_string() +
                                " already bound on " + name_);
  }
  transit_.insert(entry.prefix, std::move(entry.behavior));
}

const TransitBehavior* Node::match_transit(const Ipv6Address& dst) const {
  auto hit = transit_.lookup(dst);
  return hit ? hit->second : nullptr;
}

void Node::register_program(const std::string& name, Program program) {
  programs_[name] = std::move(program);
}

const Program* Node::find_program(const std::string& name) const {
  auto it = programs_.find(name);
  return it == programs_.end() ? nullptr : &it->second;
}

EventQueue& Node::events(const std::string& channel) {
  auto& slot = events_[channel];
  if (!slot) slot = std::make_unique<EventQueue>();
  return *slot;
}

const EventQueue* Node::find_events(const std::string& channel) const {
  auto it = events_.find(channel);
  return it == events_.end() ? nullptr : it->second.get();
}

uint64_t Node::events_pushed() const {
  uint64_t n = 0;
  for (const auto& [_, q] : events_) n += q->pushed();
  return n;
}

uint64_t Node::events_dropped() const {
  uint64_t n = 0;
  for (const auto& [_, q] : events_) n += q->dropped();
  return n;
}

}  // namespace seg6
