#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "seg6/behaviors.hpp"
#include "seg6/pipeline.hpp"
#include "seg6/scenario.hpp"
#include "seg6/usecases.hpp"
#include "test_support.hpp"

namespace seg6::usecases {
namespace {

using testing::A;
using sim::kNsPerMs;
using sim::kNsPerSec;

Packet plain(uint16_t sport = 10000) {
  return make_udp_packet(A("fc00:1::1"), A("fc00:2::1"), sport, 9000, Bytes(32, 1), 64);
}

/// Router with link 1 towards fc00:2::/64 and link 2 towards fc00:b::/64.
Node router(NodeId id, const char* name, const char* addr) {
  Node n(id, name, A(addr));
  n.fib().insert(FibEntry{Prefix::parse("fc00:2::/64"), {Nexthop{A("fe80::2"), 1}}, kMainTable});
  n.fib().insert(FibEntry{Prefix::parse("fc00:b::/64"), {Nexthop{A("fe80::b"), 2}}, kMainTable});
  n.fib().insert(FibEntry{Prefix::parse("fc00:c::/64"), {Nexthop{A("fe80::c"), 3}}, kMainTable});
  return n;
}

DmTransitConfig dm_config(uint32_t ratio) {
  DmTransitConfig c;
  c.ratio = ratio;
  c.path = {A("fc00:b::d1"), A("fc00:2::1")};
  c.controller = A("fc00:c::1");
  return c;
}

// ---------------------------------------------------------------------------
// TLVs and events

TEST(DmTlv, RoundTrip) {
  const std::vector<Ipv6Address> path{A("fc00:b::d1"), A("fc00:2::1")};
  const Srh s = make_dm_srh(path, 123456789, A("fc00:c::1"), 5000);
  EXPECT_FALSE(validate_srh(s));
  EXPECT_EQ(s.tlv_bytes.size() % 8, 0u);  // 8 + 2 x 16 + tlvs
  EXPECT_EQ(read_dm_tlv(s), 123456789u);
  const auto ctrl = read_controller_tlv(s);
  ASSERT_TRUE(ctrl);
  EXPECT_EQ(ctrl->first, A("fc00:c::1"));
  EXPECT_EQ(ctrl->second, 5000);

  Srh bare = Srh::from_path(path);
  EXPECT_FALSE(read_dm_tlv(bare));
  EXPECT_FALSE(read_controller_tlv(bare));
}

TEST(OwdEventCodec, FixedLayout) {
  OwdEvent ev{7, 1'000'000, 16'000'000, A("fc00:c::1"), 5000};
  const Bytes b = encode_owd_event(ev);
  ASSERT_EQ(b.size(), kOwdEventSize);
  EXPECT_EQ(b[3], 7);
  EXPECT_EQ(b[36], 0x13);
  EXPECT_EQ(b[37], 0x88);
  const auto back = decode_owd_event(b);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->path_id, 7u);
  EXPECT_EQ(back->tx_ns, 1'000'000u);
  EXPECT_EQ(back->rx_ns, 16'000'000u);
  EXPECT_EQ(back->controller, A("fc00:c::1"));
  EXPECT_EQ(back->controller_port, 5000);
  EXPECT_FALSE(decode_owd_event(std::span<const uint8_t>(b.data(), b.size() - 1)));
}

TEST(Collector, ConvertsAndCountsMalformed) {
  std::vector<EmittedEvent> evs;
  evs.push_back({3, 10, encode_owd_event({1, 100, 600, A("fc00:c::1"), 5000})});
  evs.push_back({3, 11, Bytes(5, 0)});
  uint64_t bad = 0;
  const auto recs = collect_delay_records(evs, &bad);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].owd_ns, 500);
  EXPECT_EQ(recs[0].reporter, 3u);
  EXPECT_EQ(bad, 1u);
}

TEST(Collector, SummaryStatistics) {
  EXPECT_THROW(summarize({}), sim::InsufficientData);

  std::vector<DelayRecord> same(50);
  for (auto& r : same) r.owd_ns = 15'000'000;
  const auto s = summarize(same);
  EXPECT_EQ(s.count, 50u);
  EXPECT_DOUBLE_EQ(s.mean_ns, 15e6);
  EXPECT_EQ(s.p99_ns, 15'000'000);
  EXPECT_EQ(s.min_ns, s.max_ns);

  std::vector<DelayRecord> ramp(100);
  for (size_t i = 0; i < ramp.size(); ++i) ramp[i].owd_ns = static_cast<int64_t>(100 - i);
  const auto r = summarize(ramp);
  EXPECT_DOUBLE_EQ(r.mean_ns, 50.5);
  EXPECT_EQ(r.min_ns, 1);
  EXPECT_EQ(r.max_ns, 100);
  EXPECT_EQ(r.p99_ns, 99);  // nearest rank
}

// ---------------------------------------------------------------------------
// OWD transit and endpoint programs, single node

TEST(DmTransit, EncapsulatesEveryNthPacket) {
  Node n = router(0, "R1", "fc00:a::1");
  install_dm_transit(n, "dm", dm_config(100));
  n.add_transit({Prefix::parse("fc00:2::/64"), behavior::LwtProgram{"dm"}});
  Node reference = router(1, "REF", "fc00:a::1");

  size_t probes = 0;
  for (uint64_t i = 0; i < 1000; ++i) {
    Packet p = plain(static_cast<uint16_t>(10000 + i % 7));
    Packet q = p;
    const uint64_t now = 1000 + i;
    const ForwardingDecision d = process_ingress(n, p, now);
    const auto* f = std::get_if<Forward>(&d);
    ASSERT_NE(f, nullptr) << to_string(d);
    if (f->link == 2) {
      ++probes;
      ASSERT_EQ(p.layers.size(), 2u);
      ASSERT_NE(p.outer_srh(), nullptr);
      EXPECT_EQ(p.outer().dst, A("fc00:b::d1"));
      EXPECT_EQ(p.outer_srh()->final_segment(), A("fc00:2::1"));
      EXPECT_EQ(read_dm_tlv(*p.outer_srh()), now);
      EXPECT_EQ(read_controller_tlv(*p.outer_srh())->first, A("fc00:c::1"));
      EXPECT_EQ(p.layers[1].ip.dst, A("fc00:2::1"));
    } else {
      // Non-probe packets leave exactly as plain forwarding would emit them.
      const ForwardingDecision dr = process_ingress(reference, q, now);
      EXPECT_EQ(d, dr);
      EXPECT_EQ(p, q);
    }
  }
  EXPECT_EQ(probes, 10u);
}

TEST(DmTransit, RatioOneEncapsulatesAll) {
  Node n = router(0, "R1", "fc00:a::1");
  install_dm_transit(n, "dm", dm_config(1));
  n.add_transit({Prefix::parse("fc00:2::/64"), behavior::LwtProgram{"dm"}});
  for (int i = 0; i < 50; ++i) {
    Packet p = plain();
    const ForwardingDecision d = process_ingress(n, p, 0);
    EXPECT_EQ(d, ForwardingDecision(Forward{2, A("fe80::b")}));
  }
}

TEST(DmTransit, RejectsShortPath) {
  Node n = router(0, "R1", "fc00:a::1");
  DmTransitConfig c = dm_config(10);
  c.path = {A("fc00:2::1")};
  EXPECT_THROW(install_dm_transit(n, "dm", c), std::invalid_argument);
  c.path = {A("fc00:b::d1"), A("fc00:2::1")};
  c.ratio = 0;
  EXPECT_THROW(install_dm_transit(n, "dm", c), std::invalid_argument);
}

Packet dm_probe(const std::vector<Ipv6Address>& path, bool with_tlvs) {
  Packet p = plain();
  const Srh s = with_tlvs ? make_dm_srh(path, 5'000'000, A("fc00:c::1"), 5000)
                          : Srh::from_path(path);
  encapsulate(p, s, A("fc00:a::1"));
  return p;
}

TEST(EndDm, LastSegmentEmitsAndDecapsulates) {
  Node n = router(0, "R2", "fc00:b::1");
  install_end_dm(n, "end_dm", {42, kMainTable});
  n.add_local_sid({A("fc00:b::d1"), behavior::EndBpf{"end_dm"}});

  // Two-way mode: segments remain after End.DM, the probe passes untouched.
  Packet twd = dm_probe({A("fc00:b::d1"), A("fc00:2::e1"), A("fc00:2::1")}, true);
  const ForwardingDecision d0 = process_ingress(n, twd, 9'000'000);
  EXPECT_EQ(d0, ForwardingDecision(Forward{1, A("fe80::2")}));
  ASSERT_EQ(twd.layers.size(), 2u);
  EXPECT_EQ(twd.outer().dst, A("fc00:2::e1"));
  EXPECT_EQ(read_dm_tlv(*twd.outer_srh()), 5'000'000u);
  EXPECT_EQ(n.events("end_dm").size(), 0u);

  // One-way mode: the final segment follows, so report and decapsulate.
  Packet last = dm_probe({A("fc00:b::d1"), A("fc00:2::1")}, true);
  const ForwardingDecision d1 = process_ingress(n, last, 20'000'000);
  EXPECT_EQ(d1, ForwardingDecision(Forward{1, A("fe80::2")}));
  EXPECT_EQ(last.layers.size(), 1u);
  EXPECT_EQ(last, plain());
  const auto evs = n.events("end_dm").drain();
  ASSERT_EQ(evs.size(), 1u);
  const auto ev = decode_owd_event(evs[0].payload);
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->path_id, 42u);
  EXPECT_EQ(ev->tx_ns, 5'000'000u);
  EXPECT_EQ(ev->rx_ns, 20'000'000u);
  EXPECT_EQ(ev->controller, A("fc00:c::1"));
  EXPECT_EQ(ev->controller_port, 5000);
}

TEST(EndDm, ProbeWithoutTlvsIsDropped) {
  Node n = router(0, "R2", "fc00:b::1");
  install_end_dm(n, "end_dm", {1, kMainTable});
  n.add_local_sid({A("fc00:b::d1"), behavior::EndBpf{"end_dm"}});
  Packet p = dm_probe({A("fc00:b::d1"), A("fc00:2::1")}, false);
  const ForwardingDecision d = process_ingress(n, p, 0);
  EXPECT_TRUE(std::holds_alternative<Drop>(d)) << to_string(d);
  EXPECT_EQ(n.events("end_dm").size(), 0u);
}

// ---------------------------------------------------------------------------
// OWD in the simulator

/// S -- l1 -- R1 -- l2 (15 ms) -- R2 -- l3 -- D, DM probes from R1 to R2.
struct OwdBench {
  OwdBench(uint64_t seed, uint64_t sd_ns, uint32_t ratio) : sim(seed) {
    s = sim.add_node("S", A("fc00:1::1"));
    r1 = sim.add_node("R1", A("fc00:a::1"));
    r2 = sim.add_node("R2", A("fc00:b::1"));
    d = sim.add_node("D", A("fc00:2::1"));
    l1 = sim.add_link(sim::link_from_rtt("l1", s, r1, 1000, 0, 0));
    sim::LinkConfig c2 = sim::link_from_rtt("l2", r1, r2, 50, 30, 0);
    c2.delay_stddev_ns = sd_ns;
    l2 = sim.add_link(c2);
    l3 = sim.add_link(sim::link_from_rtt("l3", r2, d, 1000, 0, 0));
    route(s, "::/0", "fc00:a::1", l1);
    route(r1, "fc00:2::/64", "fc00:b::1", l2);
    route(r1, "fc00:b::/64", "fc00:b::1", l2);
    route(r1, "::/0", "fc00:1::1", l1);
    route(r2, "fc00:2::/64", "fc00:2::1", l3);
    route(r2, "::/0", "fc00:a::1", l2);
    route(d, "::/0", "fc00:b::1", l3);

    install_dm_transit(sim.node(r1), "dm", dm_config(ratio));
    sim.node(r1).add_transit({Prefix::parse("fc00:2::/64"), behavior::LwtProgram{"dm"}});
    install_end_dm(sim.node(r2), "end_dm", {1, kMainTable});
    sim.node(r2).add_local_sid({A("fc00:b::d1"), behavior::EndBpf{"end_dm"}});
    auto c = std::make_unique<OwdCollector>(r2, "end_dm", 10 * kNsPerMs);
    collector = c.get();
    sim.add_daemon(std::move(c));
  }

  void route(NodeId n, const char* prefix, const char* via, LinkId link) {
    sim.node(n).fib().insert(FibEntry{Prefix::parse(prefix), {Nexthop{A(via), link}}, kMainTable});
  }

  void run(double pps, uint64_t count, size_t payload = 64) {
    sim.add_stream(sim::udp_stream(s, A("fc00:2::1"), pps, payload, count));
    sim.run_until(static_cast<uint64_t>(count / pps * 1e9) + kNsPerSec);
    collector->flush(sim);
  }

  /// Size of the packets R1 put on l2.
  std::set<uint32_t> probe_sizes() const {
    std::set<uint32_t> out;
    for (const auto& t : sim.trace())
      if (t.node == r1 && t.direction == sim::TraceDirection::kEgress && t.link == l2)
        out.insert(t.size);
    return out;
  }

  sim::Simulation sim;
  NodeId s = 0, r1 = 0, r2 = 0, d = 0;
  LinkId l1 = 0, l2 = 0, l3 = 0;
  OwdCollector* collector = nullptr;
};

TEST(OwdSim, ZeroJitterIsExact) {
  OwdBench b(1, 0, 1);
  b.run(100, 500);
  const auto sizes = b.probe_sizes();
  ASSERT_EQ(sizes.size(), 1u);
  const uint64_t expected = 15 * kNsPerMs + b.sim.link(b.l2).serialization_ns(*sizes.begin());
  ASSERT_EQ(b.collector->records().size(), 500u);
  for (const auto& r : b.collector->records()) EXPECT_EQ(r.owd_ns, static_cast<int64_t>(expected));
  const auto s = summarize(b.collector->records());
  EXPECT_EQ(s.p99_ns, static_cast<int64_t>(expected));
  EXPECT_EQ(b.sim.stats().nodes[b.d].delivered, 500u);
}

TEST(OwdSim, JitterMatchesLinkStreamOracle) {
  const uint64_t seed = 11;
  OwdBench b(seed, 2'500'000, 1);
  b.run(10, 400);  // 100 ms apart: no queueing, no FIFO clamp
  const auto sizes = b.probe_sizes();
  ASSERT_EQ(sizes.size(), 1u);
  const uint64_t ser = b.sim.link(b.l2).serialization_ns(*sizes.begin());
  sim::Rng oracle = sim::Rng::for_stream(seed, sim::Link::stream_id(b.l2, true));
  const auto& recs = b.collector->records();
  ASSERT_EQ(recs.size(), 400u);
  for (size_t i = 0; i < recs.size(); ++i) {
    const double g = oracle.next_gaussian(15e6, 2.5e6);
    const int64_t prop = g <= 0 ? 0 : std::llround(g);
    ASSERT_EQ(recs[i].owd_ns, static_cast<int64_t>(ser) + prop) << i;
  }
}

TEST(OwdSim, ProbeCountFollowsRatio) {
  OwdBench b(3, 0, 100);
  b.run(10000, 10000);
  EXPECT_EQ(b.collector->records().size(), 100u);
  EXPECT_EQ(b.sim.stats().nodes[b.d].delivered, 10000u);
  EXPECT_EQ(b.sim.stats().events_dropped, 0u);
}

// ---------------------------------------------------------------------------
// Weighted round robin

std::vector<size_t> iwrr_oracle(std::vector<uint32_t> w) {
  const uint32_t g = std::accumulate(w.begin(), w.end(), 0u,
                                     [](uint32_t a, uint32_t b) { return std::gcd(a, b); });
  uint32_t top = 0;
  for (auto& x : w) {
    x /= g;
    top = std::max(top, x);
  }
  std::vector<size_t> out;
  for (uint32_t r = 1; r <= top; ++r)
    for (size_t i = 0; i < w.size(); ++i)
      if (w[i] >= r) out.push_back(i);
  return out;
}

TEST(Iwrr, KnownSchedules) {
  const std::vector<uint32_t> w1{50, 30};
  EXPECT_EQ(iwrr_schedule(w1), (std::vector<size_t>{0, 1, 0, 1, 0, 1, 0, 0}));
  const std::vector<uint32_t> w2{1, 1};
  EXPECT_EQ(iwrr_schedule(w2), (std::vector<size_t>{0, 1}));
  const std::vector<uint32_t> w3{7};
  EXPECT_EQ(iwrr_schedule(w3), (std::vector<size_t>{0}));
}

TEST(Iwrr, MatchesOracleOnRandomWeights) {
  testing::TestRng rng(99);
  for (int i = 0; i < 300; ++i) {
    std::vector<uint32_t> w(rng.range(1, 5));
    for (auto& x : w) x = static_cast<uint32_t>(rng.range(1, 40));
    const auto got = iwrr_schedule(w);
    ASSERT_EQ(got, iwrr_oracle(w));
    const uint32_t g = std::accumulate(w.begin(), w.end(), 0u,
                                       [](uint32_t a, uint32_t b) { return std::gcd(a, b); });
    for (size_t k = 0; k < w.size(); ++k)
      EXPECT_EQ(static_cast<uint32_t>(std::count(got.begin(), got.end(), k)), w[k] / g);
  }
}

TEST(Iwrr, ZeroWeights) {
  const std::vector<uint32_t> zeros{0, 0};
  EXPECT_THROW(iwrr_schedule(zeros), std::invalid_argument);
  // A zero weight disables its path.
  const std::vector<uint32_t> one_off{3, 0};
  EXPECT_EQ(iwrr_schedule(one_off), (std::vector<size_t>{0}));
  EXPECT_THROW(iwrr_schedule({}), std::invalid_argument);
}

TEST(Wrr, SplitsPacketsByWeight) {
  Node n(0, "A", A("fc00:a::1"));
  n.fib().insert(FibEntry{Prefix::parse("fc00:b::a1/128"), {Nexthop{A("fe80::1"), 1}}, kMainTable});
  n.fib().insert(FibEntry{Prefix::parse("fc00:b::b1/128"), {Nexthop{A("fe80::2"), 2}}, kMainTable});
  WrrConfig c;
  const std::array<Ipv6Address, 1> pa{A("fc00:b::a1")};
  const std::array<Ipv6Address, 1> pb{A("fc00:b::b1")};
  c.paths = {Srh::from_path(pa), Srh::from_path(pb)};
  c.weights = {50, 30};
  install_wrr(n, "wrr", c);
  n.add_transit({Prefix::parse("fc00:2::/64"), behavior::LwtProgram{"wrr"}});

  std::string pattern;
  size_t on_a = 0, on_b = 0;
  for (int i = 0; i < 8000; ++i) {
    Packet p = plain();
    const ForwardingDecision d = process_ingress(n, p, 0);
    const auto* f = std::get_if<Forward>(&d);
    ASSERT_NE(f, nullptr) << to_string(d);
    ASSERT_EQ(p.layers.size(), 2u);
    EXPECT_EQ(p.outer().src, A("fc00:a::1"));
    (f->link == 1 ? on_a : on_b)++;
    if (pattern.size() < 16) pattern += f->link == 1 ? 'A' : 'B';
  }
  EXPECT_EQ(pattern, "ABABABAAABABABAA");
  EXPECT_EQ(on_a, 5000u);
  EXPECT_EQ(on_b, 3000u);
}

// ---------------------------------------------------------------------------
// Compensation

TEST(Compensator, HalfTheTwoWayDifference) {
  Compensator c(2, 1.0);
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{0, 0}));
  c.update(0, 30e6);
  EXPECT_FALSE(c.ready());
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{0, 0}));
  c.update(1, 5e6);
  EXPECT_TRUE(c.ready());
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{0, 12'500'000}));
  // Links swap roles.
  c.update(0, 5e6);
  c.update(1, 30e6);
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{12'500'000, 0}));
  c.update(0, 30e6);
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{0, 0}));
}

TEST(Compensator, EwmaSmoothing) {
  Compensator c(3, 0.3);
  c.update(0, 10e6);
  EXPECT_DOUBLE_EQ(*c.ewma(0), 10e6);
  c.update(0, 20e6);
  EXPECT_DOUBLE_EQ(*c.ewma(0), 0.3 * 20e6 + 0.7 * 10e6);
  c.update(1, 4e6);
  c.update(2, 13e6);
  EXPECT_EQ(c.applied_delays(), (std::vector<uint64_t>{0, 4'500'000, 0}));
  EXPECT_THROW(Compensator(2, 0.0), std::invalid_argument);
  EXPECT_THROW(Compensator(2, 1.5), std::invalid_argument);
}

scenario::ScenarioConfig load(const char* file) {
  return scenario::load_scenario(testing::scenario_path(file));
}

TEST(TwdProber, OneProbePerLinkPerInterval) {
  scenario::ScenarioConfig cfg = load("setup2-hybrid.json");
  cfg.generators.clear();
  auto built = scenario::build_simulation(cfg);
  ASSERT_EQ(built.probers.size(), 1u);
  sim::Simulation& s = *built.sim;
  s.run_until(kNsPerSec - 1);  // ticks at 0, 100, ..., 900 ms
  const TwdProber& p = *built.probers[0];
  const NodeId a = *s.find_node("A");
  const NodeId m = *s.find_node("M");
  const LinkId la = *s.find_link("la");
  const LinkId lb = *s.find_link("lb");
  EXPECT_EQ(s.link(la).packets_sent(a), 10u);
  EXPECT_EQ(s.link(lb).packets_sent(a), 10u);
  // Each echo returns on the link it went out on.
  EXPECT_EQ(s.link(la).packets_sent(m), 10u);
  EXPECT_EQ(s.link(lb).packets_sent(m), 10u);
  ASSERT_EQ(p.samples().size(), 20u);
  std::array<double, 2> sum{};
  std::array<int, 2> n{};
  for (const auto& smp : p.samples()) {
    sum.at(smp.link) += static_cast<double>(smp.twd_ns);
    n.at(smp.link)++;
  }
  EXPECT_EQ(n[0], 10);
  EXPECT_EQ(n[1], 10);
  EXPECT_NEAR(sum[0] / n[0], 30e6, 6e6);
  EXPECT_NEAR(sum[1] / n[1], 5e6, 3e6);
  EXPECT_TRUE(p.compensator().ready());
  const auto applied = p.compensator().applied_delays();
  EXPECT_EQ(applied[0], 0u);
  EXPECT_GT(applied[1], 8'000'000u);
  EXPECT_FALSE(p.changes().empty());
}

TEST(TwdProber, NoCompensationLeavesQdiscAlone) {
  scenario::ScenarioConfig cfg = load("setup2-hybrid.json");
  cfg.generators.clear();
  scenario::Overrides o;
  o.compensation = false;
  scenario::apply_overrides(cfg, o);
  auto built = scenario::build_simulation(cfg);
  sim::Simulation& s = *built.sim;
  s.run_until(kNsPerSec);
  const NodeId a = *s.find_node("A");
  EXPECT_EQ(s.link(*s.find_link("la")).qdisc_delay(a), 0u);
  EXPECT_EQ(s.link(*s.find_link("lb")).qdisc_delay(a), 0u);
  EXPECT_TRUE(built.probers[0]->changes().empty());
  EXPECT_EQ(built.probers[0]->samples().size(), 20u);
}

TEST(Hybrid, PerPacketRoundRobinReorders) {
  for (uint64_t seed : {1, 2, 3}) {
    scenario::ScenarioConfig cfg = load("setup2-hybrid.json");
    scenario::Overrides o;
    o.seed = seed;
    o.compensation = false;
    o.packet_count = 3000;
    o.duration_ms = 4000;
    scenario::apply_overrides(cfg, o);
    for (auto& t : cfg.transit)
      if (t.body.value("program", "") == "wrr") t.body["params"]["weights"] = {1, 1};
    auto built = scenario::build_simulation(cfg);
    sim::Simulation& s = *built.sim;
    s.run_until(4 * kNsPerSec);
    ASSERT_EQ(built.streams.size(), 1u);
    const NodeId sink = *s.node_by_address(built.streams[0].dst);
    EXPECT_GT(sim::reorder_fraction(s.trace(), built.streams[0].flow_id, sink), 0.3) << seed;
  }
}

// ---------------------------------------------------------------------------
// End.OAMP

TEST(OampReply, Codec) {
  OampReply r{9, {A("fc00:12::1"), A("fc00:13::1")}};
  const Bytes b = encode_oamp_reply(r);
  EXPECT_EQ(b.size(), 4u + 2 + 32);
  const auto back = decode_oamp_reply(b);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->hop_id, 9u);
  EXPECT_EQ(back->nexthops, r.nexthops);
  EXPECT_FALSE(decode_oamp_reply(std::span<const uint8_t>(b.data(), b.size() - 3)));
  EXPECT_TRUE(decode_oamp_reply(encode_oamp_reply({1, {}}))->nexthops.empty());
}

TEST(EndOamp, ReportsEcmpSet) {
  Node n(0, "A", A("fc00:11::1"));
  n.fib().insert(FibEntry{Prefix::parse("fc00:15::/64"),
                          {Nexthop{A("fc00:12::1"), 1}, Nexthop{A("fc00:13::1"), 2}},
                          kMainTable});
  n.fib().insert(FibEntry{Prefix::parse("fc00:99::/64"), {Nexthop{A("fc00:12::1"), 1}}, kMainTable});
  install_end_oamp(n, "oamp");
  n.add_local_sid({A("fc00:11::a"), behavior::EndBpf{"oamp"}});

  auto ask = [&](const char* target) {
    Packet probe = make_oamp_probe(A("fc00:10::1"), 40000, A("fc00:11::a"), A(target));
    const ForwardingDecision d = process_ingress(n, probe, 0);
    EXPECT_TRUE(std::holds_alternative<Drop>(d)) << to_string(d);
    auto evs = n.events("oamp").drain();
    EXPECT_EQ(evs.size(), 1u);
    return evs.empty() ? Bytes{} : evs[0].payload;
  };

  Bytes ev = ask("fc00:15::1");
  ASSERT_EQ(ev.size(), 4u + 2 + 32 + 18);
  const auto r = decode_oamp_reply(std::span<const uint8_t>(ev.data(), ev.size() - 18));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->nexthops, (std::vector<Ipv6Address>{A("fc00:12::1"), A("fc00:13::1")}));
  Ipv6Address ctrl;
  std::copy(ev.end() - 18, ev.end() - 2, ctrl.octets().begin());
  EXPECT_EQ(ctrl, A("fc00:10::1"));
  EXPECT_EQ(get_be16(&ev[ev.size() - 2]), 40000);

  ev = ask("fc00:99::1");
  EXPECT_EQ(decode_oamp_reply(std::span<const uint8_t>(ev.data(), ev.size() - 18))->nexthops,
            (std::vector<Ipv6Address>{A("fc00:12::1")}));
  ev = ask("fc00:77::1");
  EXPECT_TRUE(
      decode_oamp_reply(std::span<const uint8_t>(ev.data(), ev.size() - 18))->nexthops.empty());
}

TEST(EndOamp, MissingControllerDrops) {
  Node n(0, "A", A("fc00:11::1"));
  n.fib().insert(FibEntry{Prefix::parse("::/0"), {Nexthop{A("fc00:12::1"), 1}}, kMainTable});
  install_end_oamp(n, "oamp");
  n.add_local_sid({A("fc00:11::a"), behavior::EndBpf{"oamp"}});
  Packet p = plain();
  const std::array<Ipv6Address, 2> path{A("fc00:11::a"), A("fc00:15::1")};
  encapsulate(p, Srh::from_path(path), A("fc00:10::1"));
  const ForwardingDecision d = process_ingress(n, p, 0);
  EXPECT_TRUE(std::holds_alternative<Drop>(d));
  EXPECT_EQ(n.events("oamp").size(), 0u);
}

// ---------------------------------------------------------------------------
// Traceroute

using EdgeSet = std::set<std::pair<Ipv6Address, Ipv6Address>>;

EdgeSet edges_of(const TracerouteResult& r) {
  const auto e = r.edges();
  return EdgeSet(e.begin(), e.end());
}

TEST(Traceroute, DiamondWithOampIsComplete) {
  auto built = scenario::build_simulation(load("diamond.json"));
  sim::Simulation& s = *built.sim;
  const auto res = multipath_traceroute(s, *s.find_node("P"), A("fc00:15::1"), built.oamp_sids);
  EXPECT_TRUE(res.reached);
  const TraceHop* a = res.find(A("fc00:11::1"));
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->method, HopMethod::kOamp);
  EXPECT_EQ(std::set<Ipv6Address>(a->nexthops.begin(), a->nexthops.end()),
            (std::set<Ipv6Address>{A("fc00:12::1"), A("fc00:13::1")}));
  const EdgeSet expect{
      {A("fc00:10::1"), A("fc00:11::1")}, {A("fc00:11::1"), A("fc00:12::1")},
      {A("fc00:11::1"), A("fc00:13::1")}, {A("fc00:12::1"), A("fc00:14::1")},
      {A("fc00:13::1"), A("fc00:14::1")}, {A("fc00:14::1"), A("fc00:15::1")}};
  EXPECT_EQ(edges_of(res), expect);
  EXPECT_EQ(res.timeouts, 0u);
}

TEST(Traceroute, WithoutOampEachFlowSeesOneBranch) {
  scenario::ScenarioConfig cfg = load("diamond.json");
  scenario::Overrides o;
  o.disable_oamp = {"A"};
  scenario::apply_overrides(cfg, o);
  std::set<Ipv6Address> seen;
  for (uint16_t port = 33000; port < 33032; ++port) {
    auto built = scenario::build_simulation(cfg);
    sim::Simulation& s = *built.sim;
    TracerouteOptions opts;
    opts.src_port = port;
    const auto res = multipath_traceroute(s, *s.find_node("P"), A("fc00:15::1"), built.oamp_sids,
                                          opts);
    EXPECT_TRUE(res.reached);
    const TraceHop* a = res.find(A("fc00:11::1"));
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->method, HopMethod::kIcmp);
    ASSERT_EQ(a->nexthops.size(), 1u);
    seen.insert(a->nexthops[0]);
  }
  EXPECT_EQ(seen, (std::set<Ipv6Address>{A("fc00:12::1"), A("fc00:13::1")}));
}

TEST(Traceroute, ChainMatchesClassic) {
  auto built = scenario::build_simulation(load("chain.json"));
  sim::Simulation& s = *built.sim;
  const NodeId p = *s.find_node("P");
  const Ipv6Address target = A("fc00:24::1");
  const auto classic = classic_traceroute(s, p, target);
  const auto multi = multipath_traceroute(s, p, target, built.oamp_sids);
  EXPECT_TRUE(multi.reached);
  std::vector<std::optional<Ipv6Address>> expect{A("fc00:21::1"), A("fc00:22::1"),
                                                 A("fc00:23::1"), A("fc00:24::1")};
  EXPECT_EQ(classic, expect);
  std::vector<std::optional<Ipv6Address>> hops;
  for (const auto& h : multi.hops)
    if (h.method != HopMethod::kSource) hops.emplace_back(h.address);
  EXPECT_EQ(hops, expect);
}

TEST(Traceroute, UnroutableTargetIsPartial) {
  auto built = scenario::build_simulation(load("chain.json"));
  sim::Simulation& s = *built.sim;
  TracerouteOptions opts;
  opts.max_depth = 6;
  opts.timeout_ns = 200 * kNsPerMs;
  const auto res =
      multipath_traceroute(s, *s.find_node("P"), A("fc00:99::1"), built.oamp_sids, opts);
  EXPECT_FALSE(res.reached);
}

// ---------------------------------------------------------------------------
// Benchmark programs

Packet sr_probe() {
  Packet p = plain();
  const std::array<Ipv6Address, 3> path{A("fc00:a::f"), A("fc00:b::1"), A("fc00:2::1")};
  encapsulate(p, Srh::from_path(path), A("fc00:1::1"));
  return p;
}

TEST(BenchPrograms, TagIncrement) {
  Node n = router(0, "R", "fc00:a::1");
  install_tag_increment(n, "tag");
  n.add_local_sid({A("fc00:a::f"), behavior::EndBpf{"tag"}});
  Packet p = sr_probe();
  p.outer_srh()->tag = 41;
  const ForwardingDecision d = process_ingress(n, p, 0);
  EXPECT_EQ(d, ForwardingDecision(Forward{2, A("fe80::b")}));
  EXPECT_EQ(p.outer_srh()->tag, 42);
  EXPECT_EQ(p.outer_srh()->segments_left, 1);
}

TEST(BenchPrograms, AddTlvKeepsSrhValid) {
  Node n = router(0, "R", "fc00:a::1");
  install_add_tlv(n, "tlv");
  n.add_local_sid({A("fc00:a::f"), behavior::EndBpf{"tlv"}});
  Packet p = sr_probe();
  const size_t before = p.outer_srh()->encoded_size();
  const ForwardingDecision d = process_ingress(n, p, 0);
  EXPECT_TRUE(std::holds_alternative<Forward>(d)) << to_string(d);
  EXPECT_EQ(p.outer_srh()->encoded_size(), before + 8);
  EXPECT_FALSE(validate_srh(*p.outer_srh()));
  EXPECT_TRUE(find_tlv(*p.outer_srh(), kOpaqueTlvType));
}

TEST(BenchPrograms, NoopAndEndTProgram) {
  Node n = router(0, "R", "fc00:a::1");
  n.fib().insert(FibEntry{Prefix::parse("fc00:b::/64"), {Nexthop{A("fe80::77"), 7}}, 100});
  install_noop(n, "noop");
  install_end_t_program(n, "endt", 100);
  n.add_local_sid({A("fc00:a::f"), behavior::EndBpf{"noop"}});
  n.add_local_sid({A("fc00:a::e"), behavior::EndBpf{"endt"}});
  Packet p = sr_probe();
  EXPECT_EQ(process_ingress(n, p, 0), ForwardingDecision(Forward{2, A("fe80::b")}));
  Packet q = sr_probe();
  q.outer_srh()->segments[2] = A("fc00:a::e");
  q.outer().dst = A("fc00:a::e");
  EXPECT_EQ(process_ingress(n, q, 0), ForwardingDecision(Forward{7, A("fe80::77")}));
}

}  // namespace
}  // namespace seg6::usecases
