#include <gtest/gtest.h>

#include <map>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "ulsim/engine.hpp"
#include "ulsim/protocol.hpp"

using namespace ulsim;

namespace {

constexpr Resources kNone{0, 0, 0};
constexpr Resources kFull{2048, 1024, 100};
constexpr Resources kReq{512, 256, 10};

struct Delivery {
  double time;
  NodeId to;
  QueryId query;
  int ttl;
};

struct Harness {
  OverlayGraph g;
  EventQueue q;
  std::mt19937_64 rng{1};
  LookupProtocol proto;
  std::vector<Delivery> log;

  explicit Harness(ProtocolParams pp = {}) : proto(g, q, rng, pp, FitnessParams{}) {}

  void nodes(int count) {
    for (int i = 0; i < count; ++i) g.add_node();
  }
  void line(int count) {
    nodes(count);
    for (int i = 0; i + 1 < count; ++i) g.connect(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
  }
  void run_until(double t) {
    while (!q.empty() && q.top().time <= t) {
      const Event e = q.pop();
      if (e.kind == EventKind::MessageDelivery && e.message == MessageKind::Query)
        log.push_back({e.time, e.node, e.query, e.ttl});
      ASSERT_TRUE(proto.dispatch(e));
    }
  }
};

}  // namespace

TEST(Protocol, LocalHitSendsNothing) {
  Harness h;
  h.nodes(1);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kFull);
  const QueryId q = h.proto.originate_query(0, kReq);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Hit);
  EXPECT_EQ(h.proto.query(q).provider, 0u);
  EXPECT_EQ(h.proto.counters().query_messages, 0u);
  EXPECT_EQ(h.proto.counters().offer_messages, 0u);
  EXPECT_EQ(h.proto.counters().local_hits, 1u);
  EXPECT_EQ(h.proto.peer(0).reserved, kReq);
  EXPECT_DOUBLE_EQ(h.proto.current_qhr(0), 2.0 / 3.0);
  EXPECT_EQ(h.proto.peer(0).cache.size(), 0u);
}

TEST(Protocol, LineWithoutResourcesMissesAtTimeout) {
  Harness h;
  h.line(3);
  for (NodeId v = 0; v < 3; ++v) h.proto.add_peer(v, Genotype{{6, 6, 6}}, kNone);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.run_until(4.99);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Pending);
  h.run_until(5.0);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Miss);
  EXPECT_DOUBLE_EQ(h.proto.current_qhr(0), 1.0 / 3.0);
  EXPECT_TRUE(h.proto.audit().ok);
}

TEST(Protocol, TwoProvidersOneReservation) {
  Harness h;
  h.nodes(3);
  h.g.connect(0, 1);
  h.g.connect(0, 2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kFull);
  h.proto.add_peer(2, Genotype{{6, 6, 6}}, kFull);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.run_until(1.0);
  const auto& c = h.proto.counters();
  EXPECT_EQ(c.offer_messages, 2u);
  EXPECT_EQ(c.reservations, 1u);
  EXPECT_EQ(c.offers_declined, 1u);
  ASSERT_EQ(h.proto.query(q).state, QueryState::Hit);
  const NodeId winner = h.proto.query(q).provider;
  const NodeId loser = winner == 1 ? 2 : 1;
  EXPECT_EQ(h.proto.peer(winner).reserved, kReq);
  EXPECT_EQ(h.proto.peer(loser).reserved, kNone);
  // origin caches both: winner net of the request, loser as advertised
  const auto& entries = h.proto.peer(0).cache.entries();
  ASSERT_EQ(entries.size(), 2u);
  for (const auto& e : entries) EXPECT_EQ(e.free, e.provider == winner ? kFull - kReq : kFull);
}

TEST(Protocol, SingleOfferReservesAndReleases) {
  Harness h;
  h.line(2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kFull);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.run_until(0.2);
  ASSERT_EQ(h.proto.query(q).state, QueryState::Hit);
  EXPECT_EQ(h.proto.peer(1).reserved, kReq);
  EXPECT_EQ(h.proto.open_reservations(), 1u);
  h.run_until(1e9);
  EXPECT_EQ(h.proto.peer(1).reserved, kNone);
  EXPECT_EQ(h.proto.counters().releases, 1u);
  EXPECT_EQ(h.proto.open_reservations(), 0u);
  EXPECT_TRUE(h.proto.audit().ok);
}

TEST(Protocol, RaceDeclinesOffer) {
  Harness h;
  h.line(2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kReq);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.run_until(0.1);
  ASSERT_EQ(h.proto.counters().offer_messages, 1u);
  // provider spends its capacity on a local query before the offer lands
  const QueryId local = h.proto.originate_query(1, kReq);
  ASSERT_EQ(h.proto.query(local).state, QueryState::Hit);
  h.run_until(0.25);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Pending);
  EXPECT_EQ(h.proto.counters().offers_declined, 1u);
  EXPECT_EQ(h.proto.peer(1).reserved, kReq);
  EXPECT_EQ(h.proto.peer(0).cache.size(), 0u);
  h.run_until(5.0);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Miss);
}

TEST(Protocol, TtlOneStopsAtNextPeer) {
  Harness h;
  h.line(3);
  h.proto.add_peer(0, Genotype{{6, 1, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(2, Genotype{{6, 6, 6}}, kFull);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.run_until(10.0);
  ASSERT_EQ(h.log.size(), 1u);
  EXPECT_EQ(h.log[0].to, 1u);
  EXPECT_EQ(h.log[0].ttl, 1);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Miss);
}

TEST(Protocol, FanoutHalfOfFour) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Harness h;
    h.rng.seed(seed);
    h.nodes(5);
    for (NodeId v = 1; v < 5; ++v) h.g.connect(0, v);
    h.proto.add_peer(0, Genotype{{3, 6, 6}}, kNone);
    for (NodeId v = 1; v < 5; ++v) h.proto.add_peer(v, Genotype{{6, 1, 6}}, kNone);
    h.proto.originate_query(0, kReq);
    EXPECT_EQ(h.proto.counters().query_messages, 2u);
    h.run_until(0.1);
    ASSERT_EQ(h.log.size(), 2u);
    EXPECT_NE(h.log[0].to, h.log[1].to);
  }
}

TEST(Protocol, FanoutRounding) {
  EXPECT_EQ(LookupProtocol::fanout(0.5, 4), 2);
  EXPECT_EQ(LookupProtocol::fanout(0.5, 3), 2);
  EXPECT_EQ(LookupProtocol::fanout(1.0 / 6.0, 4), 1);
  EXPECT_EQ(LookupProtocol::fanout(2.0 / 6.0, 3), 1);
  EXPECT_EQ(LookupProtocol::fanout(1.0, 5), 5);
  EXPECT_EQ(LookupProtocol::fanout(1.0 / 6.0, 0), 0);
  EXPECT_EQ(LookupProtocol::fanout(4.0 / 6.0, 12), 8);
}

TEST(Protocol, DuplicateDropped) {
  Harness h;
  h.line(2);
  h.proto.add_peer(0, Genotype{{6, 1, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kNone);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.proto.handle_query(1, q, 3);
  const auto after_first = h.proto.counters();
  EXPECT_EQ(after_first.query_messages, 2u);
  h.proto.handle_query(1, q, 3);
  EXPECT_EQ(h.proto.counters().duplicates_dropped, after_first.duplicates_dropped + 1);
  EXPECT_EQ(h.proto.counters().query_messages, after_first.query_messages);
  EXPECT_EQ(h.proto.counters().offer_messages, after_first.offer_messages);
}

TEST(Protocol, SeenEntriesExpire) {
  SeenQueries s;
  s.insert(7, 60.0);
  EXPECT_TRUE(s.contains(7, 59.9));
  EXPECT_FALSE(s.contains(7, 60.0));
}

TEST(Protocol, CachedProviderTakesPrecedence) {
  Harness h;
  h.nodes(4);
  h.g.connect(0, 1);
  h.g.connect(0, 2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(2, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(3, Genotype{{6, 6, 6}}, kFull);
  h.proto.peer(0).cache.put(3, kFull);
  const QueryId q = h.proto.originate_query(0, kReq);
  EXPECT_EQ(h.proto.counters().cache_redirects, 1u);
  EXPECT_EQ(h.proto.counters().query_messages, 1u);
  h.run_until(1.0);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Hit);
  EXPECT_EQ(h.proto.query(q).provider, 3u);
}

TEST(Protocol, QhrTracker) {
  QhrTracker t(50);
  EXPECT_DOUBLE_EQ(t.value(), 0.5);
  t.record(true);
  EXPECT_DOUBLE_EQ(t.value(), 2.0 / 3.0);
  QhrTracker full(50);
  for (int i = 0; i < 50; ++i) full.record(true);
  EXPECT_DOUBLE_EQ(full.value(), 51.0 / 52.0);
  for (int i = 0; i < 10; ++i) full.record(true);
  EXPECT_DOUBLE_EQ(full.value(), 51.0 / 52.0);
  for (int i = 0; i < 50; ++i) full.record(false);
  EXPECT_DOUBLE_EQ(full.value(), 1.0 / 52.0);
}

TEST(Protocol, DescriptorCacheLru) {
  DescriptorCache c(2);
  c.put(1, {100, 100, 1});
  c.put(2, {200, 200, 2});
  c.put(3, {300, 300, 3});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.entries()[0].provider, 3u);
  EXPECT_EQ(c.entries()[1].provider, 2u);
  // use of 2 promotes it, so shrinking keeps it
  ASSERT_NE(c.find_fit({150, 150, 1}), nullptr);
  EXPECT_EQ(c.entries()[0].provider, 3u);
  ASSERT_EQ(c.find_fit({250, 150, 1})->provider, 3u);
  EXPECT_EQ(c.find_fit({1000, 0, 0}), nullptr);
  c.set_capacity(1);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.entries()[0].provider, 3u);
  DescriptorCache none(0);
  none.put(1, kFull);
  EXPECT_EQ(none.size(), 0u);
}

TEST(Protocol, GenotypeChangeShrinksCache) {
  Harness h;
  h.nodes(1);
  Peer& p = h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  for (NodeId v = 1; v <= 12; ++v) p.cache.put(v, kFull);
  ASSERT_EQ(p.cache.size(), 12u);
  h.proto.install_genotype(p, Genotype{{6, 6, 1}});
  EXPECT_EQ(p.cache.size(), 2u);
  EXPECT_EQ(p.cache.entries()[0].provider, 12u);
}

TEST(ProtocolProperty, FloodAlwaysHitsWithinSixHops) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 topo(seed);
    const OverlayGraph base = generate({20, 3, 1}, topo);
    for (NodeId origin = 0; origin < 20; ++origin) {
      // hop distances by BFS
      std::vector<int> dist(20, -1);
      std::queue<NodeId> frontier;
      dist[origin] = 0;
      frontier.push(origin);
      while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (NodeId v : base.neighbors(u))
          if (dist[v] < 0) {
            dist[v] = dist[u] + 1;
            frontier.push(v);
          }
      }
      for (NodeId provider = 0; provider < 20; ++provider) {
        if (provider == origin || dist[provider] > 6) continue;
        Harness h;
        h.g = base;
        for (NodeId v = 0; v < 20; ++v) h.proto.add_peer(v, Genotype{{6, 6, 6}}, v == provider ? kFull : kNone);
        const QueryId q = h.proto.originate_query(origin, kReq);
        h.run_until(5.0);
        ASSERT_EQ(h.proto.query(q).state, QueryState::Hit) << "seed " << seed << " " << origin << "->" << provider;
        ASSERT_EQ(h.proto.query(q).provider, provider);
      }
    }
  }
}

TEST(ProtocolProperty, HopLimitOnALine) {
  for (NodeId provider = 1; provider < 10; ++provider) {
    // ttl counts hops, so T_max = 6 reaches exactly six hops out
    Harness h;
    h.line(10);
    for (NodeId v = 0; v < 10; ++v) h.proto.add_peer(v, Genotype{{6, 6, 6}}, v == provider ? kFull : kNone);
    const QueryId q = h.proto.originate_query(0, kReq);
    h.run_until(5.0);
    EXPECT_EQ(h.proto.query(q).state, provider <= 6 ? QueryState::Hit : QueryState::Miss) << provider;
  }
}

TEST(ProtocolProperty, RandomWorkloadInvariants) {
  Harness h;
  std::mt19937_64 rng(99);
  h.g = generate({80, 5, 3}, rng);
  std::map<NodeId, int> tmax;
  for (NodeId v : h.g.alive_nodes()) {
    const Genotype gt = random_genotype(6, rng);
    h.proto.add_peer(v, gt, draw_capacities(rng));
  }
  std::vector<NodeId> origin_of;
  std::exponential_distribution<double> gap(2.0);
  std::uniform_int_distribution<NodeId> pick(0, 79);
  double t = 0.0;
  for (int i = 0; i < 600; ++i) {
    t += gap(rng);
    h.run_until(t);
    const NodeId origin = pick(rng);
    tmax[static_cast<NodeId>(h.proto.query_count())] = h.proto.peer(origin).phenotype.max_hops;
    h.proto.originate_query(origin, draw_capacities(rng));
    for (NodeId v : h.g.alive_nodes()) {
      const Peer& p = h.proto.peer(v);
      ASSERT_TRUE(p.reserved.non_negative());
      ASSERT_TRUE(p.reserved.fits_in(p.capacity));
      ASSERT_LE(p.cache.size(), static_cast<std::size_t>(p.phenotype.cache_capacity));
    }
  }
  h.run_until(t + 10.0);
  EXPECT_TRUE(h.proto.audit().ok) << h.proto.audit().detail;
  EXPECT_EQ(h.proto.pending_count(), 0u);

  std::map<QueryId, std::set<NodeId>> visited;
  std::map<QueryId, std::size_t> messages;
  for (const auto& d : h.log) {
    ASSERT_GE(d.ttl, 0);
    ASSERT_LE(d.ttl, tmax.at(static_cast<NodeId>(d.query)));
    visited[d.query].insert(d.to);
    ++messages[d.query];
  }
  for (const auto& [q, count] : messages) {
    std::size_t bound = 0;
    std::set<NodeId> senders = visited[q];
    senders.insert(h.proto.query(q).origin);
    for (NodeId v : senders) {
      const Peer& p = h.proto.peer(v);
      bound += static_cast<std::size_t>(std::max(1, LookupProtocol::fanout(p.phenotype.fanout_fraction, h.g.degree(v))));
    }
    ASSERT_LE(count, bound);
  }
  EXPECT_GT(h.proto.counters().hits, 0u);
  EXPECT_GT(h.proto.counters().duplicates_dropped, 0u);

  h.run_until(1e12);
  EXPECT_EQ(h.proto.open_reservations(), 0u);
  for (NodeId v : h.g.alive_nodes()) EXPECT_EQ(h.proto.peer(v).reserved, kNone);
  EXPECT_TRUE(h.proto.audit().ok);
}

TEST(Protocol, DepartureReleasesHostedReservations) {
  Harness h;
  h.line(2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kFull);
  h.proto.originate_query(0, kReq);
  h.run_until(0.2);
  ASSERT_EQ(h.proto.open_reservations(), 1u);
  h.proto.remove_peer(1);
  leave(h.g, 1);
  EXPECT_EQ(h.proto.open_reservations(), 0u);
  EXPECT_EQ(h.proto.counters().releases_on_departure, 1u);
  h.run_until(1e12);
  EXPECT_EQ(h.proto.counters().double_releases, 0u);
  EXPECT_TRUE(h.proto.audit().ok);
}

TEST(Protocol, DepartedOriginAbandonsQuery) {
  Harness h;
  h.line(2);
  h.proto.add_peer(0, Genotype{{6, 6, 6}}, kNone);
  h.proto.add_peer(1, Genotype{{6, 6, 6}}, kNone);
  const QueryId q = h.proto.originate_query(0, kReq);
  h.proto.remove_peer(0);
  leave(h.g, 0);
  h.run_until(10.0);
  EXPECT_EQ(h.proto.query(q).state, QueryState::Abandoned);
  EXPECT_TRUE(h.proto.audit().ok);
}
