#pragma once

// Epidemic resource lookup. A query is matched against the free capacity of
// each peer it reaches; non-matching peers spend one hop of its time-to-live
// and either redirect it to a cached provider or forward it to a random
// fraction of their neighbors. Providers make offers straight to the origin,
// and the first offer that can still be honoured wins the reservation.

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "event_queue.hpp"
#include "genome.hpp"
#include "metrics.hpp"
#include "overlay.hpp"
#include "resources.hpp"

namespace ulsim {

struct ProtocolParams {
  double hop_latency = 0.1;     // seconds per overlay hop, offers included
  double query_timeout = 5.0;   // pending query becomes a miss after this
  double release_mean = 280.0;  // mean holding time of a reservation
  double seen_ttl = 60.0;       // lifetime of duplicate-suppression entries
  int qhr_window = 50;          // K: outcomes remembered per peer
  int genotype_window = 1;      // W

  void validate() const {
    if (!(hop_latency >= 0.0)) throw std::invalid_argument("hop_latency must be >= 0");
    if (!(query_timeout > 0.0)) throw std::invalid_argument("query_timeout must be > 0");
    if (!(release_mean > 0.0)) throw std::invalid_argument("release_mean must be > 0");
    if (!(seen_ttl > 0.0)) throw std::invalid_argument("seen_ttl must be > 0");
    if (qhr_window < 1) throw std::invalid_argument("qhr_window must be >= 1");
    if (genotype_window < 1) throw std::invalid_argument("genotype_window must be >= 1");
  }
};

/// Descriptors of remote providers with their last-known free capacity,
/// most recently used first. Bounded by D_max.
class DescriptorCache {
 public:
  struct Entry {
    NodeId provider;
    Resources free;
  };

  explicit DescriptorCache(std::size_t capacity = 0) : capacity_(capacity) {}

  void set_capacity(std::size_t capacity) {
    capacity_ = capacity;
    if (entries_.size() > capacity_) entries_.resize(capacity_);
  }

  void put(NodeId provider, const Resources& free) {
    erase(provider);
    if (capacity_ == 0) return;
    entries_.insert(entries_.begin(), Entry{provider, free});
    if (entries_.size() > capacity_) entries_.pop_back();
  }

  /// Most recently used provider whose recorded free capacity covers the
  /// request; promoted on use.
  const Entry* find_fit(const Resources& request) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!request.fits_in(entries_[i].free)) continue;
      if (i != 0) {
        Entry e = entries_[i];
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
        entries_.insert(entries_.begin(), e);
      }
      return &entries_.front();
    }
    return nullptr;
  }

  void erase(NodeId provider) {
    std::erase_if(entries_, [provider](const Entry& e) { return e.provider == provider; });
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::size_t capacity_;
  std::vector<Entry> entries_;
};

/// Query ids seen recently; entries expire after a fixed lifetime.
class SeenQueries {
 public:
  bool contains(QueryId q, double now) {
    expire(now);
    return ids_.contains(q);
  }

  void insert(QueryId q, double expires_at) {
    if (ids_.insert(q).second) order_.push_back({q, expires_at});
  }

  std::size_t size() const { return ids_.size(); }
  void clear() {
    ids_.clear();
    order_.clear();
  }

 private:
  void expire(double now) {
    while (!order_.empty() && order_.front().second <= now) {
      ids_.erase(order_.front().first);
      order_.pop_front();
    }
  }

  std::unordered_set<QueryId> ids_;
  std::deque<std::pair<QueryId, double>> order_;
};

/// Laplace-smoothed hit ratio over the last K completed queries.
class QhrTracker {
 public:
  explicit QhrTracker(int window = 50) : window_(window < 1 ? 1 : window) {}

  void record(bool hit) {
    outcomes_.push_back(hit);
    hits_ += hit ? 1 : 0;
    if (static_cast<int>(outcomes_.size()) > window_) {
      hits_ -= outcomes_.front() ? 1 : 0;
      outcomes_.pop_front();
    }
  }

  double value() const {
    return (static_cast<double>(hits_) + 1.0) / (static_cast<double>(outcomes_.size()) + 2.0);
  }

  int count() const { return static_cast<int>(outcomes_.size()); }
  int hits() const { return hits_; }

 private:
  int window_;
  int hits_ = 0;
  std::deque<bool> outcomes_;
};

struct Peer {
  NodeId id = 0;
  bool alive = false;
  Genotype genotype;
  Genotype initial_genotype;
  Phenotype phenotype;
  Resources capacity;
  Resources reserved;
  DescriptorCache cache{0};
  SeenQueries seen;
  QhrTracker qhr{50};
  GenotypeWindow<Genotype> window{1};
  std::uint64_t generation = 0;  // adaptation ticks executed

  Resources free() const { return capacity - reserved; }
};

enum class QueryState : std::uint8_t { Pending, Hit, Miss, Abandoned };

struct QueryRecord {
  NodeId origin = 0;
  Resources request;
  double issued_at = 0.0;
  double deadline = 0.0;
  QueryState state = QueryState::Pending;
  NodeId provider = 0;  // valid once Hit
};

struct ProtocolCounters {
  std::uint64_t submitted = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t abandoned = 0;
  std::uint64_t local_hits = 0;
  std::uint64_t query_messages = 0;
  std::uint64_t offer_messages = 0;
  std::uint64_t cache_redirects = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t offers_declined = 0;
  std::uint64_t reservations = 0;
  std::uint64_t releases = 0;              // by release timer
  std::uint64_t releases_on_departure = 0;
  std::uint64_t capacity_violations = 0;   // must stay 0
  std::uint64_t double_releases = 0;       // must stay 0
};

struct AuditResult {
  bool ok = true;
  std::string detail;
};

class LookupProtocol {
 public:
  using Rng = std::mt19937_64;

  LookupProtocol(OverlayGraph& graph, EventQueue& queue, Rng& rng, ProtocolParams params,
                 FitnessParams fitness)
      : graph_(graph), queue_(queue), rng_(rng), params_(params), fitness_(fitness) {
    params_.validate();
    fitness_.validate();
  }

  const ProtocolParams& params() const { return params_; }
  const FitnessParams& fitness_params() const { return fitness_; }
  const ProtocolCounters& counters() const { return counters_; }

  /// Registers state for a node that already exists in the overlay.
  Peer& add_peer(NodeId id, const Genotype& genotype, const Resources& capacity) {
    if (!graph_.alive(id)) throw std::invalid_argument("add_peer: node not in overlay");
    if (peers_.size() <= id) peers_.resize(static_cast<std::size_t>(id) + 1);
    Peer& p = peers_[id];
    p = Peer{};
    p.id = id;
    p.alive = true;
    p.capacity = capacity;
    p.initial_genotype = genotype;
    p.qhr = QhrTracker(params_.qhr_window);
    p.window = GenotypeWindow<Genotype>(static_cast<std::size_t>(params_.genotype_window));
    install_genotype(p, genotype);
    p.window.push(genotype);
    return p;
  }

  /// Departure: reservations hosted by the node vanish with it.
  void remove_peer(NodeId id) {
    Peer& p = peer(id);
    for (auto it = reservations_.begin(); it != reservations_.end();) {
      if (it->second.provider == id) {
        p.reserved -= it->second.amount;
        ++counters_.releases_on_departure;
        it = reservations_.erase(it);
      } else {
        ++it;
      }
    }
    p.alive = false;
    p.cache.clear();
    p.seen.clear();
  }

  bool has_peer(NodeId id) const { return id < peers_.size() && peers_[id].alive; }

  Peer& peer(NodeId id) {
    if (!has_peer(id)) throw std::out_of_range("unknown peer " + std::to_string(id));
    return peers_[id];
  }
  const Peer& peer(NodeId id) const {
    if (!has_peer(id)) throw std::out_of_range("unknown peer " + std::to_string(id));
    return peers_[id];
  }

  /// Sets the genotype and derived phenotype; the descriptor cache is cut
  /// down to the new D_max at once.
  void install_genotype(Peer& p, const Genotype& g) {
    p.genotype = g;
    p.phenotype = phenotype_of(g, fitness_);
    p.cache.set_capacity(static_cast<std::size_t>(p.phenotype.cache_capacity));
  }

  double current_qhr(NodeId id) const { return peer(id).qhr.value(); }

  const QueryRecord& query(QueryId q) const { return queries_.at(q); }
  std::size_t query_count() const { return queries_.size(); }
  std::size_t open_reservations() const { return reservations_.size(); }

  QueryId originate_query(NodeId origin, const Resources& request) {
    Peer& p = peer(origin);
    const QueryId q = queries_.size();
    QueryRecord rec;
    rec.origin = origin;
    rec.request = request;
    rec.issued_at = queue_.now();
    rec.deadline = queue_.now() + params_.query_timeout;
    queries_.push_back(rec);
    ++counters_.submitted;

    Event timeout;
    timeout.kind = EventKind::QueryTimeout;
    timeout.node = origin;
    timeout.query = q;
    queue_.schedule_at(rec.deadline, timeout);

    handle_query(origin, q, p.phenotype.max_hops);
    return q;
  }

  void handle_query(NodeId at, QueryId q, int ttl) {
    if (!has_peer(at)) return;
    Peer& p = peers_[at];
    const double now = queue_.now();
    if (p.seen.contains(q, now)) {
      ++counters_.duplicates_dropped;
      return;
    }
    p.seen.insert(q, now + params_.seen_ttl);

    const QueryRecord& rec = queries_.at(q);
    if (rec.request.fits_in(p.free())) {
      if (at == rec.origin) {
        ++counters_.local_hits;
        resolve_offer(rec.origin, at, q, p.free());
      } else {
        Event offer;
        offer.kind = EventKind::MessageDelivery;
        offer.message = MessageKind::Offer;
        offer.node = rec.origin;
        offer.from = at;
        offer.query = q;
        offer.res = p.free();
        ++counters_.offer_messages;
        queue_.schedule_in(params_.hop_latency, offer);
      }
      return;
    }

    // the origin does not spend a hop; ttl counts hops still allowed
    if (at != rec.origin) --ttl;
    if (ttl < 0) return;
    if (const auto* cached = p.cache.find_fit(rec.request)) {
      ++counters_.cache_redirects;
      send_query(cached->provider, q, ttl);
      return;
    }
    if (ttl > 0) {
      const auto& nbs = graph_.neighbors(at);
      const int k = fanout(p.phenotype.fanout_fraction, nbs.size());
      if (k == static_cast<int>(nbs.size())) {
        for (NodeId nb : nbs) send_query(nb, q, ttl);
      } else {
        for (NodeId nb : detail::sample_distinct(nbs, k, rng_)) send_query(nb, q, ttl);
      }
    }
  }

  /// Origin receives an offer. The first offer whose provider can still
  /// cover the request wins; everything else is declined.
  void resolve_offer(NodeId origin, NodeId provider, QueryId q, const Resources& advertised) {
    QueryRecord& rec = queries_.at(q);
    if (!has_peer(origin)) {
      ++counters_.offers_declined;
      return;
    }
    Peer& o = peers_[origin];
    if (rec.state != QueryState::Pending) {
      ++counters_.offers_declined;
      if (provider != origin) o.cache.put(provider, advertised);
      return;
    }
    if (!has_peer(provider) || !rec.request.fits_in(peers_[provider].free())) {
      ++counters_.offers_declined;
      return;
    }
    reserve(provider, rec.request);
    rec.state = QueryState::Hit;
    rec.provider = provider;
    o.qhr.record(true);
    ++counters_.hits;
    if (provider != origin) o.cache.put(provider, (advertised - rec.request).clamped());
  }

  /// Handles the protocol's own event kinds; returns false for others.
  bool dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::MessageDelivery:
        if (e.message == MessageKind::Query)
          handle_query(e.node, e.query, e.ttl);
        else
          resolve_offer(e.node, e.from, e.query, e.res);
        return true;
      case EventKind::QueryTimeout:
        on_timeout(e.query);
        return true;
      case EventKind::ResourceRelease:
        release(e.ref);
        return true;
      default:
        return false;
    }
  }

  /// Conservation and bookkeeping checks; meant for end of run.
  AuditResult audit() const {
    AuditResult r;
    auto fail = [&r](std::string msg) {
      if (r.ok) r.detail = std::move(msg);
      r.ok = false;
    };
    if (counters_.capacity_violations != 0) fail("reservation exceeded capacity");
    if (counters_.double_releases != 0) fail("reservation released twice");
    std::vector<Resources> held(peers_.size());
    for (const auto& [id, res] : reservations_) {
      if (!has_peer(res.provider)) fail("reservation on departed provider");
      else held[res.provider] += res.amount;
    }
    for (const Peer& p : peers_) {
      if (!p.alive) continue;
      if (!p.reserved.non_negative() || !p.reserved.fits_in(p.capacity))
        fail("reserved outside [0, capacity] at peer " + std::to_string(p.id));
      if (!(held[p.id] == p.reserved)) fail("reserved != sum of open reservations at peer " + std::to_string(p.id));
    }
    if (counters_.reservations !=
        counters_.releases + counters_.releases_on_departure + reservations_.size())
      fail("reservation count mismatch");
    const double now = queue_.now();
    for (const auto& rec : queries_)
      if (rec.state == QueryState::Pending && rec.deadline < now) fail("query pending past its deadline");
    if (counters_.submitted != counters_.hits + counters_.misses + counters_.abandoned + pending_count())
      fail("query outcome count mismatch");
    return r;
  }

  std::size_t pending_count() const {
    std::size_t n = 0;
    for (const auto& rec : queries_) n += rec.state == QueryState::Pending;
    return n;
  }

  /// ceil(f_k * deg), at least one when there is a neighbor at all.
  static int fanout(double fraction, std::size_t degree) {
    if (degree == 0) return 0;
    const double raw = std::ceil(fraction * static_cast<double>(degree) - 1e-9);
    int k = static_cast<int>(raw);
    if (k < 1) k = 1;
    if (k > static_cast<int>(degree)) k = static_cast<int>(degree);
    return k;
  }

 private:
  struct Reservation {
    NodeId provider;
    Resources amount;
  };

  void send_query(NodeId to, QueryId q, int ttl) {
    Event e;
    e.kind = EventKind::MessageDelivery;
    e.message = MessageKind::Query;
    e.node = to;
    e.query = q;
    e.ttl = ttl;
    ++counters_.query_messages;
    queue_.schedule_in(params_.hop_latency, e);
  }

  void reserve(NodeId provider, const Resources& amount) {
    Peer& p = peers_[provider];
    p.reserved += amount;
    if (!p.reserved.fits_in(p.capacity) || !p.reserved.non_negative()) ++counters_.capacity_violations;
    const std::uint64_t id = next_reservation_++;
    reservations_.emplace(id, Reservation{provider, amount});
    ++counters_.reservations;
    std::exponential_distribution<double> hold(1.0 / params_.release_mean);
    Event e;
    e.kind = EventKind::ResourceRelease;
    e.node = provider;
    e.ref = id;
    queue_.schedule_in(hold(rng_), e);
  }

  void release(std::uint64_t id) {
    auto it = reservations_.find(id);
    if (it == reservations_.end()) {
      // provider departed earlier, or a genuine double release
      if (released_ids_.contains(id)) ++counters_.double_releases;
      released_ids_.insert(id);
      return;
    }
    peers_[it->second.provider].reserved -= it->second.amount;
    reservations_.erase(it);
    released_ids_.insert(id);
    ++counters_.releases;
  }

  void on_timeout(QueryId q) {
    QueryRecord& rec = queries_.at(q);
    if (rec.state != QueryState::Pending) return;
    if (has_peer(rec.origin)) {
      rec.state = QueryState::Miss;
      peers_[rec.origin].qhr.record(false);
      ++counters_.misses;
    } else {
      rec.state = QueryState::Abandoned;
      ++counters_.abandoned;
    }
  }

  OverlayGraph& graph_;
  EventQueue& queue_;
  Rng& rng_;
  ProtocolParams params_;
  FitnessParams fitness_;
  std::vector<Peer> peers_;
  std::vector<QueryRecord> queries_;
  std::unordered_map<std::uint64_t, Reservation> reservations_;
  std::unordered_set<std::uint64_t> released_ids_;
  std::uint64_t next_reservation_ = 0;
  ProtocolCounters counters_;
};

}  // namespace ulsim
