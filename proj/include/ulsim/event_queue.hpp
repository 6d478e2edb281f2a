#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

#include "overlay.hpp"
#include "resources.hpp"

namespace ulsim {

enum class EventKind : std::uint8_t {
  QueryArrival,
  MessageDelivery,
  AdaptTick,
  Join,
  Leave,
  ResourceRelease,
  QueryTimeout,
  MetricsSample,
  LoadSwitch,
};

enum class MessageKind : std::uint8_t { Query, Offer };

using QueryId = std::uint64_t;

// Flat payload; which fields matter depends on kind.
struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::MetricsSample;
  MessageKind message = MessageKind::Query;
  NodeId node = 0;        // recipient / subject peer
  NodeId from = 0;        // sender (offers: the provider)
  QueryId query = 0;
  int ttl = 0;
  std::uint64_t ref = 0;  // reservation id, tick generation, ...
  Resources res;          // offers: advertised free capacity
};

/// Min-heap on (time, seq). Ties run in scheduling order.
class EventQueue {
 public:
  double now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t scheduled() const { return next_seq_; }

  void schedule_at(double time, Event e) {
    if (time < now_) throw std::logic_error("event scheduled in the past");
    e.time = time;
    e.seq = next_seq_++;
    heap_.push(e);
  }

  void schedule_in(double delay, Event e) { schedule_at(now_ + delay, e); }

  const Event& top() const { return heap_.top(); }

  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
};

}  // namespace ulsim
