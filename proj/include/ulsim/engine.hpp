#pragma once

// Discrete-event driver: builds the overlay, generates Poisson workload and
// churn, ticks every peer's adaptation loop and samples network-wide
// averages at a fixed period.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptation.hpp"
#include "event_queue.hpp"
#include "genome.hpp"
#include "metrics.hpp"
#include "overlay.hpp"
#include "protocol.hpp"
#include "resources.hpp"

namespace ulsim {

enum class LoadProfile { Static, Changing };
enum class RequestProfile { Heavy, Light };

struct ScenarioConfig {
  double duration = 9000.0;  // 150 min
  TopologyParams topology;
  double churn_rate = 0.14;   // joins/s and, separately, departures/s
  double query_rate = 36.0;   // queries/s over the whole network
  LoadProfile load = LoadProfile::Static;
  double load_switch_time = 3000.0;
  double mix = 0.9;           // share of queries following the dominant profile
  double sample_period = 60.0;
  AdaptationParams adaptation;
  ProtocolParams protocol;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
    topology.validate();
    if (!(churn_rate >= 0.0)) throw std::invalid_argument("churn_rate must be >= 0");
    if (!(query_rate >= 0.0)) throw std::invalid_argument("query_rate must be >= 0");
    if (!(mix >= 0.0 && mix <= 1.0)) throw std::invalid_argument("mix must be in [0,1]");
    if (!(load_switch_time >= 0.0)) throw std::invalid_argument("load_switch_time must be >= 0");
    if (!(sample_period > 0.0)) throw std::invalid_argument("sample_period must be > 0");
    adaptation.validate();
    protocol.validate();
  }
};

inline constexpr Resources kMaxCapacity{2048, 1024, 100};
inline constexpr Resources kCapacityStep{512, 256, 10};
inline constexpr Resources kLightRequest{256, 128, 1};

/// Peer capacities: uniform multiples of (512 MHz, 256 MB, 10 GB) up to
/// (2048, 1024, 100).
template <class Rng>
Resources draw_capacities(Rng& rng) {
  std::uniform_int_distribution<int> cpu(1, kMaxCapacity.cpu / kCapacityStep.cpu);
  std::uniform_int_distribution<int> ram(1, kMaxCapacity.ram / kCapacityStep.ram);
  std::uniform_int_distribution<int> disk(1, kMaxCapacity.disk / kCapacityStep.disk);
  return {cpu(rng) * kCapacityStep.cpu, ram(rng) * kCapacityStep.ram, disk(rng) * kCapacityStep.disk};
}

template <class Rng>
Resources draw_request(RequestProfile profile, Rng& rng) {
  if (profile == RequestProfile::Light) return kLightRequest;
  return draw_capacities(rng);
}

template <class Rng>
Genotype random_genotype(int n, Rng& rng) {
  std::uniform_int_distribution<int> gene(1, n);
  Genotype g;
  for (auto& x : g.genes) x = gene(rng);
  return g;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation over peers
};

struct MetricsSample {
  double t = 0.0;
  Moments qhr, m0, m1, m2, e, s, c, h;
  std::size_t alive = 0;
};

struct EngineCounters {
  std::uint64_t events = 0;
  std::uint64_t query_arrivals = 0;
  std::uint64_t joins = 0;
  std::uint64_t leaves = 0;
  std::uint64_t ticks = 0;
  std::uint64_t mutations = 0;
  std::uint64_t load_switches = 0;
  double alive_time_integral = 0.0;  // for the time-averaged network size
};

struct RunTrace {
  std::vector<MetricsSample> samples;
  AuditResult audit;
  ProtocolCounters protocol;
  EngineCounters engine;
  double mean_alive = 0.0;  // time-averaged alive count
};

class Simulation {
 public:
  using Rng = std::mt19937_64;

  explicit Simulation(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        topo_rng_(stream(1)),
        workload_rng_(stream(2)),
        churn_rng_(stream(3)),
        protocol_rng_(stream(4)),
        adapt_rng_(stream(5)),
        init_rng_(stream(6)),
        protocol_(graph_, queue_, protocol_rng_, cfg_.protocol, cfg_.adaptation.fitness) {
    cfg_.validate();
    metrics_cfg_.n = cfg_.adaptation.fitness.n;
    metrics_cfg_.q = kGenes;
    metrics_cfg_.W = cfg_.protocol.genotype_window;
    metrics_cfg_.validate();
  }

  const ScenarioConfig& config() const { return cfg_; }
  const OverlayGraph& graph() const { return graph_; }
  const LookupProtocol& protocol() const { return protocol_; }
  LookupProtocol& protocol() { return protocol_; }
  const EventQueue& queue() const { return queue_; }
  const EngineCounters& counters() const { return counters_; }
  bool light_phase() const { return light_phase_; }

  RunTrace run() {
    setup();
    while (!queue_.empty() && queue_.top().time <= cfg_.duration) {
      const double before = queue_.now();
      Event e = queue_.pop();
      counters_.alive_time_integral += (e.time - before) * static_cast<double>(graph_.alive_count());
      ++counters_.events;
      dispatch(e);
    }
    counters_.alive_time_integral +=
        (cfg_.duration - queue_.now()) * static_cast<double>(graph_.alive_count());

    trace_.audit = protocol_.audit();
    trace_.protocol = protocol_.counters();
    trace_.engine = counters_;
    trace_.mean_alive = cfg_.duration > 0.0 ? counters_.alive_time_integral / cfg_.duration
                                            : static_cast<double>(graph_.alive_count());
    return trace_;
  }

  /// Network-wide averages over alive peers at the current instant.
  MetricsSample sample_now() const {
    MetricsSample ms;
    ms.t = queue_.now();
    const auto& alive = graph_.alive_nodes();
    ms.alive = alive.size();
    if (alive.empty()) return ms;
    struct Acc {
      double sum = 0.0, sq = 0.0;
      void add(double v) {
        sum += v;
        sq += v * v;
      }
      Moments done(double n) const {
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean);
        return {mean, std::sqrt(var)};
      }
    } qhr, m0, m1, m2, e, s, c, h;
    for (NodeId id : alive) {
      const Peer& p = protocol_.peer(id);
      qhr.add(p.qhr.value());
      m0.add(p.genotype[0]);
      m1.add(p.genotype[1]);
      m2.add(p.genotype[2]);
      const MeasureSet ms_peer = measures_from_information(normalized_information(p.window, metrics_cfg_));
      e.add(ms_peer.E);
      s.add(ms_peer.S);
      c.add(ms_peer.C);
      h.add(homeostasis(p.genotype, p.initial_genotype));
    }
    const double n = static_cast<double>(alive.size());
    ms.qhr = qhr.done(n);
    ms.m0 = m0.done(n);
    ms.m1 = m1.done(n);
    ms.m2 = m2.done(n);
    ms.e = e.done(n);
    ms.s = s.done(n);
    ms.c = c.done(n);
    ms.h = h.done(n);
    return ms;
  }

  RequestProfile request_profile(double t) {
    if (cfg_.load == LoadProfile::Static) return RequestProfile::Heavy;
    const bool light = light_phase_ || t > cfg_.load_switch_time;
    const RequestProfile dominant = light ? RequestProfile::Light : RequestProfile::Heavy;
    const RequestProfile other = light ? RequestProfile::Heavy : RequestProfile::Light;
    std::bernoulli_distribution follow(cfg_.mix);
    return follow(workload_rng_) ? dominant : other;
  }

 private:
  // Independent stream per concern, so the workload and churn sequences of
  // a seed do not depend on the fitness variant.
  Rng stream(std::uint64_t id) const {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return Rng(seq);
  }

  void setup() {
    graph_ = generate(cfg_.topology, topo_rng_);
    for (NodeId id : std::vector<NodeId>(graph_.alive_nodes())) spawn_peer(id);

    Event sample;
    sample.kind = EventKind::MetricsSample;
    sample.ref = 0;
    queue_.schedule_at(0.0, sample);

    if (cfg_.query_rate > 0.0) schedule_poisson(EventKind::QueryArrival, cfg_.query_rate, workload_rng_);
    if (cfg_.churn_rate > 0.0) {
      schedule_poisson(EventKind::Join, cfg_.churn_rate, churn_rng_);
      schedule_poisson(EventKind::Leave, cfg_.churn_rate, churn_rng_);
    }
    if (cfg_.load == LoadProfile::Changing) {
      Event sw;
      sw.kind = EventKind::LoadSwitch;
      queue_.schedule_at(cfg_.load_switch_time, sw);
    }
  }

  void spawn_peer(NodeId id) {
    const Genotype g = random_genotype(cfg_.adaptation.fitness.n, init_rng_);
    protocol_.add_peer(id, g, draw_capacities(init_rng_));
    std::uniform_real_distribution<double> phase(0.0, cfg_.adaptation.period);
    Event tick;
    tick.kind = EventKind::AdaptTick;
    tick.node = id;
    queue_.schedule_in(phase(adapt_rng_), tick);
  }

  template <class R>
  void schedule_poisson(EventKind kind, double rate, R& rng) {
    std::exponential_distribution<double> gap(rate);
    Event e;
    e.kind = kind;
    queue_.schedule_in(gap(rng), e);
  }

  void dispatch(const Event& e) {
    if (protocol_.dispatch(e)) return;
    switch (e.kind) {
      case EventKind::QueryArrival: {
        ++counters_.query_arrivals;
        const auto& alive = graph_.alive_nodes();
        if (!alive.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
          const NodeId origin = alive[pick(workload_rng_)];
          const Resources request = draw_request(request_profile(e.time), workload_rng_);
          protocol_.originate_query(origin, request);
        }
        schedule_poisson(EventKind::QueryArrival, cfg_.query_rate, workload_rng_);
        break;
      }
      case EventKind::Join: {
        if (graph_.alive_count() >= static_cast<std::size_t>(cfg_.topology.m)) {
          const NodeId id = join(graph_, cfg_.topology.m, churn_rng_);
          spawn_peer(id);
          ++counters_.joins;
        }
        schedule_poisson(EventKind::Join, cfg_.churn_rate, churn_rng_);
        break;
      }
      case EventKind::Leave: {
        const auto& alive = graph_.alive_nodes();
        if (alive.size() > 1) {
          std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
          const NodeId id = alive[pick(churn_rng_)];
          protocol_.remove_peer(id);
          leave(graph_, id);
          ++counters_.leaves;
        }
        schedule_poisson(EventKind::Leave, cfg_.churn_rate, churn_rng_);
        break;
      }
      case EventKind::AdaptTick: {
        if (!protocol_.has_peer(e.node)) break;  // departed: tick chain ends
        const TickOutcome out = adaptation_tick(protocol_, graph_, e.node, cfg_.adaptation, adapt_rng_);
        ++counters_.ticks;
        counters_.mutations += static_cast<std::uint64_t>(out.mutations);
        Event next = e;
        queue_.schedule_in(cfg_.adaptation.period, next);
        break;
      }
      case EventKind::MetricsSample: {
        trace_.samples.push_back(sample_now());
        Event next = e;
        next.ref = e.ref + 1;
        const double t = static_cast<double>(next.ref) * cfg_.sample_period;
        if (t <= cfg_.duration) queue_.schedule_at(t, next);
        break;
      }
      case EventKind::LoadSwitch:
        light_phase_ = true;
        ++counters_.load_switches;
        break;
      default:
        throw std::logic_error("unhandled event kind");
    }
  }

  ScenarioConfig cfg_;
  MetricsConfig metrics_cfg_;
  Rng topo_rng_, workload_rng_, churn_rng_, protocol_rng_, adapt_rng_, init_rng_;
  OverlayGraph graph_;
  EventQueue queue_;
  LookupProtocol protocol_;
  EngineCounters counters_;
  RunTrace trace_;
  bool light_phase_ = false;
};

inline RunTrace run(const ScenarioConfig& cfg) {
  cfg.validate();
  Simulation sim(cfg);
  return sim.run();
}

/// %.6g rendering used for every number in the CSV outputs.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline constexpr const char* kTraceHeader =
    "t,qhr_mean,qhr_std,m0_mean,m0_std,m1_mean,m1_std,m2_mean,m2_std,e_mean,s_mean,c_mean,c_std,h_mean,alive";

inline std::vector<double> trace_row(const MetricsSample& s) {
  return {s.t,      s.qhr.mean, s.qhr.sd, s.m0.mean, s.m0.sd, s.m1.mean, s.m1.sd, s.m2.mean,
          s.m2.sd,  s.e.mean,   s.s.mean, s.c.mean,  s.c.sd,  s.h.mean,  static_cast<double>(s.alive)};
}

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& s : trace.samples) {
    const auto row = trace_row(s);
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
}

}  // namespace ulsim
