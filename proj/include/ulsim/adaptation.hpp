#pragma once

// Per-peer genetic adaptation: partner choice among neighbors, one-point
// crossover, mutation driven by the neighborhood hit ratio, and survivor
// selection among the current model and the two offspring. Fitness is
// minimized; selection odds are proportional to 1/F.

#include <algorithm>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "genome.hpp"
#include "overlay.hpp"
#include "protocol.hpp"

namespace ulsim {

struct AdaptationParams {
  double period = 7.0;  // Ta, seconds
  FitnessKind kind = FitnessKind::F2;
  FitnessParams fitness;

  void validate() const {
    if (!(period > 0.0)) throw std::invalid_argument("adaptation period must be > 0");
    fitness.validate();
  }
};

inline constexpr double kFitnessEpsilon = 1e-9;

/// Index of the chosen candidate. A fitness at or below epsilon is taken
/// deterministically (first such candidate).
template <class Rng>
std::size_t select_inverse_proportionate(std::span<const double> fitnesses, Rng& rng) {
  if (fitnesses.empty()) throw std::invalid_argument("selection: no candidates");
  double total = 0.0;
  for (std::size_t i = 0; i < fitnesses.size(); ++i) {
    if (fitnesses[i] <= kFitnessEpsilon) return i;
    total += 1.0 / fitnesses[i];
  }
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < fitnesses.size(); ++i) {
    r -= 1.0 / fitnesses[i];
    if (r < 0.0) return i;
  }
  return fitnesses.size() - 1;
}

/// Offspring for an explicit crosspoint c in [1, kGenes-1]: genes [0, c)
/// come from the first parent of each child.
inline std::pair<Genotype, Genotype> crossover_at(const Genotype& a, const Genotype& b, int c) {
  if (c < 1 || c >= kGenes) throw std::invalid_argument("crossover: crosspoint out of range");
  Genotype o1 = a;
  Genotype o2 = b;
  for (int i = c; i < kGenes; ++i) std::swap(o1[static_cast<std::size_t>(i)], o2[static_cast<std::size_t>(i)]);
  return {o1, o2};
}

template <class Rng>
std::pair<Genotype, Genotype> crossover(const Genotype& a, const Genotype& b, Rng& rng) {
  std::uniform_int_distribution<int> point(1, kGenes - 1);
  return crossover_at(a, b, point(rng));
}

/// With probability p_mut, one uniformly chosen gene is redrawn from [1..n]
/// (possibly to its old value). Returns whether the draw fired.
template <class Rng>
bool mutate_in_place(Genotype& g, double p_mut, int n, Rng& rng) {
  if (!(p_mut >= 0.0 && p_mut <= 1.0)) throw std::domain_error("mutation probability outside [0,1]");
  std::bernoulli_distribution fire(p_mut);
  if (!fire(rng)) return false;
  std::uniform_int_distribution<int> pos(0, kGenes - 1);
  std::uniform_int_distribution<int> value(1, n);
  const auto i = static_cast<std::size_t>(pos(rng));
  g[i] = value(rng);
  return true;
}

template <class Rng>
Genotype mutate(Genotype g, double p_mut, int n, Rng& rng) {
  mutate_in_place(g, p_mut, n, rng);
  return g;
}

struct NeighborSnapshot {
  Genotype genotype;
  double qhr = 0.5;
};

struct TickOutcome {
  Genotype survivor;
  double avg_qhr = 0.5;
  bool isolated = false;
  int mutations = 0;  // offspring whose mutation draw fired
};

/// One adaptation step for a peer with the given neighbor snapshots. All
/// candidate models are scored at the peer's own neighborhood hit ratio.
template <class Rng>
TickOutcome adaptation_step(const Genotype& own, double own_qhr,
                            std::span<const NeighborSnapshot> neighbors,
                            const AdaptationParams& params, Rng& rng) {
  TickOutcome out;
  out.survivor = own;
  if (neighbors.empty()) {
    out.avg_qhr = own_qhr;
    out.isolated = true;
    return out;
  }

  std::vector<double> qhrs;
  qhrs.reserve(neighbors.size());
  for (const auto& nb : neighbors) qhrs.push_back(nb.qhr);
  const double shared = avg_qhr(own_qhr, qhrs);
  out.avg_qhr = shared;

  const auto& fp = params.fitness;
  auto score = [&](const Genotype& g) { return fitness(params.kind, phenotype_of(g, fp).phi, shared, fp); };

  std::vector<double> partner_fitness;
  partner_fitness.reserve(neighbors.size());
  for (const auto& nb : neighbors) partner_fitness.push_back(score(nb.genotype));
  const Genotype& partner = neighbors[select_inverse_proportionate<Rng>(partner_fitness, rng)].genotype;

  auto [o1, o2] = crossover(own, partner, rng);
  const double p_mut = std::clamp(1.0 - shared, 0.0, 1.0);
  out.mutations += mutate_in_place(o1, p_mut, fp.n, rng) ? 1 : 0;
  out.mutations += mutate_in_place(o2, p_mut, fp.n, rng) ? 1 : 0;

  const Genotype pool[3] = {own, o1, o2};
  const double pool_fitness[3] = {score(own), score(o1), score(o2)};
  out.survivor = pool[select_inverse_proportionate<Rng>(pool_fitness, rng)];
  return out;
}

/// Runs one adaptation step for an alive peer against the current state of
/// its alive neighbors and installs the survivor. Isolated peers keep their
/// model; either way the model is appended to the genotype window.
template <class Rng>
TickOutcome adaptation_tick(LookupProtocol& proto, const OverlayGraph& graph, NodeId id,
                            const AdaptationParams& params, Rng& rng) {
  Peer& p = proto.peer(id);
  std::vector<NeighborSnapshot> snaps;
  snaps.reserve(graph.degree(id));
  for (NodeId nb : graph.neighbors(id)) {
    if (!proto.has_peer(nb)) continue;
    const Peer& q = proto.peer(nb);
    snaps.push_back({q.genotype, q.qhr.value()});
  }
  TickOutcome out = adaptation_step(p.genotype, p.qhr.value(), snaps, params, rng);
  if (!(out.survivor == p.genotype)) proto.install_genotype(p, out.survivor);
  p.window.push(p.genotype);
  ++p.generation;
  return out;
}

}  // namespace ulsim
