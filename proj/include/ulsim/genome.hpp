#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ulsim {

inline constexpr int kGenes = 3;

/// Per-peer model: (M0, M1, M2), each gene in [1..n].
struct Genotype {
  std::array<int, kGenes> genes{1, 1, 1};

  int& operator[](std::size_t i) { return genes[i]; }
  int operator[](std::size_t i) const { return genes[i]; }
  auto begin() const { return genes.begin(); }
  auto end() const { return genes.end(); }
  static constexpr std::size_t size() { return kGenes; }

  bool valid(int n) const {
    for (int g : genes)
      if (g < 1 || g > n) return false;
    return true;
  }

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

struct Phenotype {
  double fanout_fraction = 1.0;  // f_k
  int max_hops = 1;              // T_max
  int cache_capacity = 2;        // D_max
  double phi = 0.0;
};

enum class FitnessKind { F1, F2, F3, F4 };

inline std::string_view to_string(FitnessKind k) {
  switch (k) {
    case FitnessKind::F1: return "F1";
    case FitnessKind::F2: return "F2";
    case FitnessKind::F3: return "F3";
    case FitnessKind::F4: return "F4";
  }
  return "?";
}

inline FitnessKind parse_fitness_kind(std::string_view s) {
  if (s == "F1") return FitnessKind::F1;
  if (s == "F2") return FitnessKind::F2;
  if (s == "F3") return FitnessKind::F3;
  if (s == "F4") return FitnessKind::F4;
  throw std::invalid_argument("unknown fitness function '" + std::string(s) + "'");
}

/// Weights of the phenotype scalar plus the thresholds used by F1/F3/F4.
/// beta and delta default to 0.8 and 0.01.
struct FitnessParams {
  double phi0 = 100.0;
  double phi1 = 10.0;
  double phi2 = 5.0;
  double beta = 0.8;
  double delta = 0.01;
  int n = 6;

  double phi_of(double fanout, double hops, double cache) const {
    return phi0 * fanout + phi1 * hops + phi2 * cache;
  }

  /// Largest attainable phenotype, from the all-n genotype.
  double phi_max() const { return phi_of(1.0, n, 2.0 * n); }

  void validate() const {
    if (n < 2) throw std::invalid_argument("fitness: n must be >= 2");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("fitness: beta must be in (0,1)");
    if (!(delta > 0.0)) throw std::invalid_argument("fitness: delta must be > 0");
  }
};

/// f_k = M0/n, T_max = M1, D_max = 2*M2.
inline Phenotype phenotype_of(const Genotype& g, const FitnessParams& p) {
  if (!g.valid(p.n)) throw std::domain_error("genotype gene outside [1..n]");
  Phenotype ph;
  ph.fanout_fraction = static_cast<double>(g[0]) / p.n;
  ph.max_hops = g[1];
  ph.cache_capacity = 2 * g[2];
  ph.phi = p.phi_of(ph.fanout_fraction, ph.max_hops, ph.cache_capacity);
  return ph;
}

/// Mean of the peer's own QHR and its neighbors' (k+1 terms).
inline double avg_qhr(double own, std::span<const double> neighbors) {
  double sum = own;
  for (double v : neighbors) sum += v;
  return sum / static_cast<double>(neighbors.size() + 1);
}

/// Fitness to be minimized. F1 takes its low-QHR branch when qhr == beta.
inline double fitness(FitnessKind kind, double phi, double qhr, const FitnessParams& p) {
  if (!(phi > 0.0)) throw std::domain_error("fitness: phi must be > 0");
  switch (kind) {
    case FitnessKind::F1:
      return qhr <= p.beta ? 1.0 / phi : phi;
    case FitnessKind::F2:
      return (1.0 - qhr) / phi + qhr * phi;
    case FitnessKind::F3:
      return (1.0 / (qhr + p.delta) - 1.0) / phi + qhr * phi;
    case FitnessKind::F4:
      return (qhr / p.beta - 1.0) * (phi / p.phi_max()) + (1.0 - qhr);
  }
  throw std::logic_error("fitness: bad kind");
}

}  // namespace ulsim
