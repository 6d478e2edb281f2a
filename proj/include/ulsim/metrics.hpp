#pragma once

// Information-theoretic measures over a sliding window of integer genotypes:
// normalized information I, emergence E, self-organization S, complexity C
// and homeostasis H.

#include <cmath>
#include <cstddef>
#include <deque>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace ulsim {

struct MetricsConfig {
  int n = 6;  // gene alphabet is [1..n]
  int q = 3;  // genes per genotype
  int W = 1;  // window length, in configurations

  void validate() const {
    if (n < 2) throw std::invalid_argument("metrics: n must be >= 2");
    if (q < 1) throw std::invalid_argument("metrics: q must be >= 1");
    if (W < 1) throw std::invalid_argument("metrics: W must be >= 1");
  }
};

struct MeasureSet {
  double I = 0.0;
  double E = 0.0;
  double S = 1.0;
  double C = 0.0;
  double H = 1.0;
};

// The latest W configurations, oldest first. Pushing beyond capacity drops
// the oldest entry.
template <class G>
class GenotypeWindow {
 public:
  explicit GenotypeWindow(std::size_t capacity = 1) : capacity_(capacity ? capacity : 1) {}

  void push(const G& g) {
    entries_.push_back(g);
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  // Shrinking the capacity evicts the oldest entries immediately.
  void set_capacity(std::size_t capacity) {
    capacity_ = capacity ? capacity : 1;
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const G& back() const { return entries_.back(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::size_t capacity_;
  std::deque<G> entries_;
};

// Shannon entropy of the gene-value histogram over every slot of every
// configuration in the window, normalized by log2(n). 0*log(0) counts as 0.
template <class Window>
double normalized_information(const Window& window, const MetricsConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> counts(static_cast<std::size_t>(cfg.n) + 1, 0);
  std::size_t slots = 0;
  for (const auto& genotype : window) {
    for (const auto gene : genotype) {
      const auto x = static_cast<long long>(gene);
      if (x < 1 || x > cfg.n) throw std::domain_error("alphabet violation");
      ++counts[static_cast<std::size_t>(x)];
      ++slots;
    }
  }
  if (slots == 0) throw std::invalid_argument("no data");

  double h = 0.0;
  const double total = static_cast<double>(slots);
  for (std::size_t x = 1; x < counts.size(); ++x) {
    if (counts[x] == 0) continue;
    const double p = static_cast<double>(counts[x]) / total;
    h -= p * std::log2(p);
  }
  const double I = h / std::log2(static_cast<double>(cfg.n));
  // clamp rounding noise at the uniform extreme
  return I > 1.0 ? 1.0 : (I < 0.0 ? 0.0 : I);
}

inline MeasureSet measures_from_information(double I) {
  if (!(I >= 0.0 && I <= 1.0)) throw std::domain_error("information outside [0,1]");
  MeasureSet m;
  m.I = I;
  m.E = I;
  m.S = 1.0 - I;
  m.C = 4.0 * m.E * m.S;
  return m;
}

// 1 - normalized Hamming distance between two genotypes.
template <class A, class B>
double homeostasis(const A& current, const B& initial) {
  const auto len = std::distance(std::begin(current), std::end(current));
  if (len != std::distance(std::begin(initial), std::end(initial)))
    throw std::invalid_argument("homeostasis: genotype length mismatch");
  if (len == 0) throw std::invalid_argument("homeostasis: empty genotype");
  std::ptrdiff_t differ = 0;
  auto it = std::begin(initial);
  for (const auto gene : current) {
    if (gene != *it) ++differ;
    ++it;
  }
  return 1.0 - static_cast<double>(differ) / static_cast<double>(len);
}

}  // namespace ulsim
