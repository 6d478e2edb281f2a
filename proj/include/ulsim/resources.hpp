#pragma once

#include <algorithm>
#include <ostream>

namespace ulsim {

/// Consumable resources of a peer: CPU (MHz), RAM (MB), disk (GB).
struct Resources {
  int cpu = 0;
  int ram = 0;
  int disk = 0;

  friend bool operator==(const Resources&, const Resources&) = default;

  Resources& operator+=(const Resources& o) {
    cpu += o.cpu;
    ram += o.ram;
    disk += o.disk;
    return *this;
  }
  Resources& operator-=(const Resources& o) {
    cpu -= o.cpu;
    ram -= o.ram;
    disk -= o.disk;
    return *this;
  }
  friend Resources operator+(Resources a, const Resources& b) { return a += b; }
  friend Resources operator-(Resources a, const Resources& b) { return a -= b; }

  /// Componentwise a <= b.
  bool fits_in(const Resources& b) const { return cpu <= b.cpu && ram <= b.ram && disk <= b.disk; }
  bool non_negative() const { return cpu >= 0 && ram >= 0 && disk >= 0; }

  Resources clamped() const { return {std::max(cpu, 0), std::max(ram, 0), std::max(disk, 0)}; }

  friend std::ostream& operator<<(std::ostream& os, const Resources& r) {
    return os << '(' << r.cpu << " MHz, " << r.ram << " MB, " << r.disk << " GB)";
  }
};

}  // namespace ulsim
