#pragma once

#include <array>
#include <vector>

namespace bethe {

/// tau = {tau_i, tau_alpha}; factor vectors use the little-endian table
/// layout of the owning graph.
struct PseudoMarginals {
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::vector<double>> factors;

  friend bool operator==(const PseudoMarginals&,
                         const PseudoMarginals&) = default;
};

}  // namespace bethe
