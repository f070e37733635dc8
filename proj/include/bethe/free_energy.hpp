#pragma once

// log Z_B(G, tau): average energy plus Bethe entropy, with 0 log 0 = 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/covers.hpp"
#include "bethe/errors.hpp"
#include "bethe/log_sum_exp.hpp"
#include "bethe/polytope.hpp"
#include "bethe/pseudomarginals.hpp"

namespace bethe {

namespace detail {

// t log(t / q) with the conventions 0 log(0/q) = 0.
inline double xlogy_ratio(double t, double q) {
  if (t <= 0.0) return 0.0;
  if (q <= 0.0) return 0.0;  // only reachable within the consistency tolerance
  return t * std::log(t / q);
}

// Energy term t log(psi); -inf when mass sits on a zero potential.
inline double energy_term(double t, double psi) {
  if (t <= 0.0) return 0.0;
  if (psi <= 0.0) return kNegInf;
  return t * std::log(psi);
}

}  // namespace detail

/// Evaluates the Bethe objective without checking feasibility. Shapes must
/// match g.
inline double bethe_value_unchecked(const FactorGraph& g,
                                    const PseudoMarginals& tau) {
  double energy = 0.0;
  double entropy = 0.0;
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    for (int x = 0; x < 2; ++x) {
      const double t = tau.nodes[i][x];
      energy += detail::energy_term(t, g.unary(i)[static_cast<std::size_t>(x)]);
      entropy -= detail::xlogy_ratio(t, 1.0);
    }
  }
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    const auto& f = g.factor(a);
    const auto& ta = tau.factors[a];
    for (std::size_t idx = 0; idx < ta.size(); ++idx) {
      energy += detail::energy_term(ta[idx], f.table[idx]);
      double prod = 1.0;
      for (std::size_t j = 0; j < f.scope.size(); ++j) {
        prod *= tau.nodes[f.scope[j]][(idx >> j) & 1u];
      }
      entropy -= detail::xlogy_ratio(ta[idx], prod);
    }
  }
  if (energy == kNegInf) return kNegInf;
  return energy + entropy;
}

/// log Z_B(G, tau) for tau in the local marginal polytope. Throws
/// ConstraintError naming the first violated constraint otherwise.
inline double bethe_free_energy(const FactorGraph& g, const PseudoMarginals& tau,
                                double tol = kPolytopeTol) {
  if (auto report = validate_polytope(tau, g, tol); !report.valid) {
    throw ConstraintError("pseudomarginals outside the local polytope: " +
                          report.violation);
  }
  return bethe_value_unchecked(g, tau);
}

/// Partial derivatives of the Bethe objective treating every tau coordinate
/// as free. Coordinates at zero are floored at 1e-300 inside the logs; the
/// gradient is 0 on pinned coordinates of `polytope`.
inline Eigen::VectorXd bethe_gradient(const FactorGraph& g,
                                      const LocalPolytope& polytope,
                                      const PseudoMarginals& tau) {
  static constexpr double kFloor = 1e-300;
  auto safe_log = [](double v) { return std::log(std::max(v, kFloor)); };
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(polytope.dim()));
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    for (int x = 0; x < 2; ++x) {
      const auto c = static_cast<Eigen::Index>(polytope.node_coord(i, x));
      const double phi = g.unary(i)[static_cast<std::size_t>(x)];
      grad(c) = (phi > 0 ? std::log(phi) : 0.0) - safe_log(tau.nodes[i][x]) - 1.0;
    }
  }
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    const auto& f = g.factor(a);
    const auto& ta = tau.factors[a];
    for (std::size_t idx = 0; idx < ta.size(); ++idx) {
      const auto c = static_cast<Eigen::Index>(polytope.factor_coord(a, idx));
      double sum_log_nodes = 0.0;
      for (std::size_t j = 0; j < f.scope.size(); ++j) {
        const std::size_t i = f.scope[j];
        const int x = static_cast<int>((idx >> j) & 1u);
        sum_log_nodes += safe_log(tau.nodes[i][x]);
        // d/d tau_i of  sum tau_alpha log prod tau_i
        grad(static_cast<Eigen::Index>(polytope.node_coord(i, x))) +=
            ta[idx] / std::max(tau.nodes[i][x], kFloor);
      }
      const double psi = f.table[idx];
      grad(c) = (psi > 0 ? std::log(psi) : 0.0) - safe_log(ta[idx]) - 1.0 +
                sum_log_nodes;
    }
  }
  for (std::size_t c = 0; c < polytope.dim(); ++c) {
    if (polytope.pinned(c)) grad(static_cast<Eigen::Index>(c)) = 0.0;
  }
  return grad;
}

inline constexpr double kInteriorMargin = 1e-6;

/// Max-norm of the finite-difference gradient of the Bethe objective
/// projected onto the polytope's tangent space. Central differences are
/// taken along an orthonormal tangent basis, so every probe stays feasible.
inline double stationarity_check(const FactorGraph& g, const PseudoMarginals& tau,
                                 double h = 1e-6) {
  if (auto report = validate_polytope(tau, g); !report.valid) {
    throw ConstraintError("pseudomarginals outside the local polytope: " +
                          report.violation);
  }
  const LocalPolytope polytope(g);
  const Eigen::VectorXd v = polytope.flatten(tau);
  if (v.size() && v.minCoeff() < kInteriorMargin) {
    throw PreconditionError(
        "stationarity check needs every entry >= 1e-6 (interior point)");
  }
  const Eigen::MatrixXd& basis = polytope.tangent_basis();
  Eigen::VectorXd directional(basis.cols());
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const Eigen::VectorXd step = h * basis.col(j);
    const double up = bethe_value_unchecked(g, polytope.unflatten(v + step));
    const double down = bethe_value_unchecked(g, polytope.unflatten(v - step));
    directional(j) = (up - down) / (2.0 * h);
  }
  const Eigen::VectorXd projected = basis * directional;
  return projected.size() ? projected.cwiseAbs().maxCoeff() : 0.0;
}

/// Replicates tau onto every copy in the cover: tau_i to each copy of i and
/// tau_alpha (with axes matched to the cover scope) to each copy of alpha.
inline PseudoMarginals lift_pseudomarginals(const PseudoMarginals& tau,
                                            const CoverGraph& h) {
  const auto& g = h.base;
  require_shape(g, tau);
  if (auto report = validate_polytope(tau, g); !report.valid) {
    throw ConstraintError("cannot lift infeasible pseudomarginals: " +
                          report.violation);
  }
  PseudoMarginals lifted;
  lifted.nodes.reserve(h.graph.num_variables());
  for (std::size_t w = 0; w < h.graph.num_variables(); ++w) {
    lifted.nodes.push_back(tau.nodes[h.variable_map[w]]);
  }
  lifted.factors.reserve(h.graph.num_factors());
  for (std::size_t b = 0; b < h.graph.num_factors(); ++b) {
    const auto& base = tau.factors[h.factor_map[b]];
    const auto& order = h.base_positions[b];
    std::vector<double> out(base.size());
    for (std::size_t idx = 0; idx < base.size(); ++idx) {
      std::size_t src = 0;
      for (std::size_t j = 0; j < order.size(); ++j) {
        if ((idx >> j) & 1u) src |= std::size_t{1} << order[j];
      }
      out[idx] = base[src];
    }
    lifted.factors.push_back(std::move(out));
  }
  return lifted;
}

}  // namespace bethe
