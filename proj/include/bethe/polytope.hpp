#pragma once

// Coordinates and affine structure of the local marginal polytope.
//
// tau is flattened as [tau_0(0), tau_0(1), ..., tau_{n-1}(1), tau_alpha_0...,]
// and the equality constraints are node normalization plus one consistency
// row per (incidence, x_i).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"
#include "bethe/pseudomarginals.hpp"

namespace bethe {

inline constexpr double kPolytopeTol = 1e-9;

struct PolytopeReport {
  bool valid = true;
  std::string violation;  // first violated constraint, empty when valid

  explicit operator bool() const { return valid; }
};

inline void require_shape(const FactorGraph& g, const PseudoMarginals& tau) {
  bool ok = tau.nodes.size() == g.num_variables() &&
            tau.factors.size() == g.num_factors();
  for (std::size_t a = 0; ok && a < g.num_factors(); ++a) {
    ok = tau.factors[a].size() == g.factor(a).table.size();
  }
  if (!ok) throw DimensionError("pseudomarginals do not match the model's shape");
}

/// Nonnegativity, normalization and local consistency, each to `tol`.
inline PolytopeReport validate_polytope(const PseudoMarginals& tau,
                                        const FactorGraph& g,
                                        double tol = kPolytopeTol) {
  require_shape(g, tau);
  auto fail = [](const std::string& what) { return PolytopeReport{false, what}; };
  for (std::size_t i = 0; i < tau.nodes.size(); ++i) {
    const auto& t = tau.nodes[i];
    if (!(t[0] >= 0.0) || !(t[1] >= 0.0)) {
      return fail("negative entry in tau_" + std::to_string(i));
    }
    if (std::abs(t[0] + t[1] - 1.0) > tol) {
      return fail("tau_" + std::to_string(i) + " does not sum to 1");
    }
  }
  for (std::size_t a = 0; a < tau.factors.size(); ++a) {
    for (double v : tau.factors[a]) {
      if (!(v >= 0.0)) {
        return fail("negative entry in factor " + std::to_string(a));
      }
    }
  }
  for (const auto& inc : g.incidences()) {
    double sums[2] = {0.0, 0.0};
    const auto& ta = tau.factors[inc.factor];
    for (std::size_t idx = 0; idx < ta.size(); ++idx) {
      sums[(idx >> inc.position) & 1u] += ta[idx];
    }
    for (int x = 0; x < 2; ++x) {
      if (std::abs(sums[x] - tau.nodes[inc.variable][x]) > tol) {
        std::ostringstream os;
        os << "factor " << inc.factor << " marginal on variable "
           << inc.variable << " disagrees with tau_" << inc.variable
           << " at x=" << x << " (" << sums[x] << " vs "
           << tau.nodes[inc.variable][x] << ")";
        return fail(os.str());
      }
    }
  }
  return {};
}

/// Flattened view of the polytope for one model.
class LocalPolytope {
 public:
  /// With `pin_zeros`, coordinates whose potential entry is zero (directly or
  /// through a zero unary entry) are constrained to 0 as well.
  explicit LocalPolytope(const FactorGraph& g, bool pin_zeros = false) : g_(g) {
    const std::size_t n = g.num_variables();
    factor_offset_.resize(g.num_factors());
    std::size_t d = 2 * n;
    for (std::size_t a = 0; a < g.num_factors(); ++a) {
      factor_offset_[a] = d;
      d += g.factor(a).table.size();
    }
    dim_ = d;
    pinned_.assign(d, false);
    if (pin_zeros) {
      for (std::size_t i = 0; i < n; ++i) {
        for (int x = 0; x < 2; ++x) pinned_[2 * i + x] = g.unary(i)[x] == 0.0;
      }
      for (std::size_t a = 0; a < g.num_factors(); ++a) {
        const auto& f = g.factor(a);
        for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
          bool zero = f.table[idx] == 0.0;
          for (std::size_t j = 0; j < f.scope.size() && !zero; ++j) {
            zero = pinned_[2 * f.scope[j] + ((idx >> j) & 1u)];
          }
          pinned_[factor_offset_[a] + idx] = zero;
        }
      }
    }

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      r(static_cast<Eigen::Index>(2 * i)) = 1.0;
      r(static_cast<Eigen::Index>(2 * i + 1)) = 1.0;
      rows.push_back(std::move(r));
      rhs.push_back(1.0);
    }
    for (const auto& inc : g.incidences()) {
      for (std::size_t x = 0; x < 2; ++x) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
        const std::size_t size = g.factor(inc.factor).table.size();
        for (std::size_t idx = 0; idx < size; ++idx) {
          if (((idx >> inc.position) & 1u) == x) {
            r(static_cast<Eigen::Index>(factor_offset_[inc.factor] + idx)) = 1.0;
          }
        }
        r(static_cast<Eigen::Index>(2 * inc.variable + x)) = -1.0;
        rows.push_back(std::move(r));
        rhs.push_back(0.0);
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!pinned_[c]) continue;
      Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      r(static_cast<Eigen::Index>(c)) = 1.0;
      rows.push_back(std::move(r));
      rhs.push_back(0.0);
    }

    constraints_.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(d));
    rhs_.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      constraints_.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
      rhs_(static_cast<Eigen::Index>(r)) = rhs[r];
    }

    // Orthonormal basis of the tangent space from the SVD of the constraints.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(constraints_,
                                          Eigen::ComputeFullV | Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-10 * (sv.size() ? std::max(1.0, sv(0)) : 1.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff) ++rank;
    tangent_ = svd.matrixV().rightCols(static_cast<Eigen::Index>(d) - rank);
    svd.setThreshold(1e-10);
    svd_ = std::move(svd);
  }

  std::size_t dim() const { return dim_; }
  const Eigen::MatrixXd& tangent_basis() const { return tangent_; }
  bool pinned(std::size_t c) const { return pinned_[c]; }
  std::size_t node_coord(std::size_t i, int x) const { return 2 * i + static_cast<std::size_t>(x); }
  std::size_t factor_coord(std::size_t a, std::size_t idx) const {
    return factor_offset_[a] + idx;
  }

  Eigen::VectorXd flatten(const PseudoMarginals& tau) const {
    require_shape(g_, tau);
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < tau.nodes.size(); ++i) {
      v(static_cast<Eigen::Index>(2 * i)) = tau.nodes[i][0];
      v(static_cast<Eigen::Index>(2 * i + 1)) = tau.nodes[i][1];
    }
    for (std::size_t a = 0; a < tau.factors.size(); ++a) {
      for (std::size_t idx = 0; idx < tau.factors[a].size(); ++idx) {
        v(static_cast<Eigen::Index>(factor_offset_[a] + idx)) = tau.factors[a][idx];
      }
    }
    return v;
  }

  PseudoMarginals unflatten(const Eigen::VectorXd& v) const {
    PseudoMarginals tau;
    tau.nodes.resize(g_.num_variables());
    for (std::size_t i = 0; i < tau.nodes.size(); ++i) {
      tau.nodes[i] = {v(static_cast<Eigen::Index>(2 * i)),
                      v(static_cast<Eigen::Index>(2 * i + 1))};
    }
    tau.factors.resize(g_.num_factors());
    for (std::size_t a = 0; a < tau.factors.size(); ++a) {
      const std::size_t size = g_.factor(a).table.size();
      tau.factors[a].resize(size);
      for (std::size_t idx = 0; idx < size; ++idx) {
        tau.factors[a][idx] = v(static_cast<Eigen::Index>(factor_offset_[a] + idx));
      }
    }
    return tau;
  }

  /// Orthogonal projection of a direction onto the tangent space.
  Eigen::VectorXd project_direction(const Eigen::VectorXd& d) const {
    return tangent_ * (tangent_.transpose() * d);
  }

  /// Closest point of the affine hull (least-squares correction of drift).
  Eigen::VectorXd project_affine(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd residual = constraints_ * v - rhs_;
    return v - svd_.solve(residual);
  }

 private:
  const FactorGraph& g_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> factor_offset_;
  std::vector<bool> pinned_;
  Eigen::MatrixXd constraints_;
  Eigen::VectorXd rhs_;
  Eigen::MatrixXd tangent_;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_;
};

}  // namespace bethe
