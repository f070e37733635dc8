#pragma once

// Lower estimate of log Z_B(G) = max over the local polytope of the Bethe
// objective: multi-start BP followed by projected ascent from every distinct
// feasible candidate. The reported value is always attained by the returned
// feasible tau.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "bethe/belief_propagation.hpp"
#include "bethe/core.hpp"
#include "bethe/free_energy.hpp"
#include "bethe/log_sum_exp.hpp"
#include "bethe/parallel.hpp"
#include "bethe/polytope.hpp"
#include "bethe/random.hpp"

namespace bethe {

struct OptimizeOptions {
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  BpOptions bp;
  std::size_t ascent_iterations = 500;
};

struct BetheOptimum {
  PseudoMarginals tau;
  double log_z_bethe_lower = kNegInf;
  std::size_t bp_runs = 0;
  std::size_t bp_converged = 0;
  bool best_effort = false;  // no BP run converged; value from fallback starts
};

/// Projected gradient ascent inside the polytope. Steps follow the tangent
/// projection of the gradient, are truncated to stay nonnegative, and halve
/// on failure / double on success. Never returns a worse point than `start`.
inline PseudoMarginals projected_ascent(const FactorGraph& g,
                                        const LocalPolytope& polytope,
                                        const PseudoMarginals& start,
                                        std::size_t iterations,
                                        double* value_out = nullptr) {
  Eigen::VectorXd v = polytope.flatten(start);
  PseudoMarginals tau = start;
  double value = bethe_value_unchecked(g, tau);
  if (value == kNegInf) {
    if (value_out) *value_out = value;
    return tau;
  }
  double step = 0.1;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::VectorXd d =
        polytope.project_direction(bethe_gradient(g, polytope, tau));
    const double scale = d.cwiseAbs().maxCoeff();
    if (!(scale > 1e-12)) break;

    double limit = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < d.size(); ++c) {
      if (polytope.pinned(static_cast<std::size_t>(c))) continue;
      if (d(c) < -1e-15) limit = std::min(limit, v(c) / -d(c));
    }
    bool improved = false;
    while (!improved && step * scale > 1e-16) {
      const double t = std::min(step / scale, 0.95 * limit);
      if (!(t > 0.0)) break;
      Eigen::VectorXd trial = polytope.project_affine(v + t * d);
      for (Eigen::Index c = 0; c < trial.size(); ++c) {
        if (polytope.pinned(static_cast<std::size_t>(c)) || trial(c) < 0.0) {
          trial(c) = 0.0;
        }
      }
      PseudoMarginals candidate = polytope.unflatten(trial);
      const double cv = bethe_value_unchecked(g, candidate);
      if (cv > value && validate_polytope(candidate, g).valid) {
        v = std::move(trial);
        tau = std::move(candidate);
        value = cv;
        improved = true;
        step = 2.0 * t * scale;
      } else {
        step *= 0.5;
      }
    }
    if (!improved) break;
  }
  if (value_out) *value_out = value;
  return tau;
}

/// Removes residual constraint error (e.g. from BP's finite tolerance) by
/// alternating the affine projection with clipping at zero.
inline PseudoMarginals snap_to_polytope(const LocalPolytope& polytope,
                                        const PseudoMarginals& tau) {
  Eigen::VectorXd v = polytope.flatten(tau);
  for (int pass = 0; pass < 3; ++pass) {
    v = polytope.project_affine(v);
    for (Eigen::Index c = 0; c < v.size(); ++c) {
      if (polytope.pinned(static_cast<std::size_t>(c)) || v(c) < 0.0) v(c) = 0.0;
    }
  }
  return polytope.unflatten(v);
}

/// tau_i = (1/2, 1/2) and tau_alpha uniform; always feasible.
inline PseudoMarginals uniform_pseudomarginals(const FactorGraph& g) {
  PseudoMarginals tau;
  tau.nodes.assign(g.num_variables(), {0.5, 0.5});
  for (const auto& f : g.factors()) {
    tau.factors.emplace_back(f.table.size(), 1.0 / static_cast<double>(f.table.size()));
  }
  return tau;
}

inline BetheOptimum optimize_bethe(const FactorGraph& g,
                                   const OptimizeOptions& opts = {}) {
  if (opts.restarts < 1) throw DomainError("need at least one restart");

  // run 0 starts from uniform messages; run r uses derive_seed(seed, r)
  const std::size_t runs = opts.restarts + 1;
  std::vector<std::optional<PseudoMarginals>> found(runs);
  std::vector<char> converged(runs, 0);
  parallel_for(runs, [&](std::size_t r) {
    try {
      const MessageSet init = r == 0 ? MessageSet::uniform(g)
                                     : MessageSet::random(g, derive_seed(opts.seed, r));
      BpResult res = run_bp(g, init, opts.bp);
      converged[r] = res.converged;
      if (res.converged && validate_polytope(res.beliefs, g).valid) {
        found[r] = std::move(res.beliefs);
      }
    } catch (const DegenerateError&) {
      // contributes no candidate
    }
  });

  const LocalPolytope polytope(g, /*pin_zeros=*/true);
  std::vector<PseudoMarginals> candidates;
  auto distinct = [&candidates](const PseudoMarginals& t) {
    for (const auto& c : candidates) {
      double diff = 0.0;
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        diff = std::max({diff, std::abs(t.nodes[i][0] - c.nodes[i][0]),
                         std::abs(t.nodes[i][1] - c.nodes[i][1])});
      }
      for (std::size_t a = 0; a < t.factors.size(); ++a) {
        for (std::size_t idx = 0; idx < t.factors[a].size(); ++idx) {
          diff = std::max(diff, std::abs(t.factors[a][idx] - c.factors[a][idx]));
        }
      }
      if (diff < 1e-8) return false;
    }
    return true;
  };
  BetheOptimum best;
  best.bp_runs = runs;
  for (std::size_t r = 0; r < runs; ++r) {
    best.bp_converged += converged[r] ? 1 : 0;
    if (!found[r]) continue;
    auto snapped = snap_to_polytope(polytope, *found[r]);
    if (validate_polytope(snapped, g).valid && distinct(snapped)) {
      candidates.push_back(std::move(snapped));
    }
  }
  best.best_effort = best.bp_converged == 0;
  if (auto u = uniform_pseudomarginals(g); distinct(u)) candidates.push_back(std::move(u));

  std::vector<double> values(candidates.size(), kNegInf);
  std::vector<PseudoMarginals> refined(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t c) {
    refined[c] = projected_ascent(g, polytope, candidates[c],
                                  opts.ascent_iterations, &values[c]);
  });

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (values[c] > best.log_z_bethe_lower) {
      best.log_z_bethe_lower = values[c];
      best.tau = refined[c];
    }
  }
  if (best.log_z_bethe_lower == kNegInf && !candidates.empty()) {
    best.tau = candidates.front();
  }
  return best;
}

}  // namespace bethe
