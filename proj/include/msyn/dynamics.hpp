#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace msyn {

using Vector = std::vector<double>;
/// Dense row-major square matrix, rows of equal length.
using Matrix = std::vector<Vector>;

/*
 * A perturbed control system
 *
 *   xdot in f(x, u) + W,   W = [-w, w] (component-wise),
 *
 * restricted to a finite list of input values. The growth matrix L(u) bounds
 * the sensitivity of the nominal flow: |d/dt (x - y)| <= L(u) |x - y|
 * component-wise on the region of interest. It has to be Metzler (non-negative
 * off-diagonal entries).
 */
struct ControlSystem {
  using Field = std::function<void(std::span<const double> x, std::span<const double> u,
                                   std::span<double> dxdt)>;
  using GrowthFn = std::function<Matrix(std::span<const double> u)>;

  std::size_t dim = 0;
  Field vector_field;
  Vector disturbance;
  std::vector<Vector> inputs;
  GrowthFn growth_matrix;

  /// Throws ContractViolation if an invariant does not hold.
  void validate() const;
};

/// Closed axis-aligned box [lower, upper].
struct ReachBox {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  /// Box inclusion (closed).
  bool contains(const ReachBox& other) const;
  Vector center() const;

  friend bool operator==(const ReachBox&, const ReachBox&) = default;
};

/// Classical RK4 with `substeps` equal steps over [0, tau] for xdot = f(x, u).
Vector integrate_nominal(const ControlSystem& sys, std::span<const double> x0,
                         std::span<const double> u, double tau, int substeps);

/// Growth-bound over-approximation of the states reachable at time tau from
/// any point of `cell` under any disturbance signal with values in W.
ReachBox over_approx_reach(const ControlSystem& sys, const ReachBox& cell,
                           std::span<const double> u, double tau, int substeps);

/// Pre-evaluated growth matrix variant, used by the abstraction to avoid
/// rebuilding L(u) per cell.
ReachBox over_approx_reach(const ControlSystem& sys, const ReachBox& cell,
                           std::span<const double> u, const Matrix& growth, double tau,
                           int substeps);

/// Number of piecewise-constant disturbance pieces per sampling period.
inline constexpr int kDisturbanceSegments = 10;

/// One sampled solution of the differential inclusion: xdot = f(x, u) + w(t)
/// with w piecewise constant over kDisturbanceSegments equal pieces, each drawn
/// uniformly from W. Each piece is integrated with `substeps` RK4 steps.
Vector sample_disturbed_step(const ControlSystem& sys, std::span<const double> x0,
                             std::span<const double> u, double tau, std::mt19937_64& rng,
                             int substeps = 5);

Vector sample_disturbed_step(const ControlSystem& sys, std::span<const double> x0,
                             std::span<const double> u, double tau, std::uint64_t seed,
                             int substeps = 5);

}  // namespace msyn
