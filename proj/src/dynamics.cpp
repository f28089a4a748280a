#include "msyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "msyn/error.hpp"

namespace msyn {

void ControlSystem::validate() const {
  if (dim == 0) throw ContractViolation("control system: dimension must be positive");
  if (!vector_field) throw ContractViolation("control system: missing vector field");
  if (!growth_matrix) throw ContractViolation("control system: missing growth matrix");
  if (disturbance.size() != dim)
    throw ContractViolation("control system: disturbance bound has wrong dimension");
  for (double w : disturbance)
    if (!(w >= 0.0)) throw ContractViolation("control system: disturbance bound must be >= 0");
  if (inputs.empty()) throw ContractViolation("control system: input list is empty");
  std::set<Vector> seen;
  for (const auto& u : inputs) {
    if (u.size() != inputs.front().size())
      throw ContractViolation("control system: inputs have different dimensions");
    if (!seen.insert(u).second) throw ContractViolation("control system: duplicate input");
    const Matrix L = growth_matrix(u);
    if (L.size() != dim) throw ContractViolation("control system: growth matrix has wrong size");
    for (std::size_t i = 0; i < dim; ++i) {
      if (L[i].size() != dim)
        throw ContractViolation("control system: growth matrix has wrong size");
      for (std::size_t j = 0; j < dim; ++j)
        if (i != j && L[i][j] < 0.0)
          throw ContractViolation("control system: growth matrix off-diagonal entry < 0");
    }
  }
}

bool ReachBox::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  return true;
}

bool ReachBox::contains(const ReachBox& other) const {
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (other.lower[i] < lower[i] || other.upper[i] > upper[i]) return false;
  return true;
}

Vector ReachBox::center() const {
  Vector c(lower.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

namespace {

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v))
      throw IntegrationDivergence(std::string("non-finite state while integrating ") + what);
}

// In-place RK4 over `steps` steps of size h for y' = rhs(y).
template <class Rhs>
void rk4(Vector& y, double h, int steps, Rhs&& rhs, const char* what) {
  const std::size_t n = y.size();
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < steps; ++s) {
    rhs(y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    check_finite(y, what);
  }
}

void check_step(double tau, int substeps) {
  if (!(tau > 0.0)) throw ContractViolation("integration: tau must be positive");
  if (substeps < 1) throw ContractViolation("integration: substeps must be >= 1");
}

}  // namespace

Vector integrate_nominal(const ControlSystem& sys, std::span<const double> x0,
                         std::span<const double> u, double tau, int substeps) {
  check_step(tau, substeps);
  Vector x(x0.begin(), x0.end());
  check_finite(x, "nominal trajectory");
  rk4(
      x, tau / substeps, substeps,
      [&](const Vector& y, Vector& dy) { sys.vector_field(y, u, dy); }, "nominal trajectory");
  return x;
}

ReachBox over_approx_reach(const ControlSystem& sys, const ReachBox& cell,
                           std::span<const double> u, double tau, int substeps) {
  return over_approx_reach(sys, cell, u, sys.growth_matrix(u), tau, substeps);
}

ReachBox over_approx_reach(const ControlSystem& sys, const ReachBox& cell,
                           std::span<const double> u, const Matrix& growth, double tau,
                           int substeps) {
  check_step(tau, substeps);
  const std::size_t n = sys.dim;
  if (cell.dim() != n) throw ContractViolation("over_approx_reach: cell has wrong dimension");
  // state = (center, radius); the radius obeys r' = L(u) r + w.
  Vector y(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cell.lower[i] > cell.upper[i])
      throw ContractViolation("over_approx_reach: malformed cell");
    y[i] = 0.5 * (cell.lower[i] + cell.upper[i]);
    y[n + i] = 0.5 * (cell.upper[i] - cell.lower[i]);
  }
  check_finite(y, "reach box");
  rk4(
      y, tau / substeps, substeps,
      [&](const Vector& s, Vector& ds) {
        sys.vector_field(std::span<const double>(s.data(), n), u, std::span<double>(ds.data(), n));
        for (std::size_t i = 0; i < n; ++i) {
          double acc = sys.disturbance[i];
          for (std::size_t j = 0; j < n; ++j) acc += growth[i][j] * s[n + j];
          ds[n + i] = acc;
        }
      },
      "reach box");
  ReachBox out{Vector(n), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::max(0.0, y[n + i]);
    out.lower[i] = y[i] - r;
    out.upper[i] = y[i] + r;
  }
  return out;
}

Vector sample_disturbed_step(const ControlSystem& sys, std::span<const double> x0,
                             std::span<const double> u, double tau, std::mt19937_64& rng,
                             int substeps) {
  check_step(tau, substeps);
  const std::size_t n = sys.dim;
  Vector x(x0.begin(), x0.end());
  check_finite(x, "disturbed trajectory");
  Vector w(n);
  const double h = tau / (kDisturbanceSegments * substeps);
  for (int seg = 0; seg < kDisturbanceSegments; ++seg) {
    for (std::size_t i = 0; i < n; ++i) {
      const double b = sys.disturbance[i];
      w[i] = b > 0.0 ? std::uniform_real_distribution<double>(-b, b)(rng) : 0.0;
    }
    rk4(
        x, h, substeps,
        [&](const Vector& y, Vector& dy) {
          sys.vector_field(y, u, dy);
          for (std::size_t i = 0; i < n; ++i) dy[i] += w[i];
        },
        "disturbed trajectory");
  }
  return x;
}

Vector sample_disturbed_step(const ControlSystem& sys, std::span<const double> x0,
                             std::span<const double> u, double tau, std::uint64_t seed,
                             int substeps) {
  std::mt19937_64 rng(seed);
  return sample_disturbed_step(sys, x0, u, tau, rng, substeps);
}

}  // namespace msyn
