#include "msyn/benchmarks.hpp"

#include <cmath>

namespace msyn {

DcdcMatrices dcdc_matrices(const DcdcParams& p) {
  const double g = p.r0 / (p.r0 + p.rc);
  DcdcMatrices m;
  m.a1 = {{-p.rl / p.xl, 0.0}, {0.0, -(1.0 / p.xc) * (1.0 / (p.r0 + p.rc))}};
  m.a2 = {{-(1.0 / p.xl) * (p.rl + p.r0 * p.rc / (p.r0 + p.rc)), (1.0 / 5.0) * (-(1.0 / p.xl) * g)},
          {5.0 * g * (1.0 / p.xc), -(1.0 / p.xc) * (1.0 / (p.r0 + p.rc))}};
  m.b = {p.vs / p.xl, 0.0};
  return m;
}

ControlSystem dcdc(const DcdcParams& p) {
  const DcdcMatrices m = dcdc_matrices(p);
  ControlSystem sys;
  sys.dim = 2;
  sys.disturbance = {p.w, p.w};
  sys.inputs = {{1.0}, {2.0}};
  sys.vector_field = [m](std::span<const double> x, std::span<const double> u,
                         std::span<double> dx) {
    const Matrix& a = u[0] < 1.5 ? m.a1 : m.a2;
    for (std::size_t i = 0; i < 2; ++i) dx[i] = a[i][0] * x[0] + a[i][1] * x[1] + m.b[i];
  };
  sys.growth_matrix = [m](std::span<const double> u) {
    Matrix a = u[0] < 1.5 ? m.a1 : m.a2;
    a[0][1] = std::abs(a[0][1]);
    a[1][0] = std::abs(a[1][0]);
    return a;
  };
  return sys;
}

ControlSystem unicycle(const UnicycleParams& p) {
  ControlSystem sys;
  sys.dim = 3;
  sys.disturbance = {p.w, p.w, 0.0};
  for (double v : p.speeds)
    for (double r : p.turn_rates) sys.inputs.push_back({v, r});
  sys.vector_field = [](std::span<const double> x, std::span<const double> u,
                        std::span<double> dx) {
    dx[0] = u[0] * std::cos(x[2]);
    dx[1] = u[0] * std::sin(x[2]);
    dx[2] = u[1];
  };
  sys.growth_matrix = [](std::span<const double> u) {
    const double s = std::abs(u[0]);
    return Matrix{{0.0, 0.0, s}, {0.0, 0.0, s}, {0.0, 0.0, 0.0}};
  };
  return sys;
}

const std::vector<std::string>& benchmark_ids() {
  static const std::vector<std::string> ids{"dcdc", "unicycle"};
  return ids;
}

}  // namespace msyn
