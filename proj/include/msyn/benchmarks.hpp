#pragma once

#include <string>
#include <vector>

#include "msyn/dynamics.hpp"

namespace msyn {

/// Boost DC-DC converter with two switching modes, xdot = A_p x + b + w.
struct DcdcParams {
  double r0 = 1.0;
  double vs = 1.0;
  double rl = 0.05;
  double rc = 0.025;  // 0.5 * rl
  double xl = 3.0;
  double xc = 70.0;
  double w = 0.001;
};

struct DcdcMatrices {
  Matrix a1, a2;
  Vector b;
};

DcdcMatrices dcdc_matrices(const DcdcParams& p = {});

/// Inputs are the modes {1} and {2}. The growth matrix of mode p is A_p with
/// its off-diagonal entries replaced by their absolute values.
ControlSystem dcdc(const DcdcParams& p = {});

/// Unicycle x1' = u1 cos x3 + w1, x2' = u1 sin x3 + w2, x3' = u2.
struct UnicycleParams {
  std::vector<double> speeds{0.5, 1.0};
  std::vector<double> turn_rates{-1.0, -0.5, 0.0, 0.5, 1.0};
  double w = 0.05;
};

/// Inputs enumerate speeds x turn_rates with the turn rate varying fastest.
/// Growth matrix: only x1 and x2 depend on x3, with |d/dx3| <= |u1|.
ControlSystem unicycle(const UnicycleParams& p = {});

/// Identifiers accepted by the configuration loader.
const std::vector<std::string>& benchmark_ids();

}  // namespace msyn
