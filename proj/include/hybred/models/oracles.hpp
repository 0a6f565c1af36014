#pragma once

#include "hybred/core/types.hpp"

namespace hybred {

// Two half-plane domains swept counterclockwise by the rotation field
// (du, dv) = (-v, u), with radial resets r -> x0 + lambda (r - x0) applied at
// each half turn. The circle of radius x0 is a periodic orbit of period 2 pi
// with two events per cycle; the full-cycle return map on the positive ray is
// exactly u -> x0 + lambda^2 (u - x0).
struct HalfTurnOracle {
  HybridSystem system;
  double lambda = 0.5;
  double x0 = 1.0;

  // one full cycle of the exact return map in the u coordinate of the
  // positive ray, measured just after the reset into the upper domain
  double analytic_return(double u) const { return x0 + lambda * lambda * (u - x0); }
};

HalfTurnOracle make_halfturn_oracle(double lambda, double x0);

// The same geometry with a scalar actuation parameter added to both resets:
// r -> x0 + lambda (r - x0) + theta. The full-cycle return map is exactly
// u -> x0 + lambda^2 (u - x0) + (1 + lambda) theta, so the one-cycle
// correction theta = -lambda^2 (u - x0) / (1 + lambda) lands on the fixed
// point in a single cycle.
struct ControlledHalfTurnOracle {
  HybridSystem system;  // param_dim = 1
  double lambda = 0.5;
  double x0 = 1.0;

  double analytic_return(double u, double theta) const {
    return x0 + lambda * lambda * (u - x0) + (1 + lambda) * theta;
  }
  double analytic_deadbeat(double u) const {
    return -lambda * lambda * (u - x0) / (1 + lambda);
  }
};

ControlledHalfTurnOracle make_halfturn_controlled(double lambda, double x0);

// A three-dimensional domain draining onto a two-dimensional one and back,
// with a projection a -> <p, a> on the way down and an injection b -> q b on
// the way up; a shared clock coordinate s drives both transitions at s = 1.
// The return map of the section {s = 1/2} upstairs is the rank-one linear map
// a -> q p^T a, whose spectrum is {<p, q>, 0}.
struct ProjectGlueOracle {
  HybridSystem system;
  Vec p;  // projection weights, (0.6, 0.8)
  Vec q;  // injection weights, (0.5, 0.25); <p, q> = 0.5

  Mat analytic_jacobian() const { return q * p.transpose(); }
};

ProjectGlueOracle make_projectglue_oracle();

// A clock-driven affine update: one domain carrying (x, s), unit clock speed,
// and a self-loop reset x -> a x + b theta at s = 1 (theta is the runtime
// parameter vector). The return map of the interior section {s = 1/2} is the
// affine map itself, expressed in the section chart, so discrete-time control
// synthesis can be checked against exact linear algebra.
struct LinearControlledOracle {
  HybridSystem system;  // param_dim = b.cols()
  Mat a;
  Mat b;
};

LinearControlledOracle make_linear_controlled(const Mat& a, const Mat& b);

}  // namespace hybred
