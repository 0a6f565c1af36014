#pragma once

// Two-mass vertical hopper: a body mass mu and a foot mass m joined by a
// linear spring (rest length ell, stiffness k).  In the aerial mode the foot
// moves freely above the ground and feels viscous drag b*xd; contact begins
// with a plastic impact that zeroes the foot velocity.  While the foot rests
// on the ground the spring acts with stiffness a*k (a > 1) and the 2-dim
// ground mode tracks only the body.  Liftoff occurs when the aerial-mode
// spring force on the foot balances its weight, i.e. at y = ell + m*g/k.
//
// Aerial state: (y, yd, x, xd)   body height/velocity, foot height/velocity
// Ground state: (y, yd)

#include "hybred/core/types.hpp"

namespace hybred {

struct HopperParams {
  double m = 1.0;    // foot (lower) mass
  double mu = 3.0;   // body (upper) mass
  double k = 10.0;   // spring stiffness, aerial-mode reference
  double b = 5.0;    // foot drag coefficient, aerial mode only
  double ell = 2.0;  // spring rest length
  double a = 2.0;    // ground-mode stiffness multiplier, > 1
  double g = 2.0;    // gravity

  void check() const;  // throws InvalidArgument on non-positive values or a <= 1
};

inline constexpr int kHopperAerial = 0;
inline constexpr int kHopperGround = 1;

// Plain hopper with fixed parameters.
HybridSystem make_hopper(const HopperParams& p = {});

// Same mechanics, but the ground-mode stiffness multiplier is the single
// runtime parameter (initialized to p.a).  Used for controlled return maps
// that actuate the stance stiffness once per cycle.
HybridSystem make_hopper_controlled(const HopperParams& p = {});

// Mechanical energy using the mode's own spring stiffness (k aloft, a*k in
// stance).  Constant along ground-mode flows; decays at rate b*xd^2 along
// aerial-mode flows.
double hopper_energy(const HopperParams& p, int domain_id, const Vec& x);

}  // namespace hybred
