#pragma once

// Lateral leg-spring runner: a planar rigid body (two translational DOF plus
// heading) bouncing sideways off a massless spring leg.  Steps alternate
// left/right; at each touchdown the leg is planted at a fixed angle beta off
// the heading, at rest length, on the new side; the step ends when the leg
// re-extends to its rest length.  There is no gravity in the lateral plane
// and the spring is conservative, so mechanical energy is exactly preserved,
// including across the touchdown reset (the leg is at rest length on both
// sides of it).
//
// State (foot-relative): (rx, ry, theta, vx, vy, omega) where (rx, ry) is the
// body COM minus the current foot anchor in world axes; velocities are world
// frame.  The world-frame body path is recovered by accumulating foot anchors
// across resets.

#include "hybred/core/types.hpp"

namespace hybred {

struct LLSParams {
  double m = 1.0;     // body mass
  double J = 0.05;    // body yaw inertia
  double h = 0.0;     // hip offset along the heading axis (0 = leg at COM)
  double ell = 1.0;   // leg rest length
  double beta = 1.1;  // touchdown angle off the heading, radians, in (0, pi/2)
  double kl = 10.0;   // leg spring stiffness

  void check() const;
};

inline constexpr int kLLSLeft = 0;   // stance on the left (+y side) foot
inline constexpr int kLLSRight = 1;  // stance on the right (-y side) foot

HybridSystem make_lls(const LLSParams& p = {});

// Current leg length |hip - foot| for a foot-relative state.
double lls_leg_length(const LLSParams& p, const Vec& x);

// Kinetic + spring energy (no gravity in the lateral plane).
double lls_energy(const LLSParams& p, const Vec& x);

// Post-touchdown state for a fresh step on `side` (+1 left / -1 right) given
// heading theta and world velocities: the body placed so the new leg is at
// rest length and the prescribed angle.
Vec lls_step_start(const LLSParams& p, double theta, double vx, double vy, double omega,
                   int side);

// Seed state (left-stance domain) near the default parameters' periodic gait;
// feed to find_periodic_orbit to polish.
Vec lls_gait_seed(const LLSParams& p = {});

}  // namespace hybred
