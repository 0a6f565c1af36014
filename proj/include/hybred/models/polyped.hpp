#pragma once

// Planar polyped: a rigid body (two translational DOF plus heading) carrying
// n >= 4 point-mass feet on massless, fully actuated limbs anchored at
// body-frame hip locations h_k.  Feet alternate between stance (pinned to the
// substrate; the limb force is transmitted to the body at the hip) and swing
// (ballistic point mass driven by its limb force).  Landing is a plastic
// impact that zeroes the foot's velocity.
//
// The factory returns the closed-loop system with its embedding controller
// wired into the parameter hooks: limb forces are chosen so the net wrench on
// the body always equals that of a virtual leg-spring runner (the `lls`
// member), which makes the body motion identical to the template's no matter
// what the limbs are doing.  At the start of each step the controller
//   - plants a virtual foot by the template's touchdown rule,
//   - runs the template one step ahead to get the step duration tau and the
//     predicted body pose at step end,
//   - assigns each swing foot the constant force that lands it on its
//     body-frame target at time tau,
// and during the step it continuously solves the stance wrench allocation
// (minimum-norm) to impose the virtual spring wrench while cancelling the
// swing reaction wrenches.  Even-indexed feet form one stance set,
// odd-indexed the other; the sets swap when the virtual leg re-extends to
// rest length (the template's step end).
//
// State: (x, y, theta, xd, yd, omega), then per foot (px, py, vx, vy):
// 6 + 4n total, world frame.  Parameters: (virtual foot x, y, step duration
// tau), then per foot a constant swing force (Fx, Fy): 3 + 2n; stance slots
// are held at zero.  The parameter hooks assume executions start at a step
// beginning (feet freshly exchanged); use polyped_step_start to build
// consistent initial states.

#include <vector>

#include "hybred/core/types.hpp"
#include "hybred/models/lls.hpp"

namespace hybred {

struct PolypedParams {
  int n = 4;                      // number of limbs, >= 4
  std::vector<Vec> hips;          // body-frame hip anchors, pairwise distinct
  std::vector<double> foot_mass;  // per-foot mass, positive
  std::vector<Vec> targets;       // body-frame swing landing targets
  LLSParams lls;                  // virtual template; also the body's m and J
  double step_horizon = 10.0;     // time budget for the one-step template run

  // Copy with empty fields filled in: default hips for n = 4 and n = 6
  // (diagonal pairs / alternating tripods under the even/odd stance split),
  // uniform foot mass 0.05, and targets mirroring each hip by the template's
  // touchdown geometry (hip + ell * (cos beta, side * sin beta), side from
  // the hip's y sign).
  PolypedParams resolved() const;

  // Throws InvalidArgument on bad sizes or nonpositive masses and
  // WrenchInfeasible when two hips coincide (the stance allocation would be
  // structurally singular).  Expects resolved().
  void check() const;
};

inline constexpr int kPolypedEven = 0;  // stance on even-indexed feet
inline constexpr int kPolypedOdd = 1;   // stance on odd-indexed feet

// Closed-loop polyped (embedding controller in the parameter hooks).
HybridSystem make_polyped(const PolypedParams& p = {});

// Full state at a step beginning: body at world origin with the given heading
// and velocities, every foot resting on its body-frame target with zero
// velocity.  The domain picks which parity is in stance (even parity pairs
// with the template's left-side step).
Vec polyped_step_start(const PolypedParams& p, double theta, double vx, double vy,
                       double omega, int domain_id = kPolypedEven);

// Step-start state whose body matches lls_gait_seed (even-stance domain).
Vec polyped_gait_seed(const PolypedParams& p = {});

// State layout helpers.
inline int polyped_foot_index(int k) { return 6 + 4 * k; }     // (px, py, vx, vy)
inline int polyped_force_index(int k) { return 3 + 2 * k; }    // params (Fx, Fy)

}  // namespace hybred
