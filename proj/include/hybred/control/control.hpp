#pragma once

// Cycle-to-cycle control of hybrid return maps: the input vector theta is
// held constant during each cycle and may change only when the trajectory
// crosses the section, giving a discrete-time control system
// x_{i+1} = P(x_i, theta_i) on section coordinates. Synthesis targets are
// deadbeat: reach the nominal fixed point (or a target output / subspace) in
// finitely many cycles rather than asymptotically.

#include <complex>
#include <optional>
#include <vector>

#include "hybred/models/polyped.hpp"
#include "hybred/poincare/poincare.hpp"

namespace hybred {

// A first-return map with a constant-per-cycle input channel: the plant's
// runtime parameter vector plays the input, frozen between section crossings.
// `nominal_u`/`nominal_theta` is a controlled fixed point:
// P(nominal_u, nominal_theta) = nominal_u (checked to 1e-6 at construction).
struct ControlledReturnMap {
  HybridSystem system;  // param_dim = input dimension
  Section section;
  int direction = 0;
  Vec nominal_u;      // fixed point, section coordinates
  Vec nominal_theta;  // input that keeps it fixed
  PoincareOptions opts;

  int state_dim() const { return static_cast<int>(section.chart.cols()); }
  int input_dim() const { return static_cast<int>(nominal_theta.size()); }
};

ControlledReturnMap make_controlled_map(const HybridSystem& system, Section section,
                                        int direction, const Vec& nominal_u,
                                        const Vec& nominal_theta, PoincareOptions opts = {});

// Applies theta_i on cycle i (the sequence must have at least one entry) and
// returns the arrival point in section coordinates. NoReturn and integration
// errors propagate from the underlying executions.
Vec controlled_return(const ControlledReturnMap& map, const Vec& u,
                      const std::vector<Vec>& thetas);
// Single-cycle evaluation with full arrival data.
ReturnInfo controlled_return_info(const ControlledReturnMap& map, const Vec& u,
                                  const Vec& theta);

// Central-difference derivatives of P at the nominal pair: dx is the usual
// return-map Jacobian (state_dim x state_dim), dtheta the input sensitivity
// (state_dim x input_dim). Both use opts.fd_step.
struct ControlLinearization {
  Mat dx;
  Mat dtheta;
};
ControlLinearization linearize_control(const ControlledReturnMap& map);

// Target an output y = h(u) (section coordinates -> R^q) instead of the full
// state; h(nominal_u) must vanish to 1e-9.
struct OutputConstraint {
  std::function<Vec(const Vec&)> h;
  int dim = 0;
};

// A synthesized cycle-to-cycle law. Newton-backed kinds solve for the input
// sequence on demand from the current section point and cache nothing.
struct DeadbeatLaw {
  enum class Kind {
    OneCycleNewton,  // theta with P(u, theta) = nominal (or h(P) = 0), 1 cycle
    MultiCycle,      // stacked sequence theta_1..theta_k over k cycles
    LinearFeedback,  // theta = nominal_theta + gain (u - nominal_u)
  };
  Kind kind = Kind::OneCycleNewton;
  int horizon = 1;  // cycles to the target
  Mat gain;         // LinearFeedback only, input_dim x state_dim
  std::optional<OutputConstraint> constraint;
  double tol = 1e-11;  // Newton residual target on the cycle endpoint
  int max_iter = 50;
};

// The input sequence the law prescribes from section point u (horizon
// entries; LinearFeedback gives one). Newton failures raise NoConvergence.
std::vector<Vec> deadbeat_sequence(const ControlledReturnMap& map, const DeadbeatLaw& law,
                                   const Vec& u);

// One-cycle deadbeat: requires the input sensitivity (of the constrained
// output when given) to have full row rank at the nominal pair, else
// RankDeficient reporting the achieved rank.
DeadbeatLaw synth_deadbeat_onecycle(const ControlledReturnMap& map,
                                    std::optional<OutputConstraint> constraint = std::nullopt);

// k-cycle deadbeat via a stacked Newton solve over (theta_1, ..., theta_k);
// requires the stacked input sensitivity to reach the full state, else
// RankDeficient reporting the achieved rank. k = 1 is the one-cycle law.
DeadbeatLaw synth_deadbeat_multicycle(const ControlledReturnMap& map, int cycles);

// Static linear state feedback theta = Psi x for the pair (a, b) driving
// range((a + b Psi)^k) into the column span of `target_subspace` (d x s,
// s = 0 meaning {0}: a fully nilpotent closed loop) with k <= d. Throws
// NotStabilizable when the subspace cannot be made invariant or the
// obstructing uncontrollable modes are not already nilpotent.
struct LinearDeadbeat {
  Mat gain;  // input_dim x state_dim
  int k = 0; // smallest verified power
};
LinearDeadbeat synth_linear_deadbeat(const Mat& a, const Mat& b, const Mat& target_subspace);

// The closed loop u -> P(u, law(u)) (first element of the law's sequence,
// re-solved each cycle) packaged as a return-map handle, so the spectral and
// reduction machinery can consume controlled systems unchanged.
PoincareMapHandle closed_loop_handle(const ControlledReturnMap& map, const DeadbeatLaw& law);

// Runs the law synthesized on `nominal` against a perturbed plant (same
// sections and input dimension, perturbed fields/resets): Newton fixed point
// of u -> P_perturbed(u, law_nominal(u)) seeded at the nominal point, plus
// the closed-loop multipliers there. The drift `shift` and the multiplier
// magnitudes measure structural robustness of the deadbeat design; a
// perturbation too large for the Newton basin raises NoConvergence.
struct StabilityProbe {
  Vec fixed_point;  // section coordinates on the nominal section
  double shift = 0; // |fixed_point - nominal_u|
  std::vector<std::complex<double>> multipliers;  // sorted by magnitude, desc
};
StabilityProbe structural_stability_probe(const ControlledReturnMap& nominal,
                                          const DeadbeatLaw& law,
                                          const HybridSystem& perturbed_plant);

// The polyped with the given template seated as its virtual leg and the
// embedding controller wired into the parameter hooks (see models/polyped.hpp
// for the control law itself). The returned bundle carries the closed-loop
// system, the resolved parameters, and the template system used for the
// per-step predictions.
struct PolypedEmbedding {
  HybridSystem system;           // closed-loop polyped
  PolypedParams polyped;         // resolved parameters (hips/masses/targets)
  LLSParams lls;                 // the seated template
  HybridSystem template_system;  // standalone template, for co-simulation
};
PolypedEmbedding polyped_embedding_controller(const PolypedParams& polyped,
                                              const LLSParams& lls);

}  // namespace hybred
