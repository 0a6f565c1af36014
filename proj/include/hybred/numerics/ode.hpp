#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "hybred/errors.hpp"

namespace hybred {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using FieldFn = std::function<void(const Vec& x, Vec& dxdt)>;
using ScalarFn = std::function<double(const Vec& x)>;

struct IntegratorOptions {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  double max_step = std::numeric_limits<double>::infinity();
  double event_tol = 1e-12;      // time-width target for event bisection
  int max_events_per_step = 8;   // event-cluster budget for the Zeno heuristic
  double first_step = 0.0;       // 0 = choose automatically

  void check() const;
};

// One accepted integrator step with endpoint states and derivatives;
// evaluation anywhere inside uses the cubic Hermite interpolant.
struct HermiteStep {
  double t0 = 0, t1 = 0;
  Vec x0, x1, f0, f1;

  void eval(double t, Vec& out) const;
};

// Dense output over one continuous stretch of flow inside a single domain.
struct DenseSegment {
  int domain_id = 0;
  double t_start = 0, t_end = 0;
  std::vector<HermiteStep> steps;

  bool empty() const { return steps.empty(); }
  Vec eval(double t) const;
  const Vec& start_state() const;
  const Vec& end_state() const;
};

// A scalar function watched for zero crossings during a flow.
// direction -1 triggers on positive-to-negative crossings (the convention for
// domain faces, which are positive inside), +1 on the reverse, 0 on either.
//
// A watch that starts on its trigger side is disarmed until the value moves
// clearly off the zero set. With `immediate` set, a start exactly on the zero
// set while the flow carries the value toward the trigger side fires at t0
// (used for domain faces, where such a start means the state is leaving);
// without it the start point is simply skipped (used for Poincaré sections,
// where the next crossing is wanted).
struct Watch {
  ScalarFn w;
  int direction = -1;
  bool immediate = true;
  bool tangency_exempt = false;  // do not raise TangentialCrossing on this watch
};

struct FlowOutcome {
  enum class Stop { TimeLimit, WatchHit };
  Stop stop = Stop::TimeLimit;
  DenseSegment segment;

  int watch_id = -1;
  double t_hit = 0;
  Vec x_hit;
  // |<grad w, f>| / (|grad w| |f|) at the hit; proper crossings below the
  // transversality floor raise TangentialCrossing before returning.
  double crossing_cosine = 0;
  // true when the state was found beyond a watch's zero set without an armed
  // inside-to-outside crossing (e.g. dumped outside the domain by a reset)
  bool improper = false;
  // other watches whose value is within the coincidence tolerance at the hit
  std::vector<int> coincident;
};

// Integrate field from x0 over [t0, t_max], stopping at the first armed watch
// crossing or at t_max. Watches whose value starts on the trigger side are
// disarmed until the trajectory moves clearly off the zero set; a state that
// starts on a zero set while moving through it triggers immediately at t0.
// Throws TangentialCrossing / StepFailure / EvaluationFailure.
FlowOutcome flow_to_watch(const FieldFn& field, const std::vector<Watch>& watches,
                          const Vec& x0, double t0, double t_max,
                          const IntegratorOptions& opts, int domain_id = 0);

struct EventResult {
  double t_hit = 0;
  Vec x_hit;
  int guard_id = -1;
  DenseSegment segment;
};

// Classic event-stopping integration: all guards are level functions positive
// in the interior; the first positive-to-negative crossing ends the flow.
// Throws NoEventBeforeTmax when no guard triggers within t_max.
EventResult integrate_to_event(const FieldFn& field, const std::vector<ScalarFn>& guards,
                               const Vec& x0, double t_max, const IntegratorOptions& opts);

// Directional derivative d/dt w(x(t)) along the field, via central differences.
double flow_derivative(const FieldFn& field, const ScalarFn& w, const Vec& x);

// Normalized transversality measure |<grad w, f>| / (|grad w| |f|) at x.
double crossing_cosine(const FieldFn& field, const ScalarFn& w, const Vec& x);

// Threshold below which a crossing is considered tangential.
inline constexpr double kTransversalityFloor = 1e-6;

}  // namespace hybred
