#include "hybred/numerics/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybred {

namespace {

constexpr double kArmLevel = 1e-9;        // |w| above this counts as clearly off the zero set
constexpr double kCoincidentTol = 1e-9;   // face-coincidence threshold at a hit
constexpr int kScanSamples = 16;          // dense-output samples scanned per accepted step
constexpr long kMaxAcceptedSteps = 20'000'000;

void eval_field(const FieldFn& f, const Vec& x, Vec& out) {
  try {
    f(x, out);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "field evaluation failed: " << e.what();
    fail(ErrorCode::EvaluationFailure, os.str());
  }
}

double eval_watch(const ScalarFn& w, const Vec& x) {
  try {
    return w(x);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "watch evaluation failed: " << e.what();
    fail(ErrorCode::EvaluationFailure, os.str());
  }
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// Adaptive stepper state; copies of an Engine share nothing, which makes
// cloned instances usable for the re-integrating event bisection.
struct Engine {
  const FieldFn* field = nullptr;
  const IntegratorOptions* opts = nullptr;
  double t = 0;
  Vec x;
  Vec fx;  // field at (t, x), maintained for FSAL reuse
  double h_next = 0;
  std::vector<HermiteStep>* record = nullptr;

  Engine clone() const {
    Engine e = *this;
    e.record = nullptr;
    return e;
  }

  double error_norm(const Vec& x0, const Vec& x1, const Vec& err) const {
    const auto n = x0.size();
    double acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = opts->abs_tol + opts->rel_tol * std::max(std::abs(x0[i]), std::abs(x1[i]));
      double q = err[i] / sc;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(n));
  }

  // One embedded RK step attempt of size h from the current state.
  // Returns the scaled error norm (NaN treated as rejection by callers).
  double attempt(double h, Vec& x_out, Vec& f_out) const {
    const Vec& y = x;
    Vec k1 = fx;
    Vec k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()), k6(y.size()), k7(y.size());
    Vec tmp(y.size());

    tmp = y + h * (a21 * k1);
    eval_field(*field, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    eval_field(*field, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    eval_field(*field, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval_field(*field, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval_field(*field, tmp, k6);
    x_out = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    eval_field(*field, x_out, k7);  // FSAL stage

    Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    f_out = k7;
    return error_norm(y, x_out, err);
  }

  // Advance exactly one accepted step of size at most h_cap.
  void step_once(double h_cap, long& accepted_steps) {
    double h = std::min({h_next, h_cap, opts->max_step});
    bool clipped_exact = (h == h_cap);
    for (int tries = 0;; ++tries) {
      if (tries > 400) fail(ErrorCode::StepFailure, "step size control did not settle");
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        fail(ErrorCode::StepFailure, "required step size underflowed at t=" + std::to_string(t));
      Vec x_new, f_new;
      double err = attempt(h, x_new, f_new);
      if (!std::isfinite(err)) {
        h *= 0.25;
        clipped_exact = false;
        continue;
      }
      if (err <= 1.0) {
        double fac = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        double t_new = clipped_exact ? t + h_cap : t + h;
        if (record) {
          HermiteStep hs;
          hs.t0 = t;
          hs.t1 = t_new;
          hs.x0 = x;
          hs.x1 = x_new;
          hs.f0 = fx;
          hs.f1 = f_new;
          record->push_back(std::move(hs));
        }
        t = t_new;
        x = std::move(x_new);
        fx = std::move(f_new);
        h_next = std::min(h * fac, opts->max_step);
        if (++accepted_steps > kMaxAcceptedSteps)
          fail(ErrorCode::StepFailure, "accepted-step budget exhausted");
        return;
      }
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      clipped_exact = false;
    }
  }

  // Integrate to exactly t_target (>= t).
  void to_time(double t_target, long& accepted_steps) {
    while (t < t_target) {
      double remaining = t_target - t;
      // Snap across any gap too small for step_once's underflow guard
      // (1e-14 * scale): over such an interval the state moves by less than
      // the integration tolerances resolve, and callers localizing events
      // only need accuracy at the event_tol scale (1e-12).
      if (remaining <= 2e-14 * std::max(1.0, std::abs(t))) {
        t = t_target;
        return;
      }
      step_once(remaining, accepted_steps);
    }
    t = t_target;
  }
};

double scaled_norm(const Vec& v, const Vec& ref, const IntegratorOptions& opts) {
  double acc = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double sc = opts.abs_tol + opts.rel_tol * std::abs(ref[i]);
    double q = v[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Standard two-phase initial step selection.
double initial_step(const FieldFn& field, const Vec& x0, const Vec& f0, double horizon,
                    const IntegratorOptions& opts) {
  if (opts.first_step > 0) return std::min({opts.first_step, opts.max_step, horizon});
  double d0 = scaled_norm(x0, x0, opts);
  double d1 = scaled_norm(f0, x0, opts);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min({h0, horizon, opts.max_step});
  if (h0 <= 0) return std::min(1e-6, opts.max_step);
  Vec x1 = x0 + h0 * f0;
  Vec f1(x0.size());
  eval_field(field, x1, f1);
  double d2 = scaled_norm(f1 - f0, x0, opts) / h0;
  double dm = std::max(d1, d2);
  double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100 * h0, h1, horizon, opts.max_step});
}

struct WatchState {
  bool armed_above = false;  // value has been clearly positive: may trigger downward
  bool armed_below = false;  // value has been clearly negative: may trigger upward
  double value = 0;
};

bool wants_down(const Watch& w) { return w.direction <= 0; }
bool wants_up(const Watch& w) { return w.direction >= 0; }

}  // namespace

void IntegratorOptions::check() const {
  if (!(rel_tol > 0) || !(abs_tol > 0) || !(event_tol > 0) || !(max_step > 0))
    fail(ErrorCode::InvalidArgument, "integrator tolerances and max_step must be positive");
  if (max_events_per_step < 1)
    fail(ErrorCode::InvalidArgument, "max_events_per_step must be at least 1");
}

void HermiteStep::eval(double t, Vec& out) const {
  double dt = t1 - t0;
  double s = (t - t0) / dt;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1;
  double h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2;
  double h11 = s3 - s2;
  out = h00 * x0 + (h10 * dt) * f0 + h01 * x1 + (h11 * dt) * f1;
}

Vec DenseSegment::eval(double t) const {
  if (steps.empty()) fail(ErrorCode::InvalidArgument, "evaluating an empty segment");
  double slack = 1e-9 * std::max(1.0, t_end - t_start);
  if (t < t_start - slack || t > t_end + slack)
    fail(ErrorCode::InvalidArgument, "segment evaluation time out of range");
  t = std::clamp(t, t_start, t_end);
  // binary search for the step containing t
  size_t lo = 0, hi = steps.size() - 1;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (steps[mid].t1 < t)
      lo = mid + 1;
    else
      hi = mid;
  }
  Vec out;
  steps[lo].eval(t, out);
  return out;
}

const Vec& DenseSegment::start_state() const {
  if (steps.empty()) fail(ErrorCode::InvalidArgument, "empty segment has no start state");
  return steps.front().x0;
}

const Vec& DenseSegment::end_state() const {
  if (steps.empty()) fail(ErrorCode::InvalidArgument, "empty segment has no end state");
  return steps.back().x1;
}

double flow_derivative(const FieldFn& field, const ScalarFn& w, const Vec& x) {
  Vec f(x.size());
  eval_field(field, x, f);
  double fn = f.norm();
  if (fn == 0) return 0;
  double delta = 1e-7 / std::max(1.0, fn);
  return (eval_watch(w, x + delta * f) - eval_watch(w, x - delta * f)) / (2 * delta);
}

double crossing_cosine(const FieldFn& field, const ScalarFn& w, const Vec& x) {
  Vec f(x.size());
  eval_field(field, x, f);
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = std::max(1e-7, 1e-7 * std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    grad[i] = (eval_watch(w, xp) - eval_watch(w, xm)) / (2 * h);
  }
  double denom = grad.norm() * f.norm();
  if (denom == 0) return 0;
  return std::abs(grad.dot(f)) / denom;
}

FlowOutcome flow_to_watch(const FieldFn& field, const std::vector<Watch>& watches,
                          const Vec& x0, double t0, double t_max,
                          const IntegratorOptions& opts, int domain_id) {
  opts.check();
  if (t_max < t0) fail(ErrorCode::InvalidArgument, "t_max precedes t0");

  FlowOutcome out;
  out.segment.domain_id = domain_id;
  out.segment.t_start = t0;
  out.segment.t_end = t0;

  const size_t W = watches.size();
  std::vector<WatchState> ws(W);
  for (size_t i = 0; i < W; ++i) {
    ws[i].value = eval_watch(watches[i].w, x0);
    ws[i].armed_above = ws[i].value > kArmLevel;
    ws[i].armed_below = ws[i].value < -kArmLevel;
  }

  auto finish_at = [&](int id, double th, Vec xh, bool improper, double cosine) {
    out.stop = FlowOutcome::Stop::WatchHit;
    out.watch_id = id;
    out.t_hit = th;
    out.x_hit = std::move(xh);
    out.improper = improper;
    out.crossing_cosine = cosine;
    for (size_t j = 0; j < W; ++j) {
      if (static_cast<int>(j) == id) continue;
      if (std::abs(eval_watch(watches[j].w, out.x_hit)) <= kCoincidentTol)
        out.coincident.push_back(static_cast<int>(j));
    }
  };

  // A start exactly on a zero set while moving through it is an immediate hit
  // for watches that ask for it (domain faces).
  for (size_t i = 0; i < W; ++i) {
    if (!watches[i].immediate) continue;
    if (std::abs(ws[i].value) > kArmLevel) continue;
    double wdot = flow_derivative(field, watches[i].w, x0);
    bool exits = (wants_down(watches[i]) && wdot < 0) || (wants_up(watches[i]) && wdot > 0);
    if (!exits) continue;
    double cosine = crossing_cosine(field, watches[i].w, x0);
    if (cosine < kTransversalityFloor) continue;  // grazing start: treat as not leaving
    finish_at(static_cast<int>(i), t0, x0, false, cosine);
    return out;
  }

  if (t_max == t0) {
    out.stop = FlowOutcome::Stop::TimeLimit;
    out.t_hit = t0;
    out.x_hit = x0;
    return out;
  }

  Engine eng;
  eng.field = &field;
  eng.opts = &opts;
  eng.t = t0;
  eng.x = x0;
  eng.fx.resize(x0.size());
  eval_field(field, x0, eng.fx);
  eng.h_next = initial_step(field, x0, eng.fx, t_max - t0, opts);
  eng.record = &out.segment.steps;

  long accepted = 0;

  // Bisection on re-integrated states from a knot snapshot: finds the earliest
  // time in (ta, tb] at which the watch value reaches the trigger side, with
  // ta on the inside. Returns the hit time and state through the out-params.
  auto localize = [&](const Engine& snapshot, const Watch& watch, double ta, double tb,
                      bool down, double& t_hit, Vec& x_hit) -> bool {
    auto value_at = [&](double tc, Vec& xc) {
      Engine e = snapshot.clone();
      long acc = 0;
      e.to_time(tc, acc);
      xc = std::move(e.x);
      return eval_watch(watch.w, xc);
    };
    Vec xa, xb;
    double wa = value_at(ta, xa);
    double wb = value_at(tb, xb);
    auto inside = [&](double v) { return down ? v > 0 : v < 0; };
    if (!inside(wa)) {
      // sampling noise: fall back to the knot itself as the inside end
      ta = snapshot.t;
      wa = value_at(ta, xa);
      if (!inside(wa)) return false;
    }
    if (inside(wb)) return false;  // grazing dip narrower than integration noise
    for (int it = 0; it < 200 && (tb - ta) > opts.event_tol; ++it) {
      double tm = 0.5 * (ta + tb);
      if (tm <= ta || tm >= tb) break;  // bracket at roundoff resolution
      Vec xm;
      double wm = value_at(tm, xm);
      if (inside(wm)) {
        ta = tm;
      } else {
        tb = tm;
        xb = std::move(xm);
      }
    }
    t_hit = tb;
    x_hit = std::move(xb);
    return true;
  };

  while (eng.t < t_max) {
    // Mirror to_time's snap window: a residual gap below step_once's
    // underflow guard cannot be stepped through and carries no resolvable
    // state change, so treat the horizon as reached.
    if (t_max - eng.t <= 2e-14 * std::max(1.0, std::abs(eng.t))) {
      eng.t = t_max;
      break;
    }
    Engine snapshot = eng.clone();
    size_t steps_before = out.segment.steps.size();
    eng.step_once(t_max - eng.t, accepted);
    const HermiteStep& hs = out.segment.steps.back();

    // scan dense output through this step for watch crossings
    struct Candidate {
      int id;
      double t_hit;
      Vec x_hit;
      bool improper;
    };
    std::vector<Candidate> cands;

    double prev_t = hs.t0;

    Vec xs;
    for (int s = 1; s <= kScanSamples; ++s) {
      double tsamp = hs.t0 + (hs.t1 - hs.t0) * (static_cast<double>(s) / kScanSamples);
      if (s == kScanSamples) {
        tsamp = hs.t1;
        xs = hs.x1;  // integrated knot, not interpolated
      } else {
        hs.eval(tsamp, xs);
      }
      for (size_t i = 0; i < W; ++i) {
        if (!cands.empty() && cands.front().t_hit <= prev_t) break;
        double v = eval_watch(watches[i].w, xs);
        const Watch& wt = watches[i];
        WatchState& st = ws[i];
        bool hit = false;
        bool down = false;
        if (wants_down(wt) && st.armed_above && v <= 0) {
          hit = true;
          down = true;
        } else if (wants_up(wt) && st.armed_below && v >= 0) {
          hit = true;
          down = false;
        }
        if (hit) {
          double th;
          Vec xh;
          if (localize(snapshot, wt, prev_t, tsamp, down, th, xh)) {
            // keep only the earliest candidate
            if (cands.empty() || th < cands.front().t_hit)
              cands.insert(cands.begin(), Candidate{static_cast<int>(i), th, std::move(xh), false});
            st.value = v;
            continue;
          }
          // spurious (non-reproducible) crossing: fall through to state update
        }
        // disarmed immediate watches (domain faces) that sink clearly beyond
        // the zero set left the region without a detectable crossing; report
        // the sample point so the caller can classify the exit
        if (wt.immediate && ((wants_down(wt) && !st.armed_above && v < -kArmLevel) ||
                             (wants_up(wt) && !st.armed_below && v > kArmLevel))) {
          if (cands.empty() || tsamp < cands.front().t_hit)
            cands.insert(cands.begin(), Candidate{static_cast<int>(i), tsamp, xs, true});
        }
        st.armed_above = st.armed_above || v > kArmLevel;
        st.armed_below = st.armed_below || v < -kArmLevel;
        st.value = v;
      }
      prev_t = tsamp;
      if (!cands.empty() && cands.front().t_hit <= prev_t) break;
    }

    if (!cands.empty()) {
      Candidate& c = cands.front();
      const Watch& wt = watches[c.id];
      // rebuild the recorded segment to end exactly at the hit
      out.segment.steps.resize(steps_before);
      eng = snapshot;
      eng.record = &out.segment.steps;
      if (c.t_hit > eng.t) eng.to_time(c.t_hit, accepted);
      Vec xh = eng.x;
      double cosine = 0;
      if (!c.improper) {
        cosine = crossing_cosine(field, wt.w, xh);
        if (!wt.tangency_exempt && cosine < kTransversalityFloor) {
          std::ostringstream os;
          os << "watch " << c.id << " crossed tangentially at t=" << c.t_hit
             << " (cosine " << cosine << ")";
          fail(ErrorCode::TangentialCrossing, os.str());
        }
      }
      out.segment.t_end = eng.t;
      finish_at(c.id, eng.t, std::move(xh), c.improper, cosine);
      return out;
    }
    out.segment.t_end = eng.t;
  }

  out.stop = FlowOutcome::Stop::TimeLimit;
  out.t_hit = eng.t;
  out.x_hit = eng.x;
  out.segment.t_end = eng.t;
  return out;
}

EventResult integrate_to_event(const FieldFn& field, const std::vector<ScalarFn>& guards,
                               const Vec& x0, double t_max, const IntegratorOptions& opts) {
  std::vector<Watch> watches;
  watches.reserve(guards.size());
  for (const auto& g : guards) watches.push_back(Watch{g, -1, true, false});
  FlowOutcome fo = flow_to_watch(field, watches, x0, 0.0, t_max, opts);
  if (fo.stop == FlowOutcome::Stop::TimeLimit)
    fail(ErrorCode::NoEventBeforeTmax, "no guard crossing before t_max");
  EventResult r;
  r.t_hit = fo.t_hit;
  r.x_hit = std::move(fo.x_hit);
  r.guard_id = fo.watch_id;
  r.segment = std::move(fo.segment);
  return r;
}

}  // namespace hybred
