#include "hybred/models/polyped.hpp"

#include <cmath>
#include <utility>

#include "hybred/core/execute.hpp"
#include "hybred/errors.hpp"

namespace hybred {

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

int side_of(int domain_id) { return domain_id == kPolypedEven ? +1 : -1; }

// Parameters for the step that begins at state x in the given domain: plant
// the virtual foot by the template touchdown rule, run the template one step
// ahead for tau and the end pose, then fix each swing foot's constant force
// so it lands on its body-frame target at tau.  A degenerate step (tau ~ 0,
// reachable only from boundary probe states, never from a real touchdown)
// gets an empty swing plan instead of a division by zero.
Vec step_params(const PolypedParams& p, const HybridSystem& lls_sys, int domain_id,
                const Vec& x) {
  const int side = side_of(domain_id);
  const int lls_domain = side > 0 ? kLLSLeft : kLLSRight;
  const Vec r0 = lls_step_start(p.lls, x[2], x[3], x[4], x[5], side);
  const double fvx = x[0] - r0[0];
  const double fvy = x[1] - r0[1];

  StopCondition stop;
  stop.kind = StopCondition::Kind::GuardPre;
  stop.domain_id = lls_domain;
  ExecutionResult res =
      run_execution(lls_sys, HybridState{lls_domain, r0}, p.step_horizon, {}, stop);
  if (!res.stopped)
    fail(ErrorCode::StepTimeUndefined,
         "template step did not end within the horizon (" + std::to_string(p.step_horizon) + ")");
  const double tau = res.stop_time;

  Vec q = Vec::Zero(3 + 2 * p.n);
  q[0] = fvx;
  q[1] = fvy;
  q[2] = tau;
  if (tau > 1e-9) {
    const Vec& e = res.stop_state.x;  // template state on the step-end face
    const double ce = std::cos(e[2]), se = std::sin(e[2]);
    const double comx = fvx + e[0], comy = fvy + e[1];  // predicted body at step end
    const int swing_parity = domain_id == kPolypedEven ? 1 : 0;
    for (int k = 0; k < p.n; ++k) {
      if (k % 2 != swing_parity) continue;
      const double tx = comx + ce * p.targets[k][0] - se * p.targets[k][1];
      const double ty = comy + se * p.targets[k][0] + ce * p.targets[k][1];
      const int fi = polyped_foot_index(k);
      const double gain = p.foot_mass[k] * 2.0 / (tau * tau);
      q[polyped_force_index(k)] = gain * (tx - x[fi] - tau * x[fi + 2]);
      q[polyped_force_index(k) + 1] = gain * (ty - x[fi + 1] - tau * x[fi + 3]);
    }
  }
  return q;
}

}  // namespace

PolypedParams PolypedParams::resolved() const {
  PolypedParams p = *this;
  if (p.hips.empty()) {
    if (p.n == 4)
      p.hips = {vec2(0.15, 0.1), vec2(-0.15, 0.1), vec2(-0.15, -0.1), vec2(0.15, -0.1)};
    else if (p.n == 6)
      p.hips = {vec2(0.2, 0.1),  vec2(0.0, 0.1),  vec2(-0.2, 0.1),
                vec2(0.2, -0.1), vec2(0.0, -0.1), vec2(-0.2, -0.1)};
    // other leg counts need explicit hips; check() reports the size mismatch
  }
  if (p.foot_mass.empty()) p.foot_mass.assign(static_cast<size_t>(std::max(p.n, 0)), 0.05);
  if (p.targets.empty() && static_cast<int>(p.hips.size()) == p.n) {
    p.targets.reserve(p.hips.size());
    for (const Vec& h : p.hips) {
      const double side = h[1] >= 0.0 ? 1.0 : -1.0;
      p.targets.push_back(vec2(h[0] + p.lls.ell * std::cos(p.lls.beta),
                               h[1] + side * p.lls.ell * std::sin(p.lls.beta)));
    }
  }
  return p;
}

void PolypedParams::check() const {
  lls.check();
  if (n < 4) fail(ErrorCode::InvalidArgument, "polyped needs at least 4 limbs");
  if (!(step_horizon > 0))
    fail(ErrorCode::InvalidArgument, "polyped step horizon must be positive");
  if (static_cast<int>(hips.size()) != n || static_cast<int>(foot_mass.size()) != n ||
      static_cast<int>(targets.size()) != n)
    fail(ErrorCode::InvalidArgument,
         "polyped needs hips, foot masses, and targets for each of its " + std::to_string(n) +
             " limbs");
  for (int k = 0; k < n; ++k) {
    if (hips[k].size() != 2 || targets[k].size() != 2)
      fail(ErrorCode::InvalidArgument, "polyped hip and target anchors are planar (size 2)");
    if (!(foot_mass[k] > 0))
      fail(ErrorCode::InvalidArgument, "polyped foot masses must be positive");
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if ((hips[a] - hips[b]).norm() < 1e-9)
        fail(ErrorCode::WrenchInfeasible,
             "hips " + std::to_string(a) + " and " + std::to_string(b) +
                 " coincide; the stance wrench allocation is singular");
}

HybridSystem make_polyped(const PolypedParams& params) {
  const PolypedParams p = params.resolved();
  p.check();
  const HybridSystem lls_sys = make_lls(p.lls);

  HybridSystem sys;
  sys.name = "polyped";
  sys.param_dim = 3 + 2 * p.n;

  // Step-end face: the virtual leg back at rest length.
  auto face = [p](const Vec& x, const Vec& q) {
    const double c = std::cos(x[2]), s = std::sin(x[2]);
    return p.lls.ell - std::hypot(x[0] + c * p.lls.h - q[0], x[1] + s * p.lls.h - q[1]);
  };

  for (int par : {0, 1}) {  // parity of the stance set
    auto field = [p, par](const Vec& x, const Vec& q, Vec& dx) {
      dx.setZero(6 + 4 * p.n);
      dx[0] = x[3];
      dx[1] = x[4];
      dx[2] = x[5];
      const double c = std::cos(x[2]), s = std::sin(x[2]);

      // wrench of the virtual leg spring, applied at the virtual hip
      const double hipx = x[0] + c * p.lls.h, hipy = x[1] + s * p.lls.h;
      const double relx = hipx - q[0], rely = hipy - q[1];
      const double eta = std::hypot(relx, rely);
      if (!(eta > 0))
        fail(ErrorCode::EvaluationFailure, "virtual leg length vanished during a step");
      const double scale = -p.lls.kl * (eta - p.lls.ell) / eta;
      const double fsx = scale * relx, fsy = scale * rely;
      Vec rhs(3);
      rhs << fsx, fsy, (c * p.lls.h) * fsy - (s * p.lls.h) * fsx;
      const Vec w_des = rhs;

      // swing feet fly under their constant forces; their reaction wrenches
      // move to the right-hand side of the stance allocation
      const int n_stance = par == 0 ? (p.n + 1) / 2 : p.n / 2;
      Mat alloc(3, 2 * n_stance);
      int col = 0;
      for (int k = 0; k < p.n; ++k) {
        const double dxk = c * p.hips[k][0] - s * p.hips[k][1];
        const double dyk = s * p.hips[k][0] + c * p.hips[k][1];
        if (k % 2 == par) {
          alloc.col(col) << -1.0, 0.0, dyk;
          alloc.col(col + 1) << 0.0, -1.0, -dxk;
          col += 2;
        } else {
          const double fx = q[polyped_force_index(k)];
          const double fy = q[polyped_force_index(k) + 1];
          rhs[0] += fx;
          rhs[1] += fy;
          rhs[2] += dxk * fy - dyk * fx;
          const int fi = polyped_foot_index(k);
          dx[fi] = x[fi + 2];
          dx[fi + 1] = x[fi + 3];
          dx[fi + 2] = fx / p.foot_mass[k];
          dx[fi + 3] = fy / p.foot_mass[k];
        }
      }
      const Vec f_stance = alloc.completeOrthogonalDecomposition().solve(rhs);
      if ((alloc * f_stance - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm()))
        fail(ErrorCode::WrenchInfeasible,
             "stance allocation cannot realize the template wrench");
      const Vec w_total = alloc * f_stance + (w_des - rhs);
      dx[3] = w_total[0] / p.lls.m;
      dx[4] = w_total[1] / p.lls.m;
      dx[5] = w_total[2] / p.lls.J;
      // stance feet stay pinned: zero derivatives, set above
    };

    Domain d;
    d.id = par == 0 ? kPolypedEven : kPolypedOdd;
    d.dim = 6 + 4 * p.n;
    d.field = field;
    d.boundary_faces = {face};
    sys.domains.push_back(std::move(d));

    GuardFace step_end;
    step_end.domain_id = par == 0 ? kPolypedEven : kPolypedOdd;
    step_end.face_index = 0;
    step_end.target_domain_id = par == 0 ? kPolypedOdd : kPolypedEven;
    const int landing_parity = par == 0 ? 1 : 0;
    step_end.reset = [p, landing_parity](const Vec& x, const Vec&) {
      Vec out = x;  // plastic impact: landing feet keep position, lose velocity
      for (int k = 0; k < p.n; ++k) {
        if (k % 2 != landing_parity) continue;
        out[polyped_foot_index(k) + 2] = 0.0;
        out[polyped_foot_index(k) + 3] = 0.0;
      }
      return out;
    };
    sys.guards.push_back(std::move(step_end));
  }

  sys.init_params = [p, lls_sys](const HybridState& st) {
    return step_params(p, lls_sys, st.domain_id, st.x);
  };
  sys.update_params = [p, lls_sys](int guard_index, const Vec& x_post, const Vec&) {
    const int entered = guard_index == 0 ? kPolypedOdd : kPolypedEven;
    return step_params(p, lls_sys, entered, x_post);
  };
  return sys;
}

Vec polyped_step_start(const PolypedParams& params, double theta, double vx, double vy,
                       double omega, int domain_id) {
  const PolypedParams p = params.resolved();
  p.check();
  const double c = std::cos(theta), s = std::sin(theta);
  Vec x = Vec::Zero(6 + 4 * p.n);
  x[2] = theta;
  x[3] = vx;
  x[4] = vy;
  x[5] = omega;
  for (int k = 0; k < p.n; ++k) {
    const int fi = polyped_foot_index(k);
    x[fi] = c * p.targets[k][0] - s * p.targets[k][1];
    x[fi + 1] = s * p.targets[k][0] + c * p.targets[k][1];
  }
  (void)domain_id;  // the caller pairs the state with this domain
  return x;
}

Vec polyped_gait_seed(const PolypedParams& p) {
  return polyped_step_start(p, 0.0, 1.2, 0.80013543, 0.0, kPolypedEven);
}

}  // namespace hybred
