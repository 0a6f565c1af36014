#include "hybred/models/lls.hpp"

#include <cmath>
#include <utility>

#include "hybred/errors.hpp"

namespace hybred {

namespace {

// hip position relative to the stance foot, world axes
inline void hip_rel(const LLSParams& p, const Vec& x, double& hx, double& hy) {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  hx = x[0] + c * p.h;
  hy = x[1] + s * p.h;
}

}  // namespace

void LLSParams::check() const {
  if (!(m > 0 && J > 0 && ell > 0 && kl > 0))
    fail(ErrorCode::InvalidArgument, "lls mass, inertia, rest length, stiffness must be positive");
  if (!(beta > 0 && beta < M_PI / 2))
    fail(ErrorCode::InvalidArgument, "lls touchdown angle must lie in (0, pi/2)");
}

double lls_leg_length(const LLSParams& p, const Vec& x) {
  double hx, hy;
  hip_rel(p, x, hx, hy);
  return std::hypot(hx, hy);
}

double lls_energy(const LLSParams& p, const Vec& x) {
  const double eta = lls_leg_length(p, x);
  return 0.5 * p.m * (x[3] * x[3] + x[4] * x[4]) + 0.5 * p.J * x[5] * x[5] +
         0.5 * p.kl * (eta - p.ell) * (eta - p.ell);
}

Vec lls_step_start(const LLSParams& p, double theta, double vx, double vy, double omega,
                   int side) {
  const double c = std::cos(theta), s = std::sin(theta);
  // body-frame hip-to-foot direction at touchdown
  const double dx = std::cos(p.beta), dy = side * std::sin(p.beta);
  Vec x(6);
  // r = -R(theta) * (h_offset + ell * d)
  x[0] = -(c * (p.h + p.ell * dx) - s * (p.ell * dy));
  x[1] = -(s * (p.h + p.ell * dx) + c * (p.ell * dy));
  x[2] = theta;
  x[3] = vx;
  x[4] = vy;
  x[5] = omega;
  return x;
}

Vec lls_gait_seed(const LLSParams& p) {
  return lls_step_start(p, 0.0, 1.2, 0.80013543, 0.0, +1);
}

HybridSystem make_lls(const LLSParams& p) {
  p.check();
  HybridSystem sys;
  sys.name = "lls";
  sys.param_dim = 0;

  auto field = [p](const Vec& x, const Vec&, Vec& dx) {
    double hx, hy;
    hip_rel(p, x, hx, hy);
    const double eta = std::hypot(hx, hy);
    const double scale = -p.kl * (eta - p.ell) / eta;  // spring force on the hip
    const double fx = scale * hx, fy = scale * hy;
    const double c = std::cos(x[2]), s = std::sin(x[2]);
    const double ax = c * p.h, ay = s * p.h;  // hip offset from COM, world axes
    dx.resize(6);
    dx[0] = x[3];
    dx[1] = x[4];
    dx[2] = x[5];
    dx[3] = fx / p.m;
    dx[4] = fy / p.m;
    dx[5] = (ax * fy - ay * fx) / p.J;
  };
  auto face = [p](const Vec& x, const Vec&) { return p.ell - lls_leg_length(p, x); };

  for (int side : {+1, -1}) {
    Domain d;
    d.id = (side > 0) ? kLLSLeft : kLLSRight;
    d.dim = 6;
    d.field = field;
    d.boundary_faces = {face};
    sys.domains.push_back(std::move(d));

    GuardFace step_end;
    step_end.domain_id = d.id;
    step_end.face_index = 0;
    step_end.target_domain_id = (side > 0) ? kLLSRight : kLLSLeft;
    const int next_side = -side;
    step_end.reset = [p, next_side](const Vec& x, const Vec&) {
      return lls_step_start(p, x[2], x[3], x[4], x[5], next_side);
    };
    sys.guards.push_back(std::move(step_end));
  }
  return sys;
}

}  // namespace hybred
