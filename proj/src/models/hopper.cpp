#include "hybred/models/hopper.hpp"

#include <cmath>
#include <utility>

#include "hybred/errors.hpp"

namespace hybred {

void HopperParams::check() const {
  if (!(m > 0 && mu > 0 && k > 0 && b > 0 && ell > 0 && g > 0))
    fail(ErrorCode::InvalidArgument, "hopper params must be positive");
  if (!(a > 1.0)) fail(ErrorCode::InvalidArgument, "hopper stance stiffness multiplier must exceed 1");
}

namespace {

// Shared construction; `actuated` threads the stance stiffness multiplier
// through the runtime parameter vector instead of freezing p.a.
HybridSystem build_hopper(const HopperParams& p, bool actuated) {
  p.check();
  HybridSystem sys;
  sys.name = actuated ? "hopper_controlled" : "hopper";
  sys.param_dim = actuated ? 1 : 0;

  const double m = p.m, mu = p.mu, k = p.k, b = p.b, ell = p.ell, g = p.g;
  const double a_fixed = p.a;

  Domain aerial;
  aerial.id = kHopperAerial;
  aerial.dim = 4;
  aerial.field = [=](const Vec& x, const Vec&, Vec& dx) {
    const double fs = k * (ell - (x[0] - x[2]));  // spring force on the body
    dx.resize(4);
    dx[0] = x[1];
    dx[1] = (fs - mu * g) / mu;
    dx[2] = x[3];
    dx[3] = (-fs - b * x[3] - m * g) / m;
  };
  aerial.boundary_faces = {[](const Vec& x, const Vec&) { return x[2]; }};  // foot above ground

  Domain ground;
  ground.id = kHopperGround;
  ground.dim = 2;
  if (actuated) {
    ground.field = [=](const Vec& x, const Vec& par, Vec& dx) {
      dx.resize(2);
      dx[0] = x[1];
      dx[1] = (par[0] * k * (ell - x[0]) - mu * g) / mu;
    };
  } else {
    ground.field = [=](const Vec& x, const Vec&, Vec& dx) {
      dx.resize(2);
      dx[0] = x[1];
      dx[1] = (a_fixed * k * (ell - x[0]) - mu * g) / mu;
    };
  }
  // Contact persists while the aerial-mode spring force cannot lift the foot.
  ground.boundary_faces = {[=](const Vec& x, const Vec&) { return m * g + k * (ell - x[0]); }};

  GuardFace touchdown;
  touchdown.domain_id = kHopperAerial;
  touchdown.face_index = 0;
  touchdown.target_domain_id = kHopperGround;
  touchdown.predicate = [](const Vec& x, const Vec&) { return x[3] < 0.0; };
  touchdown.reset = [](const Vec& x, const Vec&) {
    Vec out(2);
    out << x[0], x[1];  // plastic impact: foot state discarded
    return out;
  };

  GuardFace liftoff;
  liftoff.domain_id = kHopperGround;
  liftoff.face_index = 0;
  liftoff.target_domain_id = kHopperAerial;
  liftoff.predicate = [](const Vec& x, const Vec&) { return x[1] > 0.0; };
  liftoff.reset = [](const Vec& x, const Vec&) {
    Vec out(4);
    out << x[0], x[1], 0.0, 0.0;  // foot starts at rest on the ground
    return out;
  };

  sys.domains = {std::move(aerial), std::move(ground)};
  sys.guards = {std::move(touchdown), std::move(liftoff)};
  if (actuated) {
    const double a0 = a_fixed;
    sys.init_params = [a0](const HybridState&) {
      Vec par(1);
      par[0] = a0;
      return par;
    };
  }
  return sys;
}

}  // namespace

HybridSystem make_hopper(const HopperParams& p) { return build_hopper(p, false); }

HybridSystem make_hopper_controlled(const HopperParams& p) { return build_hopper(p, true); }

double hopper_energy(const HopperParams& p, int domain_id, const Vec& x) {
  if (domain_id == kHopperAerial) {
    const double stretch = p.ell - (x[0] - x[2]);
    return 0.5 * p.mu * x[1] * x[1] + 0.5 * p.m * x[3] * x[3] + p.mu * p.g * x[0] +
           p.m * p.g * x[2] + 0.5 * p.k * stretch * stretch;
  }
  if (domain_id == kHopperGround) {
    const double stretch = p.ell - x[0];
    return 0.5 * p.mu * x[1] * x[1] + p.mu * p.g * x[0] + 0.5 * p.a * p.k * stretch * stretch;
  }
  fail(ErrorCode::InvalidArgument, "hopper_energy: unknown domain id");
}

}  // namespace hybred
