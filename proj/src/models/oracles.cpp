#include "hybred/models/oracles.hpp"

namespace hybred {

namespace {

// counterclockwise rotation shared by both half-turn domains
void rotation_field(const Vec& x, const Vec&, Vec& dx) {
  dx.resize(2);
  dx[0] = -x[1];
  dx[1] = x[0];
}

HybridSystem halfturn_system(double lambda, double x0, bool controlled) {
  if (!(lambda > 0) || lambda > 1)
    fail(ErrorCode::InvalidArgument, "half-turn contraction must lie in (0, 1]");
  if (!(x0 > 0)) fail(ErrorCode::InvalidArgument, "half-turn fixed radius must be positive");

  HybridSystem sys;
  sys.name = controlled ? "halfturn-controlled" : "halfturn";
  sys.param_dim = controlled ? 1 : 0;

  Domain upper;
  upper.id = 0;
  upper.dim = 2;
  upper.field = rotation_field;
  upper.boundary_faces = {[](const Vec& x, const Vec&) { return x[1]; }};

  Domain lower;
  lower.id = 1;
  lower.dim = 2;
  lower.field = rotation_field;
  lower.boundary_faces = {[](const Vec& x, const Vec&) { return -x[1]; }};

  sys.domains = {upper, lower};

  auto actuation = [controlled](const Vec& p) { return controlled ? p[0] : 0.0; };

  GuardFace left;  // upper -> lower at the negative u axis
  left.domain_id = 0;
  left.face_index = 0;
  left.target_domain_id = 1;
  left.predicate = [](const Vec& x, const Vec&) { return x[0] < 0; };
  left.reset = [lambda, x0, actuation](const Vec& x, const Vec& p) {
    double r = -x[0];
    double r_new = x0 + lambda * (r - x0) + actuation(p);
    return Vec(Eigen::Vector2d(-r_new, 0.0));
  };

  GuardFace right;  // lower -> upper at the positive u axis
  right.domain_id = 1;
  right.face_index = 0;
  right.target_domain_id = 0;
  right.predicate = [](const Vec& x, const Vec&) { return x[0] > 0; };
  right.reset = [lambda, x0, actuation](const Vec& x, const Vec& p) {
    double r = x[0];
    double r_new = x0 + lambda * (r - x0) + actuation(p);
    return Vec(Eigen::Vector2d(r_new, 0.0));
  };

  sys.guards = {left, right};
  return sys;
}

}  // namespace

HalfTurnOracle make_halfturn_oracle(double lambda, double x0) {
  HalfTurnOracle o;
  o.lambda = lambda;
  o.x0 = x0;
  o.system = halfturn_system(lambda, x0, false);
  return o;
}

ControlledHalfTurnOracle make_halfturn_controlled(double lambda, double x0) {
  ControlledHalfTurnOracle o;
  o.lambda = lambda;
  o.x0 = x0;
  o.system = halfturn_system(lambda, x0, true);
  return o;
}

ProjectGlueOracle make_projectglue_oracle() {
  ProjectGlueOracle o;
  o.p = Vec(2);
  o.p << 0.6, 0.8;
  o.q = Vec(2);
  o.q << 0.5, 0.25;

  HybridSystem sys;
  sys.name = "projectglue";

  Domain up;  // (a1, a2, s)
  up.id = 0;
  up.dim = 3;
  up.field = [](const Vec&, const Vec&, Vec& dx) {
    dx.resize(3);
    dx << 0, 0, 1;
  };
  up.boundary_faces = {[](const Vec& x, const Vec&) { return 1.0 - x[2]; }};

  Domain down;  // (b, s)
  down.id = 1;
  down.dim = 2;
  down.field = [](const Vec&, const Vec&, Vec& dx) {
    dx.resize(2);
    dx << 0, 1;
  };
  down.boundary_faces = {[](const Vec& x, const Vec&) { return 1.0 - x[1]; }};

  sys.domains = {up, down};

  GuardFace project;
  project.domain_id = 0;
  project.face_index = 0;
  project.target_domain_id = 1;
  project.reset = [p = o.p](const Vec& x, const Vec&) {
    return Vec(Eigen::Vector2d(p[0] * x[0] + p[1] * x[1], 0.0));
  };

  GuardFace glue;
  glue.domain_id = 1;
  glue.face_index = 0;
  glue.target_domain_id = 0;
  glue.reset = [q = o.q](const Vec& x, const Vec&) {
    return Vec(Eigen::Vector3d(q[0] * x[0], q[1] * x[0], 0.0));
  };

  sys.guards = {project, glue};
  o.system = sys;
  return o;
}

LinearControlledOracle make_linear_controlled(const Mat& a, const Mat& b) {
  const int d = static_cast<int>(a.rows());
  if (a.cols() != d || b.rows() != d)
    fail(ErrorCode::InvalidArgument, "state matrix must be square and match the input matrix");

  LinearControlledOracle o;
  o.a = a;
  o.b = b;

  HybridSystem sys;
  sys.name = "linear-controlled";
  sys.param_dim = static_cast<int>(b.cols());

  Domain dom;  // (x_1..x_d, s)
  dom.id = 0;
  dom.dim = d + 1;
  dom.field = [d](const Vec&, const Vec&, Vec& dx) {
    dx = Vec::Zero(d + 1);
    dx[d] = 1;
  };
  dom.boundary_faces = {[d](const Vec& x, const Vec&) { return 1.0 - x[d]; }};
  sys.domains = {dom};

  GuardFace update;
  update.domain_id = 0;
  update.face_index = 0;
  update.target_domain_id = 0;
  update.reset = [a, b, d](const Vec& x, const Vec& p) {
    Vec out(d + 1);
    out.head(d) = a * x.head(d) + b * p;
    out[d] = 0.0;
    return out;
  };
  sys.guards = {update};

  o.system = sys;
  return o;
}

}  // namespace hybred
