#include <cmath>
#include <random>

#include "doctest.h"
#include "hybred/numerics/linalg.hpp"
#include "hybred/numerics/ode.hpp"

using namespace hybred;

namespace {

const double kPi = std::acos(-1.0);

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error to be thrown");
  return ErrorCode::InvalidArgument;
}

// deterministic test matrices
Mat random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&] { return 2.0 * (static_cast<double>(rng()) / 1.8446744073709552e19) - 1.0; };
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = draw();
  return M;
}

Mat random_orthogonal(int n, std::uint64_t seed) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(n, n, seed));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("constant descent hits its guard at t = 1") {
  FieldFn f = [](const Vec&, Vec& dx) { dx = Vec::Constant(1, -1.0); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[0]; }};
  IntegratorOptions opts;
  auto r = integrate_to_event(f, guards, Vec::Constant(1, 1.0), 10.0, opts);
  CHECK(r.guard_id == 0);
  CHECK(std::abs(r.t_hit - 1.0) < 1e-10);
  CHECK(std::abs(r.x_hit[0]) <= 10 * opts.event_tol);
  CHECK(r.segment.t_start == 0.0);
  CHECK(r.segment.t_end == r.t_hit);
}

TEST_CASE("planar rotation crosses the horizontal axis at t = pi") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[1]; }};
  IntegratorOptions opts;
  auto r = integrate_to_event(f, guards, vec2(1.0, 0.0), 10.0, opts);

  // the start lies on the guard's zero set moving inward, so it must be
  // skipped and the half-turn crossing found instead
  CHECK(std::abs(r.t_hit - kPi) < 1e-7);
  CHECK(std::abs(r.x_hit[0] + 1.0) < 1e-7);
  CHECK(std::abs(r.x_hit[1]) <= 10 * opts.event_tol);

  // the recorded segment ends bit-identically at the reported hit state
  REQUIRE(!r.segment.empty());
  CHECK((r.segment.end_state().array() == r.x_hit.array()).all());
  CHECK(r.segment.t_end == r.t_hit);

  // dense output mid-flight: state at t = pi/2 is (0, 1)
  Vec mid = r.segment.eval(kPi / 2);
  CHECK(std::abs(mid[0]) < 1e-6);
  CHECK(std::abs(mid[1] - 1.0) < 1e-6);
}

TEST_CASE("event integration is deterministic bit for bit") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[1]; }};
  IntegratorOptions opts;
  auto a = integrate_to_event(f, guards, vec2(1.0, 0.0), 10.0, opts);
  auto b = integrate_to_event(f, guards, vec2(1.0, 0.0), 10.0, opts);
  CHECK(a.t_hit == b.t_hit);
  CHECK((a.x_hit.array() == b.x_hit.array()).all());
  REQUIRE(a.segment.steps.size() == b.segment.steps.size());
  for (size_t i = 0; i < a.segment.steps.size(); ++i)
    CHECK((a.segment.steps[i].x1.array() == b.segment.steps[i].x1.array()).all());
}

TEST_CASE("no guard crossing before t_max raises NoEventBeforeTmax") {
  FieldFn f = [](const Vec&, Vec& dx) { dx = Vec::Constant(1, 1.0); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return 10.0 - x[0]; }};
  IntegratorOptions opts;
  CHECK(code_of([&] { integrate_to_event(f, guards, Vec::Zero(1), 5.0, opts); }) ==
        ErrorCode::NoEventBeforeTmax);
}

TEST_CASE("the earliest of several guards wins") {
  FieldFn f = [](const Vec&, Vec& dx) { dx = Vec::Constant(1, -1.0); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[0] - 1.0; },
                                  [](const Vec& x) { return x[0]; }};
  IntegratorOptions opts;
  auto r = integrate_to_event(f, guards, Vec::Constant(1, 2.0), 10.0, opts);
  CHECK(r.guard_id == 0);
  CHECK(std::abs(r.t_hit - 1.0) < 1e-10);

  // the non-triggered guard stays clear of its zero set along the whole path
  for (int k = 0; k <= 100; ++k) {
    double t = r.segment.t_start + (r.segment.t_end - r.segment.t_start) * k / 100.0;
    CHECK(guards[1](r.segment.eval(t)) >= -opts.event_tol);
  }
}

TEST_CASE("a crossing below the transversality floor is rejected") {
  // the flow pierces {y = 0} at an angle of about 9e-7 radians
  FieldFn f = [](const Vec&, Vec& dx) { dx = vec2(1000.0, -9e-4); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[1]; }};
  IntegratorOptions opts;
  CHECK(code_of([&] { integrate_to_event(f, guards, vec2(0.0, 9e-4), 5.0, opts); }) ==
        ErrorCode::TangentialCrossing);

  // an exempt watch reports the same crossing with its cosine instead
  std::vector<Watch> w = {Watch{guards[0], -1, true, true}};
  auto out = flow_to_watch(f, w, vec2(0.0, 9e-4), 0.0, 5.0, opts);
  REQUIRE(out.stop == FlowOutcome::Stop::WatchHit);
  CHECK(out.crossing_cosine < kTransversalityFloor);
  CHECK(out.crossing_cosine > 0);
  CHECK(!out.improper);
}

TEST_CASE("a state starting on a face and exiting transversally fires at t0") {
  FieldFn f = [](const Vec&, Vec& dx) { dx = Vec::Constant(1, -1.0); };
  std::vector<ScalarFn> guards = {[](const Vec& x) { return x[0]; }};
  IntegratorOptions opts;
  auto r = integrate_to_event(f, guards, Vec::Zero(1), 10.0, opts);
  CHECK(r.t_hit == 0.0);
  CHECK(r.x_hit[0] == 0.0);
  CHECK(r.segment.empty());
}

TEST_CASE("a tangential start that drifts out is reported as an improper exit") {
  // nearly parallel to {x = 0}: the start check sees a grazing direction and
  // treats the state as staying, but the flow then sinks through the face
  FieldFn f = [](const Vec&, Vec& dx) { dx = vec2(-1e-4, 1000.0); };
  std::vector<Watch> w = {Watch{[](const Vec& x) { return x[0]; }, -1, true, false}};
  IntegratorOptions opts;
  auto out = flow_to_watch(f, w, vec2(0.0, 0.0), 0.0, 1.0, opts);
  REQUIRE(out.stop == FlowOutcome::Stop::WatchHit);
  CHECK(out.improper);
  CHECK(out.x_hit[0] < 0);
}

TEST_CASE("a section watch starting on its zero set waits for the full return") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  // start on {y = 0} moving downward; a non-immediate watch must skip the
  // start and stop after one full loop
  std::vector<Watch> w = {Watch{[](const Vec& x) { return x[1]; }, -1, false, false}};
  IntegratorOptions opts;
  auto out = flow_to_watch(f, w, vec2(-1.0, 0.0), 0.0, 10.0, opts);
  REQUIRE(out.stop == FlowOutcome::Stop::WatchHit);
  CHECK(std::abs(out.t_hit - 2 * kPi) < 1e-6);
  CHECK(std::abs(out.x_hit[0] + 1.0) < 1e-6);
  CHECK(std::abs(out.x_hit[1]) < 1e-10);
}

TEST_CASE("zero horizon returns an empty segment and the initial state") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  IntegratorOptions opts;
  auto out = flow_to_watch(f, {}, vec2(1.0, 0.0), 0.0, 0.0, opts);
  CHECK(out.stop == FlowOutcome::Stop::TimeLimit);
  CHECK(out.t_hit == 0.0);
  CHECK((out.x_hit.array() == vec2(1.0, 0.0).array()).all());
  CHECK(out.segment.empty());
}

TEST_CASE("max_step caps every accepted step") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  IntegratorOptions opts;
  opts.max_step = 1e-3;
  auto out = flow_to_watch(f, {}, vec2(1.0, 0.0), 0.0, 1.0, opts);
  REQUIRE(out.stop == FlowOutcome::Stop::TimeLimit);
  for (const auto& s : out.segment.steps) CHECK(s.t1 - s.t0 <= 1e-3 * (1 + 1e-12));
}

TEST_CASE("invalid integrator options are rejected") {
  IntegratorOptions opts;
  opts.rel_tol = -1;
  CHECK(code_of([&] { opts.check(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("flow_derivative and crossing_cosine agree with the geometry") {
  FieldFn f = [](const Vec& x, Vec& dx) { dx = vec2(-x[1], x[0]); };
  ScalarFn w = [](const Vec& x) { return x[1]; };
  Vec p = vec2(1.0, 0.0);
  CHECK(std::abs(flow_derivative(f, w, p) - 1.0) < 1e-6);   // d/dt y = x = 1
  CHECK(std::abs(crossing_cosine(f, w, p) - 1.0) < 1e-6);   // grad || field
  ScalarFn wx = [](const Vec& x) { return x[0]; };
  CHECK(std::abs(crossing_cosine(f, wx, p)) < 1e-6);        // grad perp field
}

TEST_CASE("finite-difference Jacobian reproduces linear maps exactly") {
  for (int n : {1, 3, 8}) {
    Mat A = random_matrix(n, n, 1000 + n);
    Vec b = random_matrix(n, 1, 2000 + n).col(0);
    VectorFn f = [&](const Vec& x) { return Vec(A * x + b); };
    Vec x = random_matrix(n, 1, 3000 + n).col(0);
    Mat J = fd_jacobian(f, x);
    CHECK((J - A).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("finite-difference Jacobian honors explicit steps") {
  VectorFn f = [](const Vec& x) { return Vec(x.array().square().matrix()); };
  Vec x = vec2(2.0, -3.0);
  Mat J = fd_jacobian(f, x, 1e-5);
  CHECK(std::abs(J(0, 0) - 4.0) < 1e-8);
  CHECK(std::abs(J(1, 1) + 6.0) < 1e-8);
  Mat J2 = fd_jacobian(f, x, vec2(1e-5, 1e-4));
  CHECK(std::abs(J2(1, 1) + 6.0) < 1e-7);
  CHECK(std::abs(J2(0, 1)) < 1e-9);
}

TEST_CASE("a failing map evaluation is reported with its stencil point") {
  VectorFn f = [](const Vec& x) -> Vec {
    if (x[0] > 0.5) throw std::runtime_error("pole");
    return x;
  };
  try {
    fd_jacobian(f, Vec::Constant(1, 0.5));
    FAIL("expected EvaluationFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EvaluationFailure);
    CHECK(std::string(e.what()).find("stencil") != std::string::npos);
  }
}

TEST_CASE("numerical rank counts singular values against the largest") {
  CHECK(numerical_rank(Mat::Zero(4, 3)) == 0);
  CHECK(numerical_rank(Mat::Identity(5, 5)) == 5);

  Vec q = vec2(0.5, 0.3), p = vec2(0.6, 0.8);
  CHECK(numerical_rank(q * p.transpose()) == 1);

  Mat D = Mat::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = 1e-9;
  CHECK(numerical_rank(D) == 1);
  D(1, 1) = 1e-7;
  CHECK(numerical_rank(D) == 2);
}

TEST_CASE("numerical rank is invariant under orthogonal transforms") {
  Mat M = random_matrix(6, 4, 7);
  M.col(3) = M.col(0) + 2 * M.col(1);  // force rank 3
  Mat U = random_orthogonal(6, 8), V = random_orthogonal(4, 9);
  CHECK(numerical_rank(M) == 3);
  CHECK(numerical_rank(U * M * V) == 3);
}

TEST_CASE("eigenvalues come sorted by magnitude, then real, then imaginary") {
  Mat D = Mat::Zero(3, 3);
  D(0, 0) = 1.0;
  D(1, 1) = -2.0;
  D(2, 2) = 0.5;
  auto ev = eigen(D);
  CHECK(ev(0).real() == doctest::Approx(-2.0));
  CHECK(ev(1).real() == doctest::Approx(1.0));
  CHECK(ev(2).real() == doctest::Approx(0.5));

  // equal magnitude, ties by real part
  Mat T = Mat::Zero(2, 2);
  T(0, 0) = -1.0;
  T(1, 1) = 1.0;
  auto tv = eigen(T);
  CHECK(tv(0).real() == doctest::Approx(1.0));
  CHECK(tv(1).real() == doctest::Approx(-1.0));

  // conjugate pair: positive imaginary part first
  Mat R = Mat::Zero(2, 2);
  R(0, 1) = -2.0;
  R(1, 0) = 2.0;
  auto rv = eigen(R);
  CHECK(rv(0).imag() == doctest::Approx(2.0));
  CHECK(rv(1).imag() == doctest::Approx(-2.0));
}

TEST_CASE("the spectrum is similarity invariant") {
  Mat A = random_matrix(5, 5, 11);
  Mat S = random_matrix(5, 5, 12);
  S += 5.0 * Mat::Identity(5, 5);  // keep it comfortably invertible
  Mat B = S * A * S.inverse();
  auto ea = eigen(A), eb = eigen(B);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(ea(i) - eb(i)) < 1e-6);
}

TEST_CASE("newton_solve finds simple roots and reports failure modes") {
  VectorFn f = [](const Vec& x) { return Vec(Vec::Constant(1, x[0] * x[0] - 4.0)); };
  Vec root = newton_solve(f, Vec::Constant(1, 3.0));
  CHECK(std::abs(root[0] - 2.0) < 1e-9);

  VectorFn flat = [](const Vec& x) { return Vec(Vec::Constant(1, x[0] * x[0] + 1.0)); };
  CHECK(code_of([&] { newton_solve(flat, Vec::Zero(1)); }) == ErrorCode::SingularJacobian);

  // the classic two-cycle 0 -> 1 -> 0 of x^3 - 2x + 2
  VectorFn cyc = [](const Vec& x) {
    return Vec(Vec::Constant(1, x[0] * x[0] * x[0] - 2.0 * x[0] + 2.0));
  };
  CHECK(code_of([&] { newton_solve(cyc, Vec::Zero(1), 1e-12, 40); }) ==
        ErrorCode::NoConvergence);
}

TEST_CASE("pseudoinverse Newton handles rank-deficient Jacobians") {
  // both equations pin x only; y must stay untouched
  VectorFn f = [](const Vec& v) { return Vec(vec2(v[0] - 1.0, v[0] - 1.0)); };
  Vec sol = newton_solve_pinv(f, vec2(0.0, 5.0));
  CHECK(std::abs(sol[0] - 1.0) < 1e-9);
  CHECK(sol[1] == doctest::Approx(5.0));
}

TEST_CASE("matrix powers") {
  Mat A = Mat::Identity(2, 2);
  A(0, 1) = 1.0;
  Mat A3 = matrix_power(A, 3);
  CHECK(A3(0, 1) == doctest::Approx(3.0));
  CHECK((matrix_power(A, 0) - Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("range and kernel bases of a rank-one product") {
  Vec q = vec2(0.5, 0.3), p = vec2(0.6, 0.8);
  Mat M = q * p.transpose();
  Mat R = range_basis(M);
  Mat K = kernel_basis(M);
  REQUIRE(R.cols() == 1);
  REQUIRE(K.cols() == 1);
  CHECK(std::abs(std::abs(R.col(0).dot(q.normalized())) - 1.0) < 1e-12);
  CHECK(std::abs(K.col(0).norm() - 1.0) < 1e-12);
  CHECK((M * K).norm() < 1e-12);
  CHECK(std::abs(K.col(0).dot(p)) < 1e-12);
}
