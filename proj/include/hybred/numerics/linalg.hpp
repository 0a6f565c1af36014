#pragma once

#include <Eigen/Dense>
#include <functional>

#include "hybred/errors.hpp"
#include "hybred/numerics/ode.hpp"

namespace hybred {

using VectorFn = std::function<Vec(const Vec&)>;

// Central-difference Jacobian of f at x. The default per-coordinate step is
// max(1e-6, 1e-6*|x_i|); the scalar overload uses one step for every
// coordinate, the vector overload one per coordinate. A failing evaluation is
// reported as EvaluationFailure naming the offending stencil point.
Mat fd_jacobian(const VectorFn& f, const Vec& x);
Mat fd_jacobian(const VectorFn& f, const Vec& x, double step);
Mat fd_jacobian(const VectorFn& f, const Vec& x, const Vec& steps);

// Number of singular values exceeding tol times the largest one; the zero
// matrix has rank 0.
int numerical_rank(const Mat& M, double tol = 1e-8);

// Eigenvalues sorted by decreasing magnitude, ties broken by decreasing real
// part and then decreasing imaginary part. Throws ConvergenceFailure if the
// QR iteration does not converge.
Eigen::VectorXcd eigen(const Mat& M);

// Plain Newton iteration on a square system using finite-difference
// Jacobians. Succeeds when |f(x)| <= tol; throws SingularJacobian when the
// Jacobian is not invertible and NoConvergence when max_iter is exhausted.
Vec newton_solve(const VectorFn& f, const Vec& x0, double tol = 1e-12, int max_iter = 50);

// Least-squares Newton via SVD pseudoinverse, tolerating singular or
// non-square Jacobians (directions with singular value below sv_floor times
// the largest are dropped). Used for fixed points with unit multipliers.
Vec newton_solve_pinv(const VectorFn& f, const Vec& x0, double tol = 1e-12,
                      int max_iter = 50, double sv_floor = 1e-10);

// A^k for k >= 0 (k = 0 gives the identity).
Mat matrix_power(const Mat& A, int k);

// Orthonormal bases for the range and kernel of M, with the same rank
// threshold convention as numerical_rank.
Mat range_basis(const Mat& M, double tol = 1e-8);
Mat kernel_basis(const Mat& M, double tol = 1e-8);

}  // namespace hybred
