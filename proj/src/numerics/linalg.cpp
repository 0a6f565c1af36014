#include "hybred/numerics/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace hybred {

namespace {

std::string stencil_context(const Vec& x, const char* what) {
  std::ostringstream os;
  os << "map evaluation failed at stencil point [";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << "]: " << what;
  return os.str();
}

Vec eval_map(const VectorFn& f, const Vec& x) {
  try {
    return f(x);
  } catch (const Error& e) {
    // keep the original failure code visible through solver layers
    fail(e.code(), stencil_context(x, e.what()));
  } catch (const std::exception& e) {
    fail(ErrorCode::EvaluationFailure, stencil_context(x, e.what()));
  }
}

Mat fd_jacobian_steps(const VectorFn& f, const Vec& x, const Vec& h) {
  const Eigen::Index n = x.size();
  Mat J;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(h[i] > 0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
    Vec xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    Vec fp = eval_map(f, xp);
    Vec fm = eval_map(f, xm);
    if (fp.size() != fm.size())
      fail(ErrorCode::EvaluationFailure, "map output dimension varies across stencil");
    if (J.size() == 0) J.resize(fp.size(), n);
    if (fp.size() != J.rows())
      fail(ErrorCode::EvaluationFailure, "map output dimension varies across stencil");
    J.col(i) = (fp - fm) / (2 * h[i]);
  }
  if (J.size() == 0) J.resize(eval_map(f, x).size(), 0);
  return J;
}

}  // namespace

Mat fd_jacobian(const VectorFn& f, const Vec& x) {
  Vec h(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) h[i] = std::max(1e-6, 1e-6 * std::abs(x[i]));
  return fd_jacobian_steps(f, x, h);
}

Mat fd_jacobian(const VectorFn& f, const Vec& x, double step) {
  return fd_jacobian_steps(f, x, Vec::Constant(x.size(), step));
}

Mat fd_jacobian(const VectorFn& f, const Vec& x, const Vec& steps) {
  if (steps.size() != x.size())
    fail(ErrorCode::InvalidArgument, "per-coordinate step vector has wrong dimension");
  return fd_jacobian_steps(f, x, steps);
}

int numerical_rank(const Mat& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  if (!(smax > 0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * smax) ++r;
  return r;
}

Eigen::VectorXcd eigen(const Mat& M) {
  if (M.rows() != M.cols())
    fail(ErrorCode::InvalidArgument, "eigenvalues require a square matrix");
  if (M.rows() == 0) return Eigen::VectorXcd(0);
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    fail(ErrorCode::ConvergenceFailure, "eigenvalue iteration did not converge");
  std::vector<std::complex<double>> vals(es.eigenvalues().data(),
                                         es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  Eigen::VectorXcd out(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) out(static_cast<Eigen::Index>(i)) = vals[i];
  return out;
}

Vec newton_solve(const VectorFn& f, const Vec& x0, double tol, int max_iter) {
  Vec x = x0;
  for (int it = 0; it < max_iter; ++it) {
    Vec r = eval_map(f, x);
    if (r.size() != x.size())
      fail(ErrorCode::InvalidArgument, "newton_solve requires a square system");
    if (r.norm() <= tol) return x;
    Mat J = fd_jacobian(f, x);
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible())
      fail(ErrorCode::SingularJacobian, "Jacobian is singular at iterate " + std::to_string(it));
    x -= lu.solve(r);
  }
  if (eval_map(f, x).norm() <= tol) return x;
  fail(ErrorCode::NoConvergence,
       "residual above tolerance after " + std::to_string(max_iter) + " iterations");
}

Vec newton_solve_pinv(const VectorFn& f, const Vec& x0, double tol, int max_iter,
                      double sv_floor) {
  Vec x = x0;
  Vec r = eval_map(f, x);
  for (int it = 0; it < max_iter; ++it) {
    if (r.norm() <= tol) return x;
    Mat J = fd_jacobian(f, x);
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    double smax = s.size() ? s(0) : 0.0;
    if (!(smax > 0))
      fail(ErrorCode::SingularJacobian, "Jacobian vanished at iterate " + std::to_string(it));
    Vec ur = svd.matrixU().transpose() * r;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      ur(i) = (s(i) > sv_floor * smax) ? ur(i) / s(i) : 0.0;
    const Vec d = svd.matrixV() * ur;
    // Backtrack until the residual actually shrinks. A trial point can land
    // outside the region where the map evaluates at all (hybrid returns lose
    // the orbit for wild inputs), so an evaluation failure retreats rather
    // than propagating out of the solver.
    bool moved = false;
    double lambda = 1.0;
    for (int bt = 0; bt < 40; ++bt, lambda *= 0.5) {
      Vec trial = x - lambda * d;
      Vec rt;
      try {
        rt = f(trial);
      } catch (const Error&) {
        continue;
      } catch (const std::exception&) {
        continue;
      }
      if (!rt.allFinite() || rt.size() != r.size()) continue;
      if (rt.norm() < r.norm()) {
        x = std::move(trial);
        r = std::move(rt);
        moved = true;
        break;
      }
    }
    if (!moved)
      fail(ErrorCode::NoConvergence,
           "no productive step at iterate " + std::to_string(it) + " (residual " +
               std::to_string(r.norm()) + ")");
  }
  if (r.norm() <= tol) return x;
  fail(ErrorCode::NoConvergence,
       "residual above tolerance after " + std::to_string(max_iter) + " iterations");
}

Mat matrix_power(const Mat& A, int k) {
  if (A.rows() != A.cols())
    fail(ErrorCode::InvalidArgument, "matrix power requires a square matrix");
  if (k < 0) fail(ErrorCode::InvalidArgument, "matrix power requires k >= 0");
  Mat P = Mat::Identity(A.rows(), A.cols());
  for (int i = 0; i < k; ++i) P = P * A;
  return P;
}

Mat range_basis(const Mat& M, double tol) {
  if (M.size() == 0) return Mat(M.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU);
  int r = numerical_rank(M, tol);
  return svd.matrixU().leftCols(r);
}

Mat kernel_basis(const Mat& M, double tol) {
  if (M.size() == 0) return Mat::Identity(M.cols(), M.cols());
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
  int r = numerical_rank(M, tol);
  return svd.matrixV().rightCols(M.cols() - r);
}

}  // namespace hybred
