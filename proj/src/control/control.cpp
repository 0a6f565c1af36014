#include "hybred/control/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <utility>

#include "hybred/errors.hpp"

namespace hybred {

namespace {

PoincareMapHandle cycle_handle(const ControlledReturnMap& map, const Vec& theta) {
  PoincareMapHandle h;
  h.system = map.system;
  h.section = map.section;
  h.direction = map.direction;
  h.opts = map.opts;
  h.opts.params = theta;
  return h;
}

Vec stack(const std::vector<Vec>& thetas) {
  Eigen::Index total = 0;
  for (const Vec& t : thetas) total += t.size();
  Vec out(total);
  Eigen::Index at = 0;
  for (const Vec& t : thetas) {
    out.segment(at, t.size()) = t;
    at += t.size();
  }
  return out;
}

std::vector<Vec> unstack(const Vec& flat, int count, int each) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(flat.segment(i * each, each));
  return out;
}

// orthonormal basis with the same column count (full column rank required)
Mat orth_cols(const Mat& s) {
  if (s.cols() == 0) return Mat(s.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < s.cols(); ++i)
    if (!(sv(i) > 1e-12 * sv(0)))
      fail(ErrorCode::InvalidArgument, "target subspace basis is rank deficient");
  return svd.matrixU().leftCols(s.cols());
}

Mat orth_complement(const Mat& on, int dim) {
  if (on.cols() == 0) return Mat::Identity(dim, dim);
  if (on.cols() == dim) return Mat(dim, 0);
  return kernel_basis(on.transpose(), 1e-12);
}

// Deadbeat state feedback for the pair (a, b): all controllable eigenvalues
// placed at zero, built from a single-input chain. The controllability chain
// x_1 = b w, x_{j+1} = a x_j + b u_j is grown greedily for orthogonality, the
// chain inputs define a preliminary feedback that makes the pair behave as a
// single-input one with controllability matrix exactly [x_1 ... x_c], and the
// classical characteristic-polynomial gain for z^c finishes the job.
// Uncontrollable modes must already be nilpotent.
Mat nilpotent_gain(const Mat& a, const Mat& b) {
  const int n = static_cast<int>(a.rows());
  const int p = static_cast<int>(b.cols());
  if (n == 0) return Mat(p, 0);
  const double scale = std::max(1.0, a.norm());

  Mat ctrb(n, static_cast<Eigen::Index>(n) * p);
  Mat blk = b;
  for (int i = 0; i < n; ++i) {
    ctrb.middleCols(static_cast<Eigen::Index>(i) * p, p) = blk;
    blk = a * blk;
  }
  const Mat range = range_basis(ctrb, 1e-10);
  const int c = static_cast<int>(range.cols());
  const Mat rest = orth_complement(range, n);

  if (rest.cols() > 0) {
    const Mat auc = rest.transpose() * a * rest;
    const double defect = matrix_power(auc, static_cast<int>(rest.cols())).norm();
    if (defect > 1e-9 * std::max(1.0, std::pow(auc.norm(), static_cast<int>(rest.cols())))) {
      std::ostringstream os;
      os << "uncontrollable modes are not nilpotent (defect " << defect << ")";
      fail(ErrorCode::NotStabilizable, os.str());
    }
  }
  if (c == 0) return Mat::Zero(p, n);

  const Mat ac = range.transpose() * a * range;
  const Mat bc = range.transpose() * b;

  // one shot: if the inputs can cancel the whole controllable block, the
  // closed loop is zero outright (square invertible inputs land here)
  {
    Mat fc = -bc.completeOrthogonalDecomposition().solve(ac);
    if ((ac + bc * fc).norm() <= 1e-12 * scale) return fc * range.transpose();
  }

  std::mt19937_64 rng(9001);
  std::normal_distribution<double> gauss;
  auto candidates = [&](int dim) {
    std::vector<Vec> cs;
    for (int j = 0; j < dim; ++j) {
      cs.push_back(Vec::Unit(dim, j));
      cs.push_back(-Vec::Unit(dim, j));
    }
    for (int j = 0; j < 6; ++j) {
      Vec r(dim);
      for (int i = 0; i < dim; ++i) r[i] = gauss(rng);
      if (r.norm() > 0) cs.push_back(r / r.norm());
    }
    cs.push_back(Vec::Zero(dim));
    return cs;
  };

  Mat best_fc;
  double best_defect = std::numeric_limits<double>::infinity();
  for (const Vec& w : candidates(p)) {
    Vec x1 = bc * w;
    if (x1.norm() < 1e-10 * scale) continue;
    Mat xs(c, c), us = Mat::Zero(p, c);
    xs.col(0) = x1;
    bool ok = true;
    for (int j = 1; j < c && ok; ++j) {
      // orthogonal projector onto the complement of the chain so far
      Eigen::HouseholderQR<Mat> qr(xs.leftCols(j));
      Mat q = qr.householderQ() * Mat::Identity(c, j);
      double best_gain = -1.0;
      Vec best_x, best_u;
      for (const Vec& u : candidates(p)) {
        Vec x = ac * xs.col(j - 1) + bc * u;
        const double fresh = (x - q * (q.transpose() * x)).norm();
        if (fresh > best_gain) {
          best_gain = fresh;
          best_x = x;
          best_u = u;
        }
      }
      if (best_gain < 1e-10 * scale) {
        ok = false;
        break;
      }
      xs.col(j) = best_x;
      us.col(j - 1) = best_u;
    }
    if (!ok) continue;
    Eigen::FullPivLU<Mat> lut(xs.transpose());
    if (!lut.isInvertible()) continue;
    const Mat f0 = lut.solve(us.transpose()).transpose();  // f0 * xs = us
    const Mat a1 = ac + bc * f0;
    // gain for characteristic polynomial z^c of the single-input pair (a1, x1)
    const Vec z = lut.solve(Vec::Unit(c, c - 1));
    const Mat f = -(z.transpose() * matrix_power(a1, c));
    const Mat fc = f0 + w * f;
    const double defect = matrix_power(ac + bc * fc, c).norm();
    if (defect < best_defect) {
      best_defect = defect;
      best_fc = fc;
    }
  }
  if (!std::isfinite(best_defect)) {
    fail(ErrorCode::NotStabilizable,
         "no input chain spans the controllable block; the pair is too degenerate");
  }
  return best_fc * range.transpose();
}

}  // namespace

ControlledReturnMap make_controlled_map(const HybridSystem& system, Section section,
                                        int direction, const Vec& nominal_u,
                                        const Vec& nominal_theta, PoincareOptions opts) {
  if (system.param_dim != static_cast<int>(nominal_theta.size()))
    fail(ErrorCode::InvalidArgument, "nominal input dimension does not match the plant's");
  ControlledReturnMap map;
  map.system = system;
  map.section = std::move(section);
  map.direction = direction;
  map.nominal_u = nominal_u;
  map.nominal_theta = nominal_theta;
  map.opts = std::move(opts);
  if (static_cast<int>(nominal_u.size()) != map.state_dim())
    fail(ErrorCode::InvalidArgument, "nominal point dimension does not match the section");
  const double res = (controlled_return_info(map, nominal_u, nominal_theta).u - nominal_u).norm();
  if (res > 1e-6) {
    std::ostringstream os;
    os << "nominal pair is not a controlled fixed point: |P(xi, theta) - xi| = " << res;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  return map;
}

ReturnInfo controlled_return_info(const ControlledReturnMap& map, const Vec& u,
                                  const Vec& theta) {
  if (theta.size() != map.nominal_theta.size())
    fail(ErrorCode::InvalidArgument, "cycle input has the wrong dimension");
  return first_return_info(cycle_handle(map, theta), u);
}

Vec controlled_return(const ControlledReturnMap& map, const Vec& u,
                      const std::vector<Vec>& thetas) {
  if (thetas.empty())
    fail(ErrorCode::InvalidArgument, "input sequence must cover at least one cycle");
  Vec cur = u;
  for (const Vec& theta : thetas) cur = controlled_return_info(map, cur, theta).u;
  return cur;
}

ControlLinearization linearize_control(const ControlledReturnMap& map) {
  ControlLinearization lin;
  lin.dx = return_jacobian(cycle_handle(map, map.nominal_theta), map.nominal_u);
  lin.dtheta = fd_jacobian(
      [&](const Vec& th) -> Vec { return controlled_return_info(map, map.nominal_u, th).u; },
      map.nominal_theta, map.opts.fd_step);
  return lin;
}

std::vector<Vec> deadbeat_sequence(const ControlledReturnMap& map, const DeadbeatLaw& law,
                                   const Vec& u) {
  const int p = map.input_dim();
  switch (law.kind) {
    case DeadbeatLaw::Kind::LinearFeedback:
      return {Vec(map.nominal_theta + law.gain * (u - map.nominal_u))};
    case DeadbeatLaw::Kind::OneCycleNewton: {
      auto residual = [&](const Vec& th) -> Vec {
        const Vec y = controlled_return_info(map, u, th).u;
        return law.constraint ? law.constraint->h(y) : Vec(y - map.nominal_u);
      };
      return {newton_solve_pinv(residual, map.nominal_theta, law.tol, law.max_iter)};
    }
    case DeadbeatLaw::Kind::MultiCycle: {
      const int k = law.horizon;
      auto residual = [&](const Vec& flat) -> Vec {
        return controlled_return(map, u, unstack(flat, k, p)) - map.nominal_u;
      };
      Vec seed(static_cast<Eigen::Index>(k) * p);
      for (int i = 0; i < k; ++i) seed.segment(static_cast<Eigen::Index>(i) * p, p) = map.nominal_theta;
      return unstack(newton_solve_pinv(residual, seed, law.tol, law.max_iter), k, p);
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown law kind");
}

DeadbeatLaw synth_deadbeat_onecycle(const ControlledReturnMap& map,
                                    std::optional<OutputConstraint> constraint) {
  const int target_dim = constraint ? constraint->dim : map.state_dim();
  if (constraint) {
    if (constraint->dim <= 0 || !constraint->h)
      fail(ErrorCode::InvalidArgument, "output constraint needs a map and a positive dimension");
    const double at_nominal = constraint->h(map.nominal_u).norm();
    if (at_nominal > 1e-9) {
      std::ostringstream os;
      os << "constraint does not vanish at the nominal point: |h(xi)| = " << at_nominal;
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
  const Mat sens = fd_jacobian(
      [&](const Vec& th) -> Vec {
        const Vec y = controlled_return_info(map, map.nominal_u, th).u;
        return constraint ? constraint->h(y) : y;
      },
      map.nominal_theta, map.opts.fd_step);
  const int rank = jacobian_rank(sens);
  if (rank < target_dim) {
    std::ostringstream os;
    os << "one-cycle input sensitivity reaches rank " << rank << " of " << target_dim
       << "; consider a multi-cycle law";
    fail(ErrorCode::RankDeficient, os.str());
  }
  DeadbeatLaw law;
  law.kind = DeadbeatLaw::Kind::OneCycleNewton;
  law.horizon = 1;
  law.constraint = std::move(constraint);
  return law;
}

DeadbeatLaw synth_deadbeat_multicycle(const ControlledReturnMap& map, int cycles) {
  if (cycles < 1) fail(ErrorCode::InvalidArgument, "deadbeat horizon must be at least one cycle");
  const int d = map.state_dim();
  const int p = map.input_dim();
  Vec seed(static_cast<Eigen::Index>(cycles) * p);
  for (int i = 0; i < cycles; ++i)
    seed.segment(static_cast<Eigen::Index>(i) * p, p) = map.nominal_theta;
  const Mat stacked = fd_jacobian(
      [&](const Vec& flat) -> Vec {
        return controlled_return(map, map.nominal_u, unstack(flat, cycles, p));
      },
      seed, map.opts.fd_step);
  const int rank = jacobian_rank(stacked);
  if (rank < d) {
    std::ostringstream os;
    os << cycles << "-cycle stacked input sensitivity reaches rank " << rank << " of " << d;
    fail(ErrorCode::RankDeficient, os.str());
  }
  DeadbeatLaw law;
  law.kind = cycles == 1 ? DeadbeatLaw::Kind::OneCycleNewton : DeadbeatLaw::Kind::MultiCycle;
  law.horizon = cycles;
  return law;
}

LinearDeadbeat synth_linear_deadbeat(const Mat& a, const Mat& b, const Mat& target_subspace) {
  const int d = static_cast<int>(a.rows());
  if (a.cols() != d || b.rows() != d)
    fail(ErrorCode::InvalidArgument, "state matrix must be square and match the input matrix");
  if (target_subspace.cols() > 0 && target_subspace.rows() != d)
    fail(ErrorCode::InvalidArgument, "target subspace lives in the wrong space");
  const int p = static_cast<int>(b.cols());
  const Mat son = target_subspace.cols() > 0 ? orth_cols(target_subspace) : Mat(d, 0);
  const Mat sp = orth_complement(son, d);
  const int s = static_cast<int>(son.cols());
  const int t = d - s;
  Mat q(d, d);
  if (s > 0) q << son, sp;
  else q = sp;

  const Mat az = q.transpose() * a * q;
  const Mat bz = q.transpose() * b;
  Mat psi_z = Mat::Zero(p, d);
  if (t > 0) {
    const Mat b2 = bz.bottomRows(t);
    if (s > 0) {
      const Mat a21 = az.bottomLeftCorner(t, s);
      const Mat psi1 = Mat(-b2.completeOrthogonalDecomposition().solve(a21));
      const double res = (a21 + b2 * psi1).norm();
      if (res > 1e-9 * std::max(1.0, a.norm())) {
        std::ostringstream os;
        os << "target subspace cannot be made invariant (residual " << res << ")";
        fail(ErrorCode::NotStabilizable, os.str());
      }
      psi_z.leftCols(s) = psi1;
    }
    psi_z.rightCols(t) = nilpotent_gain(az.bottomRightCorner(t, t), b2);
  }

  LinearDeadbeat out;
  out.gain = psi_z * q.transpose();
  const Mat acl = a + b * out.gain;
  Mat pw = Mat::Identity(d, d);
  double defect = 0;
  for (int k = 1; k <= d; ++k) {
    pw = acl * pw;
    defect = sp.cols() > 0 ? (sp.transpose() * pw).norm() : 0.0;
    if (defect <= 1e-9 * std::max(1.0, pw.norm())) {
      out.k = k;
      return out;
    }
  }
  std::ostringstream os;
  os << "closed loop misses the target subspace after " << d << " cycles (defect " << defect
     << ")";
  fail(ErrorCode::NotStabilizable, os.str());
}

PoincareMapHandle closed_loop_handle(const ControlledReturnMap& map, const DeadbeatLaw& law) {
  PoincareMapHandle h = cycle_handle(map, map.nominal_theta);
  h.custom_return = [map, law](const Vec& u) {
    const std::vector<Vec> seq = deadbeat_sequence(map, law, u);
    return controlled_return_info(map, u, seq.front());
  };
  return h;
}

StabilityProbe structural_stability_probe(const ControlledReturnMap& nominal,
                                          const DeadbeatLaw& law,
                                          const HybridSystem& perturbed_plant) {
  if (perturbed_plant.param_dim != nominal.system.param_dim)
    fail(ErrorCode::InvalidArgument, "perturbed plant has a different input dimension");
  ControlledReturnMap perturbed = nominal;  // same section, same nominal bookkeeping
  perturbed.system = perturbed_plant;
  auto step = [&](const Vec& u) -> Vec {
    const std::vector<Vec> seq = deadbeat_sequence(nominal, law, u);
    return controlled_return_info(perturbed, u, seq.front()).u;
  };
  const Vec fp = newton_solve_pinv([&](const Vec& u) -> Vec { return step(u) - u; },
                                   nominal.nominal_u, 1e-10, 40);
  StabilityProbe probe;
  probe.fixed_point = fp;
  probe.shift = (fp - nominal.nominal_u).norm();
  const Eigen::VectorXcd ev = eigen(fd_jacobian(step, fp, nominal.opts.fd_step));
  probe.multipliers.assign(ev.data(), ev.data() + ev.size());
  return probe;
}

PolypedEmbedding polyped_embedding_controller(const PolypedParams& polyped,
                                              const LLSParams& lls) {
  PolypedEmbedding emb;
  PolypedParams seated = polyped;
  seated.lls = lls;
  emb.polyped = seated.resolved();
  emb.polyped.check();
  emb.lls = lls;
  emb.system = make_polyped(emb.polyped);
  emb.template_system = make_lls(lls);
  return emb;
}

}  // namespace hybred
