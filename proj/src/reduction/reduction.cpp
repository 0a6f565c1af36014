#include "hybred/reduction/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hybred {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kUnderflowFloor = 1e2 * 2.220446049250313e-16;

double wrap_phase(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0) w += kTwoPi;
  return w;
}

double wrap_signed(double theta) {
  double w = wrap_phase(theta);
  return w > kTwoPi / 2 ? w - kTwoPi : w;
}

}  // namespace

const char* to_string(ReductionVerdict v) {
  switch (v) {
    case ReductionVerdict::ExactCertified: return "ExactCertified";
    case ReductionVerdict::ApproximateOnly: return "ApproximateOnly";
    case ReductionVerdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

ReductionReport analyze_reduction(const PoincareMapHandle& handle, const ReductionOptions& opts) {
  ReductionReport rep;
  rep.spectrum = spectral_summary(handle);
  rep.m = rep.spectrum.m;
  rep.rank_profile = rep.spectrum.ranks;
  rep.spectral_radius =
      rep.spectrum.eigenvalues.empty() ? 0.0 : std::abs(rep.spectrum.eigenvalues.front());
  rep.certificate = constant_rank_certificate(handle, opts.certificate_radius,
                                              opts.certificate_samples, rep.m, opts.seed);
  rep.r = rep.certificate.rank_at_base;  // rank DP^m at the anchor

  if (rep.certificate.holds)
    rep.verdict = ReductionVerdict::ExactCertified;
  else if (rep.spectral_radius < 1.0)
    rep.verdict = ReductionVerdict::ApproximateOnly;
  else
    rep.verdict = ReductionVerdict::Inconclusive;
  return rep;
}

Vec fiber_collapse_test(const PoincareMapHandle& handle, const Mat& directions, double magnitude,
                        int m) {
  if (m < 1) fail(ErrorCode::InvalidArgument, "collapse test needs at least one cycle");
  if (directions.rows() != handle.section_dim())
    fail(ErrorCode::InvalidArgument, "fiber directions must live in section coordinates");

  auto iterate = [&](Vec u) {
    for (int k = 0; k < m; ++k) u = first_return(handle, u);
    return u;
  };
  const Vec base_end = iterate(Vec::Zero(handle.section_dim()));

  Vec residuals(directions.cols());
  for (int j = 0; j < directions.cols(); ++j) {
    const Vec end = iterate(magnitude * directions.col(j));
    residuals[j] = (end - base_end).norm();
  }
  return residuals;
}

ContractionProfile contraction_profile(const PoincareMapHandle& handle, const Vec& x0,
                                       int cycles) {
  if (cycles < 1) fail(ErrorCode::InvalidArgument, "profile needs at least one cycle");
  const int d = handle.section_dim();
  if (x0.size() != d) fail(ErrorCode::InvalidArgument, "x0 must be section coordinates");

  ReturnInfo center = first_return_info(handle, Vec::Zero(d));
  int m = handle.system.domain(handle.section.domain_id).dim;
  for (int gi : center.event_guards) {
    m = std::min(m, handle.system.domain(handle.system.guards[gi].domain_id).dim);
    m = std::min(m, handle.system.domain(handle.system.guards[gi].target_domain_id).dim);
  }

  // direct-sum splitting of the section tangent space into the surviving
  // range of DP^m and the dying kernel (the numerical surrogate for the
  // tangential/transverse coordinates of the reduction theorems)
  const Mat dp = return_jacobian(handle, Vec::Zero(d));
  const Mat dpm = matrix_power(dp, m);
  // a power below the finite-difference noise floor is the zero map: every
  // direction is transverse (closed-loop deadbeat returns land here)
  const bool zero_map = jacobian_rank(dpm) == 0;
  const Mat R = zero_map ? Mat(d, 0) : range_basis(dpm, kJacobianRankTol);
  const Mat K = zero_map ? Mat(Mat::Identity(d, d)) : kernel_basis(dpm, kJacobianRankTol);
  if (R.cols() + K.cols() != d)
    fail(ErrorCode::EvaluationFailure, "range/kernel splitting does not span the section");
  Mat B(d, d);
  B << R, K;
  Eigen::FullPivLU<Mat> lu(B);
  if (!lu.isInvertible())
    fail(ErrorCode::EvaluationFailure, "range/kernel splitting is degenerate at this anchor");

  ContractionProfile prof;
  Vec u = x0;
  for (int k = 0; k <= cycles; ++k) {
    const Vec coeff = lu.solve(u);
    prof.tangential.push_back((R * coeff.head(R.cols())).norm());
    prof.transverse.push_back((K * coeff.tail(K.cols())).norm());
    prof.cycles = k;
    if (u.norm() < kUnderflowFloor) {
      prof.truncated = true;
      prof.truncated_at = k;
      break;
    }
    if (k < cycles) u = first_return(handle, u);
  }

  auto push_ratios = [](const std::vector<double>& v, std::vector<double>& out) {
    for (size_t i = 0; i + 1 < v.size(); ++i)
      out.push_back(v[i] > 1e-300 ? v[i + 1] / v[i] : 0.0);
  };
  push_ratios(prof.tangential, prof.tangential_ratios);
  push_ratios(prof.transverse, prof.transverse_ratios);

  double log_sum = 0;
  int n_rate = 0;
  for (double r : prof.tangential_ratios)
    if (r > 1e-300) {
      log_sum += std::log(r);
      ++n_rate;
    }
  prof.fitted_tangential_rate = n_rate ? std::exp(log_sum / n_rate) : 0.0;
  return prof;
}

HybridState GluedTrajectory::eval(double t) const {
  if (segments.empty()) return t <= 0 ? start : end;
  if (t <= segments.front().t_start) {
    const auto& s0 = segments.front();
    return HybridState{s0.domain_id, s0.start_state()};
  }
  if (t >= duration) return end;
  // last segment starting at or before t: right-continuous at stitches
  int lo = 0, hi = static_cast<int>(segments.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (segments[mid].t_start <= t)
      lo = mid;
    else
      hi = mid - 1;
  }
  const auto& seg = segments[lo];
  const double tc = std::min(std::max(t, seg.t_start), seg.t_end);
  return HybridState{seg.domain_id, seg.eval(tc)};
}

GluedTrajectory glued_trajectory(const ExecutionTrace& trace) {
  GluedTrajectory g;
  g.duration = trace.total_time;
  g.start = trace.start;
  g.end = trace.end;
  g.segments = trace.segments;
  g.stitches.reserve(trace.events.size());
  for (const auto& ev : trace.events)
    g.stitches.push_back(GluedStitch{ev.time, ev.guard_index, ev.pre, ev.post});
  return g;
}

PhaseMap make_phase_map(const PoincareMapHandle& handle, const PeriodicOrbit& orbit,
                        int cache_samples) {
  if (cache_samples < 16) fail(ErrorCode::InvalidArgument, "phase cache needs >= 16 samples");
  if (orbit.period <= 0) fail(ErrorCode::InvalidArgument, "orbit period must be positive");

  PhaseMap pm;
  pm.handle = handle;
  pm.period = orbit.period;

  const std::optional<Vec> p0 =
      handle.opts.params
          ? handle.opts.params
          : (handle.system.init_params
                 ? std::optional<Vec>(handle.system.init_params(orbit.state))
                 : std::optional<Vec>(Vec::Zero(handle.system.param_dim)));
  auto res = run_execution(handle.system, orbit.state, orbit.period, handle.opts.exec, {}, p0);
  pm.orbit = glued_trajectory(res.trace);

  if (pm.orbit.end.domain_id != orbit.state.domain_id)
    fail(ErrorCode::InvalidArgument, "reference orbit does not close: ends in a different chart");
  const double closure = (pm.orbit.end.x - orbit.state.x).norm();
  if (closure > 1e-6) {
    std::ostringstream os;
    os << "reference orbit does not close: end-start distance " << closure;
    fail(ErrorCode::InvalidArgument, os.str());
  }

  pm.cache_t.reserve(cache_samples);
  pm.cache_x.reserve(cache_samples);
  for (int i = 0; i < cache_samples; ++i) {
    const double t = pm.period * i / cache_samples;
    pm.cache_t.push_back(t);
    pm.cache_x.push_back(pm.orbit.eval(t));
  }
  return pm;
}

namespace {

// squared distance from y to the orbit point at time t (mod period);
// infinity when the charts differ
double orbit_dist2(const PhaseMap& pm, const HybridState& y, double t) {
  double tw = std::fmod(t, pm.period);
  if (tw < 0) tw += pm.period;
  const HybridState g = pm.orbit.eval(tw);
  if (g.domain_id != y.domain_id) return std::numeric_limits<double>::infinity();
  return (g.x - y.x).squaredNorm();
}

// nearest reference-orbit time for y: cache argmin, grid refinement, then a
// parabolic fit of the squared distance
std::pair<double, double> nearest_orbit_time(const PhaseMap& pm, const HybridState& y) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pm.cache_x.size(); ++i) {
    if (pm.cache_x[i].domain_id != y.domain_id) continue;
    const double d = (pm.cache_x[i].x - y.x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) return {0.0, std::numeric_limits<double>::infinity()};

  double t = pm.cache_t[best];
  double h = pm.period / static_cast<double>(pm.cache_x.size());
  for (int round = 0; round < 3; ++round) {
    double bt = t;
    double bd = orbit_dist2(pm, y, t);
    for (int i = -8; i <= 8; ++i) {
      const double tc = t + h * i / 8.0;
      const double d = orbit_dist2(pm, y, tc);
      if (d < bd) {
        bd = d;
        bt = tc;
      }
    }
    t = bt;
    h /= 8.0;
  }
  // parabolic refinement on the final triple
  const double d0 = orbit_dist2(pm, y, t - h), d1 = orbit_dist2(pm, y, t),
               d2 = orbit_dist2(pm, y, t + h);
  if (std::isfinite(d0) && std::isfinite(d2)) {
    const double denom = d0 - 2 * d1 + d2;
    if (denom > 0) {
      const double shift = 0.5 * h * (d0 - d2) / denom;
      if (std::abs(shift) <= h) t += shift;
    }
  }
  return {t, std::sqrt(orbit_dist2(pm, y, t))};
}

}  // namespace

double phase_of(const PhaseMap& pm, const HybridState& x, const PhaseOptions& opts) {
  if (opts.settle_cycles < 0) fail(ErrorCode::InvalidArgument, "settle cycles must be >= 0");
  HybridState y = x;
  if (opts.settle_cycles > 0) {
    const std::optional<Vec> p0 =
        pm.handle.opts.params
            ? pm.handle.opts.params
            : (pm.handle.system.init_params
                   ? std::optional<Vec>(pm.handle.system.init_params(x))
                   : std::optional<Vec>(Vec::Zero(pm.handle.system.param_dim)));
    auto res = run_execution(pm.handle.system, x, opts.settle_cycles * pm.period,
                             pm.handle.opts.exec, {}, p0);
    y = res.trace.end;
  }
  auto [t_star, dist] = nearest_orbit_time(pm, y);
  if (!(dist <= opts.orbit_distance_tol)) {
    std::ostringstream os;
    os << "state stays " << dist << " away from the reference orbit after "
       << opts.settle_cycles << " settle cycles";
    fail(ErrorCode::NotConverged, os.str());
  }
  // settling over whole periods advances the phase by a multiple of 2 pi
  return wrap_phase(kTwoPi * t_star / pm.period);
}

std::vector<HybridState> isochron_sample(const PhaseMap& pm, double theta, int n_points,
                                         double radius, const IsochronOptions& opts) {
  if (n_points < 1) fail(ErrorCode::InvalidArgument, "need at least one isochron point");
  if (!(radius >= 0)) fail(ErrorCode::InvalidArgument, "radius must be nonnegative");

  theta = wrap_phase(theta);
  const double t_theta = theta * pm.period / kTwoPi;
  std::vector<HybridState> out;
  out.push_back(pm.orbit.eval(t_theta));  // the on-orbit representative

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.3, 1.0);

  auto phase_err = [&](const HybridState& s) -> std::optional<double> {
    try {
      return wrap_signed(phase_of(pm, s, opts.phase) - theta);
    } catch (const Error&) {
      return std::nullopt;  // escaped the basin or the chart: reject the ray
    }
  };

  int attempts = 0;
  while (static_cast<int>(out.size()) < n_points) {
    if (++attempts > 20 * n_points)
      fail(ErrorCode::NotConverged, "isochron sampling kept leaving the orbit's basin");

    const HybridState center = out.front();
    const int dim = static_cast<int>(center.x.size());
    Vec dir(dim);
    for (int i = 0; i < dim; ++i) dir[i] = gauss(rng);
    if (dir.norm() == 0) continue;
    dir.normalize();
    const double rho = radius * unif(rng);

    // candidate: orbit point slid by alpha, displaced transversally by rho
    auto candidate = [&](double alpha) {
      double t = std::fmod(t_theta + alpha, pm.period);
      if (t < 0) t += pm.period;
      HybridState s = pm.orbit.eval(t);
      if (s.domain_id != center.domain_id) return std::optional<HybridState>();
      s.x += rho * dir;
      return std::optional<HybridState>(s);
    };

    // bracket the phase residual by sliding along the orbit; keep the slide
    // inside the smooth arc the anchor sits on (stitches bound the window)
    double lo = -pm.period / 8, hi = pm.period / 8;
    const double margin = 1e-3 * pm.period;
    for (const auto& st : pm.orbit.stitches) {
      const double rel = std::remainder(st.t - t_theta, pm.period);
      if (rel >= 0)
        hi = std::min(hi, rel - margin);
      else
        lo = std::max(lo, rel + margin);
    }
    if (hi - lo < 4 * margin) fail(ErrorCode::NotConverged, "phase anchor sits on a reset");
    auto c_lo = candidate(lo), c_hi = candidate(hi);
    if (!c_lo || !c_hi) continue;
    auto f_lo = phase_err(*c_lo), f_hi = phase_err(*c_hi);
    if (!f_lo || !f_hi || *f_lo > 0 || *f_hi < 0) continue;

    std::optional<HybridState> hit;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto c_mid = candidate(mid);
      if (!c_mid) break;
      auto f_mid = phase_err(*c_mid);
      if (!f_mid) break;
      if (std::abs(*f_mid) <= opts.phase_tol) {
        hit = c_mid;
        break;
      }
      if (*f_mid < 0)
        lo = mid;
      else
        hi = mid;
    }
    if (hit) out.push_back(*hit);
  }
  return out;
}

}  // namespace hybred
