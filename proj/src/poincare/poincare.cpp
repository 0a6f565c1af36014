#include "hybred/poincare/poincare.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace hybred {

namespace {

Vec fd_gradient(const ScalarFn& h, const Vec& x) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double step = 1e-7 * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (h(xp) - h(xm)) / (2.0 * step);
  }
  return g;
}

Vec resolve_params(const HybridSystem& system, const HybridState& anchor,
                   const std::optional<Vec>& params) {
  if (params) {
    if (params->size() != system.param_dim)
      fail(ErrorCode::InvalidArgument, "parameter vector does not match the system");
    return *params;
  }
  if (system.init_params) return system.init_params(anchor);
  return Vec::Zero(system.param_dim);
}

// Newton steps along the level gradient until the point sits on the zero set.
Vec retract_to_level(const ScalarFn& level, Vec x) {
  for (int it = 0; it < 6; ++it) {
    const double h = level(x);
    if (std::abs(h) <= 1e-13 * std::max(1.0, x.norm())) return x;
    const Vec g = fd_gradient(level, x);
    const double g2 = g.squaredNorm();
    if (g2 <= 0)
      fail(ErrorCode::EvaluationFailure, "section level gradient vanished during retraction");
    x -= (h / g2) * g;
  }
  if (std::abs(level(x)) > 1e-9)
    fail(ErrorCode::NoConvergence, "retraction onto the section did not converge");
  return x;
}

Mat chart_from_gradient(const Vec& grad) {
  Mat row(1, grad.size());
  row.row(0) = grad.transpose();
  Mat chart = kernel_basis(row);
  if (chart.cols() != grad.size() - 1)
    fail(ErrorCode::EvaluationFailure, "section tangent chart has unexpected dimension");
  return chart;
}

void check_transversality(const HybridSystem& system, int domain_id, const ScalarFn& level,
                          const Vec& anchor, const Vec& params) {
  const Domain& dom = system.domain(domain_id);
  FieldFn field = [&dom, &params](const Vec& x, Vec& dx) { dom.field(x, params, dx); };
  const double cosine = crossing_cosine(field, level, anchor);
  if (cosine < kTransversalityFloor) {
    std::ostringstream os;
    os << "field is tangent to the section at the anchor (crossing cosine " << cosine << ")";
    fail(ErrorCode::TangentialCrossing, os.str());
  }
}

StopCondition stop_for(const PoincareMapHandle& handle, int skip) {
  StopCondition stop;
  if (handle.section.guard_index >= 0) {
    stop.kind = StopCondition::Kind::GuardPre;
    stop.guard_index = handle.section.guard_index;
  } else {
    stop.kind = StopCondition::Kind::InteriorSection;
    stop.domain_id = handle.section.domain_id;
    stop.level = handle.section.level;
    stop.direction = handle.direction;
  }
  stop.skip = skip;
  return stop;
}

std::vector<int> guards_of(const ExecutionTrace& trace) {
  std::vector<int> out;
  out.reserve(trace.events.size());
  for (const auto& ev : trace.events) out.push_back(ev.guard_index);
  return out;
}

}  // namespace

Section make_interior_section(const HybridSystem& system, int domain_id, ScalarFn level,
                              const Vec& anchor, const std::optional<Vec>& params) {
  const Domain& dom = system.domain(domain_id);
  if (anchor.size() != dom.dim)
    fail(ErrorCode::InvalidArgument, "section anchor dimension does not match its domain");
  if (std::abs(level(anchor)) > 1e-10)
    fail(ErrorCode::InvalidArgument, "section anchor does not lie on the level zero set");
  const Vec p = resolve_params(system, HybridState{domain_id, anchor}, params);
  check_transversality(system, domain_id, level, anchor, p);

  Section s;
  s.domain_id = domain_id;
  s.level = std::move(level);
  s.base_point = HybridState{domain_id, anchor};
  s.chart = chart_from_gradient(fd_gradient(s.level, anchor));
  return s;
}

Section make_guard_section(const HybridSystem& system, int guard_index, const Vec& anchor,
                           const std::optional<Vec>& params) {
  if (guard_index < 0 || guard_index >= static_cast<int>(system.guards.size()))
    fail(ErrorCode::InvalidArgument, "guard index out of range");
  const GuardFace& g = system.guards[guard_index];
  const Domain& dom = system.domain(g.domain_id);
  if (anchor.size() != dom.dim)
    fail(ErrorCode::InvalidArgument, "section anchor dimension does not match its domain");
  const Vec p = resolve_params(system, HybridState{g.domain_id, anchor}, params);
  auto face = dom.boundary_faces.at(g.face_index);
  ScalarFn level = [face, p](const Vec& x) { return face(x, p); };
  if (std::abs(level(anchor)) > 1e-10)
    fail(ErrorCode::InvalidArgument, "guard section anchor does not lie on the face");
  if (g.predicate && !g.predicate(anchor, p))
    fail(ErrorCode::InvalidArgument, "guard predicate rejects the section anchor");
  check_transversality(system, g.domain_id, level, anchor, p);

  Section s;
  s.domain_id = g.domain_id;
  s.level = std::move(level);
  s.base_point = HybridState{g.domain_id, anchor};
  s.chart = chart_from_gradient(fd_gradient(s.level, anchor));
  s.guard_index = guard_index;
  return s;
}

PoincareMapHandle make_poincare_map(const HybridSystem& system, Section section, int direction,
                                    PoincareOptions opts) {
  PoincareMapHandle h;
  h.system = system;
  h.section = std::move(section);
  h.direction = h.section.guard_index >= 0 ? -1 : direction;
  h.opts = std::move(opts);
  return h;
}

int jacobian_rank(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  if (svd.singularValues().size() == 0 || svd.singularValues()(0) <= kJacobianRankTol) return 0;
  return numerical_rank(m, kJacobianRankTol);
}

HybridState section_embed(const PoincareMapHandle& handle, const Vec& u) {
  if (u.size() != handle.section_dim())
    fail(ErrorCode::InvalidArgument, "section coordinate dimension mismatch");
  Vec x = handle.section.base_point.x + handle.section.chart * u;
  x = retract_to_level(handle.section.level, std::move(x));
  return HybridState{handle.section.domain_id, x};
}

Vec section_coords(const PoincareMapHandle& handle, const HybridState& x) {
  if (x.domain_id != handle.section.domain_id)
    fail(ErrorCode::InvalidArgument, "state lives in a different domain than the section");
  return handle.section.chart.transpose() * (x.x - handle.section.base_point.x);
}

namespace {

void check_sequence(const PoincareMapHandle& handle, const std::vector<int>& guards) {
  if (handle.opts.strict_sequence && !handle.opts.expected_sequence.empty() &&
      guards != handle.opts.expected_sequence) {
    std::ostringstream os;
    os << "cycle itinerary [";
    for (size_t i = 0; i < guards.size(); ++i) os << (i ? " " : "") << guards[i];
    os << "] does not match the expected guard sequence";
    fail(ErrorCode::WrongSequence, os.str());
  }
}

}  // namespace

ReturnInfo first_return_info(const PoincareMapHandle& handle, const Vec& u) {
  if (handle.custom_return) {
    ReturnInfo info = handle.custom_return(u);
    check_sequence(handle, info.event_guards);
    return info;
  }
  const HybridState start = section_embed(handle, u);
  // Starting exactly on a guard face fires that guard at t = 0; the return is
  // the next visit, so skip one stop there. Interior section watches are
  // non-immediate and skip the on-set start on their own.
  const int skip = handle.section.guard_index >= 0 ? 1 : 0;
  const std::optional<Vec> p0 =
      handle.opts.params ? handle.opts.params
                         : std::optional<Vec>(resolve_params(handle.system, start, std::nullopt));
  auto res = run_execution(handle.system, start, handle.opts.horizon, handle.opts.exec,
                           stop_for(handle, skip), p0);
  if (!res.stopped) {
    std::ostringstream os;
    os << "no return to the section within the time budget " << handle.opts.horizon;
    fail(ErrorCode::NoReturn, os.str());
  }

  ReturnInfo info;
  info.event_guards = guards_of(res.trace);
  check_sequence(handle, info.event_guards);
  Vec arrival = retract_to_level(handle.section.level, res.stop_state.x);
  info.state = HybridState{handle.section.domain_id, arrival};
  info.u = handle.section.chart.transpose() * (arrival - handle.section.base_point.x);
  info.elapsed = res.stop_time;
  info.end_params = res.stop_params;
  return info;
}

Vec first_return(const PoincareMapHandle& handle, const Vec& u) {
  return first_return_info(handle, u).u;
}

Mat return_jacobian(const PoincareMapHandle& handle, const Vec& u) {
  return fd_jacobian([&](const Vec& v) { return first_return(handle, v); }, u,
                     handle.opts.fd_step);
}

PeriodicOrbit find_periodic_orbit(const PoincareMapHandle& handle, const Vec& guess) {
  Vec u = newton_solve_pinv([&](const Vec& v) -> Vec { return first_return(handle, v) - v; },
                            guess, handle.opts.fixed_point_tol, handle.opts.max_newton_iter);
  ReturnInfo info = first_return_info(handle, u);
  PeriodicOrbit orbit;
  orbit.u = u;
  orbit.state = section_embed(handle, u);
  orbit.period = info.elapsed;
  orbit.residual = (info.u - u).norm();
  orbit.event_guards = info.event_guards;
  return orbit;
}

SpectralSummary spectral_summary(const PoincareMapHandle& handle) {
  SpectralSummary s;
  const int d = handle.section_dim();
  const Vec u0 = Vec::Zero(d);

  ReturnInfo center = first_return_info(handle, u0);
  s.fixed_point_residual = center.u.norm();
  if (s.fixed_point_residual > 1e-6) {
    std::ostringstream os;
    os << "anchor is not a fixed point: |P(0)| = " << s.fixed_point_residual;
    s.anomalies.push_back(os.str());
  }

  // smallest domain dimension along the cycle's itinerary
  std::set<int> visited{handle.section.domain_id};
  for (int gi : center.event_guards) {
    visited.insert(handle.system.guards[gi].domain_id);
    visited.insert(handle.system.guards[gi].target_domain_id);
  }
  int min_dim = handle.system.domain(handle.section.domain_id).dim;
  for (int id : visited) min_dim = std::min(min_dim, handle.system.domain(id).dim);
  s.m = min_dim;

  s.dp = return_jacobian(handle, u0);
  const Eigen::VectorXcd ev = eigen(s.dp);
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());

  std::vector<int> ranks_ext;  // r_k for k = 1..m+1
  for (int k = 1; k <= s.m + 1; ++k) {
    const Mat pk = matrix_power(s.dp, k);
    Eigen::JacobiSVD<Mat> svd(pk);
    if (k <= s.m) s.singular_values.push_back(svd.singularValues());
    ranks_ext.push_back(jacobian_rank(pk));
  }
  s.ranks.assign(ranks_ext.begin(), ranks_ext.begin() + s.m);

  if (!s.ranks.empty() && s.ranks.front() > s.m - 1) {
    std::ostringstream os;
    os << "rank DP = " << s.ranks.front() << " exceeds the structural bound " << (s.m - 1);
    s.anomalies.push_back(os.str());
  }
  for (size_t i = 0; i + 1 < ranks_ext.size(); ++i) {
    if (ranks_ext[i + 1] > ranks_ext[i])
      s.anomalies.push_back("iterated ranks are not monotone");
    if (s.nilpotent_index == 0 && ranks_ext[i + 1] == ranks_ext[i])
      s.nilpotent_index = static_cast<int>(i + 1);
  }
  if (s.nilpotent_index == 0)
    s.anomalies.push_back("iterated ranks did not stabilize within the itinerary bound");
  else if (ranks_ext[s.m - 1] != ranks_ext[s.nilpotent_index - 1])
    s.anomalies.push_back("stabilized rank changed after the stabilization index");
  return s;
}

CertificateReport constant_rank_certificate(const PoincareMapHandle& handle, double radius,
                                            int n_samples, int k, unsigned long long seed) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "certificate power must be at least 1");
  CertificateReport rep;
  rep.k = k;
  rep.radius = radius;

  const int d = handle.section_dim();
  const Mat dp0 = return_jacobian(handle, Vec::Zero(d));
  rep.rank_at_base = jacobian_rank(matrix_power(dp0, k));
  rep.rank_next_power = jacobian_rank(matrix_power(dp0, k + 1));

  if (radius <= 0 || n_samples <= 0) {
    rep.degenerate = true;
    rep.sampled_ranks = {rep.rank_at_base};
    rep.holds = rep.rank_at_base == rep.rank_next_power;
    rep.note = "degenerate certificate: anchor point only, no neighborhood sampled";
    return rep;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < n_samples; ++s) {
    Vec dir(d);
    for (int i = 0; i < d; ++i) dir[i] = gauss(rng);
    if (dir.norm() == 0) dir.setOnes();
    dir.normalize();
    const double rho = radius * std::pow(unit(rng), 1.0 / d);
    Vec u = rho * dir;

    // k-cycle Jacobian along the sample's own orbit (chain rule)
    Mat total = Mat::Identity(d, d);
    for (int cycle = 0; cycle < k; ++cycle) {
      total = return_jacobian(handle, u) * total;
      if (cycle + 1 < k) u = first_return(handle, u);
    }
    rep.sampled_ranks.push_back(jacobian_rank(total));
  }

  const bool stable = rep.rank_at_base == rep.rank_next_power;
  const bool uniform = std::all_of(rep.sampled_ranks.begin(), rep.sampled_ranks.end(),
                                   [&](int r) { return r == rep.rank_at_base; });
  rep.holds = stable && uniform;
  if (!stable)
    rep.note = "rank changes from power k to k+1 at the anchor";
  else if (!uniform)
    rep.note = "sampled ranks are not constant over the neighborhood";
  else
    rep.note = "rank constant over all samples and stable in the iterate";
  return rep;
}

SpectrumComparison compare_sections(const PoincareMapHandle& a, const PoincareMapHandle& b) {
  auto nonzero_spectrum = [](const PoincareMapHandle& h, int& zeros) {
    const Mat dp = return_jacobian(h, Vec::Zero(h.section_dim()));
    Eigen::JacobiSVD<Mat> svd(dp);
    const double sigma_max = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    const double tol = kJacobianRankTol * sigma_max;
    const Eigen::VectorXcd ev = eigen(dp);
    std::vector<std::complex<double>> keep;
    zeros = 0;
    for (int i = 0; i < ev.size(); ++i) {
      if (std::abs(ev[i]) > tol)
        keep.push_back(ev[i]);
      else
        ++zeros;
    }
    return keep;  // eigen() already sorts by magnitude, then Re, then Im
  };

  SpectrumComparison cmp;
  cmp.nonzero_a = nonzero_spectrum(a, cmp.zero_count_a);
  cmp.nonzero_b = nonzero_spectrum(b, cmp.zero_count_b);
  cmp.nonzero_counts_match = cmp.nonzero_a.size() == cmp.nonzero_b.size();
  const size_t n = std::min(cmp.nonzero_a.size(), cmp.nonzero_b.size());
  for (size_t i = 0; i < n; ++i)
    cmp.max_pair_distance =
        std::max(cmp.max_pair_distance, std::abs(cmp.nonzero_a[i] - cmp.nonzero_b[i]));
  return cmp;
}

}  // namespace hybred
