#include "hybred/core/execute.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace hybred {

namespace {

Vec starting_params(const HybridSystem& system, const HybridState& x0,
                    const std::optional<Vec>& initial) {
  if (initial) {
    if (initial->size() != system.param_dim)
      fail(ErrorCode::InvalidArgument, "initial parameter vector has wrong dimension");
    return *initial;
  }
  if (system.init_params) {
    Vec p = system.init_params(x0);
    if (p.size() != system.param_dim)
      fail(ErrorCode::InvalidArgument, "init_params produced wrong dimension");
    return p;
  }
  return Vec::Zero(system.param_dim);
}

bool predicate_holds(const GuardFace& g, const Vec& x, const Vec& p) {
  return !g.predicate || g.predicate(x, p);
}

}  // namespace

ExecutionResult run_execution(const HybridSystem& system, const HybridState& x0,
                              double horizon, const ExecOptions& opts,
                              const StopCondition& stop,
                              const std::optional<Vec>& initial_params) {
  if (horizon < 0) fail(ErrorCode::InvalidArgument, "negative horizon");
  if (system.domains.empty()) fail(ErrorCode::InvalidArgument, "system has no domains");
  opts.integrator.check();

  ExecutionResult res;
  HybridState state = x0;
  Vec params = starting_params(system, x0, initial_params);
  {
    const Domain& d0 = system.domain(state.domain_id);
    if (state.x.size() != d0.dim)
      fail(ErrorCode::InvalidArgument, "initial state dimension does not match its domain");
  }
  res.trace.start = state;

  double t = 0;
  int stop_skip = stop.skip;
  const double zeno_window = opts.integrator.event_tol * std::max(horizon, 1e-300);
  std::deque<double> recent_events;

  auto finalize = [&](double t_end) {
    res.trace.total_time = t_end;
    res.trace.end = state;
    res.trace.end_params = params;
  };

  while (t < horizon) {
    const Domain& dom = system.domain(state.domain_id);
    if (state.x.size() != dom.dim)
      fail(ErrorCode::InvalidArgument, "state dimension does not match domain " +
                                           std::to_string(dom.id));

    // the state must start (weakly) inside its domain
    for (size_t i = 0; i < dom.boundary_faces.size(); ++i) {
      double h = dom.boundary_faces[i](state.x, params);
      if (h < -opts.face_slack) {
        std::ostringstream os;
        os << "state at t=" << t << " lies outside domain " << dom.id << " (face " << i
           << " = " << h << ")";
        fail(ErrorCode::EscapeDomain, os.str());
      }
    }

    FieldFn field = [f = dom.field, p = params](const Vec& x, Vec& dx) { f(x, p, dx); };

    std::vector<Watch> watches;
    const int n_faces = static_cast<int>(dom.boundary_faces.size());
    for (int i = 0; i < n_faces; ++i)
      watches.push_back(
          Watch{[h = dom.boundary_faces[i], p = params](const Vec& x) { return h(x, p); },
                -1, true, false});

    const bool section_here =
        stop.kind == StopCondition::Kind::InteriorSection && stop.domain_id == dom.id;
    if (section_here)
      watches.push_back(Watch{stop.level, stop.direction, false, false});

    FlowOutcome fo = flow_to_watch(field, watches, state.x, t, horizon, opts.integrator,
                                   dom.id);
    if (!fo.segment.empty()) res.trace.segments.push_back(fo.segment);

    if (fo.stop == FlowOutcome::Stop::TimeLimit) {
      state.x = fo.x_hit;
      t = horizon;
      break;
    }

    // ---- a watch fired ----
    if (section_here && fo.watch_id == n_faces) {
      state.x = fo.x_hit;
      t = fo.t_hit;
      if (stop_skip > 0) {
        --stop_skip;
        continue;
      }
      res.stopped = true;
      res.stop_time = t;
      res.stop_state = state;
      res.stop_params = params;
      finalize(t);
      return res;
    }

    const int face = fo.watch_id;
    if (fo.improper) {
      std::ostringstream os;
      os << "trajectory drifted out of domain " << dom.id << " through face " << face
         << " near t=" << fo.t_hit << " without a transversal crossing";
      fail(ErrorCode::EscapeDomain, os.str());
    }

    // corner rule: more than one face vanishing at the crossing is ambiguous
    // unless exactly one of them carries a guard
    std::vector<int> active_faces = {face};
    for (int j : fo.coincident)
      if (j < n_faces) active_faces.push_back(j);
    int chosen_guard = -1;
    if (active_faces.size() > 1) {
      int n_guarded = 0;
      for (int f : active_faces) {
        int gi = system.guard_index_for(dom.id, f);
        if (gi >= 0) {
          ++n_guarded;
          chosen_guard = gi;
        }
      }
      if (n_guarded != 1) {
        std::ostringstream os;
        os << "ambiguous corner exit from domain " << dom.id << " at t=" << fo.t_hit << " ("
           << active_faces.size() << " faces vanish, " << n_guarded << " guarded)";
        fail(ErrorCode::EscapeDomain, os.str());
      }
    } else {
      chosen_guard = system.guard_index_for(dom.id, face);
    }

    if (chosen_guard < 0) {
      std::ostringstream os;
      os << "trajectory crossed unguarded face " << face << " of domain " << dom.id
         << " at t=" << fo.t_hit;
      fail(ErrorCode::EscapeDomain, os.str());
    }

    const GuardFace& g = system.guards[chosen_guard];
    if (!predicate_holds(g, fo.x_hit, params)) {
      std::ostringstream os;
      os << "guard predicate rejected the crossing of face " << g.face_index << " of domain "
         << dom.id << " at t=" << fo.t_hit;
      fail(ErrorCode::EscapeDomain, os.str());
    }

    t = fo.t_hit;
    HybridState pre{dom.id, fo.x_hit};

    if (stop.kind == StopCondition::Kind::GuardPre &&
        (stop.guard_index < 0 || stop.guard_index == chosen_guard) &&
        (stop.domain_id < 0 || stop.domain_id == dom.id)) {
      if (stop_skip == 0) {
        state = pre;
        res.stopped = true;
        res.stop_time = t;
        res.stop_state = state;
        res.stop_params = params;
        res.stop_guard_index = chosen_guard;
        finalize(t);
        return res;
      }
      --stop_skip;
    }

    Vec x_post = g.reset(fo.x_hit, params);
    const Domain& target = system.domain(g.target_domain_id);
    if (x_post.size() != target.dim)
      fail(ErrorCode::InvalidArgument,
           "reset on guard " + std::to_string(chosen_guard) + " produced dimension " +
               std::to_string(x_post.size()) + " for domain of dimension " +
               std::to_string(target.dim));

    HybridEvent ev;
    ev.time = t;
    ev.guard_index = chosen_guard;
    ev.pre = pre;
    ev.post = HybridState{target.id, x_post};
    res.trace.events.push_back(ev);

    recent_events.push_back(t);
    while (!recent_events.empty() && recent_events.front() < t - zeno_window)
      recent_events.pop_front();
    if (static_cast<int>(recent_events.size()) > opts.integrator.max_events_per_step) {
      std::ostringstream os;
      os << recent_events.size() << " events within a " << zeno_window
         << " window near t=" << t;
      fail(ErrorCode::ZenoSuspicion, os.str());
    }

    if (system.update_params) {
      params = system.update_params(chosen_guard, x_post, params);
      if (params.size() != system.param_dim)
        fail(ErrorCode::InvalidArgument, "update_params produced wrong dimension");
    }

    state = ev.post;

    if (stop.kind == StopCondition::Kind::ResetPost &&
        (stop.guard_index < 0 || stop.guard_index == chosen_guard) &&
        (stop.domain_id < 0 || stop.domain_id == target.id)) {
      if (stop_skip == 0) {
        res.stopped = true;
        res.stop_time = t;
        res.stop_state = state;
        res.stop_params = params;
        res.stop_guard_index = chosen_guard;
        finalize(t);
        return res;
      }
      --stop_skip;
    }
  }

  finalize(horizon);
  return res;
}

ExecutionTrace execute(const HybridSystem& system, const HybridState& x0, double horizon,
                       const ExecOptions& opts, const std::optional<Vec>& initial_params) {
  return run_execution(system, x0, horizon, opts, StopCondition{}, initial_params).trace;
}

ValidationReport validate(const HybridSystem& system, const std::vector<HybridState>& samples) {
  ValidationReport rep;
  auto issue = [&](const std::string& s) {
    rep.issues.push_back(s);
    rep.ok = false;
  };

  // structural wiring
  for (size_t gi = 0; gi < system.guards.size(); ++gi) {
    const GuardFace& g = system.guards[gi];
    const Domain* src = nullptr;
    for (const auto& d : system.domains)
      if (d.id == g.domain_id) src = &d;
    if (!src) {
      issue("guard " + std::to_string(gi) + " references unknown domain " +
            std::to_string(g.domain_id));
      continue;
    }
    if (g.face_index < 0 || g.face_index >= static_cast<int>(src->boundary_faces.size()))
      issue("guard " + std::to_string(gi) + " references missing face " +
            std::to_string(g.face_index));
    bool target_ok = false;
    for (const auto& d : system.domains)
      if (d.id == g.target_domain_id) target_ok = true;
    if (!target_ok)
      issue("guard " + std::to_string(gi) + " targets unknown domain " +
            std::to_string(g.target_domain_id));
    if (!g.reset) issue("guard " + std::to_string(gi) + " has no reset");
  }
  for (const auto& d : system.domains) {
    if (d.dim <= 0) issue("domain " + std::to_string(d.id) + " has nonpositive dimension");
    if (!d.field) issue("domain " + std::to_string(d.id) + " has no field");
  }

  const double near_face = 1e-6;
  for (const auto& s : samples) {
    const Domain* dom = nullptr;
    for (const auto& d : system.domains)
      if (d.id == s.domain_id) dom = &d;
    if (!dom) {
      issue("sample in unknown domain " + std::to_string(s.domain_id));
      continue;
    }
    if (s.x.size() != dom->dim) {
      issue("sample dimension " + std::to_string(s.x.size()) + " does not match domain " +
            std::to_string(dom->id));
      continue;
    }
    ++rep.samples_checked;
    Vec p = system.init_params ? system.init_params(s) : Vec::Zero(system.param_dim);

    Vec dx(dom->dim);
    dom->field(s.x, p, dx);
    if (dx.size() != dom->dim) {
      issue("field of domain " + std::to_string(dom->id) + " produced wrong dimension");
      continue;
    }
    FieldFn field = [f = dom->field, p](const Vec& x, Vec& out) { f(x, p, out); };

    for (size_t fi = 0; fi < dom->boundary_faces.size(); ++fi) {
      double h = dom->boundary_faces[fi](s.x, p);
      if (std::abs(h) > near_face) continue;  // only near-face samples are probed further
      int gi = system.guard_index_for(dom->id, static_cast<int>(fi));
      if (gi < 0) continue;
      const GuardFace& g = system.guards[gi];
      if (!predicate_holds(g, s.x, p)) continue;

      ScalarFn w = [hf = dom->boundary_faces[fi], p](const Vec& x) { return hf(x, p); };
      double wdot = flow_derivative(field, w, s.x);
      if (!(wdot < 0)) {
        std::ostringstream os;
        os << "field does not point outward on admissible face " << fi << " of domain "
           << dom->id << " (dh/dt = " << wdot << ")";
        issue(os.str());
      }

      Vec x_post = g.reset(s.x, p);
      const Domain& target = system.domain(g.target_domain_id);
      if (x_post.size() != target.dim) {
        issue("reset of guard " + std::to_string(gi) + " produced wrong dimension");
        continue;
      }
      for (size_t tf = 0; tf < target.boundary_faces.size(); ++tf) {
        double ht = target.boundary_faces[tf](x_post, p);
        if (ht < -1e-9) {
          std::ostringstream os;
          os << "reset of guard " << gi << " lands outside target domain " << target.id
             << " (face " << tf << " = " << ht << ")";
          issue(os.str());
        }
      }
    }
  }
  return rep;
}

std::optional<double> in_domain_distance(const HybridSystem& system, const HybridState& state) {
  const Domain* dom = nullptr;
  for (const auto& d : system.domains)
    if (d.id == state.domain_id) dom = &d;
  if (!dom) return std::nullopt;
  if (state.x.size() != dom->dim) return std::nullopt;  // incomparable

  Vec p = system.init_params ? system.init_params(state) : Vec::Zero(system.param_dim);
  double dist = 0;
  for (const auto& hf : dom->boundary_faces) {
    double h = hf(state.x, p);
    if (h >= 0) continue;
    // first-order distance to the violated face
    Vec grad(dom->dim);
    for (int i = 0; i < dom->dim; ++i) {
      double step = std::max(1e-7, 1e-7 * std::abs(state.x[i]));
      Vec xp = state.x, xm = state.x;
      xp[i] += step;
      xm[i] -= step;
      grad[i] = (hf(xp, p) - hf(xm, p)) / (2 * step);
    }
    double gn = grad.norm();
    if (gn < 1e-12) return std::nullopt;
    dist = std::max(dist, -h / gn);
  }
  return dist;
}

HybridSystem augment_with_time(const HybridSystem& system) {
  HybridSystem out;
  out.name = system.name.empty() ? "time-augmented" : system.name + "+time";
  out.param_dim = system.param_dim;
  out.init_params = system.init_params
                        ? [inner = system.init_params](const HybridState& s) {
                            HybridState trimmed{s.domain_id, s.x.head(s.x.size() - 1)};
                            return inner(trimmed);
                          }
                        : std::function<Vec(const HybridState&)>();
  out.update_params = system.update_params;

  for (const auto& d : system.domains) {
    Domain nd;
    nd.id = d.id;
    nd.dim = d.dim + 1;
    nd.field = [f = d.field, n = d.dim](const Vec& x, const Vec& p, Vec& dx) {
      Vec inner_dx(n);
      f(x.head(n), p, inner_dx);
      dx.resize(n + 1);
      dx.head(n) = inner_dx;
      dx[n] = 1.0;
    };
    for (const auto& h : d.boundary_faces)
      nd.boundary_faces.push_back(
          [hf = h, n = d.dim](const Vec& x, const Vec& p) { return hf(x.head(n), p); });
    out.domains.push_back(std::move(nd));
  }
  for (const auto& g : system.guards) {
    GuardFace ng = g;
    int n_src = system.domain(g.domain_id).dim;
    if (g.predicate)
      ng.predicate = [pred = g.predicate, n_src](const Vec& x, const Vec& p) {
        return pred(x.head(n_src), p);
      };
    ng.reset = [r = g.reset, n_src](const Vec& x, const Vec& p) {
      Vec y = r(x.head(n_src), p);
      Vec out(y.size() + 1);
      out.head(y.size()) = y;
      out[y.size()] = x[n_src];  // clock carries through the jump
      return out;
    };
    out.guards.push_back(std::move(ng));
  }
  return out;
}

}  // namespace hybred
