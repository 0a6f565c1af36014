#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hybred/numerics/ode.hpp"

namespace hybred {

// Continuous-time pieces of a hybrid system take an explicit parameter vector
// alongside the state. Parameters are held constant along every flow segment;
// they only change through the system's update hook at events. Systems with
// no parameters receive an empty vector and ignore it.
using ParamField = std::function<void(const Vec& x, const Vec& p, Vec& dxdt)>;
using ParamScalar = std::function<double(const Vec& x, const Vec& p)>;
using ParamPredicate = std::function<bool(const Vec& x, const Vec& p)>;
using ParamReset = std::function<Vec(const Vec& x, const Vec& p)>;

// One chart of the hybrid state space: a vector field on an n-dimensional
// region carved out by level functions that are positive in the interior.
struct Domain {
  int id = 0;
  int dim = 0;
  ParamField field;
  std::vector<ParamScalar> boundary_faces;
};

// A transition attached to one boundary face of one domain. The predicate is
// an extra admissibility condition evaluated at the crossing point; a face
// reached while its predicate is false ends the execution instead of
// transitioning.
struct GuardFace {
  int domain_id = 0;
  int face_index = 0;
  ParamPredicate predicate;  // null means always admissible
  ParamReset reset;
  int target_domain_id = 0;
};

struct HybridState {
  int domain_id = 0;
  Vec x;
};

struct HybridEvent {
  double time = 0;
  int guard_index = -1;  // index into HybridSystem::guards
  HybridState pre;       // state on the source face at the crossing
  HybridState post;      // state in the target domain after the reset
};

// A full execution record: flow segments with dense output, interleaved with
// the events that separate them. Executions are right-continuous: the segment
// following an event starts exactly (bit for bit) at the event's post state.
struct ExecutionTrace {
  std::vector<DenseSegment> segments;
  std::vector<HybridEvent> events;
  double total_time = 0;
  HybridState start;
  HybridState end;
  Vec end_params;  // parameter vector at the end, for chaining executions
};

struct HybridSystem {
  std::string name;
  std::vector<Domain> domains;
  std::vector<GuardFace> guards;

  int param_dim = 0;
  // optional: parameters at the start of an execution (default: zeros)
  std::function<Vec(const HybridState&)> init_params;
  // optional: new parameters after the reset of the given guard
  std::function<Vec(int guard_index, const Vec& x_post, const Vec& p)> update_params;

  const Domain& domain(int id) const;
  // index into guards for the transition on (domain_id, face_index), or -1
  int guard_index_for(int domain_id, int face_index) const;
};

}  // namespace hybred
