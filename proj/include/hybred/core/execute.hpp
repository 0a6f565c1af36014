#pragma once

#include <optional>

#include "hybred/core/types.hpp"

namespace hybred {

struct ExecOptions {
  IntegratorOptions integrator;
  // slack allowed on the start-inside check and on reset landings
  double face_slack = 1e-9;
};

// Optional halting rule threaded through an execution, used by the return-map
// layer. InteriorSection stops at a directed crossing of a level set inside
// one domain; GuardPre stops on a guard face just before its reset; ResetPost
// stops just after it. `skip` crossings are passed over before halting.
struct StopCondition {
  enum class Kind { None, InteriorSection, GuardPre, ResetPost };
  Kind kind = Kind::None;
  // InteriorSection: domain carrying the level set (required). GuardPre: only
  // guards leaving this domain match. ResetPost: only resets landing in this
  // domain match. -1 = no domain filter (GuardPre / ResetPost only).
  int domain_id = -1;
  ScalarFn level;        // InteriorSection only
  int direction = 0;     // InteriorSection crossing direction (-1, +1, or 0 = either)
  int guard_index = -1;  // GuardPre / ResetPost: required guard, or -1 = any
  int skip = 0;
};

struct ExecutionResult {
  ExecutionTrace trace;
  bool stopped = false;  // true if the stop condition halted the run
  double stop_time = 0;
  HybridState stop_state;
  Vec stop_params;
  int stop_guard_index = -1;  // guard that satisfied a GuardPre/ResetPost stop
};

// Run an execution from x0 for at most `horizon` time units, applying guard
// resets as faces are crossed. Throws TangentialCrossing on a sub-threshold
// crossing angle, EscapeDomain when the state leaves a domain other than
// through an admissible guard (non-guard face, false predicate, ambiguous
// corner, or drift through a face without a transversal crossing), and
// ZenoSuspicion when more than integrator.max_events_per_step events pile up
// within a window of event_tol * horizon.
ExecutionResult run_execution(const HybridSystem& system, const HybridState& x0,
                              double horizon, const ExecOptions& opts,
                              const StopCondition& stop = {},
                              const std::optional<Vec>& initial_params = std::nullopt);

// Convenience wrapper without a stop condition.
ExecutionTrace execute(const HybridSystem& system, const HybridState& x0, double horizon,
                       const ExecOptions& opts = {},
                       const std::optional<Vec>& initial_params = std::nullopt);

struct ValidationReport {
  bool ok = true;
  int samples_checked = 0;
  std::vector<std::string> issues;
};

// Structural and sample-based sanity checks: guard wiring, field/reset
// dimensions, outward-pointing fields on admissible guard faces, and resets
// landing inside their target domains. Samples near a face (|h| <= 1e-6) are
// additionally checked for the outward-crossing conditions.
ValidationReport validate(const HybridSystem& system, const std::vector<HybridState>& samples);

// First-order estimate of the Euclidean distance from x to the domain it
// claims to inhabit (0 if inside). Empty when the state and domain dimensions
// are incomparable or a face gradient degenerates.
std::optional<double> in_domain_distance(const HybridSystem& system, const HybridState& state);

// Lift a system by one clock coordinate per domain (unit rate, preserved by
// resets and invisible to the original faces and fields).
HybridSystem augment_with_time(const HybridSystem& system);

}  // namespace hybred
