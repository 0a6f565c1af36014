#pragma once

#include "hybred/poincare/poincare.hpp"

namespace hybred {

// ---------------------------------------------------------------------------
// Reduction certificates
// ---------------------------------------------------------------------------

enum class ReductionVerdict { ExactCertified, ApproximateOnly, Inconclusive };

const char* to_string(ReductionVerdict v);

struct ReductionOptions {
  double certificate_radius = 0.02;
  int certificate_samples = 8;
  unsigned long long seed = 12345;
};

struct ReductionReport {
  ReductionVerdict verdict = ReductionVerdict::Inconclusive;
  int r = 0;  // stabilized rank: dimension of the reduced return map
  int m = 0;  // iterate bound (smallest domain dimension on the itinerary)
  std::vector<int> rank_profile;
  double spectral_radius = 0;
  SpectralSummary spectrum;
  CertificateReport certificate;
};

// Certify reduction at the handle's anchor (expected to be a fixed point):
// a passing constant-rank certificate at power m yields ExactCertified with
// r = rank DP^m; otherwise a spectral radius below one yields ApproximateOnly;
// otherwise Inconclusive.
ReductionReport analyze_reduction(const PoincareMapHandle& handle,
                                  const ReductionOptions& opts = {});

// Finite-time collapse measurement: for each column direction d (in section
// coordinates, expected to sample ker DP^m), runs m cycles from the anchor and
// from anchor + magnitude * d and returns the section-coordinate distance of
// the endpoints. Exact reduction predicts integration-tolerance residuals
// regardless of magnitude.
Vec fiber_collapse_test(const PoincareMapHandle& handle, const Mat& directions,
                        double magnitude, int m);

// ---------------------------------------------------------------------------
// Contraction profiles
// ---------------------------------------------------------------------------

struct ContractionProfile {
  // deviation of P^k(x0) from the anchor, split through the direct sum
  // range(DP^m) + ker(DP^m): surviving (tangential) vs dying (transverse)
  std::vector<double> tangential;         // k = 0..cycles
  std::vector<double> transverse;
  std::vector<double> tangential_ratios;  // successive quotients
  std::vector<double> transverse_ratios;
  double fitted_tangential_rate = 0;      // geometric mean of tangential ratios
  int cycles = 0;
  // Deviations below 1e2x machine epsilon end the profile early (recorded
  // rather than thrown: a deviation that has already collapsed is the
  // expected outcome on exactly-reducing systems).
  bool truncated = false;
  int truncated_at = -1;
};

ContractionProfile contraction_profile(const PoincareMapHandle& handle, const Vec& x0,
                                       int cycles);

// ---------------------------------------------------------------------------
// Glued (quotient) trajectories
// ---------------------------------------------------------------------------

// One execution viewed as a single time-parameterized path: reset pre/post
// representatives are identified at the same instant, evaluation is
// right-continuous, and event times and total duration match the trace
// exactly.
struct GluedStitch {
  double t = 0;
  int guard_index = -1;
  HybridState pre, post;
};

struct GluedTrajectory {
  double duration = 0;
  HybridState start, end;
  std::vector<DenseSegment> segments;
  std::vector<GluedStitch> stitches;

  HybridState eval(double t) const;  // right-continuous at stitches
};

GluedTrajectory glued_trajectory(const ExecutionTrace& trace);

// ---------------------------------------------------------------------------
// Hybrid phase and isochrons
// ---------------------------------------------------------------------------

// Dense one-period reference orbit with a sample cache for nearest-point
// queries. Phase 0 sits at the section anchor; phase advances at rate
// 2 pi / period along the flow.
struct PhaseMap {
  PoincareMapHandle handle;
  GluedTrajectory orbit;  // one period starting at the anchor
  double period = 0;
  std::vector<double> cache_t;
  std::vector<HybridState> cache_x;
};

PhaseMap make_phase_map(const PoincareMapHandle& handle, const PeriodicOrbit& orbit,
                        int cache_samples = 1024);

struct PhaseOptions {
  int settle_cycles = 2;
  // largest acceptable distance to the reference orbit after settling
  double orbit_distance_tol = 1e-2;
};

// Asymptotic phase of x: settle along the flow for settle_cycles periods,
// locate the nearest reference-orbit point (same chart only), and subtract
// the elapsed phase. Throws NotConverged when the settled state stays farther
// than the tolerance from the orbit.
double phase_of(const PhaseMap& pm, const HybridState& x, const PhaseOptions& opts = {});

struct IsochronOptions {
  PhaseOptions phase;
  double phase_tol = 1e-4;   // bisection target on the phase residual
  unsigned long long seed = 2024;
};

// Points within `radius` of the orbit whose asymptotic phase equals theta:
// each sample displaces a nearby orbit point along a random transverse ray
// and slides the anchor along the orbit by bisection until the phase matches.
// The first sample is the on-orbit point itself.
std::vector<HybridState> isochron_sample(const PhaseMap& pm, double theta, int n_points,
                                         double radius, const IsochronOptions& opts = {});

}  // namespace hybred
