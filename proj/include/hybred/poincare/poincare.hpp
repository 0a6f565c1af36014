#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "hybred/core/execute.hpp"
#include "hybred/numerics/linalg.hpp"

namespace hybred {

// Rank decisions on finite-difference return-map Jacobians must tolerate the
// quadrature noise floor (integration tolerance / fd step, plus third-order
// curvature terms), which sits orders of magnitude above machine epsilon.
// Singular values below this fraction of the largest count as zero.
inline constexpr double kJacobianRankTol = 1e-6;

// Rank of a finite-difference Jacobian (or a power of one). On top of the
// relative cut above, a matrix whose largest singular value is itself below
// the noise floor counts as zero rank: section anchors live at state scale,
// so such a Jacobian is indistinguishable from the zero map (the closed-loop
// derivative of a deadbeat-controlled return, for instance).
int jacobian_rank(const Mat& m);

// A codimension-one section of one domain: the zero set of a scalar level
// function, an anchor point on it, and a fixed orthonormal basis of the
// tangent hyperplane at the anchor. Section coordinates are the chart
// coefficients u with embedding x = anchor + chart * u followed by a Newton
// retraction along the level gradient back onto the zero set.
struct Section {
  int domain_id = 0;
  ScalarFn level;          // zero on the section, parameters baked in
  HybridState base_point;  // anchor on the zero set (|level| <= 1e-10)
  Mat chart;               // dim x (dim-1), orthonormal columns
  int guard_index = -1;    // >= 0 when the section is a guard face
};

struct PoincareOptions {
  double horizon = 100.0;        // time budget for one return (NoReturn beyond)
  double fd_step = 1e-4;         // central-difference step in chart coordinates
  double fixed_point_tol = 1e-10;
  int max_newton_iter = 40;
  // When strict_sequence is set, a completed return whose guard itinerary
  // differs from expected_sequence raises WrongSequence.
  std::vector<int> expected_sequence;
  bool strict_sequence = false;
  std::optional<Vec> params;  // initial parameter vector for evaluations
  ExecOptions exec;
};

// An immutable first-return evaluator: the system, the section, and the
// crossing direction that counts as a return. Evaluations are pure; handles
// may be shared across threads.
struct ReturnInfo {
  Vec u;             // arrival point in section coordinates
  HybridState state; // arrival state on the zero set
  double elapsed = 0;
  std::vector<int> event_guards;  // guards crossed during the cycle, in order
  Vec end_params;
};

struct PoincareMapHandle {
  HybridSystem system;
  Section section;
  int direction = +1;  // interior sections: level crossing sign (+1, -1, 0)
  PoincareOptions opts;
  // Optional replacement evaluator for the underlying return: when set,
  // first_return_info delegates to it instead of integrating the raw system.
  // Used to push derived maps (closed-loop controlled returns) through the
  // same spectral and certification machinery as plain ones.
  std::function<ReturnInfo(const Vec&)> custom_return;

  int section_dim() const { return static_cast<int>(section.chart.cols()); }
};

// Section on the zero set of `level` in the interior of one domain. Checks
// the anchor sits on the zero set (1e-10) and the field crosses transversally
// there; the chart is the orthonormal kernel of the level gradient.
Section make_interior_section(const HybridSystem& system, int domain_id, ScalarFn level,
                              const Vec& anchor,
                              const std::optional<Vec>& params = std::nullopt);

// Section on a guard face, anchored at a pre-crossing state. The level is the
// face function (parameters baked in); the guard predicate must admit the
// anchor. Returns from this section stop just before the guard's reset.
Section make_guard_section(const HybridSystem& system, int guard_index, const Vec& anchor,
                           const std::optional<Vec>& params = std::nullopt);

PoincareMapHandle make_poincare_map(const HybridSystem& system, Section section,
                                    int direction = 0, PoincareOptions opts = {});

// Chart embedding (with retraction onto the zero set) and chart coordinates.
HybridState section_embed(const PoincareMapHandle& handle, const Vec& u);
Vec section_coords(const PoincareMapHandle& handle, const HybridState& x);

// First return of the section point with chart coordinates u. Throws NoReturn
// when the time budget runs out before the section is hit again and
// WrongSequence under the strict itinerary option; integration errors
// propagate.
ReturnInfo first_return_info(const PoincareMapHandle& handle, const Vec& u);
Vec first_return(const PoincareMapHandle& handle, const Vec& u);

// Central-difference Jacobian of the return map at u (chart coordinates).
Mat return_jacobian(const PoincareMapHandle& handle, const Vec& u);

struct PeriodicOrbit {
  Vec u;             // fixed point in section coordinates
  HybridState state; // the same point in the ambient domain
  double period = 0;
  double residual = 0;
  std::vector<int> event_guards;  // itinerary of the closed cycle
};

// Newton (least-squares, pseudoinverse) solve of P(u) = u from the given
// guess. Tolerates unit multipliers (energy-conserving models) by dropping
// near-singular directions. Throws NoConvergence when the iteration budget is
// exhausted.
PeriodicOrbit find_periodic_orbit(const PoincareMapHandle& handle, const Vec& guess);

// Spectral data of the linearized return map at the section anchor. The
// anchor is expected to be a fixed point; the distance |P(0)| is recorded and
// flagged when it exceeds the handle's fixed-point contract (1e-6).
struct SpectralSummary {
  Mat dp;  // linearized return map in section coordinates
  std::vector<std::complex<double>> eigenvalues;  // sorted by |.| descending
  std::vector<Vec> singular_values;  // of DP^k for k = 1..m
  std::vector<int> ranks;            // r_k = rank DP^k for k = 1..m
  int m = 0;               // smallest domain dimension along the itinerary
  int nilpotent_index = 0; // smallest k with r_k = r_{k+1} (0 if unresolved)
  double fixed_point_residual = 0;
  std::vector<std::string> anomalies;
};

SpectralSummary spectral_summary(const PoincareMapHandle& handle);

// Samples chart points uniformly in a radius ball about the anchor, computes
// the rank of the k-cycle Jacobian (chained per-cycle Jacobians along the
// sample's own orbit) at each, and checks the rank also stabilizes from k to
// k+1 at the anchor. The certificate holds when every sampled rank agrees
// with the stabilized anchor rank.
struct CertificateReport {
  bool holds = false;
  bool degenerate = false;  // zero radius or no samples
  int k = 1;
  double radius = 0;
  int rank_at_base = 0;
  int rank_next_power = 0;
  std::vector<int> sampled_ranks;
  std::string note;
};

CertificateReport constant_rank_certificate(const PoincareMapHandle& handle, double radius,
                                            int n_samples, int k, unsigned long long seed = 12345);

// Nonzero spectra of two return maps around the same periodic orbit, paired
// greedily by magnitude. Zero eigenvalues (below 1e-8 of the largest singular
// value) are counted separately: their multiplicities legitimately differ
// across sections while the nonzero parts must agree.
struct SpectrumComparison {
  std::vector<std::complex<double>> nonzero_a, nonzero_b;
  int zero_count_a = 0, zero_count_b = 0;
  bool nonzero_counts_match = false;
  double max_pair_distance = 0;  // over greedily paired nonzero eigenvalues
};

SpectrumComparison compare_sections(const PoincareMapHandle& a, const PoincareMapHandle& b);

}  // namespace hybred
