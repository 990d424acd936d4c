#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kfp/discrete_complex.hpp"
#include "kfp/json_io.hpp"
#include "kfp/landscape.hpp"
#include "kfp/symbol_geometry.hpp"

namespace kfp {

/// How a complex is built for a given h.
struct LabGridOptions {
  double resolution = 2.0;      ///< Delta <= h / resolution
  double tail = 1e-12;          ///< Maxwellian mass allowed outside the box
  double max_half_width = 2.5;
  double stabilization = 1.0;
};

DiscreteComplex complex_for_h(const ModelSpec& model, double h, const LabGridOptions& opt = {},
                              bool with_degree1 = false);

struct SpectrumOptions {
  int count = 8;                        ///< wanted values per shift
  double window = 2.0;                  ///< keep |lambda| < window * h
  std::vector<cplx> shifts{cplx(-0.1)}; ///< in units of h; the first must be real
  int basis = 0;                        ///< Arnoldi basis, 0 for 2k + 8
  double tol = 1e-10;                   ///< Arnoldi residual, relative to the operator norm
  bool want_vectors = false;
  /// Grow `count` until the real shift reaches past the window edge.
  bool cover_window = true;
  int max_count = 96;
  double dedupe = 1e-8;                 ///< merge distance, relative to h
  std::uint64_t seed = 42;              ///< start-vector perturbation
};

struct SpectralValue {
  cplx value;
  double residual = 0.0;  ///< |M v - lambda W v| / |v|
  bool deflated = false;  ///< the exact kernel direction, not computed
  CVec vector;            ///< empty unless requested
};

struct SpectrumResult {
  double h = 0.0;
  int degree = 0;
  std::vector<SpectralValue> values;  ///< ascending |lambda|
  bool deflated = false;
  GridSpec grid;
  double stabilization = 0.0;
  double op_norm = 0.0;
  bool window_covered = false;
  bool accretive = false;          ///< Re lambda >= -1e-8 |M| for all values
  bool conjugate_closed = false;   ///< every nonreal value has its conjugate

  CVec scaled() const;  ///< lambda / h
};

/// Degree 0: shift-invert on lap0 with the Maxwellian projected out; the kernel is
/// reported as a deflated 0. Degree 1: the pencil K v = lambda W1 v.
/// Throws NotConverged, ResidualTooLarge.
SpectrumResult low_spectrum(const DiscreteComplex& complex, int degree, const SpectrumOptions& opt = {});

/// Count of values with Re lambda < window h and |Im lambda| > d h.
int window_violations(const SpectrumResult& s, double window, double d);

/// Default D for the window test: 4 max |Im mu| + 1.
double default_imaginary_bound(std::span<const cplx> lattice);

struct LatticePair {
  cplx computed;  ///< lambda / h
  cplx lattice;
  double deviation = 0.0;
};

struct LatticeMatch {
  std::vector<LatticePair> pairs;
  CVec unmatched_computed;
  CVec unmatched_lattice;
  double max_deviation = 0.0;
};

/// Greedy global nearest matching, each value used at most once (multiplicities are
/// repeated entries of `lattice`).
LatticeMatch match_lattice(std::span<const cplx> computed, std::span<const cplx> lattice);

/// Degree-0 lattice over all critical points, repeated by multiplicity.
CVec lattice_multiset(const ModelSpec& model, double radius);

/// Smallest nonzero eigenvalue of lap0. Throws ComplexSplitting if it is not real and positive.
double splitting_value(const DiscreteComplex& complex, const SpectrumOptions& opt = {});

struct SplittingPoint {
  double h = 0.0;
  double mu1 = 0.0;
};

struct SplittingFit {
  std::vector<SplittingPoint> table;
  double slope = 0.0;      ///< s in mu1 = h a e^{-s/h}
  double prefactor = 0.0;  ///< a
  double r2 = 0.0;
  bool passed = false;     ///< r2 >= 0.999
};

/// Least squares of log mu1 - log h against 1/h. Needs >= 5 points with mu1 > 0.
/// Throws BadFit if r2 < 0.999 and `strict`.
SplittingFit fit_splitting(std::vector<SplittingPoint> table, bool strict = true);

struct WellInteraction {
  int well = 0;             ///< -1 or +1
  double action = 0.0;      ///< S_j
  double c0 = 0.0;          ///< quasimode normalization
  Vec tangent;              ///< incoming curve direction at the cutoff radius, A complex
  Vec tangent_star;         ///< same for the transposed complex
  double transverse_det = 0.0;
  double transverse_det_star = 0.0;
  double ell = 0.0;
  double ell_star = 0.0;
  double a0 = 0.0;          ///< ell * ell_star
};

struct InteractionData {
  Matrix phi_plus;       ///< outgoing form for q
  Matrix phi_plus_star;  ///< outgoing form for q_check
  Vec a00;               ///< 1-form amplitude at the saddle, A complex
  Vec a00_star;
  double pairing = 0.0;  ///< leading (e0* | e0)_A after scaling, 1 by construction
  double negative_eigenvalue = 0.0;
  double cutoff_radius = 0.0;
  std::vector<WellInteraction> wells;  ///< j = -1, +1
  double total = 0.0;                  ///< a_{-1} + a_{+1}
  double total_half_radius = 0.0;      ///< the same at half the cutoff radius
  double sensitivity = 0.0;            ///< |total_half - total| / total

  json to_json() const;
};

/// Leading-order prefactor from Gaussian evaluations of the interaction integrals.
/// Throws SignViolation, CurveEscapesQuadraticRegion.
InteractionData predict_prefactor(const ModelSpec& model, const WellStructure& wells,
                                  double cutoff_radius = 0.2);

struct ResolventPoint {
  cplx z;
  double sigma_min = 0.0;
  double norm = 0.0;    ///< 1 / sigma_min
  double scaled = 0.0;  ///< h * norm
};

/// Probe points radius * h * e^{i (22.5 + 45 k) deg}, k = 0..count-1.
CVec default_probes(double h, double radius = 2.0, int count = 8);

/// Rejects (std::invalid_argument) points closer than h / proximity to `spectrum`.
std::vector<ResolventPoint> resolvent_probe(const DiscreteComplex& complex, std::span<const cplx> z,
                                            std::span<const cplx> spectrum, double proximity = 10.0);

struct LocalizationReport {
  double overlap_minus = 0.0;     ///< |<v, f_{-1}>| / (|v| |f|) on the U_{-1} side
  double overlap_plus = 0.0;
  double saddle_fraction = 0.0;   ///< degree-1 squared norm within the ball around U_0
  bool degree0_passed = false;
  bool degree1_passed = false;
};

/// Degree 0: overlap of the vector with the truncated Maxwellian quasimode on each basin
/// side (phi < phi(U_0) - epsilon0). Degree 1: mass fraction near U_0. Either vector may
/// be empty, in which case that part is skipped.
LocalizationReport localization_check(const DiscreteComplex& complex, const WellStructure& wells,
                                      std::span<const cplx> degree0, std::span<const cplx> degree1,
                                      double epsilon0 = 0.05, double ball = 0.5);

// Plot-ready outputs.
std::string spectrum_csv(const std::vector<SpectrumResult>& spectra,
                         const std::vector<LatticeMatch>& matches);
std::string splitting_csv(const SplittingFit& fit);
json fit_json(const SplittingFit& fit, double slope_target, double slope_tolerance);

}  // namespace kfp
