#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "kfp/model.hpp"
#include "kfp/sparse.hpp"

namespace kfp {

/// Tensor grid on the box prod [-L_k, L_k] with N_k intervals per direction.
/// Nodes sit at -L_k + i Delta_k, i = 0..N_k; staggered layouts shift by Delta_k / 2.
struct GridSpec {
  std::vector<double> half_width;
  std::vector<int> intervals;

  std::size_t dim() const { return half_width.size(); }
  double spacing(std::size_t k) const { return 2.0 * half_width[k] / intervals[k]; }
  /// Throws InvalidGrid (N_k < 16, non-positive widths, size mismatch).
  void validate() const;

  /// Smallest N_k with Delta_k <= h / resolution (resolution 2 gives Delta <= h/2).
  static GridSpec for_h(std::span<const double> half_width, double h, double resolution = 2.0);
};

/// L2 mass of the normalized Maxwellian outside the box, relative to its total, by a
/// Gaussian tail bound built from min phi on the boundary.
double maxwellian_tail_estimate(const ModelSpec& model, const GridSpec& grid, double h);

/// Smallest box (0.05 steps, per direction, capped at max_half_width) whose tail
/// estimate stays below `tail`, meshed with Delta <= h / resolution. Throws InvalidGrid
/// if even the capped box misses the target.
GridSpec adapted_grid(const ModelSpec& model, double h, double resolution = 2.0, double tail = 1e-12,
                      double max_half_width = 2.5);

/// Index bookkeeping for q-forms: components are sorted index sets I, |I| = q, living on
/// the layout staggered by 1/2 in each direction of I. Components are interleaved per
/// cell; cells are ordered with the smallest-N direction fastest.
class FormLayout {
 public:
  FormLayout(const GridSpec& grid, int degree);

  const GridSpec& grid() const { return grid_; }
  int degree() const { return degree_; }
  std::size_t size() const { return total_; }
  const std::vector<std::vector<int>>& components() const { return comps_; }

  /// Linear index of component c at multi-index i, or npos if that location does not exist.
  std::size_t index(std::size_t c, std::span<const int> i) const;
  /// Component and multi-index for a linear index.
  std::pair<std::size_t, std::vector<int>> locate(std::size_t idx) const;
  /// Physical coordinates of a linear index.
  Vec position(std::size_t idx) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  GridSpec grid_;
  int degree_;
  std::vector<std::vector<int>> comps_;
  std::vector<std::size_t> order_;     // directions, fastest first
  std::vector<std::size_t> stride_;    // cell stride per direction
  std::vector<std::size_t> cell_base_; // first index of each cell
  std::vector<unsigned> cell_mask_;    // bit c set if component c exists in the cell
  std::size_t total_ = 0;
};

/// Exponential-fitted difference in direction k from the degree-q component `from`
/// (k not in from) to the component from + {k}:
///   D = h S_target^-1 Delta_k S_source, S = e^{(phi - phi_ref)/h} at each location.
/// Throws GaugeOverflow if an entry exceeds 1e30.
CsrMatrix build_difference(const FormLayout& source, const FormLayout& target, const ModelSpec& model,
                           double h, std::size_t k, std::size_t from_component);

/// Degree-0 to degree-1 difference in direction k for a layout pair (convenience).
CsrMatrix build_difference(const GridSpec& grid, const ModelSpec& model, double h, std::size_t k);

/// Averaged action of the q-th exterior power of A^T on q-forms, minors of A^T times
/// nearest-neighbour means between layouts (weight 1/2 per differing direction).
CsrMatrix exterior_weight(const FormLayout& layout, const Matrix& a);

/// A + s diag(Delta_k^2 / h). The added diffusion is O(Delta^2) and lifts the
/// grid-scale checkerboard modes of directions without diffusion to about 4 s h.
Matrix stabilized_structure(const Matrix& a, const GridSpec& grid, double h, double s);

struct DiscreteComplex {
  GridSpec grid;
  double h = 0.0;
  double stabilization = 0.0;
  Matrix a;                ///< structure matrix actually used, after stabilization
  FormLayout nodes, edges, faces;
  CsrMatrix d0, d1;
  CsrMatrix w1, w2;        ///< averaged exterior powers of A^T on 1- and 2-forms
  CsrMatrix d0_adj;        ///< d0^T W1
  CsrMatrix lap0;          ///< d0^T W1 d0
  /// Degree-1 Laplacian as the pencil lap1 = W1^-1 K; W1 itself can be singular.
  CsrMatrix lap1_k;        ///< W1 d0 d0^T W1 + d1^T W2 d1
  Vec maxwellian;          ///< e^{-(phi - min phi)/h} at the nodes, unit 2-norm
  Vec node_phi;
};

/// Throws DimensionUnsupported for n > 3, GaugeOverflow from the differences.
DiscreteComplex assemble_complex(const GridSpec& grid, const ModelSpec& model, double h,
                                 bool with_degree1 = true, double stabilization = 1.0);

/// |lap0(A)^T - lap0(A^T)|_max
double adjoint_symmetry_check(const DiscreteComplex& for_a, const DiscreteComplex& for_a_transpose);

struct ComplexDefects {
  double d1d0 = 0.0;           ///< max |d1 d0| / (|d1| |d0|), inf-norms
  double kernel = 0.0;         ///< |lap0 m|_inf / |lap0|_inf
  double intertwining = 0.0;   ///< max |K d0 - W1 d0 lap0| / (|K| |d0|)
};

ComplexDefects complex_defects(const DiscreteComplex& c);

}  // namespace kfp
