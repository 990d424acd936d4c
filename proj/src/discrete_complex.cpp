#include "kfp/discrete_complex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"
#include "kfp/landscape.hpp"

namespace kfp {

void GridSpec::validate() const {
  if (half_width.empty() || half_width.size() != intervals.size())
    throw InvalidGrid("grid: half widths and point counts must have the same nonzero length");
  for (std::size_t k = 0; k < dim(); ++k) {
    if (!(half_width[k] > 0) || !std::isfinite(half_width[k]))
      throw InvalidGrid("grid: half widths must be positive");
    if (intervals[k] < 16) throw InvalidGrid("grid: at least 16 intervals per direction");
  }
}

GridSpec GridSpec::for_h(std::span<const double> half_width, double h, double resolution) {
  if (!(h > 0) || !(resolution > 0)) throw InvalidGrid("grid: h and resolution must be positive");
  GridSpec g;
  g.half_width.assign(half_width.begin(), half_width.end());
  for (double l : half_width) {
    int n = static_cast<int>(std::ceil(2.0 * l * resolution / h - 1e-9));
    g.intervals.push_back(std::max(16, n));
  }
  g.validate();
  return g;
}

double maxwellian_tail_estimate(const ModelSpec& model, const GridSpec& grid, double h) {
  grid.validate();
  const std::size_t n = grid.dim();
  if (static_cast<std::size_t>(model.dim) != n) throw InvalidGrid("grid dimension differs from the model dimension");
  const auto crit = find_critical_points(model);
  const CriticalPoint* low = nullptr;
  for (const auto& c : crit)
    if (c.index == 0 && (!low || c.value < low->value)) low = &c;
  if (!low) return 1.0;

  // boundary scan: each face x_k = +-L_k sampled on a tensor grid
  const int per_dir = n == 1 ? 1 : (n == 2 ? 400 : 60);
  double phi_b = std::numeric_limits<double>::infinity();
  double slope = std::numeric_limits<double>::infinity();
  double area = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double face = 1.0;
    for (std::size_t d = 0; d < n; ++d)
      if (d != k) face *= 2.0 * grid.half_width[d];
    area += 2.0 * face;
    for (double side : {-1.0, 1.0}) {
      std::vector<int> idx(n, 0);
      const std::size_t free_dirs = n - 1;
      const std::size_t count = static_cast<std::size_t>(std::pow(per_dir + 1, static_cast<double>(free_dirs)));
      for (std::size_t s = 0; s < count; ++s) {
        Vec x(n);
        std::size_t rem = s;
        for (std::size_t d = 0; d < n; ++d) {
          if (d == k) {
            x[d] = side * grid.half_width[d];
            continue;
          }
          const int i = static_cast<int>(rem % (per_dir + 1));
          rem /= per_dir + 1;
          x[d] = -grid.half_width[d] + 2.0 * grid.half_width[d] * i / per_dir;
        }
        phi_b = std::min(phi_b, model.phi.value(x));
        slope = std::min(slope, side * model.phi.gradient(x)[k]);
      }
    }
  }
  const double gap = phi_b - low->value;
  if (gap <= 0 || slope <= 0) return 1.0;
  // outside: e^{-2 gap/h} area h/(2 slope); inside: Gaussian at the deepest minimum
  const double outside = std::exp(-2.0 * gap / h) * area * h / (2.0 * slope);
  const double inside = std::pow(M_PI * h, 0.5 * n) / std::sqrt(determinant(low->hessian.matrix));
  return std::min(1.0, outside / inside);
}

GridSpec adapted_grid(const ModelSpec& model, double h, double resolution, double tail,
                      double max_half_width) {
  const std::size_t n = static_cast<std::size_t>(model.dim);
  Vec l(n, max_half_width);
  auto ok = [&](const Vec& w) {
    return maxwellian_tail_estimate(model, GridSpec::for_h(w, h, resolution), h) <= tail;
  };
  if (!ok(l)) throw InvalidGrid("box of half width " + std::to_string(max_half_width) + " misses the tail target");
  // shrink one direction at a time, largest first, while the target holds
  bool moved = true;
  while (moved) {
    moved = false;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return l[a] > l[b]; });
    for (std::size_t k : order) {
      Vec t = l;
      t[k] = std::round((t[k] - 0.05) * 20.0) / 20.0;  // stay on the 0.05 lattice
      if (t[k] > 0.05 && ok(t)) {
        l = t;
        moved = true;
        break;
      }
    }
  }
  return GridSpec::for_h(l, h, resolution);
}

FormLayout::FormLayout(const GridSpec& grid, int degree) : grid_(grid), degree_(degree) {
  const std::size_t n = grid.dim();
  if (degree < 0 || static_cast<std::size_t>(degree) > n) throw InvalidGrid("form degree out of range");
  // sorted subsets of size q in lexicographic order
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != degree) continue;
    std::vector<int> c;
    for (std::size_t d = 0; d < n; ++d)
      if (mask & (1u << d)) c.push_back(static_cast<int>(d));
    comps_.push_back(std::move(c));
  }
  std::sort(comps_.begin(), comps_.end());

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return grid.intervals[a] < grid.intervals[b]; });
  stride_.assign(n, 0);
  std::size_t cells = 1;
  for (std::size_t d : order_) {
    stride_[d] = cells;
    cells *= static_cast<std::size_t>(grid.intervals[d] + 1);
  }
  cell_base_.assign(cells + 1, 0);
  cell_mask_.assign(cells, 0);
  std::vector<int> i(n, 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t rem = cell;
    for (std::size_t d : order_) {
      i[d] = static_cast<int>(rem % static_cast<std::size_t>(grid.intervals[d] + 1));
      rem /= static_cast<std::size_t>(grid.intervals[d] + 1);
    }
    unsigned m = 0;
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      bool ok = true;
      for (int d : comps_[c])
        if (i[d] >= grid.intervals[d]) ok = false;
      if (ok) m |= 1u << c;
    }
    cell_mask_[cell] = m;
    cell_base_[cell + 1] = cell_base_[cell] + static_cast<std::size_t>(std::popcount(m));
  }
  total_ = cell_base_.back();
}

std::size_t FormLayout::index(std::size_t c, std::span<const int> i) const {
  std::size_t cell = 0;
  for (std::size_t d = 0; d < i.size(); ++d) {
    if (i[d] < 0 || i[d] > grid_.intervals[d]) return npos;
    cell += static_cast<std::size_t>(i[d]) * stride_[d];
  }
  const unsigned m = cell_mask_[cell];
  if (!(m & (1u << c))) return npos;
  return cell_base_[cell] + static_cast<std::size_t>(std::popcount(m & ((1u << c) - 1u)));
}

std::pair<std::size_t, std::vector<int>> FormLayout::locate(std::size_t idx) const {
  const auto it = std::upper_bound(cell_base_.begin(), cell_base_.end(), idx);
  const std::size_t cell = static_cast<std::size_t>(it - cell_base_.begin()) - 1;
  std::size_t within = idx - cell_base_[cell];
  unsigned m = cell_mask_[cell];
  std::size_t c = 0;
  for (;; ++c)
    if (m & (1u << c)) {
      if (within == 0) break;
      --within;
    }
  std::vector<int> i(grid_.dim());
  std::size_t rem = cell;
  for (std::size_t d : order_) {
    i[d] = static_cast<int>(rem % static_cast<std::size_t>(grid_.intervals[d] + 1));
    rem /= static_cast<std::size_t>(grid_.intervals[d] + 1);
  }
  return {c, i};
}

Vec FormLayout::position(std::size_t idx) const {
  const auto [c, i] = locate(idx);
  Vec x(grid_.dim());
  for (std::size_t d = 0; d < x.size(); ++d) {
    const bool half = std::find(comps_[c].begin(), comps_[c].end(), static_cast<int>(d)) != comps_[c].end();
    x[d] = -grid_.half_width[d] + (i[d] + (half ? 0.5 : 0.0)) * grid_.spacing(d);
  }
  return x;
}

namespace {

Vec layout_phi(const FormLayout& layout, const ModelSpec& model) {
  Vec out(layout.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = model.phi.value(layout.position(k));
  return out;
}

std::size_t component_of(const FormLayout& layout, const std::vector<int>& comp) {
  const auto& cs = layout.components();
  const auto it = std::find(cs.begin(), cs.end(), comp);
  if (it == cs.end()) throw std::logic_error("component not present in layout");
  return static_cast<std::size_t>(it - cs.begin());
}

// Appends sign * D_k (component `from` of source -> from + {k} of target).
void append_difference(const FormLayout& source, const FormLayout& target, const Vec& phi_s,
                       const Vec& phi_t, const GridSpec& grid, double h, std::size_t k,
                       std::size_t from, double sign, std::vector<Triplet>& out) {
  std::vector<int> to = source.components()[from];
  to.push_back(static_cast<int>(k));
  std::sort(to.begin(), to.end());
  const std::size_t tc = component_of(target, to);
  const double scale = h / grid.spacing(k);
  for (std::size_t t = 0; t < target.size(); ++t) {
    auto [c, i] = target.locate(t);
    if (c != tc) continue;
    const std::size_t a = source.index(from, i);
    ++i[k];
    const std::size_t b = source.index(from, i);
    const double eb = scale * std::exp((phi_s[b] - phi_t[t]) / h);
    const double ea = scale * std::exp((phi_s[a] - phi_t[t]) / h);
    if (!(eb <= 1e30) || !(ea <= 1e30))
      throw GaugeOverflow("exponential-fitted entry exceeds 1e30; grid too coarse for this h");
    out.push_back({t, b, sign * eb});
    out.push_back({t, a, -sign * ea});
  }
}

}  // namespace

CsrMatrix build_difference(const FormLayout& source, const FormLayout& target, const ModelSpec& model,
                           double h, std::size_t k, std::size_t from_component) {
  if (!(h > 0)) throw std::invalid_argument("h must be positive");
  const auto& from = source.components()[from_component];
  if (std::find(from.begin(), from.end(), static_cast<int>(k)) != from.end())
    throw std::invalid_argument("difference direction already in the source component");
  std::vector<Triplet> t;
  append_difference(source, target, layout_phi(source, model), layout_phi(target, model),
                    source.grid(), h, k, from_component, 1.0, t);
  return CsrMatrix(target.size(), source.size(), std::move(t));
}

CsrMatrix build_difference(const GridSpec& grid, const ModelSpec& model, double h, std::size_t k) {
  grid.validate();
  return build_difference(FormLayout(grid, 0), FormLayout(grid, 1), model, h, k, 0);
}

CsrMatrix exterior_weight(const FormLayout& layout, const Matrix& a) {
  const auto& comps = layout.components();
  const std::size_t q = static_cast<std::size_t>(layout.degree());
  const std::size_t n = layout.grid().dim();
  // minor of A^T with rows I, columns J = det A[J, I]
  auto minor = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix m(q, q);
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t c = 0; c < q; ++c) m(r, c) = a(cols[c], rows[r]);
    return q == 0 ? 1.0 : determinant(m);
  };
  std::vector<Triplet> out;
  for (std::size_t t = 0; t < layout.size(); ++t) {
    const auto [ci, i] = layout.locate(t);
    const auto& rows = comps[ci];
    for (std::size_t cj = 0; cj < comps.size(); ++cj) {
      const double coef = minor(rows, comps[cj]);
      if (coef == 0.0) continue;
      // directions where target and source staggering differ: two neighbours, weight 1/2
      std::vector<std::size_t> diff;
      std::vector<int> base = i;
      for (std::size_t d = 0; d < n; ++d) {
        const bool in_t = std::find(rows.begin(), rows.end(), static_cast<int>(d)) != rows.end();
        const bool in_s = std::find(comps[cj].begin(), comps[cj].end(), static_cast<int>(d)) != comps[cj].end();
        if (in_t == in_s) continue;
        diff.push_back(d);
        // target half-integer -> source integers i, i+1; target integer -> source halves i-1, i
        if (!in_t) base[d] = i[d] - 1;
      }
      const double w = coef * std::ldexp(1.0, -static_cast<int>(diff.size()));
      for (unsigned bits = 0; bits < (1u << diff.size()); ++bits) {
        std::vector<int> j = base;
        for (std::size_t b = 0; b < diff.size(); ++b)
          if (bits & (1u << b)) ++j[diff[b]];
        const std::size_t s = layout.index(cj, j);
        if (s != FormLayout::npos) out.push_back({t, s, w});
      }
    }
  }
  return CsrMatrix(layout.size(), layout.size(), std::move(out));
}

Matrix stabilized_structure(const Matrix& a, const GridSpec& grid, double h, double s) {
  if (s < 0) throw std::invalid_argument("stabilization must be nonnegative");
  Matrix out = a;
  for (std::size_t k = 0; k < grid.dim(); ++k) out(k, k) += s * grid.spacing(k) * grid.spacing(k) / h;
  return out;
}

DiscreteComplex assemble_complex(const GridSpec& grid, const ModelSpec& model, double h,
                                 bool with_degree1, double stabilization) {
  if (grid.dim() > 3) throw DimensionUnsupported("discrete complex supports n <= 3");
  grid.validate();
  if (static_cast<std::size_t>(model.dim) != grid.dim()) throw InvalidGrid("grid dimension differs from the model dimension");
  if (!(h > 0)) throw std::invalid_argument("h must be positive");
  const std::size_t n = grid.dim();

  DiscreteComplex c{grid, h, stabilization, stabilized_structure(model.a, grid, h, stabilization),
                    FormLayout(grid, 0), FormLayout(grid, 1), FormLayout(grid, n >= 2 ? 2 : 1),
                    {}, {}, {}, {}, {}, {}, {}, {}, {}};
  c.node_phi = layout_phi(c.nodes, model);
  const Vec edge_phi = layout_phi(c.edges, model);

  std::vector<Triplet> t0;
  for (std::size_t k = 0; k < n; ++k)
    append_difference(c.nodes, c.edges, c.node_phi, edge_phi, grid, h, k, 0, 1.0, t0);
  c.d0 = CsrMatrix(c.edges.size(), c.nodes.size(), std::move(t0));
  c.w1 = exterior_weight(c.edges, c.a);
  c.d0_adj = c.d0.transpose() * c.w1;
  c.lap0 = c.d0_adj * c.d0;

  if (with_degree1) {
    if (n >= 2) {
      const Vec face_phi = layout_phi(c.faces, model);
      std::vector<Triplet> t1;
      // (d1 u)_{jk} = D_j u_k - D_k u_j
      for (std::size_t from = 0; from < c.edges.components().size(); ++from) {
        const int e = c.edges.components()[from][0];
        for (std::size_t k = 0; k < n; ++k) {
          if (static_cast<int>(k) == e) continue;
          const double sign = static_cast<int>(k) < e ? 1.0 : -1.0;
          append_difference(c.edges, c.faces, edge_phi, face_phi, grid, h, k, from, sign, t1);
        }
      }
      c.d1 = CsrMatrix(c.faces.size(), c.edges.size(), std::move(t1));
      c.w2 = exterior_weight(c.faces, c.a);
      c.lap1_k = add(1.0, c.w1 * c.d0 * c.d0_adj, 1.0, c.d1.transpose() * c.w2 * c.d1);
    } else {
      c.d1 = CsrMatrix(0, c.edges.size());
      c.lap1_k = c.w1 * c.d0 * c.d0_adj;
    }
  }

  const double ref = *std::min_element(c.node_phi.begin(), c.node_phi.end());
  c.maxwellian.resize(c.nodes.size());
  for (std::size_t k = 0; k < c.maxwellian.size(); ++k)
    c.maxwellian[k] = std::exp(-(c.node_phi[k] - ref) / h);
  scale(c.maxwellian, 1.0 / norm2(c.maxwellian));
  return c;
}

double adjoint_symmetry_check(const DiscreteComplex& for_a, const DiscreteComplex& for_a_transpose) {
  if (for_a.lap0.rows() != for_a_transpose.lap0.rows())
    throw InvalidGrid("adjoint check needs both complexes on the same grid");
  return add(1.0, for_a.lap0.transpose(), -1.0, for_a_transpose.lap0).max_abs();
}

ComplexDefects complex_defects(const DiscreteComplex& c) {
  ComplexDefects out;
  if (c.d1.rows() > 0) {
    const CsrMatrix p = c.d1 * c.d0;
    out.d1d0 = p.max_abs() / (c.d1.norm_inf() * c.d0.norm_inf());
  }
  const Vec r = c.lap0.apply(c.maxwellian);
  out.kernel = norm_inf(r) / c.lap0.norm_inf();
  if (c.lap1_k.rows() > 0) {
    const CsrMatrix lhs = c.lap1_k * c.d0;
    const CsrMatrix rhs = c.w1 * c.d0 * c.lap0;
    out.intertwining = add(1.0, lhs, -1.0, rhs).max_abs() / (c.lap1_k.norm_inf() * c.d0.norm_inf());
  }
  return out;
}

}  // namespace kfp
