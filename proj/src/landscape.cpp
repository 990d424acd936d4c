#include "kfp/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"

namespace kfp {

bool Box::contains(std::span<const double> x, double slack) const {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] < lo[k] - slack || x[k] > hi[k] + slack) return false;
  return true;
}

namespace {

constexpr int kMaxNewton = 100;

// Returns false when the seed does not converge within the step budget.
bool newton(const ModelSpec& spec, Vec& x) {
  Vec g = spec.phi.gradient(x);
  double gn = norm2(g);
  for (int it = 0; it < kMaxNewton; ++it) {
    if (gn <= 1e-13 * (1.0 + norm2(x))) return true;
    Vec step;
    try {
      step = DenseLU<double>(spec.phi.hessian(x)).solve(std::span<const double>(g));
    } catch (const Singular&) {
      return false;
    }
    double t = 1.0;
    bool improved = false;
    Vec trial, gt;
    for (int halve = 0; halve <= 20; ++halve) {
      trial = x;
      axpy(-t, step, trial);
      gt = spec.phi.gradient(trial);
      if (norm2(gt) < gn) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // No decrease possible: accept if we are already at roundoff level.
      return gn <= 1e-10 * (1.0 + norm2(x));
    }
    x = trial;
    g = gt;
    gn = norm2(g);
    if (norm2(x) > 1e6) return false;
  }
  return gn <= 1e-13 * (1.0 + norm2(x));
}

CriticalPoint make_critical(const ModelSpec& spec, const Vec& x) {
  CriticalPoint cp;
  cp.location = x;
  cp.value = spec.phi.value(x);
  cp.hessian = QuadraticForm::from(spec.phi.hessian(x));
  double lo = INFINITY, hi = 0.0;
  for (double v : cp.hessian.eigenvalues) {
    lo = std::min(lo, std::abs(v));
    hi = std::max(hi, std::abs(v));
  }
  if (lo < 1e-8 * hi || hi == 0.0) {
    std::ostringstream os;
    os << "degenerate critical point at (";
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
    os << "): Hessian eigenvalue ratio " << (hi > 0 ? lo / hi : 0.0);
    throw DegenerateCritical(os.str());
  }
  cp.index = 0;
  for (double v : cp.hessian.eigenvalues)
    if (v < 0) ++cp.index;
  return cp;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const ModelSpec& spec, const Box& box,
                                                int seeds_per_dim, CriticalSearchStats* stats) {
  if (seeds_per_dim < 8) throw std::invalid_argument("find_critical_points: need >= 8 seeds per dim");
  const int n = spec.dim;
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= static_cast<std::size_t>(seeds_per_dim);

  std::vector<Vec> found;
  CriticalSearchStats st;
  for (std::size_t s = 0; s < total; ++s) {
    Vec x(n);
    std::size_t r = s;
    for (int k = 0; k < n; ++k) {
      const std::size_t ik = r % seeds_per_dim;
      r /= seeds_per_dim;
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * static_cast<double>(ik) / (seeds_per_dim - 1);
    }
    ++st.seeds;
    if (!newton(spec, x)) {
      ++st.dropped_nonconvergent;
      continue;
    }
    if (!box.contains(x, 1e-9)) continue;
    found.push_back(std::move(x));
  }
  // Deterministic merge: sort, then deduplicate at distance 1e-6.
  std::sort(found.begin(), found.end());
  std::vector<Vec> unique;
  for (const auto& x : found) {
    bool dup = false;
    for (const auto& u : unique)
      if (norm2(x - u) <= 1e-6) {
        dup = true;
        break;
      }
    if (!dup) unique.push_back(x);
  }
  std::vector<CriticalPoint> out;
  for (const auto& x : unique) out.push_back(make_critical(spec, x));
  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.location < b.location;
  });
  if (stats) *stats = st;
  return out;
}

std::vector<CriticalPoint> find_critical_points(const ModelSpec& spec) {
  return find_critical_points(spec, Box::cube(spec.dim, 3.0), 8);
}

WellStructure classify_landscape(const std::vector<CriticalPoint>& points) {
  std::map<int, int> count;
  std::vector<const CriticalPoint*> minima, saddles;
  for (const auto& p : points) {
    ++count[p.index];
    if (p.index == 0) minima.push_back(&p);
    if (p.index == 1) saddles.push_back(&p);
  }
  if (minima.size() != 2 || saddles.size() != 1 || points.size() != 3) {
    std::ostringstream os;
    os << "not a double well: " << points.size() << " critical points;";
    for (const auto& [idx, c] : count) os << " index " << idx << ": " << c << ";";
    throw NotDoubleWell(os.str());
  }
  std::sort(minima.begin(), minima.end(), [](const CriticalPoint* a, const CriticalPoint* b) {
    return a->location < b->location;
  });
  WellStructure w;
  w.minus = *minima[0];
  w.plus = *minima[1];
  w.saddle = *saddles[0];
  w.s_minus = w.saddle.value - w.minus.value;
  w.s_plus = w.saddle.value - w.plus.value;
  w.s_min = std::min(w.s_minus, w.s_plus);
  w.shallow = w.minus.value > w.plus.value ? -1 : 1;
  return w;
}

}  // namespace kfp
