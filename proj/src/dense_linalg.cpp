#include "kfp/dense_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kfp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

// Householder reduction to upper Hessenberg form, in place.
void hessenberg_reduce(Matrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  Vec v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (a(k + 1, k) > 0) alpha = -alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) {
      v[i] = a(i, k);
      if (i == k + 1) v[i] -= alpha;
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
      s *= beta;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= beta;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

// Diagonal similarity scaling by powers of two to equalize row and column norms.
void balance(Matrix& a) {
  const std::size_t n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
CVec hessenberg_qr(Matrix& a) {
  const int n = static_cast<int>(a.rows());
  CVec wr(n);
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

  int nn = n - 1;
  double t = 0.0;
  int total = 0;
  const int max_total = 100 * std::max(n, 1);
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l > 0; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= kEps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn--] = x + t;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
          } else {
            wr[nn - 1] = cplx(x + p, z);
            wr[nn] = cplx(x + p, -z);
          }
          nn -= 2;
        } else {
          if (++total > max_total) throw NoConvergence("dense QR: iteration limit reached");
          if (its > 0 && its % 30 == 0) {
            // exceptional shift after a stall
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m;
          for (m = nn - 2; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u <= kEps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k + 1 != nn) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k + 1 != nn) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k + 1 != nn) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return wr;
}

// Complex Givens rotation G = [[c, s], [-conj(s), c]] with G [x; y] = [r; 0].
void givens(cplx x, cplx y, double& c, cplx& s) {
  const double ax = std::abs(x);
  const double r = std::hypot(ax, std::abs(y));
  if (r == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (ax == 0.0) {
    c = 0.0;
    s = 1.0;
  } else {
    c = ax / r;
    s = (x / ax) * std::conj(y) / r;
  }
}

void complex_hessenberg(CMatrix& a, CMatrix& q) {
  const std::size_t n = a.rows();
  q = CMatrix::identity(n);
  if (n < 3) return;
  CVec v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double xnorm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) xnorm += std::norm(a(i, k));
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) continue;
    const cplx x0 = a(k + 1, k);
    const cplx phase = std::abs(x0) > 0 ? x0 / std::abs(x0) : cplx(1.0);
    const cplx alpha = -phase * xnorm;
    double vn = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) {
      v[i] = a(i, k);
      if (i == k + 1) v[i] -= alpha;
      vn += std::norm(v[i]);
    }
    if (vn == 0.0) continue;
    const double beta = 2.0 / vn;
    // a <- (I - beta v v^H) a (I - beta v v^H)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += std::conj(v[i]) * a(i, j);
      s *= beta;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= beta;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * std::conj(v[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += q(i, j) * v[j];
      s *= beta;
      for (std::size_t j = k + 1; j < n; ++j) q(i, j) -= s * std::conj(v[j]);
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

}  // namespace

Matrix inverse(const Matrix& m) {
  DenseLU<double> lu(m);
  return lu.solve(Matrix::identity(m.rows()));
}

double determinant(const Matrix& m) {
  try {
    return DenseLU<double>(m).determinant();
  } catch (const Singular&) {
    return 0.0;
  }
}

CVec dense_eigenvalues(const Matrix& m) {
  if (!m.square()) throw std::invalid_argument("dense_eigs: matrix not square");
  if (m.rows() == 0) return {};
  Matrix a = m;
  balance(a);
  hessenberg_reduce(a);
  CVec w = hessenberg_qr(a);
  std::sort(w.begin(), w.end(), re_desc_im_desc);
  return w;
}

CVec inverse_iteration(const Matrix& m, cplx lambda, int steps) {
  const std::size_t n = m.rows();
  const double scale = std::max(max_abs(m), 1e-300);
  CMatrix shifted = to_complex(m);
  // Nudge off the exact eigenvalue so the factorization stays nonsingular.
  const cplx target = lambda + cplx(1e-10 * scale, 1e-11 * scale);
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= target;
  DenseLU<cplx> lu(shifted);
  CVec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * std::sin(1.0 + static_cast<double>(i));
  for (int it = 0; it < steps + 1; ++it) {
    lu.solve_in_place(x);
    const double nx = norm2(std::span<const cplx>(x));
    for (auto& v : x) v /= nx;
  }
  // Fix the phase: largest component real and positive.
  std::size_t imax = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(x[i]) > std::abs(x[imax]) * (1 + 1e-12)) imax = i;
  const cplx ph = std::abs(x[imax]) / x[imax];
  for (auto& v : x) v *= ph;
  return x;
}

EigenDecomposition dense_eigs(const Matrix& m, bool want_vectors) {
  EigenDecomposition out;
  out.values = dense_eigenvalues(m);
  if (!want_vectors) return out;
  const std::size_t n = m.rows();
  out.vectors = CMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx lam = out.values[k];
    // Conjugate partner of the previous value gets the conjugate vector.
    if (k > 0 && lam.imag() < 0 && out.values[k - 1] == std::conj(lam)) {
      for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = std::conj(out.vectors(i, k - 1));
      continue;
    }
    CVec v = inverse_iteration(m, lam, 3);
    if (lam.imag() == 0.0) {
      for (auto& c : v) c = c.real();
      const double nv = norm2(std::span<const cplx>(v));
      for (auto& c : v) c /= nv;
    }
    out.vectors.set_column(k, v);
  }
  return out;
}

SymmetricEigen symmetric_eigen(const Matrix& m, bool want_vectors) {
  if (!m.square()) throw std::invalid_argument("symmetric_eigen: matrix not square");
  const int n = static_cast<int>(m.rows());
  SymmetricEigen out;
  if (n == 0) return out;
  Matrix z = symmetric_part(m);
  Vec d(n), e(n);

  // Householder tridiagonalization (tred2 layout).
  for (int i = n - 1; i > 0; --i) {
    const int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k < i; ++k) scale += std::abs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (int k = 0; k < i; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j < i; ++j) {
          if (want_vectors) z(j, i) = z(i, j) / h;
          g = 0.0;
          for (int k = 0; k < j + 1; ++k) g += z(j, k) * z(i, k);
          for (int k = j + 1; k < i; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j < i; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k < j + 1; ++k) z(j, k) -= (f * e[k] + g * z(i, k));
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  if (want_vectors) d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (want_vectors) {
      if (d[i] != 0.0) {
        for (int j = 0; j < i; ++j) {
          double g = 0.0;
          for (int k = 0; k < i; ++k) g += z(i, k) * z(k, j);
          for (int k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
        }
      }
      d[i] = z(i, i);
      z(i, i) = 1.0;
      for (int j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    } else {
      d[i] = z(i, i);
    }
  }

  // Implicit QL on the tridiagonal matrix.
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int mm;
    do {
      for (mm = l; mm < n - 1; ++mm) {
        const double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
        if (std::abs(e[mm]) <= kEps * dd) break;
      }
      if (mm != l) {
        if (iter++ == 60) throw NoConvergence("symmetric_eigen: QL iteration limit");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[mm] - d[l] + e[l] / (g + sign_of(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        int i;
        for (i = mm - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          e[i + 1] = (r = std::hypot(f, g));
          if (r == 0.0) {
            d[i + 1] -= p;
            e[mm] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          d[i + 1] = g + (p = s * r);
          g = c * r - b;
          if (want_vectors) {
            for (int k = 0; k < n; ++k) {
              f = z(k, i + 1);
              z(k, i + 1) = s * z(k, i) + c * f;
              z(k, i) = c * z(k, i) - s * f;
            }
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[mm] = 0.0;
      }
    } while (mm != l);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
  out.values.resize(n);
  for (int k = 0; k < n; ++k) out.values[k] = d[order[k]];
  if (want_vectors) {
    out.vectors = Matrix(n, n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) out.vectors(i, k) = z(i, order[k]);
  }
  return out;
}

ComplexSchur complex_schur(const CMatrix& m) {
  if (!m.square()) throw std::invalid_argument("complex_schur: matrix not square");
  const int n = static_cast<int>(m.rows());
  ComplexSchur out;
  out.t = m;
  complex_hessenberg(out.t, out.z);
  CMatrix& h = out.t;
  CMatrix& z = out.z;
  if (n <= 1) return out;

  double norm = 0.0;
  for (const auto& v : h.data()) norm = std::max(norm, std::abs(v));

  int hi = n - 1;
  int iter = 0;
  int total = 0;
  while (hi > 0) {
    int l = hi;
    while (l > 0) {
      double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(h(l, l - 1)) <= kEps * s) break;
      --l;
    }
    if (l > 0) h(l, l - 1) = 0.0;
    if (l == hi) {
      --hi;
      iter = 0;
      continue;
    }
    if (++total > 100 * n) throw NoConvergence("complex_schur: iteration limit reached");
    ++iter;
    cplx mu;
    if (iter % 30 == 0) {
      mu = h(hi, hi) + std::abs(h(hi, hi - 1));
    } else {
      const cplx a = h(hi - 1, hi - 1), b = h(hi - 1, hi), c = h(hi, hi - 1), d = h(hi, hi);
      const cplx half = 0.5 * (a - d);
      const cplx disc = std::sqrt(half * half + b * c);
      const cplx m1 = 0.5 * (a + d) + disc;
      const cplx m2 = 0.5 * (a + d) - disc;
      mu = std::abs(m1 - d) < std::abs(m2 - d) ? m1 : m2;
    }
    for (int k = l; k < hi; ++k) {
      cplx x, y;
      if (k == l) {
        x = h(l, l) - mu;
        y = h(l + 1, l);
      } else {
        x = h(k, k - 1);
        y = h(k + 1, k - 1);
      }
      double c;
      cplx s;
      givens(x, y, c, s);
      for (int j = (k == l ? l : k - 1); j < n; ++j) {
        const cplx t1 = h(k, j), t2 = h(k + 1, j);
        h(k, j) = c * t1 + s * t2;
        h(k + 1, j) = -std::conj(s) * t1 + c * t2;
      }
      if (k > l) h(k + 1, k - 1) = 0.0;
      const int imax = std::min(k + 2, hi);
      for (int i = 0; i <= imax; ++i) {
        const cplx t1 = h(i, k), t2 = h(i, k + 1);
        h(i, k) = t1 * c + t2 * std::conj(s);
        h(i, k + 1) = -t1 * s + t2 * c;
      }
      for (int i = 0; i < n; ++i) {
        const cplx t1 = z(i, k), t2 = z(i, k + 1);
        z(i, k) = t1 * c + t2 * std::conj(s);
        z(i, k + 1) = -t1 * s + t2 * c;
      }
    }
  }
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) h(i, j) = 0.0;
  return out;
}

EigenDecomposition complex_eigs(const CMatrix& m) {
  const std::size_t n = m.rows();
  ComplexSchur s = complex_schur(m);
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = CMatrix(n, n);
  double norm = 0.0;
  for (const auto& v : s.t.data()) norm = std::max(norm, std::abs(v));
  const double tiny = std::max(norm, 1e-300) * kEps;
  CVec v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx lam = s.t(k, k);
    out.values[k] = lam;
    std::fill(v.begin(), v.end(), cplx(0.0));
    v[k] = 1.0;
    for (std::size_t i = k; i-- > 0;) {
      cplx acc = 0.0;
      for (std::size_t j = i + 1; j <= k; ++j) acc += s.t(i, j) * v[j];
      cplx den = s.t(i, i) - lam;
      if (std::abs(den) < tiny) den = tiny;
      v[i] = -acc / den;
    }
    CVec x = s.z.apply(v);
    const double nx = norm2(std::span<const cplx>(x));
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = x[i] / nx;
  }
  return out;
}

}  // namespace kfp
