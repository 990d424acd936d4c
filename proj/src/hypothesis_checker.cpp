#include "kfp/hypothesis_checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kfp/dense_linalg.hpp"
#include "kfp/errors.hpp"
#include "kfp/symbol_geometry.hpp"

namespace kfp {

namespace {

constexpr int kSteps = 2048;
constexpr double kBlowup = 1e3;

Vec rk4_step(const FlowField& f, std::span<const double> x, double dt) {
  const std::size_t n = x.size();
  const Vec k1 = f.field(x);
  Vec tmp(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const Vec k2 = f.field(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const Vec k3 = f.field(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const Vec k4 = f.field(tmp);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  if (!(norm2(out) <= kBlowup)) throw Blowup("trajectory left |x| <= 1e3");
  return out;
}

void check_drift(const FlowField& f, double c0, std::span<const double> x) {
  if (!f.conserved) return;
  const double c = f.conserved(x);
  if (std::abs(c - c0) > 1e-8 * std::max(1.0, std::abs(c0)))
    throw Error("first integral drifted by " + std::to_string(c - c0) + " along the flow");
}

// Simpson weights on an even number of intervals of width dt.
double simpson(std::span<const double> v, double dt) {
  const std::size_t m = v.size() - 1;
  if (m % 2 != 0) throw std::logic_error("simpson needs an even interval count");
  double s = v.front() + v.back();
  for (std::size_t k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * v[k];
  return s * dt / 3.0;
}

// 1 on [0, r - w], 0 beyond r, smoothstep in between
double bump(double dist, double r, double w) {
  if (dist <= r - w) return 1.0;
  if (dist >= r) return 0.0;
  const double s = (dist - (r - w)) / w;
  return 1.0 - s * s * (3.0 - 2.0 * s);
}

double p0_at(const ModelSpec& model, const Matrix& b, std::span<const double> x) {
  const Vec g = model.phi.gradient(x);
  return dot(g, b.apply(g));
}

// e^{dt F} by Taylor, dt |F| is small here
Matrix expm_small(const Matrix& f, double dt) {
  const std::size_t n = f.rows();
  Matrix out = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k < 40; ++k) {
    term = (dt / k) * (term * f);
    out += term;
    if (max_abs(term) <= 1e-18 * max_abs(out)) break;
  }
  return out;
}

}  // namespace

FlowField transport_field(const ModelSpec& model, double horizon) {
  FlowField f;
  f.dim = model.dim;
  f.horizon = horizon;
  const Matrix c2 = 2.0 * model.c();
  const Polynomial phi = model.phi;
  f.field = [c2, phi](std::span<const double> x) { return c2.apply(phi.gradient(x)); };
  f.conserved = [phi](std::span<const double> x) { return phi.value(x); };
  return f;
}

FlowField phase_transport_field(const ModelSpec& model, double horizon) {
  FlowField f;
  const std::size_t n = model.dim;
  f.dim = 2 * n;
  f.horizon = horizon;
  const Matrix c2 = 2.0 * model.c();
  const Polynomial phi = model.phi;
  // x' = 2 C phi'(x), xi' = -d_x <2 C phi', xi> = 2 phi'' C xi
  f.field = [c2, phi, n](std::span<const double> rho) {
    const auto x = rho.first(n);
    const auto xi = rho.subspan(n, n);
    const Vec dx = c2.apply(phi.gradient(x));
    const Vec dxi = phi.hessian(x).apply(c2.apply(xi));
    Vec out(2 * n);
    std::copy(dx.begin(), dx.end(), out.begin());
    std::copy(dxi.begin(), dxi.end(), out.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  };
  return f;
}

Vec flow(const FlowField& field, std::span<const double> x0, double t) {
  if (std::abs(t) > 10.0 * field.horizon)
    throw std::invalid_argument("flow time exceeds 10 T0");
  const double dt = field.step();
  const int n = std::max(0, static_cast<int>(std::ceil(std::abs(t) / dt - 1e-9)));
  Vec x(x0.begin(), x0.end());
  if (n == 0) return x;
  const double h = t / n;
  const double c0 = field.conserved ? field.conserved(x0) : 0.0;
  for (int k = 0; k < n; ++k) x = rk4_step(field, x, h);
  check_drift(field, c0, x);
  return x;
}

std::vector<Vec> centered_trajectory(const FlowField& field, std::span<const double> x0) {
  const double dt = field.step();
  const int half = kSteps / 2;
  std::vector<Vec> traj(kSteps + 1);
  traj[half] = Vec(x0.begin(), x0.end());
  const double c0 = field.conserved ? field.conserved(x0) : 0.0;
  for (int k = half - 1; k >= 0; --k) traj[k] = rk4_step(field, traj[k + 1], -dt);
  for (int k = half + 1; k <= kSteps; ++k) traj[k] = rk4_step(field, traj[k - 1], dt);
  check_drift(field, c0, traj.front());
  check_drift(field, c0, traj.back());
  return traj;
}

double time_average(const FlowField& field, const ScalarField& g, std::span<const double> x0) {
  const auto traj = centered_trajectory(field, x0);
  Vec v(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) v[k] = g(traj[k]);
  return simpson(v, field.step()) / field.horizon;
}

double f_blend(double t) {
  if (t < 0) throw std::invalid_argument("f_blend: negative argument");
  if (t <= 1.0) return t;
  if (t >= 2.0) return 1.5;
  const double s = t - 1.0;
  return 1.0 + s - 0.5 * s * s;
}

double g_blend(double t) {
  if (t < 0) throw std::invalid_argument("g_blend: negative argument");
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 1.0 / t;
  const double s = t - 1.0;
  return 1.0 - 1.25 * s * s + 0.75 * s * s * s;
}

double f_eps(double t, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("f_eps: eps must be positive");
  return eps * f_blend(t / eps);
}

double sawtooth(double t) {
  if (std::abs(t) >= 0.5) return 0.0;
  if (t < 0) return t + 0.5;
  if (t > 0) return t - 0.5;
  return 0.0;
}

double psi_eps(const ModelSpec& model, const FlowField& field, std::span<const double> x,
               double eps) {
  if (!(eps > 0)) throw std::invalid_argument("psi_eps: eps must be positive");
  const Matrix b = model.b();
  const auto traj = centered_trajectory(field, x);
  const double t0 = field.horizon, dt = field.step();
  const int half = kSteps / 2;
  // k jumps at t = 0; integrate each half with its one-sided limit
  Vec left(half + 1), right(half + 1);
  for (int k = 0; k <= half; ++k) {
    const double t = -t0 / 2 + k * dt;
    left[k] = (t / t0 + 0.5) * f_eps(p0_at(model, b, traj[k]), eps);
  }
  for (int k = 0; k <= half; ++k) {
    const double t = k * dt;
    right[k] = (t / t0 - 0.5) * f_eps(p0_at(model, b, traj[half + k]), eps);
  }
  const double psi = simpson(left, dt) + simpson(right, dt);
  if (std::abs(psi) > 3.0 * t0 / 8.0 * eps * (1.0 + 1e-12))
    throw std::logic_error("psi_eps exceeds its a priori bound");
  return psi;
}

Ny17Result evaluate_ny17(const ModelSpec& model, const CriticalPoint& cp, double horizon) {
  const std::size_t n = model.dim;
  const Matrix& h = cp.hessian.matrix;
  const Matrix b = model.b(), c = model.c();
  Matrix q(2 * n, 2 * n);
  q.set_block(0, 0, h * b * h);
  q.set_block(n, n, b);
  Matrix f(2 * n, 2 * n);
  f.set_block(0, 0, 2.0 * (c * h));
  f.set_block(n, n, 2.0 * (h * c));

  const double dt = horizon / kSteps;
  const Matrix fwd = expm_small(f, dt), bwd = expm_small(f, -dt);
  // Simpson over [-T0/2, T0/2]; symmetric grid so both halves share weights
  auto weight = [](int k) { return (k == 0 || k == kSteps) ? 1.0 : (k % 2 ? 4.0 : 2.0); };
  Matrix acc(2 * n, 2 * n);
  Matrix ep = Matrix::identity(2 * n), em = Matrix::identity(2 * n);
  const int half = kSteps / 2;
  acc += weight(half) * q;
  for (int k = 1; k <= half; ++k) {
    ep = ep * fwd;
    em = em * bwd;
    acc += weight(half + k) * (ep.transpose() * q * ep);
    acc += weight(half - k) * (em.transpose() * q * em);
  }
  acc *= dt / 3.0 / horizon;

  Ny17Result out;
  out.averaged = QuadraticForm::from(symmetric_part(acc), true);
  const auto eig = symmetric_eigen(out.averaged.matrix, true);
  const double lo = eig.values.front();
  out.null_direction = eig.vectors.column(0);
  out.passed = out.averaged.positive_definite() && lo > 0;
  out.constant = out.passed ? 1.0 / lo : std::numeric_limits<double>::infinity();
  return out;
}

Ny17Result check_ny17(const ModelSpec& model, const CriticalPoint& cp, double horizon) {
  Ny17Result r = evaluate_ny17(model, cp, horizon);
  if (!r.passed) {
    std::ostringstream os;
    os << "averaged form at the critical point is not positive definite; null direction (";
    for (std::size_t k = 0; k < r.null_direction.size(); ++k)
      os << (k ? ", " : "") << r.null_direction[k];
    os << "), smallest eigenvalue " << r.averaged.eigenvalues.front();
    throw HypothesisFails(os.str());
  }
  return r;
}

json AverageReport::to_json() const {
  json j;
  j["description"] = description;
  j["horizon"] = horizon;
  j["threshold"] = threshold;
  j["passed"] = passed;
  j["worst_sample"] = worst;
  j["certified_average"] = certified_average;
  j["certified_fraction"] = certified_fraction;
  json arr = json::array();
  for (const auto& s : samples) {
    json e;
    e["x"] = s.x;
    e["average"] = s.average;
    e["measure_fraction"] = s.measure_fraction;
    e["passed"] = s.passed;
    arr.push_back(std::move(e));
  }
  j["samples"] = std::move(arr);
  return j;
}

std::string AverageReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  const std::size_t dim = samples.empty() ? 0 : samples.front().x.size();
  for (std::size_t k = 0; k < dim; ++k) os << "x" << k << ",";
  os << "average,measure_fraction,pass\n";
  for (const auto& s : samples) {
    for (double v : s.x) os << v << ",";
    os << s.average << "," << s.measure_fraction << "," << (s.passed ? 1 : 0) << "\n";
  }
  return os.str();
}

AverageReport evaluate_ny19_ny20(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                                 const std::vector<Vec>& samples, double horizon, double threshold,
                                 double exclusion, std::string description) {
  if (!(threshold > 0)) throw std::invalid_argument("threshold must be positive");
  if (exclusion <= 0) exclusion = threshold;
  for (const auto& x : samples)
    for (const auto& cp : critical) {
      Vec d = x;
      axpy(-1.0, cp.location, d);
      if (norm2(d) < exclusion)
        throw std::invalid_argument("sample lies within the excluded neighborhood of a critical point");
    }

  const FlowField field = transport_field(model, horizon);
  const Matrix b = model.b();
  const double dt = field.step();
  AverageReport rep;
  rep.description = std::move(description);
  rep.horizon = horizon;
  rep.threshold = threshold;
  rep.passed = true;
  rep.certified_average = std::numeric_limits<double>::infinity();
  rep.certified_fraction = std::numeric_limits<double>::infinity();
  double worst_score = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto traj = centered_trajectory(field, samples[s]);
    Vec p0(traj.size());
    double meas = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      p0[k] = p0_at(model, b, traj[k]);
      if (p0[k] >= threshold) meas += (k == 0 || k + 1 == traj.size()) ? 0.5 * dt : dt;
    }
    SampleAverage sa;
    sa.x = samples[s];
    sa.average = simpson(p0, dt) / horizon;
    sa.measure_fraction = meas / horizon;
    sa.passed = sa.average >= threshold && sa.measure_fraction >= threshold;
    rep.passed = rep.passed && sa.passed;
    rep.certified_average = std::min(rep.certified_average, sa.average);
    rep.certified_fraction = std::min(rep.certified_fraction, sa.measure_fraction);
    const double score = std::min(sa.average, sa.measure_fraction);
    if (score < worst_score) {
      worst_score = score;
      rep.worst = s;
    }
    rep.samples.push_back(std::move(sa));
  }
  return rep;
}

AverageReport check_ny19_ny20(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                              const std::vector<Vec>& samples, double horizon, double threshold,
                              double exclusion, std::string description) {
  AverageReport rep = evaluate_ny19_ny20(model, critical, samples, horizon, threshold, exclusion,
                                         std::move(description));
  if (!rep.passed) {
    const auto& w = rep.samples[rep.worst];
    std::ostringstream os;
    os << "time-average hypothesis fails at sample (";
    for (std::size_t k = 0; k < w.x.size(); ++k) os << (k ? ", " : "") << w.x[k];
    os << "): average " << w.average << ", measure fraction " << w.measure_fraction
       << ", threshold " << rep.threshold;
    throw HypothesisFails(os.str());
  }
  return rep;
}

std::vector<Vec> default_sample_ring(const std::vector<CriticalPoint>& critical, int per_ring,
                                     double radius, double gap) {
  std::vector<Vec> out;
  for (const auto& cp : critical) {
    for (int k = 0; k < per_ring; ++k) {
      // walk the diamond at uniform arclength
      const double s = 4.0 * k / per_ring;
      const int side = static_cast<int>(s);
      const double u = s - side;
      double dx = 0, dy = 0;
      switch (side) {
        case 0: dx = radius * (1 - u); dy = radius * u; break;
        case 1: dx = -radius * u; dy = radius * (1 - u); break;
        case 2: dx = -radius * (1 - u); dy = -radius * u; break;
        default: dx = radius * u; dy = -radius * (1 - u); break;
      }
      Vec x = cp.location;
      x[0] += dx;
      if (x.size() > 1) x[1] += dy;
      bool keep = true;
      for (const auto& other : critical) {
        Vec d = x;
        axpy(-1.0, other.location, d);
        if (norm2(d) < gap) keep = false;
      }
      if (keep) out.push_back(std::move(x));
    }
  }
  return out;
}

double p_tilde(const ModelSpec& model, std::span<const double> rho) {
  const std::size_t n = model.dim;
  if (rho.size() != 2 * n) throw std::invalid_argument("p_tilde: rho must have length 2n");
  const auto x = rho.first(n);
  const auto xi = rho.subspan(n, n);
  const Matrix b = model.b();
  const Vec bxi = b.apply(xi);
  return p0_at(model, b, x) + dot(xi, bxi) / (1.0 + dot(xi, xi));
}

double p_tilde_eps(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                   std::span<const double> rho, double eps, const CutoffRadii& radii) {
  if (!(eps > 0 && eps <= 1)) throw std::invalid_argument("p_tilde_eps: eps must lie in (0, 1]");
  const std::size_t n = model.dim;
  if (rho.size() != 2 * n) throw std::invalid_argument("p_tilde_eps: rho must have length 2n");
  const auto x = rho.first(n);
  const auto xi = rho.subspan(n, n);
  const Matrix b = model.b();
  const double p0 = p0_at(model, b, x);
  const double p2w = dot(xi, b.apply(xi)) / (1.0 + dot(xi, xi));
  const double pt = p0 + p2w;

  double sum_chi = 0.0, near = 0.0, chi_x = 0.0;
  for (const auto& cp : critical) {
    double d2 = dot(xi, xi), dx2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = x[k] - cp.location[k];
      dx2 += d * d;
    }
    d2 += dx2;
    const double cj = bump(std::sqrt(d2), radii.chi_j, 0.5 * radii.chi_j);
    sum_chi += cj;
    near += cj * g_blend(d2 / eps) * pt;
    chi_x += bump(std::sqrt(dx2), radii.chi_x, 0.45 * radii.chi_x);
  }
  chi_x = std::min(1.0, chi_x);
  const double p_new = p0 + chi_x * p2w;
  const double inner = near + eps * (1.0 - sum_chi) * p_new;
  const double cn = bump(norm2(Vec(x.begin(), x.end())), radii.chi_new, 0.25 * radii.chi_new);
  const double out = cn * inner + (1.0 - cn) * f_eps(p0, eps);
  if (out > pt * (1.0 + 1e-12) + 1e-300) throw std::logic_error("p_tilde_eps exceeds p_tilde");
  return out;
}

ShapeDiagnostic shape_diagnostic(const ModelSpec& model, const std::vector<CriticalPoint>& critical,
                                 double eps, double horizon, const CutoffRadii& radii) {
  const std::size_t n = model.dim;
  const FlowField field = phase_transport_field(model, horizon);
  ShapeDiagnostic out;
  out.eps = eps;
  out.near_lo = out.far_lo = std::numeric_limits<double>::infinity();
  out.near_hi = out.far_hi = 0.0;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss;
  const double r = std::sqrt(eps);
  const ScalarField weight = [&](std::span<const double> rho) {
    return p_tilde_eps(model, critical, rho, eps, radii);
  };
  for (const auto& cp : critical) {
    for (int dir = 0; dir < 4; ++dir) {
      Vec u(2 * n);
      for (auto& v : u) v = gauss(rng);
      scale(u, 1.0 / norm2(u));
      for (double factor : {0.25, 0.5, 1.0, 2.0, 3.0}) {
        const double d = factor * r;
        if (d >= radii.chi_j) continue;  // stay inside the local chart of rho_j
        Vec rho(2 * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) rho[k] = cp.location[k];
        axpy(d, u, rho);
        const double avg = time_average(field, weight, rho);
        if (d <= r) {
          out.near_lo = std::min(out.near_lo, avg / (d * d));
          out.near_hi = std::max(out.near_hi, avg / (d * d));
          ++out.near_samples;
        } else {
          out.far_lo = std::min(out.far_lo, avg / eps);
          out.far_hi = std::max(out.far_hi, avg / eps);
          ++out.far_samples;
        }
      }
    }
  }
  return out;
}

}  // namespace kfp
