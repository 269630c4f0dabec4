#include "warpsol/geodesic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "warpsol/parallel.hpp"
#include "warpsol/sampling.hpp"

namespace warpsol {

namespace {

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---- adaptive Simpson ---------------------------------------------------

template <typename Fn>
double adaptive_simpson(Fn& f, double a, double fa, double b, double fb,
                        double m, double fm, double whole, double tol,
                        int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                          depth - 1);
}

template <typename Fn>
double integrate_segment(Fn& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, tol, 30);
}

// Metric speed of a parametric curve, with domain containment checks.
class CurveSpeed {
public:
  CurveSpeed(const ConformalMetric& g, std::span<const Expr> curve) : g_(g) {
    if (static_cast<int>(curve.size()) != g.dim())
      throw std::invalid_argument("curve needs one component per coordinate");
    for (const Expr& c : curve) {
      if (!c.valid())
        throw std::invalid_argument("curve component is empty");
      comps_.push_back(compile(c));
      derivs_.push_back(compile(differentiate(c, 0)));
    }
    x_.resize(comps_.size());
    dx_.resize(comps_.size());
  }

  double operator()(double t) {
    const std::array<double, 1> tp{t};
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      x_[i] = comps_[i].eval(tp, scratch_);
      dx_[i] = derivs_[i].eval(tp, scratch_);
    }
    if (!g_.domain().contains(x_))
      throw DomainError("curve leaves the domain at t = " + std::to_string(t));
    return std::exp(g_.exponent_at(x_)) * euclidean_norm(dx_);
  }

private:
  const ConformalMetric& g_;
  std::vector<CompiledExpr> comps_, derivs_;
  std::vector<double> x_, dx_, scratch_;
};

constexpr double kTailCutoff = 1e-8;
constexpr double kDivergenceHorizon = 1e12;
constexpr double kQuadTol = 1e-10;

// ---- volume helpers ------------------------------------------------------

double sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

// Orthonormal completion of a Euclidean unit vector d to a basis of its
// orthogonal complement.
std::vector<std::vector<double>> tangent_basis(std::span<const double> d) {
  const int n = static_cast<int>(d.size());
  std::vector<std::vector<double>> basis;
  for (int i = 0; i < n && static_cast<int>(basis.size()) < n - 1; ++i) {
    std::vector<double> cand(static_cast<std::size_t>(n), 0.0);
    cand[static_cast<std::size_t>(i)] = 1.0;
    const double pd = dot(cand, d);
    for (int j = 0; j < n; ++j) cand[static_cast<std::size_t>(j)] -= pd * d[j];
    for (const auto& b : basis) {
      const double pb = dot(cand, b);
      for (int j = 0; j < n; ++j)
        cand[static_cast<std::size_t>(j)] -= pb * b[static_cast<std::size_t>(j)];
    }
    const double norm = euclidean_norm(cand);
    if (norm > 1e-8) {
      for (double& x : cand) x /= norm;
      basis.push_back(std::move(cand));
    }
  }
  if (static_cast<int>(basis.size()) != n - 1)
    throw std::logic_error("tangent basis construction failed");
  return basis;
}

// Cubic Hermite interpolation of a trajectory position at parameter t.
void interp_position(const Trajectory& traj, double t, std::span<double> out) {
  const auto& times = traj.times;
  const std::size_t last = times.size() - 1;
  if (t >= times[last]) {
    const auto& xl = traj.positions[last];
    std::copy(xl.begin(), xl.end(), out.begin());
    return;
  }
  std::size_t i = std::min(static_cast<std::size_t>(t / traj.step), last - 1);
  while (i + 1 < last && times[i + 1] < t) ++i;
  while (i > 0 && times[i] > t) --i;
  const double h = times[i + 1] - times[i];
  const double s = (t - times[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const auto& x0 = traj.positions[i];
  const auto& x1 = traj.positions[i + 1];
  const auto& v0 = traj.velocities[i];
  const auto& v1 = traj.velocities[i + 1];
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = h00 * x0[k] + h10 * h * v0[k] + h01 * x1[k] + h11 * h * v1[k];
}

// Determinant by Gaussian elimination with partial pivoting; a is a
// row-major k x k matrix, destroyed.
double small_det(std::vector<double>& a, int k) {
  double det = 1.0;
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(a[static_cast<std::size_t>(r) * k + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * k + col]))
        piv = r;
    if (piv != col) {
      for (int c = 0; c < k; ++c)
        std::swap(a[static_cast<std::size_t>(piv) * k + c],
                  a[static_cast<std::size_t>(col) * k + c]);
      det = -det;
    }
    const double p = a[static_cast<std::size_t>(col) * k + col];
    if (p == 0.0) return 0.0;
    det *= p;
    for (int r = col + 1; r < k; ++r) {
      const double factor = a[static_cast<std::size_t>(r) * k + col] / p;
      for (int c = col; c < k; ++c)
        a[static_cast<std::size_t>(r) * k + c] -=
            factor * a[static_cast<std::size_t>(col) * k + c];
    }
  }
  return det;
}

constexpr double kJacobiAngle = 1e-4;

struct DirectionResult {
  double integral = 0.0;
  bool clipped = false;
};

DirectionResult shoot_direction(const ConformalMetric& g,
                                const CompiledExpr& weight,
                                std::span<const double> center, double radius,
                                double step, std::uint64_t seed,
                                std::size_t index) {
  const int n = g.dim();
  Rng rng(derive_seed(seed, index));
  const std::vector<double> d = rng.next_direction(n);
  const double jitter = rng.next_unit();

  std::vector<Trajectory> bundle;
  bundle.push_back(
      integrate_geodesic(g, center, metric_normalize(g, center, d), radius, step));
  if (n > 1) {
    const auto basis = tangent_basis(d);
    const double c = std::cos(kJacobiAngle), s = std::sin(kJacobiAngle);
    for (const auto& e : basis)
      for (const double sign : {1.0, -1.0}) {
        std::vector<double> dir(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
          dir[static_cast<std::size_t>(i)] =
              c * d[static_cast<std::size_t>(i)] +
              sign * s * e[static_cast<std::size_t>(i)];
        bundle.push_back(integrate_geodesic(
            g, center, metric_normalize(g, center, dir), radius, step));
      }
  }

  DirectionResult res;
  double reach = radius;
  for (const Trajectory& tr : bundle)
    if (tr.times.back() < radius - 1e-12) {
      reach = std::min(reach, tr.times.back());
      res.clipped = true;
    }
  if (reach <= 0.0) return res;

  const int lattice = std::max(64, static_cast<int>(std::ceil(reach * 16.0)));
  const double dr = reach / lattice;
  const int jacobi = n - 1;
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> xp(static_cast<std::size_t>(n)),
      xm(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> jfields(
      static_cast<std::size_t>(jacobi),
      std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<double> gram(static_cast<std::size_t>(jacobi * jacobi));
  std::vector<double> scratch;

  double sum = 0.0;
  for (int j = 0; j < lattice; ++j) {
    const double r = (j + jitter) * dr;
    interp_position(bundle[0], r, x);
    const double density = std::exp(-weight.eval(x, scratch));
    double area = 1.0;
    if (n > 1) {
      for (int a = 0; a < jacobi; ++a) {
        interp_position(bundle[static_cast<std::size_t>(1 + 2 * a)], r, xp);
        interp_position(bundle[static_cast<std::size_t>(2 + 2 * a)], r, xm);
        for (int i = 0; i < n; ++i)
          jfields[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] =
              (xp[static_cast<std::size_t>(i)] - xm[static_cast<std::size_t>(i)]) /
              (2.0 * kJacobiAngle);
      }
      const double e2u = std::exp(2.0 * g.exponent_at(x));
      for (int a = 0; a < jacobi; ++a)
        for (int b = 0; b < jacobi; ++b)
          gram[static_cast<std::size_t>(a) * jacobi + b] =
              e2u * dot(jfields[static_cast<std::size_t>(a)],
                        jfields[static_cast<std::size_t>(b)]);
      area = std::sqrt(std::max(small_det(gram, jacobi), 0.0));
    }
    sum += density * area;
  }
  res.integral = sum * dr;
  return res;
}

}  // namespace

std::vector<double> metric_normalize(const ConformalMetric& g,
                                     std::span<const double> p,
                                     std::span<const double> v) {
  const double norm = euclidean_norm(v);
  if (norm == 0.0) throw std::invalid_argument("direction must be nonzero");
  const double scale = 1.0 / (std::exp(g.exponent_at(p)) * norm);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x *= scale;
  return out;
}

Trajectory integrate_geodesic(const ConformalMetric& g, std::span<const double> p,
                              std::span<const double> v, double horizon,
                              double step) {
  if (step <= 0.0) throw std::invalid_argument("step must be positive");
  if (horizon <= 0.0) throw std::invalid_argument("horizon must be positive");
  const int n = g.dim();
  if (static_cast<int>(p.size()) != n || static_cast<int>(v.size()) != n)
    throw std::invalid_argument("point/velocity dimension mismatch");
  if (!g.domain().contains(p))
    throw DomainError("geodesic start lies outside the domain");

  Trajectory traj;
  traj.step = step;
  const std::size_t max_steps =
      static_cast<std::size_t>(std::ceil(horizon / step)) + 1;
  traj.times.reserve(max_steps + 1);
  traj.positions.reserve(max_steps + 1);
  traj.velocities.reserve(max_steps + 1);
  traj.speeds.reserve(max_steps + 1);

  std::vector<double> x(p.begin(), p.end()), vel(v.begin(), v.end());
  std::vector<double> scratch;
  std::vector<double> xs(p.size()), vs(p.size());
  std::vector<double> k1v(p.size()), k2v(p.size()), k3v(p.size()), k4v(p.size());
  std::vector<double> k1x(p.size()), k2x(p.size()), k3x(p.size()), k4x(p.size());
  std::vector<double> xn(p.size()), vn(p.size());

  const auto record = [&](double t) {
    traj.times.push_back(t);
    traj.positions.push_back(x);
    traj.velocities.push_back(vel);
    traj.speeds.push_back(std::exp(g.exponent_at(x)) * euclidean_norm(vel));
  };
  record(0.0);

  traj.exit = ExitReason::horizon;
  while (traj.times.back() < horizon - 1e-12) {
    const double t = traj.times.back();
    const double h = std::min(step, horizon - t);
    try {
      k1x = vel;
      g.geodesic_acceleration(x, vel, k1v, scratch);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = x[i] + 0.5 * h * k1x[i];
        vs[i] = vel[i] + 0.5 * h * k1v[i];
      }
      k2x = vs;
      g.geodesic_acceleration(xs, vs, k2v, scratch);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = x[i] + 0.5 * h * k2x[i];
        vs[i] = vel[i] + 0.5 * h * k2v[i];
      }
      k3x = vs;
      g.geodesic_acceleration(xs, vs, k3v, scratch);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = x[i] + h * k3x[i];
        vs[i] = vel[i] + h * k3v[i];
      }
      k4x = vs;
      g.geodesic_acceleration(xs, vs, k4v, scratch);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xn[i] = x[i] + h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        vn[i] = vel[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
      }
      if (!g.domain().contains(xn)) {
        traj.exit = ExitReason::domain_boundary;
        break;
      }
      x = xn;
      vel = vn;
      record(t + h);
    } catch (const DomainError&) {
      traj.exit = ExitReason::domain_boundary;
      break;
    }
  }
  return traj;
}

ArcLength curve_arclength(const ConformalMetric& g, std::span<const Expr> curve,
                          double t0, double t1) {
  if (!(t1 > t0)) throw std::invalid_argument("need t1 > t0");
  CurveSpeed speed(g, curve);

  ArcLength out;
  if (std::isfinite(t1)) {
    out.value = integrate_segment(speed, t0, t1, kQuadTol);
    out.reached_t = t1;
    out.converged = true;
    return out;
  }

  // Improper upper limit: doubling chunks until the contribution fades.
  double a = t0, len = 1.0, total = 0.0;
  while (a < kDivergenceHorizon) {
    const double b = a + len;
    const double chunk = integrate_segment(speed, a, b, kQuadTol);
    total += chunk;
    a = b;
    len *= 2.0;
    if (std::abs(chunk) < kTailCutoff) {
      out.converged = true;
      break;
    }
  }
  out.value = total;
  out.reached_t = a;
  return out;
}

GrowthSeries potential_growth(const ConformalMetric& g, const Expr& phi,
                              std::span<const double> p, std::span<const double> v,
                              double horizon, double step) {
  const Trajectory traj = integrate_geodesic(g, p, v, horizon, step);
  const double reached = traj.times.back();
  if (reached < 0.5 * horizon)
    throw std::runtime_error(
        "geodesic left the domain before half the horizon (reached t = " +
        std::to_string(reached) + "); widen the domain or shrink the horizon");

  std::vector<CompiledExpr> dphi;
  dphi.reserve(p.size());
  for (int i = 0; i < g.dim(); ++i) dphi.push_back(compile(differentiate(phi, i)));

  GrowthSeries out;
  out.exit = traj.exit;
  out.reached_t = reached;
  out.times.reserve(traj.times.size());
  out.ratios.reserve(traj.times.size());
  std::vector<double> scratch;
  const double tail_from = 0.75 * reached;
  out.tail_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    const double t = traj.times[k];
    double deriv = 0.0;
    for (std::size_t i = 0; i < dphi.size(); ++i)
      deriv += dphi[i].eval(traj.positions[k], scratch) * traj.velocities[k][i];
    const double ratio = deriv / t;
    out.times.push_back(t);
    out.ratios.push_back(ratio);
    if (t >= tail_from) out.tail_max = std::max(out.tail_max, ratio);
  }
  return out;
}

VolumeEstimate weighted_ball_volume(const ConformalMetric& g, const Expr& weight,
                                    std::span<const double> center, double radius,
                                    int n_samples, std::uint64_t seed,
                                    double step) {
  if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
  if (n_samples < 2) throw std::invalid_argument("need at least 2 samples");
  if (!weight.valid()) throw std::invalid_argument("weight expression is empty");
  if (!g.domain().contains(center))
    throw DomainError("ball center lies outside the domain");

  const CompiledExpr w = compile(weight);
  std::vector<DirectionResult> results(static_cast<std::size_t>(n_samples));
  parallel_for(results.size(), [&](std::size_t i) {
    results[i] = shoot_direction(g, w, center, radius, step, seed, i);
  });

  double mean = 0.0;
  bool clipped = false;
  for (const DirectionResult& r : results) {
    mean += r.integral;
    clipped = clipped || r.clipped;
  }
  mean /= static_cast<double>(n_samples);
  double var = 0.0;
  for (const DirectionResult& r : results) {
    const double d = r.integral - mean;
    var += d * d;
  }
  var /= static_cast<double>(n_samples - 1);

  const double area = sphere_area(g.dim());
  VolumeEstimate est;
  est.radius = radius;
  est.value = area * mean;
  est.std_error = area * std::sqrt(var / n_samples);
  est.n_samples = n_samples;
  est.seed = seed;
  est.clipped = clipped;
  return est;
}

GrowthFit growth_bound_check(std::span<const VolumeEstimate> estimates) {
  if (estimates.size() < 4)
    throw std::invalid_argument("growth fit needs at least 4 radii");
  const std::size_t k = estimates.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const VolumeEstimate& e : estimates) {
    if (!(e.value > 0.0))
      throw std::invalid_argument("volume estimates must be positive");
    const double xv = e.radius * e.radius;
    const double yv = std::log(e.value);
    sx += xv;
    sy += yv;
    sxx += xv * xv;
    sxy += xv * yv;
  }
  const double kd = static_cast<double>(k);
  const double denom = kd * sxx - sx * sx;
  GrowthFit fit;
  fit.c0 = (kd * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.c0 * sx) / kd;
  double ss = 0.0;
  for (const VolumeEstimate& e : estimates) {
    const double resid =
        std::log(e.value) - (fit.intercept + fit.c0 * e.radius * e.radius);
    ss += resid * resid;
  }
  fit.rms_residual = std::sqrt(ss / kd);
  fit.fits = std::isfinite(fit.c0) && fit.rms_residual <= 1.0;
  return fit;
}

}  // namespace warpsol
