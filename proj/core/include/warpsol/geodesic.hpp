#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "warpsol/metric.hpp"

// Numerical probes of global geometry: geodesic integration, curve
// length (including improper upper limits, for the divergent-curve
// completeness criterion), potential growth along rays, and Monte Carlo
// weighted ball volumes with a growth-exponent fit.

namespace warpsol {

enum class ExitReason { horizon, domain_boundary };

struct Trajectory {
  double step = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> velocities;
  std::vector<double> speeds;  // |gamma'|_g per sample
  ExitReason exit = ExitReason::horizon;
};

// Rescale a Euclidean direction to unit metric speed at p.
std::vector<double> metric_normalize(const ConformalMetric& g,
                                     std::span<const double> p,
                                     std::span<const double> v);

// Classical 4th-order fixed-step integration of the geodesic equation
// gamma''^k = -Gamma^k_ij gamma'^i gamma'^j from (p, v), stopped at the
// horizon or on leaving the domain box (whichever comes first).
Trajectory integrate_geodesic(const ConformalMetric& g, std::span<const double> p,
                              std::span<const double> v, double horizon,
                              double step);

struct ArcLength {
  bool converged = false;
  double value = 0.0;    // integral accumulated up to reached_t
  double reached_t = 0.0;
};

// Length of the parametric curve (one Expr per coordinate, parameter x1)
// in the metric g. t1 may be +infinity: chunks [t0+2^k, t0+2^{k+1}] are
// added until a chunk drops below 1e-8 (converged) or the parameter
// exceeds 1e12 (reported unconverged: the curve is divergent at least to
// reached_t). Throws DomainError if the curve leaves the domain box.
ArcLength curve_arclength(const ConformalMetric& g, std::span<const Expr> curve,
                          double t0, double t1);

struct GrowthSeries {
  std::vector<double> times;
  std::vector<double> ratios;  // (1/t) dphi/dt along the geodesic
  double tail_max = 0.0;       // max ratio over the final quarter reached
  double reached_t = 0.0;
  ExitReason exit = ExitReason::horizon;
};

// Asymptotic growth proxy for the potential along a unit-speed geodesic:
// the tail max of (1/t) dphi/dt stands in for the limsup. Throws
// std::runtime_error if the geodesic leaves the domain before half the
// horizon.
GrowthSeries potential_growth(const ConformalMetric& g, const Expr& phi,
                              std::span<const double> p, std::span<const double> v,
                              double horizon, double step);

struct VolumeEstimate {
  double radius = 0.0;
  double value = 0.0;      // estimate of the integral of e^{-w} over B(p, R)
  double std_error = 0.0;
  int n_samples = 0;
  std::uint64_t seed = 0;
  bool clipped = false;  // some ray left the domain before radius R
};

// Monte Carlo weighted ball volume by radial shooting: n_samples seeded
// directions, a finite-difference Jacobi bundle per direction for the
// sphere area element, and a jittered-lattice radial quadrature (exact
// for radially symmetric metrics up to the Monte Carlo error; the
// estimate is approximate otherwise). Deterministic for a fixed seed and
// independent of thread count.
VolumeEstimate weighted_ball_volume(const ConformalMetric& g, const Expr& weight,
                                    std::span<const double> center, double radius,
                                    int n_samples, std::uint64_t seed,
                                    double step = 1e-3);

struct GrowthFit {
  double c0 = 0.0;         // leading coefficient of log vol ~ a + c0 R^2
  double intercept = 0.0;
  double rms_residual = 0.0;
  bool fits = false;  // finite c0 and rms residual at most 1 log unit
};

// Least-squares fit of log(vol) against R^2 over at least 4 radii; the
// shape check for Gaussian-type volume growth bounds.
GrowthFit growth_bound_check(std::span<const VolumeEstimate> estimates);

}  // namespace warpsol
