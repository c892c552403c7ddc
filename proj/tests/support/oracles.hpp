#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "planexec/flow.hpp"

namespace testsupport {

// Central-difference derivative, the reference all analytic gradients are
// judged against.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  double scale = std::max({std::fabs(got), std::fabs(want), 1e-12});
  return std::fabs(got - want) / scale;
}

// Composite Simpson quadrature on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int n) {
  if (n % 2 != 0) ++n;
  double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    acc += f(a + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

// Exact per-step moment recursion for the discretized noising process the
// sampler integrates. The sampler update is
//   x_{k+1} = x_k + dt * drift(x_k, t_k) + noise * sqrt(v(t_k) * dt) * z
// with drift affine in x, so the state stays Gaussian and its mean/variance
// obey a closed recursion. Comparing sampler populations against this
// recursion checks the integrator without trusting any of its internals.
struct MomentTrack {
  double mean = 0.0;
  double var = 0.0;
};

inline MomentTrack discretized_moments(const planexec::flow::LinearGaussianFlow& f,
                                       int steps, double noise) {
  double mu = f.data_mean;
  double sd = f.data_std;
  bool shrink_grid = sd == 0.0;
  double dt = 1.0 / steps;
  int moves = shrink_grid ? steps - 1 : steps;
  MomentTrack track;
  // Start of the reverse pass: state drawn from the t = 1 marginal, which is
  // a standard normal regardless of the data parameters.
  track.mean = 0.0;
  track.var = 1.0;
  for (int k = 0; k < moves; ++k) {
    double t = 1.0 - k * dt;
    auto m = planexec::flow::marginal_stats(f, t);
    double mprime = -mu;
    double vprime = -2.0 * (1.0 - t) * sd * sd + 2.0 * t;
    double c = vprime / (2.0 * m.variance) + noise * noise / 2.0;
    // drift(x) = -mprime - c * (x - m_t); x_{k+1} = x + dt * drift + diffusion
    double a_lin = 1.0 - dt * c;
    double b_lin = dt * (-mprime + c * m.mean);
    double q = noise * noise * m.variance * dt;
    track.mean = a_lin * track.mean + b_lin;
    track.var = a_lin * a_lin * track.var + q;
  }
  return track;
}

}  // namespace testsupport
