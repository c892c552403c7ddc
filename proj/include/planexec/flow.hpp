#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/errors.hpp"
#include "planexec/rng.hpp"

namespace planexec::flow {

/// Closed-form scalar test flow along the linear interpolation path
///   x_t = (1 - t) * x_data + t * eps,   eps ~ N(0, 1),  t in [0, 1],
/// with x_data ~ N(data_mean, data_std^2). Every time-t marginal is
/// Gaussian, so the ODE velocity, score, stochastic sampler and all
/// transition densities have exact closed forms to verify against.
/// t = 1 is pure noise, t = 0 is data.
struct LinearGaussianFlow {
  double data_mean = 0.0;
  double data_std = 1.0;  // must be >= 0
};

struct MarginalStats {
  double mean = 0.0;
  double variance = 0.0;
};

/// mean = (1-t) * data_mean, variance = (1-t)^2 * data_std^2 + t^2.
/// Throws DomainError when t is outside [0, 1] or data_std < 0.
MarginalStats marginal_stats(const LinearGaussianFlow& flow, double t);

/// Velocity field of the probability-flow ODE (states follow the
/// marginals as t increases):
///   u(x, t) = m' + (v' / (2 v)) * (x - m)
/// with m, v from marginal_stats and m' = -data_mean,
/// v' = -2 (1-t) data_std^2 + 2 t. Throws SingularityError when
/// variance(t) = 0 (only at t = 0 with data_std = 0).
double ode_velocity(const LinearGaussianFlow& flow, double x, double t);

/// Exact Gaussian score grad_x log p_t(x) = -(x - m) / v. Throws
/// SingularityError when variance(t) = 0.
double score(const LinearGaussianFlow& flow, double x, double t);

/// Sampler configuration. noise_level a scales the diffusion term as
/// g_t = a * sqrt(v_t); a = 0 recovers the deterministic ODE solve.
struct SamplerConfig {
  std::size_t steps = 64;     // N >= 1 uniform steps from t=1 down to t=0
  double noise_level = 0.0;   // a >= 0
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::vector<std::pair<double, double>> states;  // (t, x), length steps+1
  std::vector<double> step_logprobs;  // per-transition log densities; empty when a=0
  double total_logprob = 0.0;         // sum of step_logprobs (0 when a=0)
  bool deterministic = false;         // true for the a=0 ODE path
};

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Integrate from t=1 (a marginal sample of N(0,1)) down to t=0 with
/// Euler-Maruyama steps of the reverse-time sampler
///   x_next = x + dt * drift(x, t) + a * sqrt(v_t * dt) * xi
///   drift(x, t) = -u(x, t) + (a^2 v_t / 2) * score(x, t)
///               = -m' - (v'/(2v) + a^2/2) * (x - m).
/// This family preserves the flow marginals for every a >= 0; with a=0
/// it degenerates to the backward Euler ODE solve (same code path,
/// empty step_logprobs). Each transition is conditionally Gaussian, so
/// step logprobs are exact. With data_std = 0 the grid stops at
/// t = 1/N, excluding the singular t=0 endpoint.
Trajectory sde_rollout(const LinearGaussianFlow& flow, const SamplerConfig& cfg,
                       Rng& rng);
Trajectory sde_rollout(const LinearGaussianFlow& flow, const SamplerConfig& cfg);

/// Recompute the summed transition log density of an existing state
/// sequence under (possibly different) flow parameters. Equals the
/// rollout's total_logprob when evaluated under the generating
/// parameters. Requires cfg.noise_level > 0 and states laid out on
/// cfg's uniform grid starting at t=1 (length steps+1, or steps when the
/// generating flow stopped at t=1/N); throws DomainError otherwise.
double trajectory_logprob(const LinearGaussianFlow& flow,
                          const std::vector<std::pair<double, double>>& states,
                          const SamplerConfig& cfg);

struct FlowGradient {
  double d_data_mean = 0.0;
  double d_data_std = 0.0;
};

/// Analytic gradient of trajectory_logprob with respect to data_mean
/// and data_std. Matches central finite differences. Same preconditions
/// as trajectory_logprob.
FlowGradient grad_trajectory_logprob(
    const LinearGaussianFlow& flow,
    const std::vector<std::pair<double, double>>& states,
    const SamplerConfig& cfg);

}  // namespace planexec::flow
