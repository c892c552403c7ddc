#include "planexec/flow.hpp"

#include <algorithm>
#include <cmath>

namespace planexec::flow {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
constexpr double kGridTol = 1e-12;

void require_flow(const LinearGaussianFlow& flow) {
  if (!(flow.data_std >= 0.0) || !std::isfinite(flow.data_std) ||
      !std::isfinite(flow.data_mean)) {
    throw DomainError("flow needs finite data_mean and data_std >= 0");
  }
}

void require_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("t must lie in [0, 1], got " + std::to_string(t));
  }
}

/// Marginal mean/variance and their time derivatives at t.
struct PathPoint {
  double m;   // (1-t) * data_mean
  double v;   // (1-t)^2 * data_std^2 + t^2
  double mp;  // dm/dt = -data_mean
  double vp;  // dv/dt = -2 (1-t) data_std^2 + 2 t
};

PathPoint path_point(const LinearGaussianFlow& flow, double t) {
  const double om = 1.0 - t;
  const double s2 = flow.data_std * flow.data_std;
  PathPoint p;
  p.m = om * flow.data_mean;
  p.v = om * om * s2 + t * t;
  p.mp = -flow.data_mean;
  p.vp = -2.0 * om * s2 + 2.0 * t;
  return p;
}

double log_normal(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * z * z;
}

/// Reverse-time drift -m' - (v'/(2v) + a^2/2) * (x - m). The score
/// correction (a^2 v / 2) * score folds into the (x - m) coefficient,
/// which is what keeps every time-t law on the flow's marginals.
double drift_at(const PathPoint& p, double x, double noise_level) {
  const double c = p.vp / (2.0 * p.v) + 0.5 * noise_level * noise_level;
  return -p.mp - c * (x - p.m);
}

void require_cfg(const SamplerConfig& cfg) {
  if (cfg.steps == 0) {
    throw DomainError("sampler needs at least one step");
  }
  if (!(cfg.noise_level >= 0.0) || !std::isfinite(cfg.noise_level)) {
    throw DomainError("noise_level must be finite and >= 0");
  }
}

double grid_time(std::size_t steps, std::size_t k) {
  return static_cast<double>(steps - k) / static_cast<double>(steps);
}

void require_grid(const std::vector<std::pair<double, double>>& states,
                  const SamplerConfig& cfg) {
  const std::size_t n = states.size();
  if (n != cfg.steps + 1 && n != cfg.steps) {
    throw DomainError("state count " + std::to_string(n) +
                      " does not fit a " + std::to_string(cfg.steps) +
                      "-step grid");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(states[k].first - grid_time(cfg.steps, k)) > kGridTol) {
      throw DomainError("state " + std::to_string(k) +
                        " is off the uniform time grid");
    }
  }
}

}  // namespace

MarginalStats marginal_stats(const LinearGaussianFlow& flow, double t) {
  require_flow(flow);
  require_time(t);
  const auto p = path_point(flow, t);
  return MarginalStats{p.m, p.v};
}

double ode_velocity(const LinearGaussianFlow& flow, double x, double t) {
  require_flow(flow);
  require_time(t);
  const auto p = path_point(flow, t);
  if (p.v <= 0.0) {
    throw SingularityError("marginal variance is zero at t = " +
                           std::to_string(t));
  }
  return p.mp + p.vp / (2.0 * p.v) * (x - p.m);
}

double score(const LinearGaussianFlow& flow, double x, double t) {
  require_flow(flow);
  require_time(t);
  const auto p = path_point(flow, t);
  if (p.v <= 0.0) {
    throw SingularityError("marginal variance is zero at t = " +
                           std::to_string(t));
  }
  return -(x - p.m) / p.v;
}

Trajectory sde_rollout(const LinearGaussianFlow& flow, const SamplerConfig& cfg,
                       Rng& rng) {
  require_flow(flow);
  require_cfg(cfg);

  const std::size_t n_trans =
      flow.data_std == 0.0 ? cfg.steps - 1 : cfg.steps;
  const double dt = 1.0 / static_cast<double>(cfg.steps);
  const double a = cfg.noise_level;

  Trajectory traj;
  traj.deterministic = a == 0.0;
  traj.states.reserve(n_trans + 1);
  if (a > 0.0) traj.step_logprobs.reserve(n_trans);

  double x = rng.normal();  // marginal at t=1 is N(0, 1) for every flow
  traj.states.emplace_back(1.0, x);

  for (std::size_t k = 0; k < n_trans; ++k) {
    const double t = grid_time(cfg.steps, k);
    const auto p = path_point(flow, t);
    if (p.v <= 0.0) {
      throw SingularityError("marginal variance is zero at t = " +
                             std::to_string(t));
    }
    const double mu_step = x + dt * drift_at(p, x, a);
    double x_next = mu_step;
    if (a > 0.0) {
      const double sigma = a * std::sqrt(p.v * dt);
      x_next = mu_step + sigma * rng.normal();
      traj.step_logprobs.push_back(log_normal(x_next, mu_step, sigma));
    }
    traj.states.emplace_back(grid_time(cfg.steps, k + 1), x_next);
    x = x_next;
  }

  for (double lp : traj.step_logprobs) traj.total_logprob += lp;
  return traj;
}

Trajectory sde_rollout(const LinearGaussianFlow& flow,
                       const SamplerConfig& cfg) {
  Rng rng(cfg.seed);
  return sde_rollout(flow, cfg, rng);
}

double trajectory_logprob(const LinearGaussianFlow& flow,
                          const std::vector<std::pair<double, double>>& states,
                          const SamplerConfig& cfg) {
  require_flow(flow);
  require_cfg(cfg);
  if (!(cfg.noise_level > 0.0)) {
    throw DomainError("transition densities need noise_level > 0");
  }
  require_grid(states, cfg);

  const double dt = 1.0 / static_cast<double>(cfg.steps);
  const double a = cfg.noise_level;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    const double t = grid_time(cfg.steps, k);
    const auto p = path_point(flow, t);
    if (p.v <= 0.0) {
      throw SingularityError("marginal variance is zero at t = " +
                             std::to_string(t));
    }
    const double x = states[k].second;
    const double mu_step = x + dt * drift_at(p, x, a);
    const double sigma = a * std::sqrt(p.v * dt);
    total += log_normal(states[k + 1].second, mu_step, sigma);
  }
  return total;
}

FlowGradient grad_trajectory_logprob(
    const LinearGaussianFlow& flow,
    const std::vector<std::pair<double, double>>& states,
    const SamplerConfig& cfg) {
  require_flow(flow);
  require_cfg(cfg);
  if (!(cfg.noise_level > 0.0)) {
    throw DomainError("transition densities need noise_level > 0");
  }
  require_grid(states, cfg);

  const double dt = 1.0 / static_cast<double>(cfg.steps);
  const double a = cfg.noise_level;
  const double s = flow.data_std;

  FlowGradient grad;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    const double t = grid_time(cfg.steps, k);
    const double om = 1.0 - t;
    const auto p = path_point(flow, t);
    if (p.v <= 0.0) {
      throw SingularityError("marginal variance is zero at t = " +
                             std::to_string(t));
    }
    const double x = states[k].second;
    const double y = states[k + 1].second;
    const double c = p.vp / (2.0 * p.v) + 0.5 * a * a;
    const double mu_step = x + dt * drift_at(p, x, a);
    const double sigma = a * std::sqrt(p.v * dt);
    const double r = y - mu_step;

    // data_mean enters through m and m': d drift / d data_mean = 1 + c (1-t).
    const double dmu_dmean = dt * (1.0 + c * om);
    grad.d_data_mean += r / (sigma * sigma) * dmu_dmean;

    // data_std enters through v (hence c and sigma):
    //   dv/ds = 2 (1-t)^2 s, dv'/ds = -4 (1-t) s,
    //   dc/ds = (dv'/ds * v - v' * dv/ds) / (2 v^2),
    //   d drift/ds = -dc/ds * (x - m), d sigma/ds = a sqrt(dt) dv/ds / (2 sqrt(v)).
    const double dv_ds = 2.0 * om * om * s;
    const double dvp_ds = -4.0 * om * s;
    const double dc_ds = (dvp_ds * p.v - p.vp * dv_ds) / (2.0 * p.v * p.v);
    const double dmu_ds = dt * (-dc_ds * (x - p.m));
    const double dsigma_ds = a * std::sqrt(dt) * dv_ds / (2.0 * std::sqrt(p.v));
    grad.d_data_std += -dsigma_ds / sigma + r / (sigma * sigma) * dmu_ds +
                       r * r / (sigma * sigma * sigma) * dsigma_ds;
  }
  return grad;
}

nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& [tt, x] : t.states) {
    states.push_back(nlohmann::json::array({tt, x}));
  }
  return nlohmann::json{{"states", std::move(states)},
                        {"step_logprobs", t.step_logprobs},
                        {"total_logprob", t.total_logprob},
                        {"deterministic", t.deterministic}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  for (const auto& s : j.at("states")) {
    t.states.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
  }
  j.at("step_logprobs").get_to(t.step_logprobs);
  j.at("total_logprob").get_to(t.total_logprob);
  j.at("deterministic").get_to(t.deterministic);
  return t;
}

}  // namespace planexec::flow
