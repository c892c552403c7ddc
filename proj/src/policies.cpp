#include "planexec/policies.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace planexec::policy {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void require_finite_params(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(what) + " contains a non-finite value");
    }
  }
}

/// Scalar weight multiplying grad logprob_new for one candidate, shared
/// between both policy families. Encodes the clamp conventions: a
/// clamped ratio (or an active exponent clamp) is a constant with zero
/// gradient, and the KL term differentiates to (1 - exp(delta)) unless
/// the delta clamp is active.
struct CandidateWeight {
  double policy = 0.0;  // multiply by grad logprob, then average over G
  double kl = 0.0;      // multiply by grad logprob, then average over refs
};

CandidateWeight candidate_weight(const grpo::Candidate& c, double advantage,
                                 double clip_range, grpo::SurrogateForm form) {
  CandidateWeight w;
  const double exponent = c.logprob_new - c.logprob_old;
  const bool exp_clamped = exponent < -20.0 || exponent > 20.0;
  const auto ratio = grpo::clipped_ratio(c.logprob_new, c.logprob_old, clip_range);
  const double raw = std::exp(std::clamp(exponent, -20.0, 20.0));

  if (form == grpo::SurrogateForm::ClampedRatio) {
    w.policy = (ratio.clipped || exp_clamped) ? 0.0 : raw * advantage;
  } else {
    const double raw_term = raw * advantage;
    const double clip_term = ratio.value * advantage;
    if (raw_term <= clip_term && !exp_clamped) {
      w.policy = raw * advantage;
    }
  }

  if (c.logprob_ref) {
    const double delta = *c.logprob_ref - c.logprob_new;
    if (delta > -50.0 && delta < 50.0) {
      w.kl = 1.0 - std::exp(delta);
    }
  }
  return w;
}

void require_advantages(const grpo::RolloutGroup& group) {
  if (!group.advantages ||
      group.advantages->size() != group.candidates.size()) {
    throw StateError("advantages not computed for this group; call compute_advantages first");
  }
}

std::size_t ref_count(const grpo::RolloutGroup& group) {
  std::size_t n = 0;
  for (const auto& c : group.candidates) {
    if (c.logprob_ref) ++n;
  }
  return n;
}

}  // namespace

std::vector<PromptTemplate> builtin_templates(std::size_t k) {
  std::vector<PromptTemplate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    PromptTemplate t;
    t.label = "template-" + std::to_string(i);
    t.enhanced_prompt = "a studio photograph of the subject, framing " +
                        t.label + ", soft key light, sharp focus, high detail";
    out.push_back(std::move(t));
  }
  return out;
}

SoftmaxTemplatePolicy::SoftmaxTemplatePolicy(std::vector<double> logits)
    : logits_(std::move(logits)) {
  if (logits_.empty()) {
    throw DomainError("softmax policy needs at least one template");
  }
  require_finite_params(logits_, "logits");
}

SoftmaxTemplatePolicy SoftmaxTemplatePolicy::uniform(std::size_t k) {
  return SoftmaxTemplatePolicy(std::vector<double>(k, 0.0));
}

std::vector<double> SoftmaxTemplatePolicy::probabilities() const {
  const double lse = logsumexp(logits_);
  std::vector<double> p(logits_.size());
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    p[i] = std::exp(logits_[i] - lse);
  }
  return p;
}

double SoftmaxTemplatePolicy::logprob(std::size_t index) const {
  if (index >= logits_.size()) {
    throw DomainError("template index " + std::to_string(index) +
                      " out of range for " + std::to_string(logits_.size()) +
                      " templates");
  }
  return logits_[index] - logsumexp(logits_);
}

double SoftmaxTemplatePolicy::entropy() const {
  const auto p = probabilities();
  double h = 0.0;
  for (double q : p) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

std::size_t SoftmaxTemplatePolicy::sample(Rng& rng) const {
  return rng.categorical(probabilities());
}

nlohmann::json SoftmaxTemplatePolicy::to_json() const {
  return nlohmann::json{{"kind", "softmax_template"}, {"logits", logits_}};
}

SoftmaxTemplatePolicy SoftmaxTemplatePolicy::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "softmax_template") {
    throw ParseError("checkpoint kind is not softmax_template");
  }
  return SoftmaxTemplatePolicy(j.at("logits").get<std::vector<double>>());
}

GaussianRolloutPolicy::GaussianRolloutPolicy(std::vector<double> mean,
                                             std::vector<double> log_std)
    : mean_(std::move(mean)), log_std_(std::move(log_std)) {
  if (mean_.empty() || mean_.size() != log_std_.size()) {
    throw DomainError("gaussian policy needs matching non-empty mean and log_std");
  }
  require_finite_params(mean_, "mean");
  require_finite_params(log_std_, "log_std");
}

GaussianRolloutPolicy GaussianRolloutPolicy::standard(std::size_t dim) {
  return GaussianRolloutPolicy(std::vector<double>(dim, 0.0),
                               std::vector<double>(dim, 0.0));
}

std::vector<double> GaussianRolloutPolicy::std_dev() const {
  std::vector<double> s(log_std_.size());
  for (std::size_t i = 0; i < log_std_.size(); ++i) s[i] = std::exp(log_std_[i]);
  return s;
}

double GaussianRolloutPolicy::logprob(const std::vector<double>& x) const {
  if (x.size() != mean_.size()) {
    throw DomainError("sample dimension " + std::to_string(x.size()) +
                      " does not match policy dimension " +
                      std::to_string(mean_.size()));
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double sigma = std::exp(log_std_[i]);
    const double z = (x[i] - mean_[i]) / sigma;
    lp += -kHalfLog2Pi - log_std_[i] - 0.5 * z * z;
  }
  return lp;
}

std::vector<double> GaussianRolloutPolicy::sample(Rng& rng) const {
  std::vector<double> x(mean_.size());
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    x[i] = mean_[i] + std::exp(log_std_[i]) * rng.normal();
  }
  return x;
}

nlohmann::json GaussianRolloutPolicy::to_json() const {
  return nlohmann::json{
      {"kind", "gaussian_rollout"}, {"mean", mean_}, {"log_std", log_std_}};
}

GaussianRolloutPolicy GaussianRolloutPolicy::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "gaussian_rollout") {
    throw ParseError("checkpoint kind is not gaussian_rollout");
  }
  return GaussianRolloutPolicy(j.at("mean").get<std::vector<double>>(),
                               j.at("log_std").get<std::vector<double>>());
}

namespace {

void require_group_size(std::size_t group_size) {
  if (group_size < 2) {
    throw GroupTooSmallError("sample_group needs a group of at least 2, got " +
                             std::to_string(group_size));
  }
}

}  // namespace

grpo::RolloutGroup sample_group(const SoftmaxTemplatePolicy& policy,
                                std::size_t group_size, Rng& rng) {
  require_group_size(group_size);
  grpo::RolloutGroup group;
  group.candidates.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    grpo::Candidate c;
    c.id = i;
    const std::size_t action = policy.sample(rng);
    c.sequence = nlohmann::json{{"template", action}};
    c.logprob_old = policy.logprob(action);
    c.logprob_new = c.logprob_old;
    c.logprob_ref = c.logprob_old;
    group.candidates.push_back(std::move(c));
  }
  return group;
}

grpo::RolloutGroup sample_group(const GaussianRolloutPolicy& policy,
                                std::size_t group_size, Rng& rng) {
  require_group_size(group_size);
  grpo::RolloutGroup group;
  group.candidates.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    grpo::Candidate c;
    c.id = i;
    const auto x = policy.sample(rng);
    c.sequence = nlohmann::json{{"x", x}};
    c.logprob_old = policy.logprob(x);
    c.logprob_new = c.logprob_old;
    c.logprob_ref = c.logprob_old;
    group.candidates.push_back(std::move(c));
  }
  return group;
}

void refresh_logprob_new(const SoftmaxTemplatePolicy& policy,
                         grpo::RolloutGroup& group) {
  for (auto& c : group.candidates) {
    c.logprob_new = policy.logprob(c.sequence.at("template").get<std::size_t>());
  }
}

void refresh_logprob_new(const GaussianRolloutPolicy& policy,
                         grpo::RolloutGroup& group) {
  for (auto& c : group.candidates) {
    c.logprob_new = policy.logprob(c.sequence.at("x").get<std::vector<double>>());
  }
}

std::vector<double> grad_surrogate(const SoftmaxTemplatePolicy& policy,
                                   const grpo::RolloutGroup& group,
                                   double clip_range, double beta_kl,
                                   grpo::SurrogateForm form) {
  require_advantages(group);
  const auto probs = policy.probabilities();
  const double n = static_cast<double>(group.candidates.size());
  const double refs = static_cast<double>(ref_count(group));

  std::vector<double> grad(policy.size(), 0.0);
  for (std::size_t i = 0; i < group.candidates.size(); ++i) {
    const auto& c = group.candidates[i];
    const auto w = candidate_weight(c, (*group.advantages)[i], clip_range, form);
    double coef = w.policy / n;
    if (refs > 0.0) coef -= beta_kl * w.kl / refs;
    if (coef == 0.0) continue;

    const auto action = c.sequence.at("template").get<std::size_t>();
    if (action >= policy.size()) {
      throw DomainError("candidate template index out of range");
    }
    // grad logprob(action) w.r.t. logits = one_hot(action) - probs
    for (std::size_t k = 0; k < grad.size(); ++k) {
      grad[k] -= coef * probs[k];
    }
    grad[action] += coef;
  }
  return grad;
}

std::vector<double> grad_surrogate(const GaussianRolloutPolicy& policy,
                                   const grpo::RolloutGroup& group,
                                   double clip_range, double beta_kl,
                                   grpo::SurrogateForm form) {
  require_advantages(group);
  const std::size_t d = policy.dim();
  const double n = static_cast<double>(group.candidates.size());
  const double refs = static_cast<double>(ref_count(group));

  std::vector<double> grad(2 * d, 0.0);  // [mean..., log_std...]
  for (std::size_t i = 0; i < group.candidates.size(); ++i) {
    const auto& c = group.candidates[i];
    const auto w = candidate_weight(c, (*group.advantages)[i], clip_range, form);
    double coef = w.policy / n;
    if (refs > 0.0) coef -= beta_kl * w.kl / refs;
    if (coef == 0.0) continue;

    const auto x = c.sequence.at("x").get<std::vector<double>>();
    if (x.size() != d) {
      throw DomainError("candidate sample dimension does not match policy");
    }
    for (std::size_t k = 0; k < d; ++k) {
      const double sigma = std::exp(policy.log_std()[k]);
      const double z = (x[k] - policy.mean()[k]) / sigma;
      grad[k] += coef * z / sigma;          // d logprob / d mean_k
      grad[d + k] += coef * (z * z - 1.0);  // d logprob / d log_std_k
    }
  }
  return grad;
}

std::vector<double> grad_surrogate(const grpo::RolloutGroup& group,
                                   const std::vector<std::vector<double>>& grad_logprob_new,
                                   double clip_range, double beta_kl,
                                   grpo::SurrogateForm form) {
  require_advantages(group);
  if (grad_logprob_new.size() != group.candidates.size()) {
    throw DomainError("one grad logprob vector per candidate required");
  }
  if (grad_logprob_new.empty()) return {};

  const std::size_t dim = grad_logprob_new.front().size();
  const double n = static_cast<double>(group.candidates.size());
  const double refs = static_cast<double>(ref_count(group));

  std::vector<double> grad(dim, 0.0);
  for (std::size_t i = 0; i < group.candidates.size(); ++i) {
    const auto& g = grad_logprob_new[i];
    if (g.size() != dim) {
      throw DomainError("grad logprob vectors must share one length");
    }
    const auto w = candidate_weight(group.candidates[i], (*group.advantages)[i],
                                    clip_range, form);
    double coef = w.policy / n;
    if (refs > 0.0) coef -= beta_kl * w.kl / refs;
    if (coef == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) grad[k] += coef * g[k];
  }
  return grad;
}

namespace {

std::vector<double> stepped(const std::vector<double>& params,
                            std::span<const double> gradient, double lr) {
  std::vector<double> next(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    next[i] = params[i] + lr * gradient[i];
  }
  return next;
}

}  // namespace

SoftmaxTemplatePolicy sgd_step(const SoftmaxTemplatePolicy& policy,
                               const std::vector<double>& gradient, double lr) {
  if (gradient.size() != policy.size()) {
    throw DomainError("gradient dimension does not match policy logits");
  }
  return SoftmaxTemplatePolicy(stepped(policy.logits(), gradient, lr));
}

GaussianRolloutPolicy sgd_step(const GaussianRolloutPolicy& policy,
                               const std::vector<double>& gradient, double lr) {
  const std::size_t d = policy.dim();
  if (gradient.size() != 2 * d) {
    throw DomainError("gradient dimension does not match policy parameters");
  }
  std::vector<double> mean = stepped(policy.mean(), std::span(gradient).first(d), lr);
  std::vector<double> log_std =
      stepped(policy.log_std(), std::span(gradient).subspan(d), lr);
  return GaussianRolloutPolicy(std::move(mean), std::move(log_std));
}

}  // namespace planexec::policy
