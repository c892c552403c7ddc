#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/errors.hpp"
#include "planexec/grpo.hpp"
#include "planexec/rng.hpp"

namespace planexec::policy {

/// An opaque label paired with a canned enhanced prompt. The softmax
/// policy picks among these; the prompt is what gets executed
/// downstream, so toy runs can drive the full generate-and-judge path.
struct PromptTemplate {
  std::string label;
  std::string enhanced_prompt;
};

/// Deterministic catalog of k templates. Labels are "template-0" ..
/// "template-(k-1)" and each enhanced prompt embeds its own label, which
/// lets scripted judges key on the chosen template.
std::vector<PromptTemplate> builtin_templates(std::size_t k);

/// Categorical policy over a finite template set, parameterized by
/// unconstrained logits. Immutable value type: updates return new
/// policies.
class SoftmaxTemplatePolicy {
 public:
  explicit SoftmaxTemplatePolicy(std::vector<double> logits);
  static SoftmaxTemplatePolicy uniform(std::size_t k = 8);

  std::size_t size() const { return logits_.size(); }
  const std::vector<double>& logits() const { return logits_; }

  /// Numerically stable softmax; sums to 1 within 1e-12.
  std::vector<double> probabilities() const;

  /// log P(index). Throws DomainError when index is out of range.
  double logprob(std::size_t index) const;

  /// Shannon entropy in nats.
  double entropy() const;

  std::size_t sample(Rng& rng) const;

  nlohmann::json to_json() const;
  static SoftmaxTemplatePolicy from_json(const nlohmann::json& j);

 private:
  std::vector<double> logits_;
};

/// Diagonal Gaussian over R^d parameterized by mean and log standard
/// deviation (unconstrained). Immutable value type.
class GaussianRolloutPolicy {
 public:
  GaussianRolloutPolicy(std::vector<double> mean, std::vector<double> log_std);
  static GaussianRolloutPolicy standard(std::size_t dim = 2);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }
  std::vector<double> std_dev() const;

  /// Exact log density; factorizes over dimensions.
  double logprob(const std::vector<double>& x) const;

  std::vector<double> sample(Rng& rng) const;

  nlohmann::json to_json() const;
  static GaussianRolloutPolicy from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_;
  std::vector<double> log_std_;
};

/// Draw G independent candidates. Candidate.sequence records the action
/// ({"template": i} or {"x": [..]}), and logprob_old / logprob_new /
/// logprob_ref are all filled with the exact log probability under the
/// sampling policy (the three coincide at sampling time). Deterministic
/// given the rng state. G must be >= 2.
grpo::RolloutGroup sample_group(const SoftmaxTemplatePolicy& policy,
                                std::size_t group_size, Rng& rng);
grpo::RolloutGroup sample_group(const GaussianRolloutPolicy& policy,
                                std::size_t group_size, Rng& rng);

/// Re-evaluate every candidate's logprob_new under the given policy,
/// leaving logprob_old and logprob_ref untouched.
void refresh_logprob_new(const SoftmaxTemplatePolicy& policy,
                         grpo::RolloutGroup& group);
void refresh_logprob_new(const GaussianRolloutPolicy& policy,
                         grpo::RolloutGroup& group);

/// Analytic ascent gradient of surrogate_objective with respect to the
/// policy parameters, via the score-function identity. Matches central
/// finite differences of the objective.
///
/// Conventions, shared with grpo::surrogate_objective:
///  - a candidate whose importance ratio is clamped contributes zero
///    ratio-gradient (the clamp is a constant w.r.t. parameters);
///  - the k3 KL penalty contributes (1 - exp(delta)) * grad logprob_new
///    per candidate carrying a reference, delta = logprob_ref -
///    logprob_new, averaged over those candidates and scaled by -beta_kl
///    (zero where the delta clamp is active).
///
/// Softmax: gradient w.r.t. logits (length k). Gaussian: gradient
/// w.r.t. [mean..., log_std...] (length 2d). Requires advantages;
/// throws StateError otherwise.
std::vector<double> grad_surrogate(const SoftmaxTemplatePolicy& policy,
                                   const grpo::RolloutGroup& group,
                                   double clip_range = 0.5,
                                   double beta_kl = 0.01,
                                   grpo::SurrogateForm form = grpo::SurrogateForm::ClampedRatio);
std::vector<double> grad_surrogate(const GaussianRolloutPolicy& policy,
                                   const grpo::RolloutGroup& group,
                                   double clip_range = 0.5,
                                   double beta_kl = 0.01,
                                   grpo::SurrogateForm form = grpo::SurrogateForm::ClampedRatio);

/// Family-agnostic form: the caller supplies grad logprob_new for every
/// candidate (equal-length vectors, one per candidate) and the same
/// clipping and KL weighting conventions are applied to those.
std::vector<double> grad_surrogate(const grpo::RolloutGroup& group,
                                   const std::vector<std::vector<double>>& grad_logprob_new,
                                   double clip_range = 0.5,
                                   double beta_kl = 0.01,
                                   grpo::SurrogateForm form = grpo::SurrogateForm::ClampedRatio);

/// Gradient-ascent step: parameters + lr * gradient. Throws DomainError
/// on dimension mismatch.
SoftmaxTemplatePolicy sgd_step(const SoftmaxTemplatePolicy& policy,
                               const std::vector<double>& gradient, double lr);
GaussianRolloutPolicy sgd_step(const GaussianRolloutPolicy& policy,
                               const std::vector<double>& gradient, double lr);

}  // namespace planexec::policy
