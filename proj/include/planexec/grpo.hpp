#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/errors.hpp"

namespace planexec::grpo {

/// Group-relative advantage computation.
///
/// Advantages are standardized within a rollout group: subtract the group
/// mean reward and divide by the population standard deviation plus eps.
/// A degenerate group (all rewards equal) therefore yields all-zero
/// advantages instead of a division blowup.
struct AdvantageResult {
  std::vector<double> advantages;
  std::size_t clipped = 0;  // how many advantages hit the clip bound
};

/// Standardize rewards into advantages.
///
/// Throws GroupTooSmallError when fewer than two rewards are given and
/// NumericError when any reward is non-finite. Each advantage is clamped
/// to [-clip_bound, clip_bound] after standardization.
AdvantageResult group_advantages(std::span<const double> rewards,
                                 double eps = 1e-8,
                                 double clip_bound = 10.0);

struct RatioResult {
  double value = 1.0;
  bool clipped = false;
};

/// Importance ratio exp(logprob_new - logprob_old) clamped to
/// [1 - clip_range, 1 + clip_range].
///
/// The exponent is pre-clamped to +-20 so a wildly off-policy sample
/// cannot overflow to inf before the clamp is applied. `clipped` reports
/// whether clamping changed the value. clip_range must lie in (0, 1).
RatioResult clipped_ratio(double logprob_new, double logprob_old,
                          double clip_range = 0.5);

/// Per-sample k3 KL estimator against the reference policy:
///   delta = logprob_ref - logprob_new
///   k3    = exp(delta) - delta - 1
/// Always nonnegative and zero only at delta = 0. delta is clamped to
/// +-50 so sequence-level sums stay finite.
double kl_estimate(double logprob_new, double logprob_ref);

/// One sampled completion inside a rollout group.
///
/// `sequence` is an opaque action record (template index, action vector,
/// trajectory reference) that the owning policy knows how to read; this
/// module never inspects it. Log-probabilities are totals over the
/// sampled sequence; sums of per-step log densities of continuous
/// rollouts may be positive, which is permitted.
struct Candidate {
  std::size_t id = 0;
  nlohmann::json sequence;
  double reward = 0.0;
  double logprob_old = 0.0;            // behavior policy that produced the sample
  double logprob_new = 0.0;            // current policy
  std::optional<double> logprob_ref;   // frozen reference for the KL penalty
};

struct RolloutGroup {
  std::string prompt_id;
  std::vector<Candidate> candidates;
  std::optional<std::vector<double>> advantages;  // filled by compute_advantages
  std::size_t advantage_clipped = 0;
};

/// Standardize the group's rewards in place. Wrapper over
/// group_advantages that stores the result on the group.
void compute_advantages(RolloutGroup& group, double eps = 1e-8,
                        double clip_bound = 10.0);

/// Shape of the policy term combined with the advantage.
///
/// ClampedRatio uses clip(ratio) * A for every sample, the literal form
/// of the group objective. PessimisticMin uses
/// min(ratio * A, clip(ratio) * A), which never credits a clipped ratio
/// when that would make the objective look better.
enum class SurrogateForm {
  ClampedRatio,
  PessimisticMin,
};

struct ObjectiveReport {
  double surrogate = 0.0;      // mean policy term over the group
  double kl_term = 0.0;        // mean k3 estimate over candidates with a reference
  double total = 0.0;          // surrogate - beta_kl * kl_term
  double ratio_clip_fraction = 0.0;
  double advantage_clip_fraction = 0.0;
};

void to_json(nlohmann::json& j, const ObjectiveReport& r);
void from_json(const nlohmann::json& j, ObjectiveReport& r);

/// Group surrogate objective (to be maximized).
///
/// surrogate = (1/G) sum_i policy_term_i, kl_term = mean k3 over the
/// candidates carrying logprob_ref (0 when none do), total =
/// surrogate - beta_kl * kl_term. Requires compute_advantages to have
/// run on the group first; throws StateError otherwise.
ObjectiveReport surrogate_objective(const RolloutGroup& group,
                                    double clip_range = 0.5,
                                    double beta_kl = 0.01,
                                    SurrogateForm form = SurrogateForm::ClampedRatio);

}  // namespace planexec::grpo
