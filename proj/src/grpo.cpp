#include "planexec/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace planexec::grpo {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " is not finite");
  }
}

double raw_ratio(double logprob_new, double logprob_old) {
  const double exponent = std::clamp(logprob_new - logprob_old, -20.0, 20.0);
  return std::exp(exponent);
}

}  // namespace

AdvantageResult group_advantages(std::span<const double> rewards, double eps,
                                 double clip_bound) {
  if (rewards.size() < 2) {
    throw GroupTooSmallError("advantage standardization needs a group of at least 2, got " +
                             std::to_string(rewards.size()));
  }
  if (!(eps > 0.0)) {
    throw DomainError("eps must be positive");
  }
  if (!(clip_bound > 0.0)) {
    throw DomainError("advantage clip bound must be positive");
  }
  for (double r : rewards) require_finite(r, "reward");

  AdvantageResult out;

  // A constant group standardizes to zeros identically. Short-circuit
  // instead of running the formula: the floating-point mean of n equal
  // values is not exact for general doubles, and the shared rounding
  // residual would otherwise standardize to +-1 once eps is small.
  const auto [mn, mx] = std::minmax_element(rewards.begin(), rewards.end());
  if (*mn == *mx) {
    out.advantages.assign(rewards.size(), 0.0);
    return out;
  }

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;

  double var = 0.0;
  for (double r : rewards) {
    const double d = r - mean;
    var += d * d;
  }
  var /= n;  // population variance: the group is the whole population
  const double denom = std::sqrt(var) + eps;

  out.advantages.reserve(rewards.size());
  for (double r : rewards) {
    const double a = (r - mean) / denom;
    const double clamped = std::clamp(a, -clip_bound, clip_bound);
    if (clamped != a) ++out.clipped;
    out.advantages.push_back(clamped);
  }
  return out;
}

RatioResult clipped_ratio(double logprob_new, double logprob_old,
                          double clip_range) {
  require_finite(logprob_new, "logprob_new");
  require_finite(logprob_old, "logprob_old");
  if (!(clip_range > 0.0 && clip_range < 1.0)) {
    throw DomainError("clip_range must lie in (0, 1)");
  }
  const double raw = raw_ratio(logprob_new, logprob_old);
  RatioResult out;
  out.value = std::clamp(raw, 1.0 - clip_range, 1.0 + clip_range);
  out.clipped = out.value != raw;
  return out;
}

double kl_estimate(double logprob_new, double logprob_ref) {
  require_finite(logprob_new, "logprob_new");
  require_finite(logprob_ref, "logprob_ref");
  const double delta = std::clamp(logprob_ref - logprob_new, -50.0, 50.0);
  return std::exp(delta) - delta - 1.0;
}

void compute_advantages(RolloutGroup& group, double eps, double clip_bound) {
  std::vector<double> rewards;
  rewards.reserve(group.candidates.size());
  for (const auto& c : group.candidates) rewards.push_back(c.reward);
  auto result = group_advantages(rewards, eps, clip_bound);
  group.advantages = std::move(result.advantages);
  group.advantage_clipped = result.clipped;
}

void to_json(nlohmann::json& j, const ObjectiveReport& r) {
  j = nlohmann::json{{"surrogate", r.surrogate},
                     {"kl_term", r.kl_term},
                     {"total", r.total},
                     {"ratio_clip_fraction", r.ratio_clip_fraction},
                     {"advantage_clip_fraction", r.advantage_clip_fraction}};
}

void from_json(const nlohmann::json& j, ObjectiveReport& r) {
  j.at("surrogate").get_to(r.surrogate);
  j.at("kl_term").get_to(r.kl_term);
  j.at("total").get_to(r.total);
  j.at("ratio_clip_fraction").get_to(r.ratio_clip_fraction);
  j.at("advantage_clip_fraction").get_to(r.advantage_clip_fraction);
}

ObjectiveReport surrogate_objective(const RolloutGroup& group,
                                    double clip_range, double beta_kl,
                                    SurrogateForm form) {
  if (group.candidates.empty()) {
    throw GroupTooSmallError("surrogate objective needs a non-empty group");
  }
  if (!group.advantages ||
      group.advantages->size() != group.candidates.size()) {
    throw StateError("advantages not computed for this group; call compute_advantages first");
  }
  if (beta_kl < 0.0) {
    throw DomainError("beta_kl must be nonnegative");
  }

  const double n = static_cast<double>(group.candidates.size());
  ObjectiveReport report;
  std::size_t ratio_clips = 0;
  std::size_t ref_count = 0;

  for (std::size_t i = 0; i < group.candidates.size(); ++i) {
    const auto& c = group.candidates[i];
    const double adv = (*group.advantages)[i];
    const auto ratio = clipped_ratio(c.logprob_new, c.logprob_old, clip_range);
    if (ratio.clipped) ++ratio_clips;

    double policy_term = ratio.value * adv;
    if (form == SurrogateForm::PessimisticMin) {
      policy_term = std::min(raw_ratio(c.logprob_new, c.logprob_old) * adv,
                             policy_term);
    }
    report.surrogate += policy_term;
    if (c.logprob_ref) {
      report.kl_term += kl_estimate(c.logprob_new, *c.logprob_ref);
      ++ref_count;
    }
  }

  report.surrogate /= n;
  if (ref_count > 0) report.kl_term /= static_cast<double>(ref_count);
  report.total = report.surrogate - beta_kl * report.kl_term;
  report.ratio_clip_fraction = static_cast<double>(ratio_clips) / n;
  report.advantage_clip_fraction =
      static_cast<double>(group.advantage_clipped) / n;
  return report;
}

}  // namespace planexec::grpo
