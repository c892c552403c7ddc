#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/backends.hpp"
#include "planexec/flow.hpp"
#include "planexec/grpo.hpp"
#include "planexec/policies.hpp"
#include "planexec/reward.hpp"

namespace planexec::phase {

enum class Phase { One, Two };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

/// Knobs for one training run. The sampler and environment fields only
/// matter in phase two; temperature and top_k are recorded for real
/// text backends and ignored (with a log note) by the toy policies.
struct PhaseConfig {
  Phase phase = Phase::One;
  std::size_t group_size = 24;
  std::size_t iterations = 100;
  double lr = 0.05;
  double clip_range = 0.5;
  double beta_kl = 0.01;
  double reward_bound = 10.0;
  double advantage_bound = 10.0;
  double temperature = 0.99;
  std::size_t top_k = 100;
  std::uint64_t seed = 0;

  // Phase-two sampler and desk environment.
  std::size_t sde_steps = 64;
  double noise_level = 0.3;
  double target_x = 1.5;
  /// Projection floor on the trainable data_std. The quadratic-reward
  /// optimum drives the spread toward zero, where step sizes overtake
  /// the marginal variance and the score terms blow up; flooring the
  /// spread after each proposal keeps the sampler solvent.
  double min_data_std = 0.2;

  // Orchestration.
  reward::Rubric rubric = reward::Rubric::T2I;
  std::string instruction = "a studio portrait of a seated subject";
  std::size_t failure_budget = 5;  // failed iterations allowed before the run stops
  std::string update_payload_dir;  // real-backend mode writes per-iteration payloads here
  std::string snapshot_path;       // final policy/flow snapshot, written when set
  std::string phase1_report;       // metrics file proving phase one ran
  bool allow_unordered_phases = false;
  double eps = 1e-8;
  grpo::SurrogateForm surrogate_form = grpo::SurrogateForm::ClampedRatio;

  /// Bounds positive, group_size >= 2, iterations >= 1, lr > 0,
  /// clip_range in (0,1), temperature > 0, eps > 0. Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const PhaseConfig& cfg);
PhaseConfig phase_config_from_json(const nlohmann::json& j);

struct IterationRecord {
  std::size_t iteration = 0;
  double mean_reward = 0.0;
  grpo::ObjectiveReport objective;
  std::chrono::duration<double> wall_time_rollout{0};
  std::chrono::duration<double> wall_time_update{0};
  std::optional<std::string> policy_snapshot_ref;
  bool failed = false;
  std::string note;  // diagnostics for failed iterations
};

nlohmann::json to_json(const IterationRecord& r);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

/// Phase one with the toy template policy: per iteration, sample
/// group_size templates from the thinker, render each template's
/// enhanced prompt through the (frozen) generator backend, score the
/// images with the judge backend under cfg.rubric, standardize rewards
/// into advantages, evaluate the surrogate at the sampling parameters,
/// and apply one gradient-ascent step to the thinker. Backend failures
/// abort the iteration (recorded with failed=true) until
/// cfg.failure_budget such iterations have accumulated, then the
/// partial report is returned. Deterministic given cfg.seed apart from
/// wall times.
std::vector<IterationRecord> run_phase1(
    const PhaseConfig& cfg, policy::SoftmaxTemplatePolicy& thinker,
    const std::vector<policy::PromptTemplate>& templates,
    backend::Backend& generator, backend::Backend& judge);

/// Phase one against a real (or scripted) thinker backend: candidates
/// come from group_size thinker calls, no parameters live in-process,
/// and each iteration's group, advantages, and objective breakdown are
/// written to cfg.update_payload_dir as the integration contract for an
/// external trainer. Requires update_payload_dir.
std::vector<IterationRecord> run_phase1(const PhaseConfig& cfg,
                                        backend::Backend& thinker,
                                        backend::Backend& generator,
                                        backend::Backend& judge);

/// Terminal-state reward for phase two; the default desk judge is
/// r(x) = -(x - target_x)^2.
using TerminalReward = std::function<double(double)>;

/// Phase two: per iteration, draw group_size stochastic sampler
/// trajectories from the current flow, reward terminal states through
/// the judge, standardize, take one closed-form score-function ascent
/// step on (data_mean, log data_std) with the min_data_std floor, then
/// recompute every trajectory's log-density under the proposed
/// parameters and report the post-proposal objective. The update uses
/// the score of the closed-form terminal Gaussian preconditioned by its
/// Fisher information, so steps are scale-free in the spread; ratios
/// and the KL report still come from full trajectory log-densities.
/// Refuses to run with noise_level = 0 (no distinct rollouts) and,
/// unless allow_unordered_phases, without a readable phase-one report.
std::vector<IterationRecord> run_phase2(const PhaseConfig& cfg,
                                        flow::LinearGaussianFlow& generator_flow,
                                        const TerminalReward& judge = {});

struct SftBatchReport {
  double loss_gen = 0.0;
  double loss_und = 0.0;
  double lambda = 0.5;
  double loss_total = 0.0;  // loss_gen + lambda * loss_und, exactly
};

nlohmann::json to_json(const SftBatchReport& r);

/// Weighted two-view loss bookkeeping. lambda must be positive; throws
/// NumericError when any input is non-finite.
SftBatchReport sft_combine(double loss_gen, double loss_und, double lambda = 0.5);

/// Pull-based batch source: nullopt once exhausted.
using BatchStream = std::function<std::optional<nlohmann::json>()>;

struct TaggedBatch {
  std::string view;  // "understanding" or "generation"
  nlohmann::json batch;
};

/// Draw n_batches batches, choosing the understanding stream with
/// probability `ratio` each time (seeded). When one stream runs dry the
/// remainder comes from the other with a logged warning; when both run
/// dry the mix ends early with a warning, never silently. ratio must
/// lie strictly between 0 and 1.
std::vector<TaggedBatch> mix_views(const BatchStream& understanding,
                                   const BatchStream& generation, double ratio,
                                   std::uint64_t seed, std::size_t n_batches);

/// Write records as line-delimited JSON to out_path plus two
/// tab-separated series next to it, <out_path>.reward.tsv with
/// (iteration, mean_reward) and <out_path>.timing.tsv with
/// (iteration, rollout_seconds). Throws DomainError on empty records
/// and IoError (after a partial-file marker) on write failure.
void emit_metrics(const std::vector<IterationRecord>& records,
                  const std::string& out_path);

}  // namespace planexec::phase
