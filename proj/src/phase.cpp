#include "planexec/phase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "planexec/rng.hpp"
#include "planexec/trace.hpp"
#include "planexec/util.hpp"

namespace planexec::phase {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kThinkerSystemPrompt =
    "Plan the image before it is generated. Reply with a reasoning trace "
    "and put the final enhanced prompt inside <answer> tags.";

std::string surrogate_form_name(grpo::SurrogateForm form) {
  return form == grpo::SurrogateForm::ClampedRatio ? "clamped_ratio"
                                                   : "pessimistic_min";
}

grpo::SurrogateForm surrogate_form_from_string(const std::string& s) {
  if (s == "clamped_ratio") return grpo::SurrogateForm::ClampedRatio;
  if (s == "pessimistic_min") return grpo::SurrogateForm::PessimisticMin;
  throw ConfigError("unknown surrogate form " + s);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

json candidate_to_json(const grpo::Candidate& c) {
  json j{{"id", c.id},
         {"sequence", c.sequence},
         {"reward", c.reward},
         {"logprob_old", c.logprob_old},
         {"logprob_new", c.logprob_new}};
  j["logprob_ref"] = c.logprob_ref ? json(*c.logprob_ref) : json(nullptr);
  return j;
}

json group_to_json(const grpo::RolloutGroup& group) {
  json candidates = json::array();
  for (const auto& c : group.candidates) candidates.push_back(candidate_to_json(c));
  json j{{"prompt_id", group.prompt_id}, {"candidates", std::move(candidates)}};
  if (group.advantages) {
    j["advantages"] = *group.advantages;
    j["advantage_clipped"] = group.advantage_clipped;
  }
  return j;
}

void write_update_payload(const PhaseConfig& cfg, std::size_t iteration,
                          const grpo::RolloutGroup& group,
                          const grpo::ObjectiveReport& objective) {
  char name[32];
  std::snprintf(name, sizeof(name), "update-%04zu.json", iteration);
  json payload{{"iteration", iteration},
               {"instruction", cfg.instruction},
               {"rubric", reward::to_string(cfg.rubric)},
               {"group", group_to_json(group)},
               {"hyperparameters",
                json{{"lr", cfg.lr},
                     {"clip_range", cfg.clip_range},
                     {"beta_kl", cfg.beta_kl},
                     {"group_size", cfg.group_size}}}};
  to_json(payload["objective"], objective);
  util::write_file(cfg.update_payload_dir + "/" + name, payload.dump(2) + "\n");
}

/// Generate + judge one enhanced prompt; returns the clipped scalar reward.
double judge_candidate(const PhaseConfig& cfg, const std::string& enhanced,
                       backend::Backend& generator, backend::Backend& judge) {
  const auto [gen_response, gen_record] =
      generator.call(backend::generator_request(enhanced));
  const std::string image = gen_response.at("image").get<std::string>();
  const auto [judge_response, judge_record] = judge.call(backend::judge_request(
      reward::to_string(cfg.rubric), image, cfg.instruction, enhanced));
  reward::RewardConfig reward_cfg;
  reward_cfg.clip_bound = cfg.reward_bound;
  return reward::score_judge_response(judge_response.dump(), cfg.rubric,
                                      reward_cfg)
      .scalar;
}

struct FailureBudget {
  std::size_t budget;
  std::size_t failures = 0;

  /// Record one failed iteration; true when the run should stop.
  bool exhausted_by(const std::exception& e, std::size_t iteration,
                    std::vector<IterationRecord>& records) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.failed = true;
    rec.note = e.what();
    records.push_back(std::move(rec));
    ++failures;
    if (failures >= budget) {
      std::cerr << "phase run: failure budget of " << budget
                << " exhausted at iteration " << iteration
                << "; returning partial report\n";
      return true;
    }
    return false;
  }
};

}  // namespace

std::string to_string(Phase p) { return p == Phase::One ? "one" : "two"; }

Phase phase_from_string(const std::string& s) {
  if (s == "one" || s == "1") return Phase::One;
  if (s == "two" || s == "2") return Phase::Two;
  throw ConfigError("unknown phase " + s);
}

void PhaseConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(clip_range > 0.0) || !(clip_range < 1.0)) {
    throw ConfigError("clip_range must lie in (0,1)");
  }
  if (beta_kl < 0.0) throw ConfigError("beta_kl must be nonnegative");
  if (!(reward_bound > 0.0)) throw ConfigError("reward_bound must be positive");
  if (!(advantage_bound > 0.0)) {
    throw ConfigError("advantage_bound must be positive");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (sde_steps < 1) throw ConfigError("sde_steps must be at least 1");
  if (noise_level < 0.0) throw ConfigError("noise_level must be nonnegative");
  if (!(min_data_std > 0.0)) throw ConfigError("min_data_std must be positive");
}

json to_json(const PhaseConfig& cfg) {
  return json{{"phase", to_string(cfg.phase)},
              {"group_size", cfg.group_size},
              {"iterations", cfg.iterations},
              {"lr", cfg.lr},
              {"clip_range", cfg.clip_range},
              {"beta_kl", cfg.beta_kl},
              {"reward_bound", cfg.reward_bound},
              {"advantage_bound", cfg.advantage_bound},
              {"temperature", cfg.temperature},
              {"top_k", cfg.top_k},
              {"seed", cfg.seed},
              {"sde_steps", cfg.sde_steps},
              {"noise_level", cfg.noise_level},
              {"target_x", cfg.target_x},
              {"min_data_std", cfg.min_data_std},
              {"rubric", reward::to_string(cfg.rubric)},
              {"instruction", cfg.instruction},
              {"failure_budget", cfg.failure_budget},
              {"update_payload_dir", cfg.update_payload_dir},
              {"snapshot_path", cfg.snapshot_path},
              {"phase1_report", cfg.phase1_report},
              {"allow_unordered_phases", cfg.allow_unordered_phases},
              {"eps", cfg.eps},
              {"surrogate_form", surrogate_form_name(cfg.surrogate_form)}};
}

PhaseConfig phase_config_from_json(const json& j) {
  PhaseConfig cfg;
  try {
    if (j.contains("phase")) {
      cfg.phase = phase_from_string(j["phase"].is_number()
                                        ? std::to_string(j["phase"].get<int>())
                                        : j["phase"].get<std::string>());
    }
    cfg.group_size = j.value("group_size", cfg.group_size);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.clip_range = j.value("clip_range", cfg.clip_range);
    cfg.beta_kl = j.value("beta_kl", cfg.beta_kl);
    cfg.reward_bound = j.value("reward_bound", cfg.reward_bound);
    cfg.advantage_bound = j.value("advantage_bound", cfg.advantage_bound);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.sde_steps = j.value("sde_steps", cfg.sde_steps);
    cfg.noise_level = j.value("noise_level", cfg.noise_level);
    cfg.target_x = j.value("target_x", cfg.target_x);
    cfg.min_data_std = j.value("min_data_std", cfg.min_data_std);
    if (j.contains("rubric")) {
      cfg.rubric = reward::rubric_from_string(j["rubric"].get<std::string>());
    }
    cfg.instruction = j.value("instruction", cfg.instruction);
    cfg.failure_budget = j.value("failure_budget", cfg.failure_budget);
    cfg.update_payload_dir = j.value("update_payload_dir", cfg.update_payload_dir);
    cfg.snapshot_path = j.value("snapshot_path", cfg.snapshot_path);
    cfg.phase1_report = j.value("phase1_report", cfg.phase1_report);
    cfg.allow_unordered_phases =
        j.value("allow_unordered_phases", cfg.allow_unordered_phases);
    cfg.eps = j.value("eps", cfg.eps);
    if (j.contains("surrogate_form")) {
      cfg.surrogate_form =
          surrogate_form_from_string(j["surrogate_form"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad phase config: ") + e.what());
  }
  return cfg;
}

json to_json(const IterationRecord& r) {
  json j{{"iteration", r.iteration},
         {"mean_reward", r.mean_reward},
         {"wall_time_rollout_s", r.wall_time_rollout.count()},
         {"wall_time_update_s", r.wall_time_update.count()},
         {"failed", r.failed},
         {"note", r.note}};
  to_json(j["objective"], r.objective);
  j["policy_snapshot_ref"] =
      r.policy_snapshot_ref ? json(*r.policy_snapshot_ref) : json(nullptr);
  return j;
}

IterationRecord iteration_record_from_json(const json& j) {
  IterationRecord r;
  try {
    r.iteration = j.at("iteration").get<std::size_t>();
    r.mean_reward = j.at("mean_reward").get<double>();
    from_json(j.at("objective"), r.objective);
    r.wall_time_rollout =
        std::chrono::duration<double>(j.value("wall_time_rollout_s", 0.0));
    r.wall_time_update =
        std::chrono::duration<double>(j.value("wall_time_update_s", 0.0));
    if (j.contains("policy_snapshot_ref") && !j["policy_snapshot_ref"].is_null()) {
      r.policy_snapshot_ref = j["policy_snapshot_ref"].get<std::string>();
    }
    r.failed = j.value("failed", false);
    r.note = j.value("note", std::string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad iteration record: ") + e.what());
  }
  return r;
}

std::vector<IterationRecord> run_phase1(
    const PhaseConfig& cfg, policy::SoftmaxTemplatePolicy& thinker,
    const std::vector<policy::PromptTemplate>& templates,
    backend::Backend& generator, backend::Backend& judge) {
  cfg.validate();
  if (cfg.phase != Phase::One) {
    throw ConfigError("run_phase1 requires a phase one config");
  }
  if (templates.size() != thinker.size()) {
    throw ConfigError("template catalog size does not match the thinker policy");
  }
  // The sampling knobs are recorded with the run for real-backend parity,
  // but the toy policy samples its softmax directly. Only warn when the
  // caller actually moved them off the defaults.
  const PhaseConfig defaults;
  if (cfg.temperature != defaults.temperature || cfg.top_k != defaults.top_k) {
    std::cerr << "phase1: temperature " << cfg.temperature << " and top_k "
              << cfg.top_k
              << " recorded for the run; the toy template policy ignores them\n";
  }

  const policy::SoftmaxTemplatePolicy reference = thinker;
  Rng rng(cfg.seed);
  std::vector<IterationRecord> records;
  records.reserve(cfg.iterations);
  FailureBudget budget{cfg.failure_budget};

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = Clock::now();
    auto group = policy::sample_group(thinker, cfg.group_size, rng);
    group.prompt_id = "phase1-" + std::to_string(iter);
    for (auto& c : group.candidates) {
      c.logprob_ref =
          reference.logprob(c.sequence.at("template").get<std::size_t>());
    }

    try {
      for (auto& c : group.candidates) {
        const auto idx = c.sequence.at("template").get<std::size_t>();
        c.reward = judge_candidate(cfg, templates.at(idx).enhanced_prompt,
                                   generator, judge);
      }
    } catch (const TransportError& e) {
      if (budget.exhausted_by(e, iter, records)) break;
      continue;
    }
    const auto t1 = Clock::now();

    grpo::compute_advantages(group, cfg.eps, cfg.advantage_bound);
    IterationRecord rec;
    rec.iteration = iter;
    // Evaluated at the sampling parameters, where every ratio is exactly 1.
    rec.objective = grpo::surrogate_objective(group, cfg.clip_range, cfg.beta_kl,
                                              cfg.surrogate_form);
    const auto grad = policy::grad_surrogate(thinker, group, cfg.clip_range,
                                             cfg.beta_kl, cfg.surrogate_form);
    thinker = policy::sgd_step(thinker, grad, cfg.lr);

    if (!cfg.update_payload_dir.empty()) {
      write_update_payload(cfg, iter, group, rec.objective);
    }
    const auto t2 = Clock::now();

    std::vector<double> rewards;
    rewards.reserve(group.candidates.size());
    for (const auto& c : group.candidates) rewards.push_back(c.reward);
    rec.mean_reward = mean_of(rewards);
    rec.wall_time_rollout = t1 - t0;
    rec.wall_time_update = t2 - t1;
    records.push_back(std::move(rec));
  }

  if (!cfg.snapshot_path.empty() && !records.empty()) {
    util::write_file(cfg.snapshot_path, thinker.to_json().dump(2) + "\n");
    records.back().policy_snapshot_ref = cfg.snapshot_path;
  }
  return records;
}

std::vector<IterationRecord> run_phase1(const PhaseConfig& cfg,
                                        backend::Backend& thinker,
                                        backend::Backend& generator,
                                        backend::Backend& judge) {
  cfg.validate();
  if (cfg.phase != Phase::One) {
    throw ConfigError("run_phase1 requires a phase one config");
  }
  if (cfg.update_payload_dir.empty()) {
    throw ConfigError(
        "backend-thinker runs emit update payloads; set update_payload_dir");
  }
  const auto task_kind = cfg.rubric == reward::Rubric::Edit
                             ? trace::TaskKind::ImageEdit
                             : trace::TaskKind::TextToImage;

  std::vector<IterationRecord> records;
  records.reserve(cfg.iterations);
  FailureBudget budget{cfg.failure_budget};

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = Clock::now();
    grpo::RolloutGroup group;
    group.prompt_id = "phase1-" + std::to_string(iter);

    try {
      for (std::size_t i = 0; i < cfg.group_size; ++i) {
        const auto [response, record] = thinker.call(
            backend::thinker_request(kThinkerSystemPrompt, cfg.instruction));
        const std::string raw = response.at("trace").get<std::string>();
        const auto outcome = trace::parse_trace(raw, task_kind);
        const std::string enhanced = outcome.ok() ? outcome.trace->answer : raw;

        grpo::Candidate c;
        c.id = i;
        c.sequence = json{{"enhanced_prompt", enhanced}};
        // Text backends report no log-probabilities; the payload carries
        // rewards and advantages, and the external trainer owns the rest.
        if (response.contains("logprob") && response["logprob"].is_number()) {
          c.logprob_old = c.logprob_new = response["logprob"].get<double>();
          c.logprob_ref = c.logprob_old;
        }
        c.reward = judge_candidate(cfg, enhanced, generator, judge);
        group.candidates.push_back(std::move(c));
      }
    } catch (const TransportError& e) {
      if (budget.exhausted_by(e, iter, records)) break;
      continue;
    }
    const auto t1 = Clock::now();

    grpo::compute_advantages(group, cfg.eps, cfg.advantage_bound);
    IterationRecord rec;
    rec.iteration = iter;
    rec.objective = grpo::surrogate_objective(group, cfg.clip_range, cfg.beta_kl,
                                              cfg.surrogate_form);
    write_update_payload(cfg, iter, group, rec.objective);
    const auto t2 = Clock::now();

    std::vector<double> rewards;
    rewards.reserve(group.candidates.size());
    for (const auto& c : group.candidates) rewards.push_back(c.reward);
    rec.mean_reward = mean_of(rewards);
    rec.wall_time_rollout = t1 - t0;
    rec.wall_time_update = t2 - t1;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<IterationRecord> run_phase2(const PhaseConfig& cfg,
                                        flow::LinearGaussianFlow& generator_flow,
                                        const TerminalReward& judge) {
  cfg.validate();
  if (cfg.phase != Phase::Two) {
    throw ConfigError("run_phase2 requires a phase two config");
  }
  if (cfg.noise_level <= 0.0) {
    throw ConfigError("deterministic sampler admits no distinct rollouts");
  }
  if (!cfg.allow_unordered_phases) {
    if (cfg.phase1_report.empty()) {
      throw StateError(
          "phase two requires a phase one report; pass phase1_report or set "
          "allow_unordered_phases");
    }
    if (!std::filesystem::exists(cfg.phase1_report)) {
      throw StateError("phase one report not readable: " + cfg.phase1_report);
    }
  }

  const TerminalReward score_terminal =
      judge ? judge : [target = cfg.target_x](double x) {
        return -(x - target) * (x - target);
      };
  const flow::LinearGaussianFlow reference = generator_flow;
  flow::SamplerConfig sampler{cfg.sde_steps, cfg.noise_level, cfg.seed};
  Rng rng(cfg.seed);

  std::vector<IterationRecord> records;
  records.reserve(cfg.iterations);

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    try {
      const auto t0 = Clock::now();
      std::vector<flow::Trajectory> trajectories;
      trajectories.reserve(cfg.group_size);
      grpo::RolloutGroup group;
      group.prompt_id = "phase2-" + std::to_string(iter);

      for (std::size_t i = 0; i < cfg.group_size; ++i) {
        auto traj = flow::sde_rollout(generator_flow, sampler, rng);
        const double terminal = traj.states.back().second;
        grpo::Candidate c;
        c.id = i;
        c.sequence = json{{"terminal", terminal}};
        c.reward = reward::clip_reward(score_terminal(terminal),
                                       cfg.reward_bound)
                       .value;
        c.logprob_old = c.logprob_new = traj.total_logprob;
        c.logprob_ref =
            flow::trajectory_logprob(reference, traj.states, sampler);
        group.candidates.push_back(std::move(c));
        trajectories.push_back(std::move(traj));
      }
      const auto t1 = Clock::now();

      grpo::compute_advantages(group, cfg.eps, cfg.advantage_bound);
      // The reward touches only the terminal state, and the sampler family
      // preserves the flow marginals, so the terminal states are draws from
      // the closed-form Gaussian N(data_mean, data_std^2). The update uses
      // that Gaussian's score preconditioned by its Fisher information
      // (diag(1/s^2, 2) in (data_mean, log data_std) space), which makes
      // the step size scale-free in the spread: the per-candidate vectors
      // below are {x - mean, (z^2 - 1) / 2}. The full-trajectory score is
      // an unbiased alternative but sums sixty-plus noisy transition terms
      // per sample; its variance swamps the pull toward the target at any
      // learning rate that still moves early iterations.
      std::vector<std::vector<double>> grads;
      grads.reserve(trajectories.size());
      for (const auto& traj : trajectories) {
        const double x = traj.states.back().second;
        const double z =
            (x - generator_flow.data_mean) / generator_flow.data_std;
        grads.push_back({x - generator_flow.data_mean, 0.5 * (z * z - 1.0)});
      }
      const auto ascent = policy::grad_surrogate(
          group, grads, cfg.clip_range, cfg.beta_kl, cfg.surrogate_form);

      generator_flow.data_mean += cfg.lr * ascent[0];
      const double log_std = std::max(
          std::log(generator_flow.data_std) + cfg.lr * ascent[1],
          std::log(cfg.min_data_std));
      generator_flow.data_std = std::exp(log_std);

      for (std::size_t i = 0; i < group.candidates.size(); ++i) {
        group.candidates[i].logprob_new = flow::trajectory_logprob(
            generator_flow, trajectories[i].states, sampler);
      }

      IterationRecord rec;
      rec.iteration = iter;
      // Post-proposal report: ratios compare the proposed parameters
      // against the ones that produced the rollouts.
      rec.objective = grpo::surrogate_objective(
          group, cfg.clip_range, cfg.beta_kl, cfg.surrogate_form);
      if (!cfg.update_payload_dir.empty()) {
        write_update_payload(cfg, iter, group, rec.objective);
      }
      const auto t2 = Clock::now();

      std::vector<double> rewards;
      rewards.reserve(group.candidates.size());
      for (const auto& c : group.candidates) rewards.push_back(c.reward);
      rec.mean_reward = mean_of(rewards);
      rec.wall_time_rollout = t1 - t0;
      rec.wall_time_update = t2 - t1;
      records.push_back(std::move(rec));
    } catch (const SingularityError& e) {
      std::ostringstream msg;
      msg << e.what() << " (phase two iteration " << iter << ", data_mean "
          << generator_flow.data_mean << ", data_std "
          << generator_flow.data_std << ")";
      throw SingularityError(msg.str());
    }
  }

  if (!cfg.snapshot_path.empty() && !records.empty()) {
    const json snapshot{{"kind", "linear_gaussian_flow"},
                        {"data_mean", generator_flow.data_mean},
                        {"data_std", generator_flow.data_std}};
    util::write_file(cfg.snapshot_path, snapshot.dump(2) + "\n");
    records.back().policy_snapshot_ref = cfg.snapshot_path;
  }
  return records;
}

json to_json(const SftBatchReport& r) {
  return json{{"loss_gen", r.loss_gen},
              {"loss_und", r.loss_und},
              {"lambda", r.lambda},
              {"loss_total", r.loss_total}};
}

SftBatchReport sft_combine(double loss_gen, double loss_und, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!std::isfinite(loss_gen) || !std::isfinite(loss_und) ||
      !std::isfinite(lambda)) {
    throw NumericError("sft_combine requires finite losses");
  }
  SftBatchReport report;
  report.loss_gen = loss_gen;
  report.loss_und = loss_und;
  report.lambda = lambda;
  report.loss_total = loss_gen + lambda * loss_und;
  return report;
}

std::vector<TaggedBatch> mix_views(const BatchStream& understanding,
                                   const BatchStream& generation, double ratio,
                                   std::uint64_t seed, std::size_t n_batches) {
  if (!(ratio > 0.0) || !(ratio < 1.0)) {
    throw DomainError("mix ratio must lie strictly between 0 and 1");
  }
  Rng rng(seed);
  std::vector<TaggedBatch> out;
  out.reserve(n_batches);
  bool understanding_dry = false;
  bool generation_dry = false;
  bool warned_und = false;
  bool warned_gen = false;

  for (std::size_t i = 0; i < n_batches; ++i) {
    bool want_understanding = rng.bernoulli(ratio);
    if (want_understanding && understanding_dry) want_understanding = false;
    if (!want_understanding && generation_dry) want_understanding = true;

    auto batch = want_understanding ? understanding() : generation();
    if (!batch) {
      if (want_understanding) {
        understanding_dry = true;
        if (!warned_und) {
          std::cerr << "mix_views: understanding stream exhausted after " << i
                    << " batches; drawing the remainder from generation\n";
          warned_und = true;
        }
        batch = generation();
        want_understanding = false;
      } else {
        generation_dry = true;
        if (!warned_gen) {
          std::cerr << "mix_views: generation stream exhausted after " << i
                    << " batches; drawing the remainder from understanding\n";
          warned_gen = true;
        }
        batch = understanding();
        want_understanding = true;
      }
    }
    if (!batch) {
      std::cerr << "mix_views: both streams exhausted after " << i << " of "
                << n_batches << " batches; ending the mix early\n";
      break;
    }
    out.push_back(
        {want_understanding ? "understanding" : "generation", std::move(*batch)});
  }
  return out;
}

void emit_metrics(const std::vector<IterationRecord>& records,
                  const std::string& out_path) {
  if (records.empty()) {
    throw DomainError("no iteration records to emit");
  }
  util::LineWriter metrics(out_path);
  for (const auto& r : records) metrics.line(to_json(r).dump());

  util::LineWriter reward_series(out_path + ".reward.tsv");
  util::LineWriter timing_series(out_path + ".timing.tsv");
  reward_series.line("# iteration\tmean_reward");
  timing_series.line("# iteration\trollout_seconds");
  char row[64];
  for (const auto& r : records) {
    std::snprintf(row, sizeof(row), "%zu\t%.9g", r.iteration, r.mean_reward);
    reward_series.line(row);
    std::snprintf(row, sizeof(row), "%zu\t%.9g", r.iteration,
                  r.wall_time_rollout.count());
    timing_series.line(row);
  }
}

}  // namespace planexec::phase
