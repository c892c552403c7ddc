// Acceptance harness: one end-to-end check per shipped guarantee, each
// reported as a single [PASS]/[FAIL] line on stdout. Tolerances and time
// budgets are pinned inline next to the check they guard; the process
// exits nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/backends.hpp"
#include "planexec/corpus.hpp"
#include "planexec/flow.hpp"
#include "planexec/grpo.hpp"
#include "planexec/phase.hpp"
#include "planexec/policies.hpp"
#include "planexec/reward.hpp"
#include "planexec/rng.hpp"
#include "planexec/trace.hpp"

#include "support/tmpdir.hpp"
#include "support/trace_gen.hpp"

namespace {

using namespace planexec;
using Clock = std::chrono::steady_clock;

int failures = 0;

// budget_s <= 0 means the check has no runtime bound.
void run(int number, const char* name, double budget_s,
         const std::function<bool()>& body) {
  const auto start = Clock::now();
  bool pass = false;
  try {
    pass = body();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "criterion %d threw: %s\n", number, e.what());
    pass = false;
  }
  const double elapsed =
      std::chrono::duration<double>(Clock::now() - start).count();
  if (budget_s > 0.0 && elapsed > budget_s) {
    std::fprintf(stderr, "criterion %d overran its %.0fs budget: %.1fs\n",
                 number, budget_s, elapsed);
    pass = false;
  }
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", number, name);
  std::fflush(stdout);
  if (!pass) ++failures;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double popvar_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double popstd_of(const std::vector<double>& v) { return std::sqrt(popvar_of(v)); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

backend::Backend builtin_backend(backend::Role role, const std::string& text) {
  auto spec = backend::spec_from_string(role, text);
  spec.backoff_base = std::chrono::milliseconds(0);
  return backend::Backend(spec);
}

backend::BackendSpec fixture_annotator_spec() {
  backend::BackendSpec spec;
  spec.role = backend::Role::Annotator;
  spec.kind = backend::Kind::Mock;
  spec.mock_script = std::string(FIXTURE_DIR) + "/annotator12.json";
  spec.max_retries = 0;
  spec.backoff_base = std::chrono::milliseconds(0);
  return spec;
}

// --- criterion 1 -----------------------------------------------------------

bool advantages_standardize() {
  Rng rng(101);
  // The standardizer's eps exists to keep degenerate groups finite, not to
  // regularize healthy ones; it shrinks the normalized spread by
  // sigma / (sigma + eps). Holding unit spread to 1e-9 therefore needs an
  // eps far below that tolerance. Zero is rejected by the API, so use a
  // positive value that is negligible against any representable spread.
  const double eps = 1e-300;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t g = 2 + static_cast<std::size_t>(rng.below(63));
    const double scale = std::pow(10.0, rng.uniform(-2.0, 2.0));
    std::vector<double> rewards(g);
    const bool constant_group = trial % 10 == 0;
    if (constant_group) {
      const double v = rng.uniform(-5.0, 5.0) * scale;
      std::fill(rewards.begin(), rewards.end(), v);
    } else {
      const double mu = rng.uniform(-10.0, 10.0) * scale;
      const double sigma = rng.uniform(0.5, 10.0) * scale;
      for (auto& r : rewards) r = mu + sigma * rng.normal();
    }

    const auto res = grpo::group_advantages(rewards, eps, 10.0);
    if (res.advantages.size() != g) return false;
    for (double a : res.advantages) {
      if (!std::isfinite(a)) return false;
    }
    if (std::abs(mean_of(res.advantages)) > 1e-12) return false;
    if (popstd_of(rewards) > 1e-6 &&
        std::abs(popstd_of(res.advantages) - 1.0) > 1e-9) {
      return false;
    }
    if (constant_group) {
      for (double a : res.advantages) {
        if (a != 0.0) return false;
      }
    }

    // Positive affine maps of the rewards must leave the advantages alone.
    const double a_mul = std::pow(10.0, rng.uniform(-1.0, 1.0));
    const double b_add = rng.uniform(-10.0, 10.0) * a_mul * scale;
    std::vector<double> affine(g);
    for (std::size_t i = 0; i < g; ++i) affine[i] = a_mul * rewards[i] + b_add;
    const auto res2 = grpo::group_advantages(affine, eps, 10.0);
    for (std::size_t i = 0; i < g; ++i) {
      if (std::abs(res2.advantages[i] - res.advantages[i]) > 1e-9) return false;
    }
  }
  return true;
}

// --- criterion 2 -----------------------------------------------------------

bool on_policy_objective_identity() {
  Rng rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t g = 2 + static_cast<std::size_t>(rng.below(63));
    grpo::RolloutGroup group;
    group.prompt_id = "prompt-" + std::to_string(trial);
    for (std::size_t i = 0; i < g; ++i) {
      grpo::Candidate c;
      c.id = i;
      c.reward = rng.uniform(-5.0, 5.0);
      const double lp = -rng.uniform(0.0, 30.0);
      c.logprob_old = lp;
      c.logprob_new = lp;
      c.logprob_ref = lp;
      group.candidates.push_back(std::move(c));
    }
    grpo::compute_advantages(group);

    const double clip = rng.uniform(0.05, 0.95);
    const double beta = rng.uniform(0.0, 0.2);
    const auto form = rng.bernoulli(0.5) ? grpo::SurrogateForm::ClampedRatio
                                         : grpo::SurrogateForm::PessimisticMin;
    const auto rep = grpo::surrogate_objective(group, clip, beta, form);
    if (std::abs(rep.surrogate - mean_of(*group.advantages)) > 1e-12) return false;
    if (rep.kl_term != 0.0) return false;
    if (rep.total != rep.surrogate) return false;
  }
  return true;
}

// --- criterion 3 -----------------------------------------------------------

struct FdOutcome {
  bool valid = false;
  bool pass = false;
};

// Central differences cannot straddle the ratio clamp kink, and a nearly
// flat objective cannot resolve a relative error; both cases invalidate the
// instance instead of passing or failing it.
bool instance_has_kink(const grpo::RolloutGroup& group, double clip) {
  for (const auto& c : group.candidates) {
    const double e = c.logprob_new - c.logprob_old;
    if (std::abs(e - std::log1p(clip)) < 1e-3) return true;
    if (std::abs(e - std::log1p(-clip)) < 1e-3) return true;
  }
  return false;
}

FdOutcome fd_check(const std::vector<double>& grad,
                   const std::vector<double>& fd) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (grad[i] - fd[i]) * (grad[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  if (std::sqrt(den) < 1e-3) return {false, false};
  return {true, std::sqrt(num) <= 1e-6 * std::sqrt(den)};
}

FdOutcome softmax_gradient_instance(Rng& rng) {
  const std::size_t k = 2 + static_cast<std::size_t>(rng.below(5));
  std::vector<double> logits(k);
  for (auto& l : logits) l = rng.uniform(-1.0, 1.0);
  policy::SoftmaxTemplatePolicy sampler(logits);

  const std::size_t g = 4 + static_cast<std::size_t>(rng.below(13));
  auto group = policy::sample_group(sampler, g, rng);
  for (auto& c : group.candidates) c.reward = rng.uniform(-2.0, 2.0);
  grpo::compute_advantages(group);

  std::vector<double> eval = logits;
  for (auto& l : eval) l += 0.1 * rng.normal();
  const policy::SoftmaxTemplatePolicy pol(eval);
  policy::refresh_logprob_new(pol, group);

  const double clip = rng.uniform(0.2, 0.5);
  const double beta = rng.uniform(0.0, 0.1);
  const auto form = rng.bernoulli(0.5) ? grpo::SurrogateForm::ClampedRatio
                                       : grpo::SurrogateForm::PessimisticMin;
  if (instance_has_kink(group, clip)) return {false, false};

  const auto grad = policy::grad_surrogate(pol, group, clip, beta, form);
  const double h = 1e-5;
  std::vector<double> fd(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto up = eval;
    auto dn = eval;
    up[i] += h;
    dn[i] -= h;
    auto probe = [&](const std::vector<double>& params) {
      auto shifted = group;
      policy::refresh_logprob_new(policy::SoftmaxTemplatePolicy(params), shifted);
      return grpo::surrogate_objective(shifted, clip, beta, form).total;
    };
    fd[i] = (probe(up) - probe(dn)) / (2.0 * h);
  }
  return fd_check(grad, fd);
}

FdOutcome gaussian_gradient_instance(Rng& rng) {
  const std::size_t d = 1 + static_cast<std::size_t>(rng.below(3));
  std::vector<double> mean(d);
  std::vector<double> log_std(d);
  for (auto& m : mean) m = rng.uniform(-1.0, 1.0);
  for (auto& s : log_std) s = rng.uniform(-0.5, 0.3);
  policy::GaussianRolloutPolicy sampler(mean, log_std);

  const std::size_t g = 4 + static_cast<std::size_t>(rng.below(13));
  auto group = policy::sample_group(sampler, g, rng);
  for (auto& c : group.candidates) c.reward = rng.uniform(-2.0, 2.0);
  grpo::compute_advantages(group);

  auto eval_mean = mean;
  auto eval_log_std = log_std;
  for (auto& m : eval_mean) m += 0.05 * rng.normal();
  for (auto& s : eval_log_std) s += 0.05 * rng.normal();
  const policy::GaussianRolloutPolicy pol(eval_mean, eval_log_std);
  policy::refresh_logprob_new(pol, group);

  const double clip = rng.uniform(0.2, 0.5);
  const double beta = rng.uniform(0.0, 0.1);
  const auto form = rng.bernoulli(0.5) ? grpo::SurrogateForm::ClampedRatio
                                       : grpo::SurrogateForm::PessimisticMin;
  if (instance_has_kink(group, clip)) return {false, false};

  const auto grad = policy::grad_surrogate(pol, group, clip, beta, form);
  const double h = 1e-5;
  std::vector<double> fd(2 * d);
  for (std::size_t i = 0; i < 2 * d; ++i) {
    auto up_mean = eval_mean;
    auto dn_mean = eval_mean;
    auto up_ls = eval_log_std;
    auto dn_ls = eval_log_std;
    if (i < d) {
      up_mean[i] += h;
      dn_mean[i] -= h;
    } else {
      up_ls[i - d] += h;
      dn_ls[i - d] -= h;
    }
    auto probe = [&](const std::vector<double>& m, const std::vector<double>& s) {
      auto shifted = group;
      policy::refresh_logprob_new(policy::GaussianRolloutPolicy(m, s), shifted);
      return grpo::surrogate_objective(shifted, clip, beta, form).total;
    };
    fd[i] = (probe(up_mean, up_ls) - probe(dn_mean, dn_ls)) / (2.0 * h);
  }
  return fd_check(grad, fd);
}

bool gradients_match_finite_differences() {
  Rng rng(303);
  for (auto* family : {&softmax_gradient_instance, &gaussian_gradient_instance}) {
    int valid = 0;
    int attempts = 0;
    while (valid < 100) {
      if (++attempts > 2000) return false;
      const auto outcome = (*family)(rng);
      if (!outcome.valid) continue;
      if (!outcome.pass) return false;
      ++valid;
    }
  }
  return true;
}

// --- criterion 4 -----------------------------------------------------------

bool template_policy_learns() {
  const auto templates = policy::builtin_templates(4);
  phase::PhaseConfig cfg;
  cfg.phase = phase::Phase::One;
  cfg.group_size = 8;
  cfg.iterations = 200;
  cfg.lr = 0.1;
  cfg.seed = 11;

  {
    auto generator = builtin_backend(backend::Role::Generator, "builtin:generator-echo");
    auto judge = builtin_backend(backend::Role::Judge, "builtin:judge-bandit?win=3");
    auto thinker = policy::SoftmaxTemplatePolicy::uniform(4);
    const auto records = phase::run_phase1(cfg, thinker, templates, generator, judge);
    if (records.size() != cfg.iterations) return false;
    if (!(thinker.probabilities()[3] > 0.9)) return false;
  }

  // Across ten seeds, the averaged learning curve must not end below where
  // it started. The comparison runs on 10-iteration moving averages so a
  // single noisy iteration at either end cannot decide the outcome.
  const std::size_t window = 10;
  std::vector<double> avg(cfg.iterations, 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto generator = builtin_backend(backend::Role::Generator, "builtin:generator-echo");
    auto judge = builtin_backend(backend::Role::Judge, "builtin:judge-bandit?win=3");
    cfg.seed = seed;
    auto thinker = policy::SoftmaxTemplatePolicy::uniform(4);
    const auto records = phase::run_phase1(cfg, thinker, templates, generator, judge);
    if (records.size() != cfg.iterations) return false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      avg[i] += records[i].mean_reward / 10.0;
    }
  }
  auto window_mean = [&](std::size_t begin) {
    double s = 0.0;
    for (std::size_t i = begin; i < begin + window; ++i) s += avg[i];
    return s / static_cast<double>(window);
  };
  const double start = window_mean(0);
  const double end = window_mean(cfg.iterations - window);
  if (end < start) {
    std::fprintf(stderr,
                 "criterion 4: averaged reward fell from %.6f to %.6f\n",
                 start, end);
    return false;
  }
  return true;
}

// --- criterion 5 -----------------------------------------------------------

bool sampler_training_reaches_target() {
  phase::PhaseConfig cfg;
  cfg.phase = phase::Phase::Two;
  cfg.allow_unordered_phases = true;
  cfg.iterations = 300;
  cfg.lr = 0.05;
  cfg.group_size = 24;
  cfg.sde_steps = 64;
  cfg.noise_level = 0.3;
  cfg.target_x = 1.5;
  cfg.seed = 3;

  flow::LinearGaussianFlow trained{0.0, 1.0};
  const auto records = phase::run_phase2(cfg, trained);
  if (records.size() != cfg.iterations) return false;
  if (!(std::abs(trained.data_mean - 1.5) < 0.1)) {
    std::fprintf(stderr, "criterion 5: data_mean settled at %.6f\n",
                 trained.data_mean);
    return false;
  }

  double first = 0.0;
  double last = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    flow::LinearGaussianFlow f{0.0, 1.0};
    const auto rec = phase::run_phase2(cfg, f);
    if (rec.size() != cfg.iterations) return false;
    first += rec.front().mean_reward / 10.0;
    last += rec.back().mean_reward / 10.0;
  }
  return last > first;
}

// --- criterion 6 -----------------------------------------------------------

bool sampler_preserves_marginals() {
  const flow::LinearGaussianFlow f{0.7, 1.3};
  const std::size_t steps = 512;
  const std::size_t samples = 100000;
  const auto closed = flow::marginal_stats(f, 0.0);

  for (double a : {0.0, 0.1, 0.3, 0.7}) {
    flow::SamplerConfig cfg;
    cfg.steps = steps;
    cfg.noise_level = a;
    Rng rng(900 + static_cast<std::uint64_t>(a * 10.0));
    std::vector<double> terminal(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      terminal[i] = flow::sde_rollout(f, cfg, rng).states.back().second;
    }
    const double m = mean_of(terminal);
    const double v = popvar_of(terminal);
    const double mean_tol = 3.0 * std::sqrt(closed.variance / samples);
    if (std::abs(m - closed.mean) > mean_tol) {
      std::fprintf(stderr, "criterion 6: a=%.1f mean %.6f vs %.6f (tol %.6f)\n",
                   a, m, closed.mean, mean_tol);
      return false;
    }
    if (std::abs(v - closed.variance) > 0.02 * closed.variance) {
      std::fprintf(stderr, "criterion 6: a=%.1f var %.6f vs %.6f\n", a, v,
                   closed.variance);
      return false;
    }
  }

  // Noise level zero is the plain ODE solve; it must match a hand-rolled
  // backward Euler recursion state for state.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    flow::SamplerConfig cfg;
    cfg.steps = steps;
    cfg.noise_level = 0.0;
    cfg.seed = seed;
    const auto traj = flow::sde_rollout(f, cfg);
    if (!traj.deterministic) return false;
    Rng init(seed);
    double x = init.normal();
    const double dt = 1.0 / static_cast<double>(steps);
    if (traj.states.front().second != x) return false;
    for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
      const double t = traj.states[i].first;
      x = x - dt * flow::ode_velocity(f, x, t);
      if (std::abs(traj.states[i + 1].second - x) > 1e-12) return false;
    }
  }
  return true;
}

// --- criterion 7 -----------------------------------------------------------

bool reward_lattices_exact() {
  for (int c = 0; c <= 2; ++c) {
    for (int r = 0; r <= 2; ++r) {
      for (int a = 0; a <= 2; ++a) {
        const reward::T2IRubricScores s{c, r, a};
        if (reward::aggregate_t2i(s) != static_cast<double>(c + r + a) / 3.0) {
          return false;
        }
      }
    }
  }
  if (reward::aggregate_t2i(reward::T2IRubricScores{2, 2, 2}) != 2.0) return false;

  for (int p = 1; p <= 5; ++p) {
    for (int q = 1; q <= 5; ++q) {
      for (int w = 1; w <= 5; ++w) {
        const reward::EditRubricScores s{p, q, w};
        const double mean = static_cast<double>(p + q + w) / 3.0;
        if (reward::aggregate_edit(s) != (mean - 1.0) / 4.0) return false;
        reward::RewardConfig raw;
        raw.edit_aggregation = reward::EditAggregation::RawMean;
        if (reward::aggregate_edit(s, raw) != mean) return false;
      }
    }
  }

  Rng rng(707);
  for (int i = 0; i < 1000; ++i) {
    const double bound = rng.uniform(0.5, 10.0);
    const double r = rng.uniform(-30.0, 30.0);
    const auto once = reward::clip_reward(r, bound);
    const auto twice = reward::clip_reward(once.value, bound);
    if (twice.value != once.value) return false;
    if (twice.clipped) return false;
  }
  return true;
}

// --- criterion 8 -----------------------------------------------------------

bool two_view_weighting_exact() {
  Rng rng(808);
  for (int i = 0; i < 1000; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const double lg = rng.uniform(-100.0, 100.0) * scale;
    const double lu = rng.uniform(-100.0, 100.0) * scale;
    const auto rep = phase::sft_combine(lg, lu, 0.5);
    if (rep.loss_total != lg + 0.5 * lu) return false;
    if (rep.lambda != 0.5) return false;
  }
  const auto rep = phase::sft_combine(2.0, 3.0);
  return rep.lambda == 0.5 && rep.loss_total == 2.0 + 0.5 * 3.0;
}

// --- criterion 9 -----------------------------------------------------------

std::string random_sentence(Rng& rng, std::size_t words) {
  static const std::vector<std::string> bank = {
      "harbor", "lantern", "dusk",    "boats",  "granite", "gulls",
      "mist",   "copper",  "rooftops", "tide",   "market",  "stalls",
      "rain",   "glow",    "shadow",  "pier",   "nets",    "windows"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += bank[rng.below(bank.size())];
  }
  return out;
}

bool trace_grammar_honors_contract() {
  // Round trip: render then parse must restore every field.
  Rng rng(901);
  for (int i = 0; i < 200; ++i) {
    trace::ReasoningTrace t;
    t.task_kind = rng.bernoulli(0.5) ? trace::TaskKind::ImageEdit
                                     : trace::TaskKind::TextToImage;
    t.think.stage1_analysis = random_sentence(rng, 3 + rng.below(8));
    t.think.stage2_reasoning = random_sentence(rng, 3 + rng.below(8));
    if (rng.bernoulli(0.7)) {
      t.think.stage2_result = random_sentence(rng, 4 + rng.below(6));
    }
    t.think.stage3_strategy = random_sentence(rng, 3 + rng.below(8));
    t.answer = random_sentence(rng, 4 + rng.below(8));
    if (t.task_kind == trace::TaskKind::ImageEdit && rng.bernoulli(0.5)) {
      t.answer = std::string(trace::kCanonicalPlaceholder) + " with " + t.answer;
    }
    const std::string rendered = trace::render_trace(t);
    const auto outcome = trace::parse_trace(rendered, t.task_kind);
    if (!outcome.ok() || !outcome.trace.has_value()) return false;
    if (!(*outcome.trace == t)) return false;
  }

  // Defect corpus: every planted defect yields exactly the expected codes.
  Rng defect_rng(902);
  for (int i = 0; i < 50; ++i) {
    const auto kind = testsupport::kAllDefects[i % std::size(testsupport::kAllDefects)];
    const auto defect = testsupport::make_defect(kind, defect_rng);
    const auto outcome = trace::parse_trace(defect.raw);
    if (outcome.trace.has_value()) return false;
    if (outcome.violations.size() != defect.expected.size()) return false;
    for (std::size_t j = 0; j < defect.expected.size(); ++j) {
      if (outcome.violations[j].code != defect.expected[j]) return false;
    }
  }

  // Fuzz: structural fragments in random order never crash the parser, and
  // a trace engages exactly when the violation list is empty.
  static const std::vector<std::string> tokens = {
      "<think>",
      "</think>",
      "<answer>",
      "</answer>",
      "Step 1: Input Analysis & Intent Identification",
      "Step 2: Reasoning Activation & Result Concretization",
      "Step 3: Strategy Formulation & Prompt Construction",
      std::string(trace::kResultMarker),
      "<image>",
      "<img>",
      "[image]",
      "harbor town at dusk",
      "\n",
      "\n\n",
      "<",
      ">",
      "&",
      "\t",
      std::string("\x01\xff\x7f", 3)};
  Rng fuzz_rng(903);
  for (int i = 0; i < 100000; ++i) {
    std::string raw;
    const std::size_t n = fuzz_rng.below(24);
    for (std::size_t j = 0; j < n; ++j) {
      raw += tokens[fuzz_rng.below(tokens.size())];
      raw += ' ';
    }
    const auto kind = fuzz_rng.bernoulli(0.5) ? trace::TaskKind::ImageEdit
                                              : trace::TaskKind::TextToImage;
    const auto outcome = trace::parse_trace(raw, kind);
    if (outcome.trace.has_value() != outcome.violations.empty()) return false;
    if (outcome.ok() != outcome.trace.has_value()) return false;
  }
  return true;
}

// --- criterion 10 ----------------------------------------------------------

bool corpus_builds_are_reproducible() {
  testsupport::TmpDir tmp;
  const std::string input = std::string(FIXTURE_DIR) + "/examples12.jsonl";

  corpus::BuildConfig bc;
  bc.seed = 5;
  bc.parallelism = 1;
  bc.fixed_time = 1700000000;  // pins created_at so bytes can compare equal

  auto build_once = [&](const std::string& out) {
    backend::Backend annotator(fixture_annotator_spec());
    bc.out_path = out;
    return corpus::build_corpus(input, annotator, bc);
  };

  const auto stats_a = build_once(tmp.file("a.jsonl"));
  const auto stats_b = build_once(tmp.file("b.jsonl"));

  if (stats_a.total != stats_a.accepted + stats_a.rejected + stats_a.io_skipped) {
    return false;
  }
  if (stats_a.total != 12 || stats_a.failed != 0) return false;

  if (slurp(tmp.file("a.jsonl")) != slurp(tmp.file("b.jsonl"))) return false;
  if (slurp(tmp.file("a.jsonl") + ".stats.json") !=
      slurp(tmp.file("b.jsonl") + ".stats.json")) {
    return false;
  }

  // Stratified sampling: each task kind's share of the subset stays within
  // one record of its share of the accepted pool, for every subset size.
  const auto records = corpus::load_corpus(tmp.file("a.jsonl"));
  std::map<std::string, std::size_t> accepted_by_kind;
  std::size_t accepted_total = 0;
  for (const auto& r : records) {
    if (!r.verdict.accepted) continue;
    ++accepted_by_kind[trace::to_string(r.example.task_kind)];
    ++accepted_total;
  }
  if (accepted_total == 0) return false;
  for (std::size_t k = 1; k <= accepted_total; ++k) {
    const auto summary = corpus::sample_rl_subset(tmp.file("a.jsonl"), k, 7,
                                                  tmp.file("subset.jsonl"));
    if (summary.written != k) return false;
    for (const auto& [kind, accepted] : accepted_by_kind) {
      const double share = static_cast<double>(accepted) /
                           static_cast<double>(accepted_total);
      const auto it = summary.per_task_kind.find(kind);
      const double chosen =
          it == summary.per_task_kind.end() ? 0.0 : static_cast<double>(it->second);
      if (std::abs(chosen - static_cast<double>(k) * share) > 1.0 + 1e-9) {
        return false;
      }
    }
  }
  return true;
}

// --- criterion 11 ----------------------------------------------------------

bool transcripts_replay_bit_for_bit() {
  testsupport::TmpDir tmp;
  const std::string input = std::string(FIXTURE_DIR) + "/examples12.jsonl";
  const std::string transcript = tmp.file("annotator.transcript.jsonl");

  corpus::BuildConfig bc;
  bc.seed = 5;
  bc.parallelism = 1;
  bc.fixed_time = 1700000000;

  {
    backend::Backend annotator(fixture_annotator_spec());
    annotator.attach_recorder(std::make_shared<backend::TranscriptRecorder>(
        transcript, nlohmann::json{{"role", "annotator"}}));
    bc.out_path = tmp.file("live.jsonl");
    corpus::build_corpus(input, annotator, bc);
  }
  {
    auto replay = backend::make_replay_backend(fixture_annotator_spec(), transcript);
    bc.out_path = tmp.file("replayed.jsonl");
    corpus::build_corpus(input, replay, bc);
  }

  if (slurp(tmp.file("live.jsonl")).empty()) return false;
  if (slurp(tmp.file("live.jsonl")) != slurp(tmp.file("replayed.jsonl"))) {
    return false;
  }
  return slurp(tmp.file("live.jsonl") + ".stats.json") ==
         slurp(tmp.file("replayed.jsonl") + ".stats.json");
}

}  // namespace

int main() {
  run(1, "group advantages standardize exactly", 5.0, advantages_standardize);
  run(2, "on-policy objective collapses to the mean advantage", 5.0,
      on_policy_objective_identity);
  run(3, "policy gradients match central finite differences", 30.0,
      gradients_match_finite_differences);
  run(4, "template policy learns the rewarded arm", 60.0,
      template_policy_learns);
  run(5, "stochastic sampler training reaches the reward target", 300.0,
      sampler_training_reaches_target);
  run(6, "stochastic sampler preserves terminal marginals", 300.0,
      sampler_preserves_marginals);
  run(7, "rubric aggregation is exact on the full score lattices", 0.0,
      reward_lattices_exact);
  run(8, "two-view loss weighting is exact", 0.0, two_view_weighting_exact);
  run(9, "trace grammar round-trips, flags defects, survives fuzzing", 60.0,
      trace_grammar_honors_contract);
  run(10, "corpus builds are byte-reproducible and stratified", 0.0,
      corpus_builds_are_reproducible);
  run(11, "recorded backend transcripts replay bit-for-bit", 0.0,
      transcripts_replay_bit_for_bit);

  if (failures != 0) {
    std::fprintf(stderr, "%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all 11 criteria passed\n");
  return 0;
}
