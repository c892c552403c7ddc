#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "planexec/backends.hpp"
#include "planexec/corpus.hpp"
#include "planexec/errors.hpp"
#include "planexec/flow.hpp"
#include "planexec/phase.hpp"
#include "planexec/policies.hpp"
#include "planexec/reward.hpp"
#include "planexec/rng.hpp"
#include "planexec/trace.hpp"
#include "planexec/util.hpp"

namespace {

using nlohmann::json;
using namespace planexec;

std::optional<std::string> env_var(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(util::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

/// Precedence: config file < explicitly passed flag < environment.
template <class T>
T resolve(const CLI::Option* opt, T flag_value, const json& cfg,
          const char* key, const char* env_name = nullptr) {
  T value = flag_value;
  if (opt->count() == 0 && cfg.contains(key)) {
    try {
      value = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key ") + key + ": " + e.what());
    }
  }
  if (env_name != nullptr) {
    if (const auto e = env_var(env_name)) {
      if constexpr (std::is_same_v<T, std::string>) {
        value = *e;
      } else if constexpr (std::is_same_v<T, bool>) {
        value = (*e == "1" || *e == "true");
      } else {
        try {
          value = static_cast<T>(std::stoull(*e));
        } catch (const std::exception&) {
          throw ConfigError(std::string(env_name) + " is not a number: " + *e);
        }
      }
    }
  }
  return value;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// Backend spec from a shorthand string plus the documented environment
/// overrides (PLANEXEC_<ROLE>_ENDPOINT, PLANEXEC_TIMEOUT_MS).
backend::BackendSpec make_spec(backend::Role role, const std::string& text) {
  auto spec = backend::spec_from_string(role, text);
  if (const auto t = env_var("PLANEXEC_TIMEOUT_MS")) {
    try {
      spec.timeout = std::chrono::milliseconds(std::stoll(*t));
    } catch (const std::exception&) {
      throw ConfigError("PLANEXEC_TIMEOUT_MS is not a number: " + *t);
    }
  }
  if (const auto e =
          env_var("PLANEXEC_" + upper(backend::role_name(role)) + "_ENDPOINT")) {
    spec.kind = backend::Kind::Http;
    spec.endpoint = *e;
  }
  return spec;
}

struct BackendHarness {
  std::vector<std::unique_ptr<backend::Backend>> owned;
  std::shared_ptr<backend::TranscriptRecorder> recorder;

  backend::Backend& add(backend::BackendSpec spec, const std::string& replay) {
    if (!replay.empty()) {
      auto transport = backend::make_replay_transport(spec, replay);
      owned.push_back(std::make_unique<backend::Backend>(std::move(spec),
                                                         std::move(transport)));
    } else {
      owned.push_back(std::make_unique<backend::Backend>(std::move(spec)));
    }
    if (recorder) owned.back()->attach_recorder(recorder);
    return *owned.back();
  }

  void start_recording(const std::string& path, json meta) {
    if (path.empty()) return;
    recorder = std::make_shared<backend::TranscriptRecorder>(path, std::move(meta));
  }
};

void print_tsv_series(const std::vector<phase::IterationRecord>& records,
                      const std::string& prefix) {
  util::LineWriter reward_series(prefix + ".reward.tsv");
  util::LineWriter timing_series(prefix + ".timing.tsv");
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

// ---------------------------------------------------------------------------
// corpus-build

struct CorpusBuildArgs {
  std::string in_path;
  std::string out_path;
  std::string annotator = "builtin:annotator-canonical";
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  bool no_repair = false;
  std::int64_t fixed_time = -1;
  double jaccard = 0.3;
  std::string record_path;
  std::string replay_path;
  std::string config_path;
  bool as_json = false;
};

int run_corpus_build(const CorpusBuildArgs& args, const CLI::App& sub) {
  const json cfg = load_config_file(args.config_path);
  corpus::BuildConfig build;
  build.out_path = resolve(sub.get_option("--out"), args.out_path, cfg, "out");
  build.seed = resolve(sub.get_option("--seed"), args.seed, cfg, "seed",
                       "PLANEXEC_SEED");
  build.parallelism = resolve(sub.get_option("--parallelism"), args.parallelism,
                              cfg, "parallelism", "PLANEXEC_PARALLELISM");
  build.repair =
      !resolve(sub.get_option("--no-repair"), args.no_repair, cfg, "no_repair");
  build.validate.jaccard_threshold =
      resolve(sub.get_option("--jaccard"), args.jaccard, cfg, "jaccard");
  const auto fixed = resolve(sub.get_option("--fixed-time"), args.fixed_time,
                             cfg, "fixed_time");
  if (fixed >= 0) build.fixed_time = fixed;
  if (const auto t = env_var("PLANEXEC_FIXED_TIME")) {
    build.fixed_time = std::stoll(*t);
  }
  const auto in_path =
      resolve(sub.get_option("--in"), args.in_path, cfg, "in");
  const auto annotator_str = resolve(sub.get_option("--annotator"),
                                     args.annotator, cfg, "annotator");
  if (in_path.empty() || build.out_path.empty()) {
    throw ConfigError("corpus-build needs --in and --out");
  }

  BackendHarness harness;
  harness.start_recording(args.record_path,
                          json{{"command", "corpus-build"}, {"seed", build.seed}});
  auto& annotator = harness.add(
      make_spec(backend::Role::Annotator, annotator_str), args.replay_path);

  const auto stats = corpus::build_corpus(in_path, annotator, build);
  if (args.as_json) {
    std::cout << corpus::to_json(stats).dump() << "\n";
  } else {
    std::cout << "built " << build.out_path << ": " << stats.total
              << " records, " << stats.accepted << " accepted, "
              << stats.rejected << " rejected, " << stats.io_skipped
              << " skipped";
    if (stats.failed > 0) std::cout << ", " << stats.failed << " quarantined";
    std::cout << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// corpus-validate

int run_corpus_validate(const std::string& in_path, double jaccard,
                        bool as_json) {
  corpus::ValidateConfig vcfg;
  vcfg.jaccard_threshold = jaccard;
  const auto report = corpus::validate_corpus(in_path, vcfg);
  if (as_json) {
    json j{{"stats", corpus::to_json(report.stats)},
           {"mismatches", report.mismatches},
           {"duplicate_ids", report.duplicate_ids}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << in_path << ": " << report.stats.total << " records, "
              << report.stats.accepted << " accepted, " << report.stats.rejected
              << " rejected, " << report.mismatches << " verdict mismatches, "
              << report.duplicate_ids << " duplicate ids\n";
  }
  const bool clean = report.mismatches == 0 && report.duplicate_ids == 0 &&
                     report.stats.rejected == 0;
  return clean ? 0 : 1;
}

// ---------------------------------------------------------------------------
// corpus-sample

int run_corpus_sample(const std::string& in_path, const std::string& out_path,
                      std::size_t k, std::uint64_t seed, bool as_json) {
  const auto summary = corpus::sample_rl_subset(in_path, k, seed, out_path);
  if (as_json) {
    json j{{"accepted_total", summary.accepted_total},
           {"written", summary.written},
           {"per_task_kind", summary.per_task_kind}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "sampled " << summary.written << " of "
              << summary.accepted_total << " accepted records into " << out_path
              << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// trace-lint

int run_trace_lint(const std::string& in_path, const std::string& kind,
                   bool as_json) {
  const auto text = util::read_file(in_path);
  const auto outcome =
      trace::parse_trace(text, trace::task_kind_from_string(kind));
  if (as_json) {
    json list = json::array();
    for (const auto& v : outcome.violations) {
      list.push_back(json{{"code", trace::to_string(v.code)},
                          {"begin", v.begin},
                          {"end", v.end},
                          {"detail", v.detail}});
    }
    std::cout << list.dump() << "\n";
  } else if (outcome.violations.empty()) {
    std::cout << "0 violations\n";
  } else {
    std::cout << outcome.violations.size() << " violations\n";
    for (const auto& v : outcome.violations) {
      std::cout << trace::to_string(v.code) << " [" << v.begin << "," << v.end
                << "): " << v.detail << "\n";
    }
  }
  return outcome.violations.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// reward-score

int run_reward_score(const std::string& in_path, const std::string& rubric,
                     double bound, bool as_json) {
  const auto text = util::read_file(in_path);
  reward::RewardConfig rcfg;
  rcfg.clip_bound = bound;
  const auto breakdown = reward::score_judge_response(
      text, reward::rubric_from_string(rubric), rcfg);
  if (as_json) {
    std::cout << reward::to_json(breakdown).dump() << "\n";
  } else {
    std::cout << "rubric " << reward::to_string(breakdown.rubric) << " reward "
              << breakdown.scalar << (breakdown.clipped ? " (clipped)" : "")
              << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train-phase1 / train-phase2

struct TrainArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::string metrics_path;
  std::string record_path;
  std::string replay_path;
  bool as_json = false;
};

phase::PhaseConfig training_config(const TrainArgs& args, const CLI::App& sub,
                                   const json& cfg, phase::Phase expected) {
  auto pcfg = phase::phase_config_from_json(cfg);
  pcfg.phase = expected;
  if (sub.get_option("--seed")->count() > 0) pcfg.seed = args.seed;
  if (const auto e = env_var("PLANEXEC_SEED")) pcfg.seed = std::stoull(*e);
  if (sub.get_option("--iterations")->count() > 0) {
    pcfg.iterations = args.iterations;
  }
  return pcfg;
}

void finish_training(const std::vector<phase::IterationRecord>& records,
                     const TrainArgs& args, const CLI::App& sub, const json& cfg,
                     json summary) {
  auto metrics_path = resolve(sub.get_option("--metrics"), args.metrics_path,
                              cfg, "metrics_out");
  if (!metrics_path.empty() && !records.empty()) {
    phase::emit_metrics(records, metrics_path);
    summary["metrics_path"] = metrics_path;
  }
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  summary["iterations"] = records.size();
  summary["failed_iterations"] = failed;
  if (!records.empty()) {
    summary["final_mean_reward"] = records.back().mean_reward;
  }
  if (args.as_json) {
    std::cout << summary.dump() << "\n";
  } else {
    std::cout << "ran " << records.size() << " iterations";
    if (!records.empty()) {
      std::cout << ", final mean reward " << records.back().mean_reward;
    }
    if (failed > 0) std::cout << " (" << failed << " failed)";
    if (!metrics_path.empty()) std::cout << ", metrics in " << metrics_path;
    std::cout << "\n";
  }
}

int run_train_phase1(const TrainArgs& args, const CLI::App& sub) {
  const json cfg = load_config_file(args.config_path);
  const auto pcfg = training_config(args, sub, cfg, phase::Phase::One);

  std::vector<policy::PromptTemplate> templates;
  if (cfg.contains("templates") && cfg["templates"].is_array()) {
    std::size_t i = 0;
    for (const auto& t : cfg["templates"]) {
      templates.push_back({"template-" + std::to_string(i++),
                           t.get<std::string>()});
    }
  } else {
    templates = policy::builtin_templates(cfg.value("template_count", 4));
  }

  BackendHarness harness;
  harness.start_recording(
      args.record_path, json{{"command", "train-phase1"}, {"seed", pcfg.seed}});
  auto& generator = harness.add(
      make_spec(backend::Role::Generator,
                cfg.value("generator", std::string("builtin:generator-echo"))),
      args.replay_path);
  auto& judge = harness.add(
      make_spec(backend::Role::Judge,
                cfg.value("judge", std::string("builtin:judge-bandit?win=3"))),
      args.replay_path);

  std::vector<phase::IterationRecord> records;
  json summary;
  if (cfg.contains("thinker")) {
    auto& thinker = harness.add(
        make_spec(backend::Role::Thinker, cfg["thinker"].get<std::string>()),
        args.replay_path);
    records = phase::run_phase1(pcfg, thinker, generator, judge);
    summary["update_payload_dir"] = pcfg.update_payload_dir;
  } else {
    auto thinker = cfg.contains("initial_logits")
                       ? policy::SoftmaxTemplatePolicy(
                             cfg["initial_logits"].get<std::vector<double>>())
                       : policy::SoftmaxTemplatePolicy::uniform(templates.size());
    records = phase::run_phase1(pcfg, thinker, templates, generator, judge);
    summary["final_probabilities"] = thinker.probabilities();
  }
  finish_training(records, args, sub, cfg, std::move(summary));
  return 0;
}

int run_train_phase2(const TrainArgs& args, const CLI::App& sub) {
  const json cfg = load_config_file(args.config_path);
  const auto pcfg = training_config(args, sub, cfg, phase::Phase::Two);

  flow::LinearGaussianFlow generator_flow;
  generator_flow.data_mean = cfg.value("data_mean", 0.0);
  generator_flow.data_std = cfg.value("data_std", 1.0);

  auto records = phase::run_phase2(pcfg, generator_flow);
  json summary{{"data_mean", generator_flow.data_mean},
               {"data_std", generator_flow.data_std},
               {"target_x", pcfg.target_x}};
  finish_training(records, args, sub, cfg, std::move(summary));
  return 0;
}

// ---------------------------------------------------------------------------
// flow-check

struct FlowCheckArgs {
  double noise = 0.3;
  std::size_t steps = 512;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  double mean = 0.0;
  double stddev = 1.0;
  bool as_json = false;
};

int run_flow_check(const FlowCheckArgs& args) {
  flow::LinearGaussianFlow f{args.mean, args.stddev};
  flow::SamplerConfig scfg{args.steps, args.noise, args.seed};
  Rng rng(args.seed);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < args.samples; ++i) {
    const auto traj = flow::sde_rollout(f, scfg, rng);
    const double x = traj.states.back().second;
    sum += x;
    sum_sq += x * x;
  }
  const double n = static_cast<double>(args.samples);
  const double emp_mean = sum / n;
  const double emp_var = sum_sq / n - emp_mean * emp_mean;

  // The sampler's terminal time: t=0, or t=1/N for a zero-spread flow.
  const double t_end =
      args.stddev == 0.0 ? 1.0 / static_cast<double>(args.steps) : 0.0;
  const auto closed = flow::marginal_stats(f, t_end);
  const double mean_tol = 3.0 * std::sqrt(closed.variance / n);
  const double var_tol = 0.02 * closed.variance;
  const bool mean_ok = std::abs(emp_mean - closed.mean) <= mean_tol;
  const bool var_ok = closed.variance == 0.0
                          ? emp_var <= 1e-12
                          : std::abs(emp_var - closed.variance) <= var_tol;

  if (args.as_json) {
    json j{{"noise", args.noise},
           {"steps", args.steps},
           {"samples", args.samples},
           {"terminal_time", t_end},
           {"closed_mean", closed.mean},
           {"closed_variance", closed.variance},
           {"empirical_mean", emp_mean},
           {"empirical_variance", emp_var},
           {"mean_tolerance", mean_tol},
           {"variance_tolerance", var_tol},
           {"mean_ok", mean_ok},
           {"variance_ok", var_ok}};
    std::cout << j.dump() << "\n";
  } else {
    std::printf("quantity   closed-form   empirical     tolerance    status\n");
    std::printf("mean       %-12.6f  %-12.6f  %-11.6f  %s\n", closed.mean,
                emp_mean, mean_tol, mean_ok ? "ok" : "OUT OF BAND");
    std::printf("variance   %-12.6f  %-12.6f  %-11.6f  %s\n", closed.variance,
                emp_var, var_tol, var_ok ? "ok" : "OUT OF BAND");
  }
  return (mean_ok && var_ok) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// report-plot

int run_report_plot(const std::string& in_path, const std::string& out_prefix,
                    bool as_json) {
  std::vector<phase::IterationRecord> records;
  std::istringstream lines(util::read_file(in_path));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line.front() == '#') continue;
    records.push_back(phase::iteration_record_from_json(json::parse(line)));
  }
  if (records.empty()) {
    throw DomainError("no iteration records in " + in_path);
  }
  const std::string prefix = out_prefix.empty() ? in_path : out_prefix;
  print_tsv_series(records, prefix);
  if (as_json) {
    json j{{"records", records.size()},
           {"first_mean_reward", records.front().mean_reward},
           {"last_mean_reward", records.back().mean_reward},
           {"reward_series", prefix + ".reward.tsv"},
           {"timing_series", prefix + ".timing.tsv"}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << records.size() << " records; mean reward "
              << records.front().mean_reward << " -> "
              << records.back().mean_reward << "; series in " << prefix
              << ".reward.tsv and " << prefix << ".timing.tsv\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plan-then-render pipeline toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  // corpus-build ------------------------------------------------------------
  auto build_args = std::make_shared<CorpusBuildArgs>();
  auto* build = app.add_subcommand("corpus-build",
                                   "annotate and filter raw examples into a corpus");
  build->add_option("--in", build_args->in_path, "input examples (JSONL)");
  build->add_option("--out", build_args->out_path, "corpus output path");
  build->add_option("--annotator", build_args->annotator, "annotator backend spec");
  build->add_option("--seed", build_args->seed, "rng seed");
  build->add_option("--parallelism", build_args->parallelism,
                    "concurrent annotations");
  build->add_flag("--no-repair", build_args->no_repair,
                  "skip the one-shot repair re-annotation");
  build->add_option("--fixed-time", build_args->fixed_time,
                    "fixed unix timestamp for created_at");
  build->add_option("--jaccard", build_args->jaccard,
                    "consistency-filter threshold");
  build->add_option("--record", build_args->record_path,
                    "capture backend exchanges to this transcript");
  build->add_option("--replay", build_args->replay_path,
                    "serve backend exchanges from this transcript");
  build->add_option("--config", build_args->config_path, "JSON config file");
  build->add_flag("--json", build_args->as_json, "machine-readable output");
  build->callback([build_args, build, &action] {
    action = [build_args, build] { return run_corpus_build(*build_args, *build); };
  });

  // corpus-validate -----------------------------------------------------------
  auto validate_args = std::make_shared<CorpusBuildArgs>();
  auto* validate = app.add_subcommand("corpus-validate",
                                      "re-run the filters over a corpus file");
  validate->add_option("--in", validate_args->in_path, "corpus file")->required();
  validate->add_option("--jaccard", validate_args->jaccard,
                       "consistency-filter threshold");
  validate->add_option("--seed", validate_args->seed, "rng seed (unused)");
  validate->add_option("--config", validate_args->config_path, "JSON config file");
  validate->add_flag("--json", validate_args->as_json, "machine-readable output");
  validate->callback([validate_args, &action] {
    action = [validate_args] {
      return run_corpus_validate(validate_args->in_path, validate_args->jaccard,
                                 validate_args->as_json);
    };
  });

  // corpus-sample -------------------------------------------------------------
  auto sample_args = std::make_shared<CorpusBuildArgs>();
  auto sample_k = std::make_shared<std::size_t>(0);
  auto* sample = app.add_subcommand("corpus-sample",
                                    "stratified sample of accepted records");
  sample->add_option("--in", sample_args->in_path, "corpus file")->required();
  sample->add_option("--out", sample_args->out_path, "subset output path")
      ->required();
  sample->add_option("--k", *sample_k, "subset size")->required();
  sample->add_option("--seed", sample_args->seed, "rng seed");
  sample->add_option("--config", sample_args->config_path, "JSON config file");
  sample->add_flag("--json", sample_args->as_json, "machine-readable output");
  sample->callback([sample_args, sample_k, sample, &action] {
    action = [sample_args, sample_k, sample] {
      const json cfg = load_config_file(sample_args->config_path);
      const auto seed = resolve(sample->get_option("--seed"), sample_args->seed,
                                cfg, "seed", "PLANEXEC_SEED");
      return run_corpus_sample(sample_args->in_path, sample_args->out_path,
                               *sample_k, seed, sample_args->as_json);
    };
  });

  // trace-lint ----------------------------------------------------------------
  auto lint_in = std::make_shared<std::string>();
  auto lint_kind = std::make_shared<std::string>("t2i");
  auto lint_common = std::make_shared<CorpusBuildArgs>();
  auto* lint = app.add_subcommand("trace-lint",
                                  "check one trace file against the grammar");
  lint->add_option("--in", *lint_in, "trace text file")->required();
  lint->add_option("--kind", *lint_kind, "task kind (t2i or edit)");
  lint->add_option("--seed", lint_common->seed, "rng seed (unused)");
  lint->add_option("--config", lint_common->config_path, "JSON config file");
  lint->add_flag("--json", lint_common->as_json, "machine-readable output");
  lint->callback([lint_in, lint_kind, lint_common, &action] {
    action = [lint_in, lint_kind, lint_common] {
      return run_trace_lint(*lint_in, *lint_kind, lint_common->as_json);
    };
  });

  // reward-score ----------------------------------------------------------------
  auto score_in = std::make_shared<std::string>();
  auto score_rubric = std::make_shared<std::string>("t2i");
  auto score_bound = std::make_shared<double>(10.0);
  auto score_common = std::make_shared<CorpusBuildArgs>();
  auto* score = app.add_subcommand("reward-score",
                                   "parse and aggregate one judge response");
  score->add_option("--in", *score_in, "judge response text file")->required();
  score->add_option("--rubric", *score_rubric, "t2i or edit");
  score->add_option("--bound", *score_bound, "reward clip bound");
  score->add_option("--seed", score_common->seed, "rng seed (unused)");
  score->add_option("--config", score_common->config_path, "JSON config file");
  score->add_flag("--json", score_common->as_json, "machine-readable output");
  score->callback([score_in, score_rubric, score_bound, score_common, &action] {
    action = [score_in, score_rubric, score_bound, score_common] {
      return run_reward_score(*score_in, *score_rubric, *score_bound,
                              score_common->as_json);
    };
  });

  // train-phase1 / train-phase2 --------------------------------------------------
  auto add_train = [&app, &action](const std::string& name, const char* help,
                                   int (*runner)(const TrainArgs&, const CLI::App&)) {
    auto train_args = std::make_shared<TrainArgs>();
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", train_args->config_path, "JSON run config")
        ->required();
    sub->add_option("--seed", train_args->seed, "rng seed");
    sub->add_option("--iterations", train_args->iterations, "iteration count");
    sub->add_option("--metrics", train_args->metrics_path, "metrics output path");
    sub->add_option("--record", train_args->record_path,
                    "capture backend exchanges to this transcript");
    sub->add_option("--replay", train_args->replay_path,
                    "serve backend exchanges from this transcript");
    sub->add_flag("--json", train_args->as_json, "machine-readable output");
    sub->callback([train_args, sub, runner, &action] {
      action = [train_args, sub, runner] { return runner(*train_args, *sub); };
    });
  };
  add_train("train-phase1", "planner-side group-relative training run",
            &run_train_phase1);
  add_train("train-phase2", "sampler-side group-relative training run",
            &run_train_phase2);

  // flow-check -------------------------------------------------------------------
  auto flow_args = std::make_shared<FlowCheckArgs>();
  auto flow_common = std::make_shared<CorpusBuildArgs>();
  auto* flowcheck = app.add_subcommand(
      "flow-check", "Monte-Carlo check of sampler marginal preservation");
  flowcheck->add_option("--noise", flow_args->noise, "diffusion scale a");
  flowcheck->add_option("--steps", flow_args->steps, "integration steps");
  flowcheck->add_option("--samples", flow_args->samples, "rollout count");
  flowcheck->add_option("--seed", flow_args->seed, "rng seed");
  flowcheck->add_option("--mean", flow_args->mean, "data mean");
  flowcheck->add_option("--std", flow_args->stddev, "data spread");
  flowcheck->add_option("--config", flow_common->config_path, "JSON config file");
  flowcheck->add_flag("--json", flow_args->as_json, "machine-readable output");
  flowcheck->callback([flow_args, flow_common, flowcheck, &action] {
    action = [flow_args, flow_common, flowcheck] {
      const json cfg = load_config_file(flow_common->config_path);
      FlowCheckArgs a = *flow_args;
      a.noise = resolve(flowcheck->get_option("--noise"), a.noise, cfg, "noise");
      a.steps = resolve(flowcheck->get_option("--steps"), a.steps, cfg, "steps");
      a.samples =
          resolve(flowcheck->get_option("--samples"), a.samples, cfg, "samples");
      a.seed = resolve(flowcheck->get_option("--seed"), a.seed, cfg, "seed",
                       "PLANEXEC_SEED");
      a.mean = resolve(flowcheck->get_option("--mean"), a.mean, cfg, "mean");
      a.stddev = resolve(flowcheck->get_option("--std"), a.stddev, cfg, "std");
      return run_flow_check(a);
    };
  });

  // report-plot --------------------------------------------------------------------
  auto plot_in = std::make_shared<std::string>();
  auto plot_out = std::make_shared<std::string>();
  auto plot_common = std::make_shared<CorpusBuildArgs>();
  auto* plot = app.add_subcommand("report-plot",
                                  "turn a metrics file into plot-ready series");
  plot->add_option("--in", *plot_in, "metrics JSONL file")->required();
  plot->add_option("--out", *plot_out, "output prefix (default: --in)");
  plot->add_option("--seed", plot_common->seed, "rng seed (unused)");
  plot->add_option("--config", plot_common->config_path, "JSON config file");
  plot->add_flag("--json", plot_common->as_json, "machine-readable output");
  plot->callback([plot_in, plot_out, plot_common, &action] {
    action = [plot_in, plot_out, plot_common] {
      return run_report_plot(*plot_in, *plot_out, plot_common->as_json);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
