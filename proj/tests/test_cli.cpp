#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/corpus.hpp"
#include "planexec/util.hpp"
#include "support/tmpdir.hpp"

using namespace planexec;
using nlohmann::json;
using testsupport::TmpDir;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the toolkit binary through the shell with a scrubbed
/// environment so ambient PLANEXEC_* variables cannot leak in.
class Cli {
 public:
  CliResult run(const std::string& args, const std::string& env = "") {
    const std::string out_path = dir_.file("out." + std::to_string(calls_));
    const std::string err_path = dir_.file("err." + std::to_string(calls_));
    ++calls_;
    std::string cmd =
        "env -u PLANEXEC_SEED -u PLANEXEC_PARALLELISM -u PLANEXEC_FIXED_TIME"
        " -u PLANEXEC_TIMEOUT_MS -u PLANEXEC_THINKER_ENDPOINT"
        " -u PLANEXEC_GENERATOR_ENDPOINT -u PLANEXEC_JUDGE_ENDPOINT"
        " -u PLANEXEC_ANNOTATOR_ENDPOINT ";
    if (!env.empty()) cmd += env + " ";
    cmd += std::string("\"") + CLI_PATH + "\" " + args;
    cmd += " > " + out_path + " 2> " + err_path;

    CliResult res;
    const int raw = std::system(cmd.c_str());
    res.code = (raw != -1 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
    res.out = util::read_file(out_path);
    res.err = util::read_file(err_path);
    return res;
  }

  std::string file(const std::string& name) { return dir_.file(name); }
  std::string dir() { return dir_.path().string(); }

 private:
  TmpDir dir_;
  int calls_ = 0;
};

std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

std::string build_fixture_corpus(Cli& cli, const std::string& out_name) {
  const std::string out = cli.file(out_name);
  auto res = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                     " --out " + out + " --annotator mock:" +
                     fixture("annotator12.json") + " --fixed-time 1700000000");
  REQUIRE(res.code == 0);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit with code two") {
  Cli cli;
  CHECK(cli.run("").code == 2);                          // no subcommand
  CHECK(cli.run("warp-drive").code == 2);                // unknown subcommand
  CHECK(cli.run("trace-lint").code == 2);                // missing --in
  CHECK(cli.run("trace-lint --in x --bogus-flag").code == 2);
  CHECK(cli.run("corpus-sample --in a --out b").code == 2);  // missing --k
}

TEST_CASE("trace-lint reports violations and exit status") {
  Cli cli;
  auto good = cli.run("trace-lint --in " + fixture("good_trace.txt"));
  CHECK(good.code == 0);
  CHECK(good.out == "0 violations\n");

  auto good_json = cli.run("trace-lint --in " + fixture("good_trace.txt") +
                           " --json");
  CHECK(good_json.code == 0);
  CHECK(json::parse(good_json.out) == json::array());

  auto bad = cli.run("trace-lint --in " + fixture("bad_trace.txt"));
  CHECK(bad.code == 1);
  CHECK(bad.out.find("violations\n") != std::string::npos);

  auto bad_json = cli.run("trace-lint --in " + fixture("bad_trace.txt") +
                          " --json");
  CHECK(bad_json.code == 1);
  auto list = json::parse(bad_json.out);
  REQUIRE(list.is_array());
  REQUIRE(!list.empty());
  for (const auto& v : list) {
    CHECK(v.contains("code"));
    CHECK(v.contains("begin"));
    CHECK(v.contains("end"));
    CHECK(v.contains("detail"));
  }

  CHECK(cli.run("trace-lint --in " + cli.file("missing.txt")).code == 1);
}

TEST_CASE("reward-score aggregates a judge response file") {
  Cli cli;
  auto res = cli.run("reward-score --in " + fixture("judge_t2i.json"));
  CHECK(res.code == 0);
  CHECK(res.out.rfind("rubric t2i reward 1.66667", 0) == 0);

  auto as_json = cli.run("reward-score --in " + fixture("judge_t2i.json") +
                         " --json");
  CHECK(as_json.code == 0);
  auto j = json::parse(as_json.out);
  CHECK(j["rubric"] == "t2i");
  CHECK(j["scalar"].get<double>() == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(j["clipped"] == false);
  CHECK(j["subscores"]["consistency"] == 2);

  const std::string prose = cli.file("prose.txt");
  util::write_file(prose, "no scores here at all\n");
  CHECK(cli.run("reward-score --in " + prose).code == 1);
}

TEST_CASE("corpus-build reports the fixture counts") {
  Cli cli;
  const std::string out = cli.file("corpus.jsonl");
  auto res = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                     " --out " + out + " --annotator mock:" +
                     fixture("annotator12.json") + " --fixed-time 1700000000");
  CHECK(res.code == 0);
  CHECK(res.out ==
        "built " + out + ": 12 records, 9 accepted, 3 rejected, 0 skipped\n");

  auto stats = json::parse(util::read_file(out + ".stats.json"));
  CHECK(stats["total"] == 12);
  CHECK(stats["accepted"] == 9);

  const std::string out2 = cli.file("corpus2.jsonl");
  auto res2 = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                      " --out " + out2 + " --annotator mock:" +
                      fixture("annotator12.json") +
                      " --fixed-time 1700000000 --json");
  CHECK(res2.code == 0);
  auto j = json::parse(res2.out);
  CHECK(j["total"] == 12);
  CHECK(j["rejected_by_reason"]["FormatViolation"] == 1);

  // missing inputs are a usage problem
  CHECK(cli.run("corpus-build --out " + cli.file("x.jsonl")).code == 2);
}

TEST_CASE("corpus-validate distinguishes clean and dirty corpora") {
  Cli cli;
  const std::string corpus = build_fixture_corpus(cli, "corpus.jsonl");

  auto dirty = cli.run("corpus-validate --in " + corpus);
  CHECK(dirty.code == 1);  // fixture corpus carries three rejected records
  CHECK(dirty.out.find("3 rejected") != std::string::npos);
  CHECK(dirty.out.find("0 verdict mismatches") != std::string::npos);

  auto dirty_json = cli.run("corpus-validate --in " + corpus + " --json");
  CHECK(dirty_json.code == 1);
  auto j = json::parse(dirty_json.out);
  CHECK(j["mismatches"] == 0);
  CHECK(j["duplicate_ids"] == 0);
  CHECK(j["stats"]["rejected"] == 3);

  // an accepted-only subset validates clean
  const std::string subset = cli.file("subset.jsonl");
  REQUIRE(cli.run("corpus-sample --in " + corpus + " --out " + subset +
                  " --k 9 --seed 3")
              .code == 0);
  auto clean = cli.run("corpus-validate --in " + subset);
  CHECK(clean.code == 0);
}

TEST_CASE("corpus-sample is deterministic and honors the shortfall error") {
  Cli cli;
  const std::string corpus = build_fixture_corpus(cli, "corpus.jsonl");

  const std::string s1 = cli.file("s1.jsonl");
  const std::string s2 = cli.file("s2.jsonl");
  auto r1 = cli.run("corpus-sample --in " + corpus + " --out " + s1 +
                    " --k 4 --seed 7 --json");
  CHECK(r1.code == 0);
  auto j = json::parse(r1.out);
  CHECK(j["written"] == 4);
  CHECK(j["accepted_total"] == 9);
  CHECK(j["per_task_kind"]["text_to_image"] == 3);
  CHECK(j["per_task_kind"]["image_edit"] == 1);

  REQUIRE(cli.run("corpus-sample --in " + corpus + " --out " + s2 +
                  " --k 4 --seed 7")
              .code == 0);
  CHECK(util::read_file(s1) == util::read_file(s2));

  auto over = cli.run("corpus-sample --in " + corpus + " --out " +
                      cli.file("s3.jsonl") + " --k 10 --seed 7");
  CHECK(over.code == 1);
  CHECK(over.err.find("short by 1") != std::string::npos);
}

TEST_CASE("seed precedence runs config below flags below environment") {
  Cli cli;
  const std::string corpus = build_fixture_corpus(cli, "corpus.jsonl");

  // find two seeds whose size-4 subsets differ, so the checks have teeth
  std::uint64_t seed_a = 0, seed_b = 0;
  std::string bytes_a, bytes_b;
  for (std::uint64_t s = 1; s <= 30 && seed_b == 0; ++s) {
    const std::string probe = cli.file("probe.jsonl");
    corpus::sample_rl_subset(corpus, 4, s, probe);
    const std::string bytes = util::read_file(probe);
    if (seed_a == 0) {
      seed_a = s;
      bytes_a = bytes;
    } else if (bytes != bytes_a) {
      seed_b = s;
      bytes_b = bytes;
    }
  }
  REQUIRE(seed_b != 0);

  const std::string config = cli.file("config.json");
  util::write_file(config, json{{"seed", seed_a}}.dump());

  auto sample_with = [&](const std::string& extra_args,
                         const std::string& env) {
    const std::string out = cli.file("prec.jsonl");
    auto res = cli.run("corpus-sample --in " + corpus + " --out " + out +
                           " --k 4 --config " + config + extra_args,
                       env);
    REQUIRE(res.code == 0);
    return util::read_file(out);
  };

  CHECK(sample_with("", "") == bytes_a);  // config alone supplies the seed
  CHECK(sample_with(" --seed " + std::to_string(seed_b), "") == bytes_b);
  CHECK(sample_with(" --seed " + std::to_string(seed_a),
                    "PLANEXEC_SEED=" + std::to_string(seed_b)) == bytes_b);
}

TEST_CASE("a fixed timestamp can come from the environment") {
  Cli cli;
  const std::string flagged = build_fixture_corpus(cli, "flagged.jsonl");

  const std::string env_out = cli.file("env.jsonl");
  auto res = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                         " --out " + env_out + " --annotator mock:" +
                         fixture("annotator12.json"),
                     "PLANEXEC_FIXED_TIME=1700000000");
  REQUIRE(res.code == 0);
  CHECK(util::read_file(env_out) == util::read_file(flagged));
}

TEST_CASE("record and replay rebuild the corpus byte for byte") {
  Cli cli;
  const std::string transcript = cli.file("transcript.jsonl");
  const std::string first = cli.file("first.jsonl");
  const std::string second = cli.file("second.jsonl");

  auto rec = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                     " --out " + first + " --annotator mock:" +
                     fixture("annotator12.json") +
                     " --fixed-time 1700000000 --record " + transcript);
  REQUIRE(rec.code == 0);

  auto rep = cli.run("corpus-build --in " + fixture("examples12.jsonl") +
                     " --out " + second + " --annotator mock:" +
                     fixture("annotator12.json") +
                     " --fixed-time 1700000000 --replay " + transcript);
  REQUIRE(rep.code == 0);

  CHECK(util::read_file(first) == util::read_file(second));
  CHECK(util::read_file(first + ".stats.json") ==
        util::read_file(second + ".stats.json"));
}

TEST_CASE("flow-check validates the sampler against the closed form") {
  Cli cli;
  auto res = cli.run("flow-check --json --seed 1");
  CHECK(res.code == 0);
  auto j = json::parse(res.out);
  CHECK(j["mean_ok"] == true);
  CHECK(j["variance_ok"] == true);
  CHECK(j["steps"] == 512);
  CHECK(j["samples"] == 100000);
}

TEST_CASE("train-phase1 runs from a config file and emits metrics") {
  Cli cli;
  const std::string config = cli.file("phase1.json");
  util::write_file(config, json{{"group_size", 8},
                                {"iterations", 30},
                                {"lr", 0.1},
                                {"seed", 11},
                                {"judge", "builtin:judge-bandit?win=3"}}
                               .dump());
  const std::string metrics = cli.file("metrics.jsonl");
  auto res = cli.run("train-phase1 --config " + config + " --metrics " +
                     metrics + " --json");
  CHECK(res.code == 0);
  auto j = json::parse(res.out);
  CHECK(j["iterations"] == 30);
  CHECK(j["failed_iterations"] == 0);
  REQUIRE(j.contains("final_probabilities"));
  CHECK(j["final_probabilities"].size() == 4);
  CHECK(j["final_probabilities"][3].get<double>() > 0.25);
  CHECK(j["metrics_path"] == metrics);
  CHECK(util::read_file(metrics + ".reward.tsv")
            .rfind("# iteration\tmean_reward", 0) == 0);

  // the --iterations flag overrides the config value
  auto shorter = cli.run("train-phase1 --config " + config +
                         " --iterations 5 --json");
  CHECK(shorter.code == 0);
  CHECK(json::parse(shorter.out)["iterations"] == 5);
}

TEST_CASE("train-phase2 runs, gates and reports the moved flow") {
  Cli cli;
  const std::string config = cli.file("phase2.json");
  util::write_file(config, json{{"group_size", 8},
                                {"iterations", 20},
                                {"lr", 0.05},
                                {"seed", 3},
                                {"noise_level", 0.3},
                                {"allow_unordered_phases", true}}
                               .dump());
  auto res = cli.run("train-phase2 --config " + config + " --json");
  CHECK(res.code == 0);
  auto j = json::parse(res.out);
  CHECK(j["iterations"] == 20);
  CHECK(j["target_x"] == 1.5);
  CHECK(j["data_mean"].get<double>() > 0.0);  // walked toward the target

  // without the unordered escape hatch the phase gate is a state error
  const std::string gated = cli.file("gated.json");
  util::write_file(gated, json{{"group_size", 8},
                               {"iterations", 2},
                               {"noise_level", 0.3}}
                              .dump());
  CHECK(cli.run("train-phase2 --config " + gated).code == 1);

  // a deterministic sampler is a configuration error
  const std::string frozen = cli.file("frozen.json");
  util::write_file(frozen, json{{"group_size", 8},
                                {"iterations", 2},
                                {"noise_level", 0.0},
                                {"allow_unordered_phases", true}}
                               .dump());
  CHECK(cli.run("train-phase2 --config " + frozen).code == 2);
}

TEST_CASE("report-plot turns metrics into plot-ready series") {
  Cli cli;
  const std::string config = cli.file("phase1.json");
  util::write_file(config, json{{"group_size", 4},
                                {"iterations", 6},
                                {"lr", 0.1},
                                {"seed", 2},
                                {"judge", "builtin:judge-bandit?win=3"}}
                               .dump());
  const std::string metrics = cli.file("metrics.jsonl");
  REQUIRE(cli.run("train-phase1 --config " + config + " --metrics " + metrics)
              .code == 0);

  const std::string prefix = cli.file("series");
  auto res = cli.run("report-plot --in " + metrics + " --out " + prefix +
                     " --json");
  CHECK(res.code == 0);
  auto j = json::parse(res.out);
  CHECK(j["records"] == 6);
  CHECK(j["reward_series"] == prefix + ".reward.tsv");
  CHECK(util::read_file(prefix + ".reward.tsv")
            .rfind("# iteration\tmean_reward", 0) == 0);
  CHECK(util::read_file(prefix + ".timing.tsv")
            .rfind("# iteration\trollout_seconds", 0) == 0);

  const std::string empty = cli.file("empty.jsonl");
  util::write_file(empty, "");
  CHECK(cli.run("report-plot --in " + empty).code == 1);
}

TEST_CASE("bad config files are usage errors") {
  Cli cli;
  const std::string broken = cli.file("broken.json");
  util::write_file(broken, "{nope");
  CHECK(cli.run("train-phase1 --config " + broken).code == 2);
  CHECK(cli.run("flow-check --config " + broken).code == 2);
}

TEST_SUITE_END();
