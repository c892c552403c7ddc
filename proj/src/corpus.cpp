#include "planexec/corpus.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "planexec/rng.hpp"
#include "planexec/textutil.hpp"
#include "planexec/util.hpp"

namespace planexec::corpus {

namespace {

using nlohmann::json;

/// Generic words that do not count as concrete visual content when
/// deciding whether an answer actually specifies something to draw.
const std::unordered_set<std::string>& non_concrete_words() {
  static const std::unordered_set<std::string> words = {
      "add",      "adjust",   "answer",   "change",   "create",  "depict",
      "describe", "detail",   "detailed", "draw",     "edit",    "explain",
      "feature",  "generate", "give",     "image",    "include", "lighting",
      "make",     "output",   "paint",    "photo",    "photograph",
      "picture",  "place",    "put",      "quality",  "remove",  "render",
      "rendered", "rendering", "replace", "resolution", "result", "scene",
      "set",      "show",     "style",    "turn",     "use",     "version",
      "view"};
  return words;
}

bool has_concrete_token(const std::string& answer) {
  for (const auto& w : text::content_words(answer)) {
    if (!non_concrete_words().count(w)) return true;
  }
  return false;
}

bool has_meta_phrase(const std::string& answer) {
  return text::ifind(answer, "explain") != std::string::npos ||
         text::ifind(answer, "the answer is") != std::string::npos ||
         answer.find('?') != std::string::npos;
}

std::string violation_summary(const std::vector<trace::Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += trace::to_string(v.code);
    if (!v.detail.empty()) out += " (" + v.detail + ")";
  }
  return out;
}

void append_detail(std::string& detail, const std::string& piece) {
  if (piece.empty()) return;
  if (!detail.empty()) detail += " | ";
  detail += piece;
}

}  // namespace

json to_json(const InstructionExample& ex) {
  json j{{"id", ex.id},
         {"instruction", ex.instruction},
         {"source_tag", ex.source_tag},
         {"task_kind", trace::to_string(ex.task_kind)}};
  if (ex.reference_image) j["reference_image"] = *ex.reference_image;
  if (ex.target_image) j["target_image"] = *ex.target_image;
  return j;
}

InstructionExample example_from_json(const json& j) {
  InstructionExample ex;
  try {
    ex.id = j.at("id").get<std::string>();
    ex.instruction = j.at("instruction").get<std::string>();
    ex.source_tag = j.value("source_tag", std::string("unknown"));
    if (j.contains("reference_image") && !j["reference_image"].is_null()) {
      ex.reference_image = j["reference_image"].get<std::string>();
    }
    if (j.contains("target_image") && !j["target_image"].is_null()) {
      ex.target_image = j["target_image"].get<std::string>();
    }
    if (j.contains("task_kind")) {
      ex.task_kind = trace::task_kind_from_string(j["task_kind"].get<std::string>());
    } else {
      ex.task_kind = trace::classify_task(ex.instruction,
                                          ex.reference_image.has_value())
                         .kind;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad instruction example: ") + e.what());
  }
  return ex;
}

std::string to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::FormatViolation: return "FormatViolation";
    case RejectReason::EditOnlyViolation: return "EditOnlyViolation";
    case RejectReason::NonVisualTarget: return "NonVisualTarget";
    case RejectReason::TracePromptInconsistency:
      return "TracePromptInconsistency";
  }
  throw DomainError("unknown reject reason");
}

RejectReason reject_reason_from_string(const std::string& s) {
  if (s == "FormatViolation") return RejectReason::FormatViolation;
  if (s == "EditOnlyViolation") return RejectReason::EditOnlyViolation;
  if (s == "NonVisualTarget") return RejectReason::NonVisualTarget;
  if (s == "TracePromptInconsistency")
    return RejectReason::TracePromptInconsistency;
  throw DomainError("unknown reject reason " + s);
}

json to_json(const FilterVerdict& v) {
  json reasons = json::array();
  for (auto r : v.reasons) reasons.push_back(to_string(r));
  return json{{"accepted", v.accepted},
              {"reasons", std::move(reasons)},
              {"detail", v.detail}};
}

FilterVerdict verdict_from_json(const json& j) {
  FilterVerdict v;
  v.accepted = j.at("accepted").get<bool>();
  for (const auto& r : j.at("reasons")) {
    v.reasons.push_back(reject_reason_from_string(r.get<std::string>()));
  }
  v.detail = j.value("detail", std::string());
  return v;
}

json to_json(const CorpusRecord& r) {
  json j{{"example", to_json(r.example)},
         {"raw_trace", r.raw_trace},
         {"verdict", to_json(r.verdict)},
         {"annotator_id", r.annotator_id},
         {"created_at", r.created_at},
         {"revision", r.revision},
         {"placeholder_replacements", r.placeholder_replacements}};
  if (r.trace) {
    j["trace"] = json{{"stage1_analysis", r.trace->think.stage1_analysis},
                      {"stage2_reasoning", r.trace->think.stage2_reasoning},
                      {"stage3_strategy", r.trace->think.stage3_strategy},
                      {"answer", r.trace->answer},
                      {"task_kind", trace::to_string(r.trace->task_kind)}};
    if (r.trace->think.stage2_result) {
      j["trace"]["stage2_result"] = *r.trace->think.stage2_result;
    }
  }
  return j;
}

CorpusRecord record_from_json(const json& j) {
  CorpusRecord r;
  try {
    r.example = example_from_json(j.at("example"));
    r.raw_trace = j.at("raw_trace").get<std::string>();
    r.verdict = verdict_from_json(j.at("verdict"));
    r.annotator_id = j.value("annotator_id", std::string());
    r.created_at = j.value("created_at", std::string());
    r.revision = j.value("revision", 0);
    r.placeholder_replacements = j.value("placeholder_replacements", 0);
    if (j.contains("trace")) {
      const auto& t = j["trace"];
      trace::ReasoningTrace tr;
      tr.think.stage1_analysis = t.at("stage1_analysis").get<std::string>();
      tr.think.stage2_reasoning = t.at("stage2_reasoning").get<std::string>();
      if (t.contains("stage2_result")) {
        tr.think.stage2_result = t["stage2_result"].get<std::string>();
      }
      tr.think.stage3_strategy = t.at("stage3_strategy").get<std::string>();
      tr.answer = t.at("answer").get<std::string>();
      tr.task_kind = trace::task_kind_from_string(t.at("task_kind").get<std::string>());
      r.trace = std::move(tr);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad corpus record: ") + e.what());
  }
  return r;
}

json to_json(const CorpusStats& s) {
  return json{{"total", s.total},
              {"accepted", s.accepted},
              {"rejected", s.rejected},
              {"failed", s.failed},
              {"io_skipped", s.io_skipped},
              {"rejected_by_reason", s.rejected_by_reason},
              {"per_source", s.per_source},
              {"per_task_kind", s.per_task_kind}};
}

CorpusStats stats_from_json(const json& j) {
  CorpusStats s;
  s.total = j.at("total").get<std::size_t>();
  s.accepted = j.at("accepted").get<std::size_t>();
  s.rejected = j.at("rejected").get<std::size_t>();
  s.failed = j.value("failed", std::size_t{0});
  s.io_skipped = j.value("io_skipped", std::size_t{0});
  if (j.contains("rejected_by_reason")) {
    j["rejected_by_reason"].get_to(s.rejected_by_reason);
  }
  if (j.contains("per_source")) j["per_source"].get_to(s.per_source);
  if (j.contains("per_task_kind")) j["per_task_kind"].get_to(s.per_task_kind);
  return s;
}

FilterVerdict validate_record(const CorpusRecord& record,
                              const ValidateConfig& cfg) {
  FilterVerdict verdict;
  const auto outcome = trace::parse_trace(
      record.raw_trace, record.example.task_kind, cfg.trace_cfg);

  if (!outcome.ok()) {
    verdict.reasons.push_back(RejectReason::FormatViolation);
    append_detail(verdict.detail, violation_summary(outcome.violations));
    verdict.accepted = false;
    return verdict;
  }

  const trace::ReasoningTrace& tr = *outcome.trace;

  const auto edit_hits = trace::check_edit_only(tr, cfg.trace_cfg);
  if (!edit_hits.empty()) {
    verdict.reasons.push_back(RejectReason::EditOnlyViolation);
    append_detail(verdict.detail, violation_summary(edit_hits));
  }

  if (!has_concrete_token(tr.answer) || has_meta_phrase(tr.answer)) {
    verdict.reasons.push_back(RejectReason::NonVisualTarget);
    append_detail(verdict.detail,
                  "answer lacks a concrete visual target or is meta-phrased");
  }

  if (tr.think.stage2_result) {
    const double sim = text::jaccard(text::content_words(*tr.think.stage2_result),
                                     text::content_words(tr.answer));
    if (sim < cfg.jaccard_threshold) {
      std::ostringstream msg;
      msg << "result/answer content-word overlap " << sim << " below "
          << cfg.jaccard_threshold;
      verdict.reasons.push_back(RejectReason::TracePromptInconsistency);
      append_detail(verdict.detail, msg.str());
    }
  }

  verdict.accepted = verdict.reasons.empty();
  return verdict;
}

const std::string& default_system_prompt() {
  static const std::string prompt = [] {
    std::ostringstream p;
    p << "You are a visual planning assistant. For each instruction, reply "
         "with a reasoning trace in exactly this layout:\n"
      << trace::kThinkOpen << "\n"
      << trace::kStage1Header << "\n...\n\n"
      << trace::kStage2Header << "\n...\n"
      << trace::kResultMarker << " ...\n\n"
      << trace::kStage3Header << "\n...\n"
      << trace::kThinkClose << "\n\n"
      << trace::kAnswerOpen << "enhanced prompt" << trace::kAnswerClose << "\n"
      << "Refer to any input image only as " << trace::kCanonicalPlaceholder
      << ". For edit tasks, the enhanced prompt must describe only the "
         "intended changes.";
    return p.str();
  }();
  return prompt;
}

AnnotateOutcome annotate(const InstructionExample& example,
                         backend::Backend& annotator,
                         const std::string& system_prompt) {
  const auto request = backend::annotator_request(
      system_prompt, example.instruction, trace::to_string(example.task_kind),
      example.reference_image, example.id);
  auto [response, record] = annotator.call(request);
  AnnotateOutcome out;
  out.text = response.at("text").get<std::string>();
  out.attempts = record.attempts;
  out.latency = record.latency;
  return out;
}

namespace {

struct ProcessResult {
  bool failed = false;       // transport failure, quarantined
  std::string error;         // failure message
  CorpusRecord record;       // valid when !failed
};

CorpusRecord make_record(const InstructionExample& ex, const std::string& raw,
                         const BuildConfig& cfg, const std::string& annotator_id,
                         int revision) {
  CorpusRecord rec;
  rec.example = ex;
  auto normalized = trace::normalize_placeholders(raw, cfg.validate.trace_cfg);
  rec.raw_trace = std::move(normalized.text);
  rec.placeholder_replacements = normalized.count;
  rec.revision = revision;
  rec.annotator_id = annotator_id;
  rec.created_at = util::iso8601_utc(util::effective_time(cfg.fixed_time));
  auto outcome = trace::parse_trace(rec.raw_trace, ex.task_kind,
                                    cfg.validate.trace_cfg);
  rec.trace = std::move(outcome.trace);
  rec.verdict = validate_record(rec, cfg.validate);
  return rec;
}

ProcessResult process_example(const InstructionExample& ex,
                              backend::Backend& annotator,
                              const BuildConfig& cfg) {
  ProcessResult result;
  const std::string annotator_id =
      backend::kind_name(annotator.spec().kind) + ":" +
      (annotator.spec().kind == backend::Kind::Mock ? annotator.spec().mock_script
                                                    : annotator.spec().endpoint);
  try {
    const auto first = annotate(ex, annotator, cfg.system_prompt);
    result.record = make_record(ex, first.text, cfg, annotator_id, 0);

    if (!result.record.verdict.accepted && cfg.repair) {
      std::string repair_prompt = cfg.system_prompt;
      repair_prompt += "\nThe previous trace was rejected (";
      repair_prompt += result.record.verdict.detail;
      repair_prompt += "). Produce a corrected trace.";
      try {
        const auto second = annotate(ex, annotator, repair_prompt);
        result.record = make_record(ex, second.text, cfg, annotator_id, 1);
      } catch (const TransportError&) {
        // The first annotation stands; losing the repair only loses the
        // chance to rescue an already-rejected record.
      }
    }
  } catch (const TransportError& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

}  // namespace

CorpusStats build_corpus(std::istream& input, backend::Backend& annotator,
                         const BuildConfig& cfg) {
  if (cfg.out_path.empty()) {
    throw ConfigError("corpus build needs an output path");
  }
  const std::size_t window = std::max<std::size_t>(1, cfg.parallelism);

  CorpusStats stats;
  util::LineWriter writer(cfg.out_path);
  std::ofstream quarantine;  // opened on first failure

  auto commit = [&](const InstructionExample& ex, const ProcessResult& res) {
    if (res.failed) {
      ++stats.failed;  // quarantined, outside the total conservation sum
      if (!quarantine.is_open()) {
        quarantine.open(cfg.out_path + ".quarantine.jsonl");
        if (!quarantine) {
          throw IoError("cannot open quarantine sidecar for " + cfg.out_path);
        }
      }
      quarantine << json{{"example", to_json(ex)}, {"error", res.error}}.dump()
                 << "\n";
      return;
    }
    const CorpusRecord& rec = res.record;
    ++stats.total;
    if (rec.verdict.accepted) {
      ++stats.accepted;
    } else {
      ++stats.rejected;
      for (auto r : rec.verdict.reasons) {
        ++stats.rejected_by_reason[to_string(r)];
      }
    }
    ++stats.per_source[rec.example.source_tag];
    ++stats.per_task_kind[trace::to_string(rec.example.task_kind)];
    writer.line(to_json(rec).dump());
  };

  // Sliding window: up to `window` examples in flight, results committed
  // in input order so the output is deterministic.
  std::deque<std::pair<InstructionExample, std::future<ProcessResult>>> inflight;
  auto drain_one = [&] {
    auto [ex, fut] = std::move(inflight.front());
    inflight.pop_front();
    commit(ex, fut.get());
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (line.empty()) continue;
    InstructionExample ex;
    try {
      ex = example_from_json(json::parse(line));
    } catch (const std::exception& e) {
      ++stats.io_skipped;
      ++stats.total;  // conservation: total = accepted + rejected + io_skipped
      std::cerr << "corpus build: skipping input line " << line_no << ": "
                << e.what() << "\n";
      continue;
    }
    const auto policy =
        window == 1 ? std::launch::deferred : std::launch::async;
    inflight.emplace_back(
        ex, std::async(policy, [ex, &annotator, &cfg] {
          return process_example(ex, annotator, cfg);
        }));
    if (inflight.size() >= window) drain_one();
  }
  while (!inflight.empty()) drain_one();

  util::write_file(cfg.out_path + ".stats.json", to_json(stats).dump(2) + "\n");
  return stats;
}

CorpusStats build_corpus(const std::string& in_path, backend::Backend& annotator,
                         const BuildConfig& cfg) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path + " for reading");
  return build_corpus(in, annotator, cfg);
}

std::vector<CorpusRecord> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (text::starts_with(line, "#")) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": partial-file marker found");
    }
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

ValidationReport validate_corpus(const std::string& path,
                                 const ValidateConfig& cfg) {
  ValidationReport report;
  std::unordered_set<std::string> seen_ids;
  for (const auto& rec : load_corpus(path)) {
    ++report.stats.total;
    if (!seen_ids.insert(rec.example.id).second) ++report.duplicate_ids;
    const auto verdict = validate_record(rec, cfg);
    if (verdict.accepted) {
      ++report.stats.accepted;
    } else {
      ++report.stats.rejected;
      for (auto r : verdict.reasons) {
        ++report.stats.rejected_by_reason[to_string(r)];
      }
    }
    ++report.stats.per_source[rec.example.source_tag];
    ++report.stats.per_task_kind[trace::to_string(rec.example.task_kind)];
    if (verdict.accepted != rec.verdict.accepted) ++report.mismatches;
  }
  return report;
}

SampleSummary sample_rl_subset(const std::string& corpus_path, std::size_t k,
                               std::uint64_t seed, const std::string& out_path) {
  std::ifstream in(corpus_path);
  if (!in) throw IoError("cannot open " + corpus_path + " for reading");

  struct AcceptedLine {
    std::string line;
    std::string kind;
  };
  std::vector<AcceptedLine> accepted;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = record_from_json(json::parse(line));
    if (rec.verdict.accepted) {
      accepted.push_back({line, trace::to_string(rec.example.task_kind)});
    }
  }

  if (accepted.size() < k) {
    throw DomainError("need " + std::to_string(k) + " accepted records, have " +
                      std::to_string(accepted.size()) + " (short by " +
                      std::to_string(k - accepted.size()) + ")");
  }

  // Indices per task kind, in corpus order; kinds iterate in name order
  // so the draw is deterministic.
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    strata[accepted[i].kind].push_back(i);
  }

  // Largest-remainder allocation keeps every kind within one record of
  // its exact proportional share.
  const double total = static_cast<double>(accepted.size());
  std::map<std::string, std::size_t> targets;
  std::vector<std::pair<double, std::string>> remainders;
  std::size_t allocated = 0;
  for (const auto& [kind, idx] : strata) {
    const double exact = static_cast<double>(k) * idx.size() / total;
    const auto base = static_cast<std::size_t>(exact);
    targets[kind] = base;
    allocated += base;
    remainders.emplace_back(exact - static_cast<double>(base), kind);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; allocated < k; ++i, ++allocated) {
    ++targets[remainders[i % remainders.size()].second];
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [kind, idx] : strata) {
    rng.shuffle(idx);
    const std::size_t take = std::min(targets[kind], idx.size());
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + take);
  }
  std::sort(chosen.begin(), chosen.end());

  std::ostringstream out;
  SampleSummary summary;
  summary.accepted_total = accepted.size();
  for (std::size_t i : chosen) {
    out << accepted[i].line << "\n";
    ++summary.written;
    ++summary.per_task_kind[accepted[i].kind];
  }
  util::write_file(out_path, out.str());
  return summary;
}

}  // namespace planexec::corpus
