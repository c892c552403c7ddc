#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/backends.hpp"
#include "planexec/trace.hpp"

namespace planexec::corpus {

/// One raw instruction-tuning example. Image handles are opaque
/// strings; the pipeline never opens them.
struct InstructionExample {
  std::string id;
  std::string instruction;
  std::optional<std::string> reference_image;
  std::optional<std::string> target_image;
  std::string source_tag;
  trace::TaskKind task_kind = trace::TaskKind::TextToImage;
};

nlohmann::json to_json(const InstructionExample& ex);
InstructionExample example_from_json(const nlohmann::json& j);

/// The four rejection filters, applied in this order.
enum class RejectReason {
  FormatViolation,
  EditOnlyViolation,
  NonVisualTarget,
  TracePromptInconsistency,
};

std::string to_string(RejectReason reason);
RejectReason reject_reason_from_string(const std::string& s);

struct FilterVerdict {
  bool accepted = false;  // true iff reasons is empty
  std::vector<RejectReason> reasons;
  std::string detail;
};

nlohmann::json to_json(const FilterVerdict& v);
FilterVerdict verdict_from_json(const nlohmann::json& j);

struct CorpusRecord {
  InstructionExample example;
  std::string raw_trace;  // annotator text after placeholder normalization
  std::optional<trace::ReasoningTrace> trace;  // engaged when recoverable
  FilterVerdict verdict;
  std::string annotator_id;
  std::string created_at;  // ISO 8601 UTC
  int revision = 0;        // bumped by the rewrite/repair path
  int placeholder_replacements = 0;
};

nlohmann::json to_json(const CorpusRecord& r);
CorpusRecord record_from_json(const nlohmann::json& j);

/// One-pass corpus statistics. Conservation: total = accepted +
/// rejected + io_skipped, exactly. Annotation transport failures are
/// quarantined and tracked in `failed`, outside that sum.
struct CorpusStats {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;    // distinct rejected records
  std::size_t failed = 0;      // annotator transport failures (quarantined)
  std::size_t io_skipped = 0;  // unreadable input lines
  std::map<std::string, std::size_t> rejected_by_reason;
  std::map<std::string, std::size_t> per_source;
  std::map<std::string, std::size_t> per_task_kind;
};

nlohmann::json to_json(const CorpusStats& s);
CorpusStats stats_from_json(const nlohmann::json& j);

/// Knobs for filters (3) and (4) plus the trace grammar config used by
/// filters (1) and (2).
struct ValidateConfig {
  double jaccard_threshold = 0.3;
  trace::TraceConfig trace_cfg;
};

/// Apply the four filters in order to a populated record:
///   (1) trace grammar parse violations        -> FormatViolation
///   (2) edit-only breaches (edit tasks)       -> EditOnlyViolation
///   (3) answer lacks a concrete visual token,
///       or carries interrogative/meta phrasing -> NonVisualTarget
///   (4) stage-2 result vs answer content-word
///       Jaccard below threshold               -> TracePromptInconsistency
/// Purely deterministic; returns a verdict, never throws.
FilterVerdict validate_record(const CorpusRecord& record,
                              const ValidateConfig& cfg = {});

/// The default annotator system prompt (the canonical trace contract).
const std::string& default_system_prompt();

struct AnnotateOutcome {
  std::string text;
  std::size_t attempts = 0;
  std::chrono::milliseconds latency{0};
};

/// Fetch a raw trace for one example. Transport failures (after the
/// backend's retries) propagate as TransportError; the caller decides
/// whether to quarantine. Validation happens later.
AnnotateOutcome annotate(const InstructionExample& example,
                         backend::Backend& annotator,
                         const std::string& system_prompt = default_system_prompt());

struct BuildConfig {
  std::string out_path;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  std::optional<std::int64_t> fixed_time;  // reproducible created_at stamps
  bool repair = true;  // one re-annotation attempt for rejected records
  std::string system_prompt = default_system_prompt();
  ValidateConfig validate;
};

/// Stream examples (one JSON object per line) through annotate ->
/// normalize -> parse -> validate, appending one CorpusRecord per line
/// to cfg.out_path and a stats JSON to cfg.out_path + ".stats.json".
/// Unreadable lines are skipped with a stderr diagnostic and counted;
/// annotator transport failures land in cfg.out_path +
/// ".quarantine.jsonl" (created lazily). Memory stays bounded by the
/// parallelism window, not the corpus size. Input ids are expected to
/// be unique; rejected records are re-annotated once with a repair
/// prompt when cfg.repair is set, keeping their id and bumping
/// revision. Write failures abort with a partial-file marker line.
CorpusStats build_corpus(std::istream& input, backend::Backend& annotator,
                         const BuildConfig& cfg);
CorpusStats build_corpus(const std::string& in_path, backend::Backend& annotator,
                         const BuildConfig& cfg);

/// Load every record of a corpus file (skipping blank lines). Throws
/// ParseError on malformed lines.
std::vector<CorpusRecord> load_corpus(const std::string& path);

struct ValidationReport {
  CorpusStats stats;          // recomputed over the file
  std::size_t mismatches = 0; // records whose stored verdict disagrees
  std::size_t duplicate_ids = 0;
};

/// Re-run validate_record over a corpus file and compare with the
/// stored verdicts.
ValidationReport validate_corpus(const std::string& path,
                                 const ValidateConfig& cfg = {});

struct SampleSummary {
  std::size_t accepted_total = 0;
  std::size_t written = 0;
  std::map<std::string, std::size_t> per_task_kind;  // chosen per kind
};

/// Uniform sample of k accepted records without replacement, stratified
/// by task kind (largest-remainder targets, so each kind's share stays
/// within one record of its corpus share). Chosen records are written
/// verbatim, in corpus order. Throws DomainError naming the shortfall
/// when fewer than k records are accepted.
SampleSummary sample_rl_subset(const std::string& corpus_path, std::size_t k,
                               std::uint64_t seed, const std::string& out_path);

}  // namespace planexec::corpus
