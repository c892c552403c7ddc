#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace planexec::trace {

/// Task dichotomy: creation from scratch vs. modification of a reference.
enum class TaskKind { TextToImage, ImageEdit };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

enum class ViolationCode {
  MissingThinkOpen,
  MissingThinkClose,
  MissingAnswer,
  MissingStageHeader,
  EmptyStage,
  EmptyAnswer,
  NonCanonicalPlaceholder,
  EditOnlyBreach,
  MarkupInAnswer,
};

std::string to_string(ViolationCode code);

/// One structural defect, with a [begin, end) character span into the text
/// the check ran over (the raw input for parse_trace, the answer text for
/// check_edit_only). Spans never exceed the text bounds.
struct Violation {
  ViolationCode code;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// The three-stage think block. Stage texts are whitespace-normalized; the
/// optional stage-2 result holds the concrete visual outcome statement.
struct ThinkBlock {
  std::string stage1_analysis;
  std::string stage2_reasoning;
  std::optional<std::string> stage2_result;
  std::string stage3_strategy;

  bool operator==(const ThinkBlock&) const = default;
};

struct ReasoningTrace {
  ThinkBlock think;
  std::string answer;
  TaskKind task_kind = TaskKind::TextToImage;

  bool operator==(const ReasoningTrace&) const = default;
};

/// Tunables for parsing and the rule-based checks. Defaults are the shipped
/// rule lists; a toolkit config file may replace any of them.
struct TraceConfig {
  std::size_t max_length = 32768;
  std::vector<std::string> placeholder_variants = {"[image]", "<img>",
                                                   "<image_1>", "<IMAGE>"};
  std::vector<std::string> edit_cue_lexemes = {"edit", "replace", "remove",
                                               "change the image"};
  /// ECMAScript regexes, matched case-insensitively against the answer.
  std::vector<std::string> edit_only_patterns = {
      R"(\bkeep(?:ing)?\b[^.,;]*\b(?:unchanged|the same)\b)",
      R"(\bremains?\s+unchanged\b)",
      R"(\bexactly as in the original\b)",
      R"(\bpreserve\s+the\b)",
      R"(\bthe rest of the image\b)",
  };
  /// Clause-level rule: a clause mentioning "background" with none of these
  /// verbs is treated as a preservation description.
  bool background_clause_rule = true;
  std::vector<std::string> edit_verbs = {
      "change", "replace", "remove", "add",    "make",   "turn",
      "edit",   "recolor", "swap",   "delete", "convert", "adjust"};
  /// Accepted in addition to the canonical headers (case-insensitive).
  std::vector<std::string> stage1_aliases;
  std::vector<std::string> stage2_aliases;
  std::vector<std::string> stage3_aliases;
};

/// Canonical markers of the trace format.
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kStage1Header =
    "Step 1: Input Analysis & Intent Identification";
inline constexpr std::string_view kStage2Header =
    "Step 2: Reasoning Activation & Result Concretization";
inline constexpr std::string_view kStage3Header =
    "Step 3: Strategy Formulation & Prompt Construction";
inline constexpr std::string_view kResultMarker =
    "The concrete visual result of my reasoning is:";
inline constexpr std::string_view kCanonicalPlaceholder = "<image>";
/// Stage-2 sentinel for prompts that need no reasoning beyond the literal text.
inline constexpr std::string_view kNoReasoningSentinel =
    "No additional reasoning required.";

struct ParseOutcome {
  std::optional<ReasoningTrace> trace;  ///< set iff violations is empty
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

/// Parse raw text into a trace. Total: any byte string yields either a trace
/// or a non-empty violation list, never an exception. All violations are
/// reported, not just the first. Inputs longer than cfg.max_length are parsed
/// on the capped prefix.
///
/// The task kind cannot be recovered from bare text, so the caller supplies
/// it (the corpus pipeline knows it from the owning example).
ParseOutcome parse_trace(std::string_view raw,
                         TaskKind kind = TaskKind::TextToImage,
                         const TraceConfig& cfg = {});

/// Structural validity check mirroring exactly what parse_trace would flag on
/// the rendered form: a trace validates clean iff its render re-parses clean.
/// Does not include the edit-only rules (see check_edit_only).
std::vector<Violation> validate_trace(const ReasoningTrace& trace,
                                      const TraceConfig& cfg = {});

/// Canonical byte-exact serialization. Throws DomainError (with the violation
/// list in the message) when the trace fails validate_trace.
std::string render_trace(const ReasoningTrace& trace,
                         const TraceConfig& cfg = {});

/// Render without validating; used for diagnostics on rejected traces.
std::string render_trace_unchecked(const ReasoningTrace& trace);

struct NormalizeResult {
  std::string text;
  int count = 0;  ///< number of replaced placeholder variants
};

/// Rewrite every recognized image-reference variant to the canonical
/// placeholder token. Idempotent.
NormalizeResult normalize_placeholders(std::string_view raw,
                                       const TraceConfig& cfg = {});

struct TaskClassification {
  TaskKind kind;
  std::optional<std::string> warning;
};

/// Reference-image presence decides the kind; edit-cue lexemes in a
/// text-to-image instruction attach a non-fatal warning.
TaskClassification classify_task(std::string_view instruction,
                                 bool has_reference_image,
                                 const TraceConfig& cfg = {});

/// Edit-only rule check. Returns one EditOnlyBreach per matching answer
/// clause, spans indexing the answer text. Empty for text-to-image traces.
std::vector<Violation> check_edit_only(const ReasoningTrace& trace,
                                       const TraceConfig& cfg = {});

}  // namespace planexec::trace
