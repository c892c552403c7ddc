#include "planexec/trace.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "planexec/errors.hpp"
#include "planexec/textutil.hpp"

namespace planexec::trace {

namespace {

using text::collapse_ws;
using text::ifind;

struct HeaderHit {
  std::size_t begin = std::string_view::npos;  // header start in text
  std::size_t end = std::string_view::npos;    // one past header text
  bool found() const { return begin != std::string_view::npos; }
};

HeaderHit find_header(std::string_view body, std::string_view canonical,
                      const std::vector<std::string>& aliases,
                      std::size_t from) {
  HeaderHit best;
  auto consider = [&](std::string_view needle) {
    const std::size_t pos = ifind(body, needle, from);
    if (pos != std::string_view::npos &&
        (!best.found() || pos < best.begin)) {
      best.begin = pos;
      best.end = pos + needle.size();
    }
  };
  consider(canonical);
  for (const auto& a : aliases) consider(a);
  return best;
}

std::vector<std::string_view> structural_markers(const TraceConfig& cfg) {
  std::vector<std::string_view> m = {kThinkOpen,    kThinkClose, kAnswerOpen,
                                     kAnswerClose,  kStage1Header,
                                     kStage2Header, kStage3Header,
                                     kResultMarker};
  for (const auto& a : cfg.stage1_aliases) m.push_back(a);
  for (const auto& a : cfg.stage2_aliases) m.push_back(a);
  for (const auto& a : cfg.stage3_aliases) m.push_back(a);
  return m;
}

/// First structural marker embedded in a content field, or npos.
std::string_view find_embedded_marker(std::string_view content,
                                      const TraceConfig& cfg) {
  for (auto m : structural_markers(cfg)) {
    if (ifind(content, m) != std::string_view::npos) return m;
  }
  return {};
}

void flag_placeholders(std::string_view raw, const TraceConfig& cfg,
                       std::vector<Violation>& out) {
  for (const auto& variant : cfg.placeholder_variants) {
    if (variant.empty()) continue;
    std::size_t pos = 0;
    while ((pos = raw.find(variant, pos)) != std::string_view::npos) {
      out.push_back({ViolationCode::NonCanonicalPlaceholder, pos,
                     pos + variant.size(),
                     "placeholder variant '" + variant + "'"});
      pos += variant.size();
    }
  }
}

std::string stage_name(int i) {
  switch (i) {
    case 1: return "stage 1 (analysis)";
    case 2: return "stage 2 (reasoning)";
    default: return "stage 3 (strategy)";
  }
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::ImageEdit ? "image_edit" : "text_to_image";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "image_edit" || s == "i2i" || s == "edit")
    return TaskKind::ImageEdit;
  if (s == "text_to_image" || s == "t2i") return TaskKind::TextToImage;
  throw DomainError("unknown task kind: " + std::string(s));
}

std::string to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::MissingThinkOpen: return "MissingThinkOpen";
    case ViolationCode::MissingThinkClose: return "MissingThinkClose";
    case ViolationCode::MissingAnswer: return "MissingAnswer";
    case ViolationCode::MissingStageHeader: return "MissingStageHeader";
    case ViolationCode::EmptyStage: return "EmptyStage";
    case ViolationCode::EmptyAnswer: return "EmptyAnswer";
    case ViolationCode::NonCanonicalPlaceholder:
      return "NonCanonicalPlaceholder";
    case ViolationCode::EditOnlyBreach: return "EditOnlyBreach";
    case ViolationCode::MarkupInAnswer: return "MarkupInAnswer";
  }
  return "Unknown";
}

ParseOutcome parse_trace(std::string_view raw, TaskKind kind,
                         const TraceConfig& cfg) {
  ParseOutcome out;
  if (raw.size() > cfg.max_length) raw = raw.substr(0, cfg.max_length);

  flag_placeholders(raw, cfg, out.violations);

  // Think block boundaries, with recovery so later checks still run.
  const std::size_t open_pos = raw.find(kThinkOpen);
  std::size_t think_begin = 0;
  if (open_pos == std::string_view::npos) {
    out.violations.push_back({ViolationCode::MissingThinkOpen, 0, 0,
                              "no <think> tag"});
  } else {
    think_begin = open_pos + kThinkOpen.size();
  }

  const std::size_t close_pos = raw.find(kThinkClose, think_begin);
  const std::size_t answer_open_pos = raw.find(
      kAnswerOpen, close_pos == std::string_view::npos ? think_begin
                                                       : close_pos);
  std::size_t think_end;
  if (close_pos == std::string_view::npos) {
    out.violations.push_back({ViolationCode::MissingThinkClose, raw.size(),
                              raw.size(), "no </think> tag"});
    think_end = answer_open_pos == std::string_view::npos ? raw.size()
                                                          : answer_open_pos;
  } else {
    think_end = close_pos;
  }
  if (think_end < think_begin) think_end = think_begin;
  const std::string_view think_body =
      raw.substr(think_begin, think_end - think_begin);

  // Answer block. The close tag is searched from the end so stray markup
  // inside the answer surfaces as MarkupInAnswer instead of silent loss.
  std::string answer_text;
  std::size_t answer_begin_abs = 0;
  if (answer_open_pos == std::string_view::npos) {
    out.violations.push_back({ViolationCode::MissingAnswer, raw.size(),
                              raw.size(), "no <answer> block"});
  } else {
    answer_begin_abs = answer_open_pos + kAnswerOpen.size();
    const std::size_t answer_close_pos = raw.rfind(kAnswerClose);
    std::size_t answer_end_abs;
    if (answer_close_pos == std::string_view::npos ||
        answer_close_pos < answer_begin_abs) {
      out.violations.push_back({ViolationCode::MissingAnswer, raw.size(),
                                raw.size(), "answer closing tag not found"});
      answer_end_abs = raw.size();
    } else {
      answer_end_abs = answer_close_pos;
    }
    answer_text = collapse_ws(
        raw.substr(answer_begin_abs, answer_end_abs - answer_begin_abs));
  }

  // Stage headers inside the think body, in fixed order.
  const std::size_t base = think_begin;
  const HeaderHit h1 =
      find_header(think_body, kStage1Header, cfg.stage1_aliases, 0);
  if (!h1.found()) {
    out.violations.push_back({ViolationCode::MissingStageHeader, base, base,
                              "stage 1 header not found"});
  }
  const HeaderHit h2 = find_header(think_body, kStage2Header,
                                   cfg.stage2_aliases,
                                   h1.found() ? h1.end : 0);
  if (!h2.found()) {
    out.violations.push_back({ViolationCode::MissingStageHeader, base, base,
                              "stage 2 header not found"});
  }
  const HeaderHit h3 = find_header(think_body, kStage3Header,
                                   cfg.stage3_aliases,
                                   h2.found() ? h2.end : (h1.found() ? h1.end : 0));
  if (!h3.found()) {
    out.violations.push_back({ViolationCode::MissingStageHeader, base, base,
                              "stage 3 header not found"});
  }

  auto segment = [&](const HeaderHit& h, std::size_t next_begin)
      -> std::string_view {
    if (!h.found()) return {};
    const std::size_t seg_begin = h.end;
    const std::size_t seg_end = std::min(next_begin, think_body.size());
    if (seg_end <= seg_begin) return {};
    return think_body.substr(seg_begin, seg_end - seg_begin);
  };

  const std::string_view seg1 =
      segment(h1, h2.found() ? h2.begin : think_body.size());
  const std::string_view seg2 =
      segment(h2, h3.found() ? h3.begin : think_body.size());
  const std::string_view seg3 = segment(h3, think_body.size());

  ThinkBlock think;
  think.stage1_analysis = collapse_ws(seg1);

  // Stage 2 may carry the concrete-result statement; split it off.
  std::string_view reasoning_part = seg2;
  const std::size_t marker_pos = ifind(seg2, kResultMarker);
  if (marker_pos != std::string_view::npos) {
    reasoning_part = seg2.substr(0, marker_pos);
    const std::string result = collapse_ws(
        seg2.substr(marker_pos + kResultMarker.size()));
    if (result.empty()) {
      out.violations.push_back(
          {ViolationCode::EmptyStage, base + h2.end + marker_pos,
           base + h2.end + marker_pos,
           "result statement present but empty"});
    } else {
      think.stage2_result = result;
    }
  }
  think.stage2_reasoning = collapse_ws(reasoning_part);
  think.stage3_strategy = collapse_ws(seg3);

  auto flag_empty_stage = [&](const HeaderHit& h, const std::string& name,
                              const std::string& value) {
    if (h.found() && value.empty()) {
      out.violations.push_back({ViolationCode::EmptyStage, base + h.begin,
                                base + h.end, name + " is empty"});
    }
  };
  flag_empty_stage(h1, stage_name(1), think.stage1_analysis);
  flag_empty_stage(h2, stage_name(2), think.stage2_reasoning);
  flag_empty_stage(h3, stage_name(3), think.stage3_strategy);

  // Answer content rules.
  if (answer_open_pos != std::string_view::npos) {
    if (answer_text.empty()) {
      out.violations.push_back({ViolationCode::EmptyAnswer, answer_begin_abs,
                                answer_begin_abs, "answer is empty"});
    } else {
      const std::string_view markup = find_embedded_marker(answer_text, cfg);
      if (!markup.empty()) {
        const std::size_t at = ifind(answer_text, markup);
        out.violations.push_back(
            {ViolationCode::MarkupInAnswer, answer_begin_abs + at,
             answer_begin_abs + at + markup.size(),
             "markup '" + std::string(markup) + "' inside answer"});
      }
    }
  }

  for (auto& v : out.violations) {
    v.begin = std::min(v.begin, raw.size());
    v.end = std::min(std::max(v.end, v.begin), raw.size());
  }

  if (out.violations.empty()) {
    ReasoningTrace t;
    t.think = std::move(think);
    t.answer = std::move(answer_text);
    t.task_kind = kind;
    out.trace = std::move(t);
  }
  return out;
}

std::vector<Violation> validate_trace(const ReasoningTrace& trace,
                                      const TraceConfig& cfg) {
  std::vector<Violation> out;

  auto check_stage = [&](const std::string& value, int idx) {
    if (collapse_ws(value).empty()) {
      out.push_back({ViolationCode::EmptyStage, 0, 0,
                     stage_name(idx) + " is empty"});
      return;
    }
    const std::string_view markup = find_embedded_marker(value, cfg);
    if (!markup.empty()) {
      out.push_back({ViolationCode::MarkupInAnswer, 0, 0,
                     "structural marker '" + std::string(markup) + "' inside " +
                         stage_name(idx)});
    }
    std::vector<Violation> ph;
    flag_placeholders(value, cfg, ph);
    for (auto& v : ph) {
      v.begin = v.end = 0;
      out.push_back(v);
    }
  };
  check_stage(trace.think.stage1_analysis, 1);
  check_stage(trace.think.stage2_reasoning, 2);
  check_stage(trace.think.stage3_strategy, 3);
  if (trace.think.stage2_result) {
    if (collapse_ws(*trace.think.stage2_result).empty()) {
      out.push_back({ViolationCode::EmptyStage, 0, 0,
                     "result statement present but empty"});
    } else {
      check_stage(*trace.think.stage2_result, 2);
    }
  }

  const std::string answer = collapse_ws(trace.answer);
  if (answer.empty()) {
    out.push_back({ViolationCode::EmptyAnswer, 0, 0, "answer is empty"});
  } else {
    const std::string_view markup = find_embedded_marker(answer, cfg);
    if (!markup.empty()) {
      out.push_back({ViolationCode::MarkupInAnswer, 0, 0,
                     "markup '" + std::string(markup) + "' inside answer"});
    }
    std::vector<Violation> ph;
    flag_placeholders(answer, cfg, ph);
    for (auto& v : ph) {
      v.begin = v.end = 0;
      out.push_back(v);
    }
  }
  return out;
}

std::string render_trace_unchecked(const ReasoningTrace& trace) {
  std::ostringstream os;
  os << kThinkOpen << '\n';
  os << kStage1Header << '\n'
     << collapse_ws(trace.think.stage1_analysis) << '\n';
  os << '\n';
  os << kStage2Header << '\n'
     << collapse_ws(trace.think.stage2_reasoning) << '\n';
  if (trace.think.stage2_result) {
    os << kResultMarker << ' ' << collapse_ws(*trace.think.stage2_result)
       << '\n';
  }
  os << '\n';
  os << kStage3Header << '\n'
     << collapse_ws(trace.think.stage3_strategy) << '\n';
  os << kThinkClose << '\n';
  os << '\n';
  os << kAnswerOpen << collapse_ws(trace.answer) << kAnswerClose << '\n';
  return os.str();
}

std::string render_trace(const ReasoningTrace& trace, const TraceConfig& cfg) {
  const auto violations = validate_trace(trace, cfg);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "render_trace: trace violates its invariants:";
    for (const auto& v : violations)
      msg << ' ' << to_string(v.code) << " (" << v.detail << ");";
    throw DomainError(msg.str());
  }
  return render_trace_unchecked(trace);
}

NormalizeResult normalize_placeholders(std::string_view raw,
                                       const TraceConfig& cfg) {
  NormalizeResult res;
  res.text.assign(raw);
  for (const auto& variant : cfg.placeholder_variants) {
    if (variant.empty() || variant == kCanonicalPlaceholder) continue;
    std::size_t pos = 0;
    while ((pos = res.text.find(variant, pos)) != std::string::npos) {
      res.text.replace(pos, variant.size(), kCanonicalPlaceholder);
      pos += kCanonicalPlaceholder.size();
      ++res.count;
    }
  }
  return res;
}

TaskClassification classify_task(std::string_view instruction,
                                 bool has_reference_image,
                                 const TraceConfig& cfg) {
  TaskClassification result{has_reference_image ? TaskKind::ImageEdit
                                                : TaskKind::TextToImage,
                            std::nullopt};
  if (!has_reference_image) {
    for (const auto& cue : cfg.edit_cue_lexemes) {
      if (ifind(instruction, cue) != std::string_view::npos) {
        result.warning = "instruction contains edit cue '" + cue +
                         "' but no reference image was supplied";
        break;
      }
    }
  }
  return result;
}

std::vector<Violation> check_edit_only(const ReasoningTrace& trace,
                                       const TraceConfig& cfg) {
  std::vector<Violation> out;
  if (trace.task_kind != TaskKind::ImageEdit) return out;
  const std::string& answer = trace.answer;

  for (const auto& pattern : cfg.edit_only_patterns) {
    std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
    auto begin = std::sregex_iterator(answer.begin(), answer.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      out.push_back({ViolationCode::EditOnlyBreach,
                     static_cast<std::size_t>(m.position(0)),
                     static_cast<std::size_t>(m.position(0) + m.length(0)),
                     "preservation clause: '" + m.str(0) + "'"});
    }
  }

  if (cfg.background_clause_rule) {
    std::size_t clause_begin = 0;
    for (std::size_t i = 0; i <= answer.size(); ++i) {
      const bool boundary =
          i == answer.size() || answer[i] == '.' || answer[i] == ',' ||
          answer[i] == ';';
      if (!boundary) continue;
      const std::string_view clause(answer.data() + clause_begin,
                                    i - clause_begin);
      const auto tokens = text::tokenize(clause);
      const bool mentions_background =
          std::find(tokens.begin(), tokens.end(), "background") != tokens.end();
      if (mentions_background) {
        const bool has_edit_verb = std::any_of(
            cfg.edit_verbs.begin(), cfg.edit_verbs.end(),
            [&](const std::string& v) {
              return std::find(tokens.begin(), tokens.end(), v) != tokens.end();
            });
        if (!has_edit_verb) {
          out.push_back({ViolationCode::EditOnlyBreach, clause_begin, i,
                         "background description without an edit verb"});
        }
      }
      clause_begin = i + 1;
    }
  }

  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return a.begin < b.begin;
  });
  return out;
}

}  // namespace planexec::trace
