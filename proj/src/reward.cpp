#include "planexec/reward.hpp"

#include <algorithm>

#include "planexec/errors.hpp"

namespace planexec::reward {

namespace {

using nlohmann::json;

/// Scan for balanced {...} spans (string-aware) and return each one that
/// parses as a JSON object, in order of appearance.
std::vector<json> embedded_objects(std::string_view raw) {
  std::vector<json> found;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t j = i;
    std::size_t end = std::string_view::npos;
    for (; j < raw.size(); ++j) {
      const char c = raw[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          end = j;
          break;
        }
      }
    }
    if (end == std::string_view::npos) {
      ++i;
      continue;
    }
    const auto candidate = raw.substr(i, end - i + 1);
    json parsed = json::parse(candidate, nullptr, false);
    if (parsed.is_object()) {
      found.push_back(std::move(parsed));
      i = end + 1;
    } else {
      ++i;
    }
  }
  return found;
}

int require_int_field(const json& obj, const std::string& field, int lo,
                      int hi) {
  if (!obj.contains(field)) {
    throw ParseError("judge response object is missing field '" + field + "'");
  }
  const auto& v = obj.at(field);
  if (!v.is_number_integer()) {
    throw ParseError("judge field '" + field + "' is not an integer");
  }
  const int x = v.get<int>();
  if (x < lo || x > hi) {
    throw RangeError(field, "judge field '" + field + "' = " +
                                std::to_string(x) + " outside [" +
                                std::to_string(lo) + "," + std::to_string(hi) +
                                "]");
  }
  return x;
}

}  // namespace

std::string to_string(Rubric r) { return r == Rubric::Edit ? "edit" : "t2i"; }

Rubric rubric_from_string(std::string_view s) {
  if (s == "edit") return Rubric::Edit;
  if (s == "t2i") return Rubric::T2I;
  throw DomainError("unknown rubric: " + std::string(s));
}

ParsedScores parse_judge_response(std::string_view raw, Rubric rubric) {
  const auto objects = embedded_objects(raw);
  if (objects.empty()) {
    throw ParseError("no JSON object found in judge response");
  }
  ParsedScores out;
  if (objects.size() > 1) {
    out.warning = "multiple JSON objects in judge response; first one wins";
  }
  const json& obj = objects.front();
  if (rubric == Rubric::T2I) {
    T2IRubricScores s;
    s.consistency = require_int_field(obj, "consistency", 0, 2);
    s.realism = require_int_field(obj, "realism", 0, 2);
    s.aesthetic = require_int_field(obj, "aesthetic", 0, 2);
    out.subscores = s;
  } else {
    EditRubricScores s;
    s.appearance_consistency =
        require_int_field(obj, "appearance_consistency", 1, 5);
    s.reasoning_alignment = require_int_field(obj, "reasoning_alignment", 1, 5);
    s.visual_plausibility = require_int_field(obj, "visual_plausibility", 1, 5);
    out.subscores = s;
  }
  return out;
}

double aggregate_t2i(const T2IRubricScores& s) {
  return (s.consistency + s.realism + s.aesthetic) / 3.0;
}

double aggregate_edit(const EditRubricScores& s, const RewardConfig& cfg) {
  const double mean = (s.appearance_consistency + s.reasoning_alignment +
                       s.visual_plausibility) /
                      3.0;
  if (cfg.edit_aggregation == EditAggregation::RawMean) return mean;
  const double normalized = (mean - 1.0) / 4.0;
  return cfg.edit_scale_to_t2i ? 2.0 * normalized : normalized;
}

ClipResult clip_reward(double r, double bound) {
  if (bound <= 0.0) throw DomainError("clip_reward: bound must be positive");
  const double clamped = std::clamp(r, -bound, bound);
  return {clamped, clamped != r};
}

RewardBreakdown score_judge_response(std::string_view raw, Rubric rubric,
                                     const RewardConfig& cfg) {
  const auto parsed = parse_judge_response(raw, rubric);
  RewardBreakdown b;
  b.rubric = rubric;
  b.subscores = parsed.subscores;
  const double scalar =
      rubric == Rubric::T2I
          ? aggregate_t2i(std::get<T2IRubricScores>(parsed.subscores))
          : aggregate_edit(std::get<EditRubricScores>(parsed.subscores), cfg);
  const auto clip = clip_reward(scalar, cfg.clip_bound);
  b.scalar = clip.value;
  b.clipped = clip.clipped;
  return b;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  nlohmann::json j;
  j["rubric"] = to_string(b.rubric);
  if (b.rubric == Rubric::Edit) {
    const auto& s = std::get<EditRubricScores>(b.subscores);
    j["subscores"] = {{"appearance_consistency", s.appearance_consistency},
                      {"reasoning_alignment", s.reasoning_alignment},
                      {"visual_plausibility", s.visual_plausibility}};
  } else {
    const auto& s = std::get<T2IRubricScores>(b.subscores);
    j["subscores"] = {{"consistency", s.consistency},
                      {"realism", s.realism},
                      {"aesthetic", s.aesthetic}};
  }
  j["scalar"] = b.scalar;
  j["clipped"] = b.clipped;
  return j;
}

}  // namespace planexec::reward
