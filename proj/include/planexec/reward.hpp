#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace planexec::reward {

enum class Rubric { Edit, T2I };

std::string to_string(Rubric r);
Rubric rubric_from_string(std::string_view s);

/// Image-edit rubric: three integer subscores on a 1-5 scale.
struct EditRubricScores {
  int appearance_consistency = 1;
  int reasoning_alignment = 1;
  int visual_plausibility = 1;

  bool operator==(const EditRubricScores&) const = default;
};

/// Text-to-image rubric: three integer subscores in {0,1,2}.
struct T2IRubricScores {
  int consistency = 0;
  int realism = 0;
  int aesthetic = 0;

  bool operator==(const T2IRubricScores&) const = default;
};

enum class EditAggregation {
  NormalizedMean,  ///< ((mean - 1) / 4), mapping the 1-5 lattice into [0,1]
  RawMean,         ///< plain mean on the 1-5 scale
};

struct RewardConfig {
  EditAggregation edit_aggregation = EditAggregation::NormalizedMean;
  /// Rescale normalized edit rewards by 2 so both rubrics share [0,2].
  bool edit_scale_to_t2i = false;
  double clip_bound = 10.0;
};

struct RewardBreakdown {
  Rubric rubric = Rubric::T2I;
  std::variant<EditRubricScores, T2IRubricScores> subscores;
  double scalar = 0.0;
  bool clipped = false;
};

struct ParsedScores {
  std::variant<EditRubricScores, T2IRubricScores> subscores;
  std::optional<std::string> warning;  ///< e.g. multiple JSON objects found
};

/// Extract the rubric's three integer fields from the first well-formed JSON
/// object embedded anywhere in the raw judge text. Throws ParseError when no
/// object with the required fields exists, RangeError (naming the field) when
/// a subscore is out of range. A warning is attached when more than one JSON
/// object is present.
ParsedScores parse_judge_response(std::string_view raw, Rubric rubric);

/// Mean of the three subscores; range [0,2].
double aggregate_t2i(const T2IRubricScores& s);

/// Aggregate the 1-5 subscores per cfg (default: ((mean-1)/4) in [0,1]).
double aggregate_edit(const EditRubricScores& s, const RewardConfig& cfg = {});

struct ClipResult {
  double value = 0.0;
  bool clipped = false;
};

/// Clamp to [-bound, +bound]; bound must be positive.
ClipResult clip_reward(double r, double bound = 10.0);

/// parse + aggregate + clip in one step.
RewardBreakdown score_judge_response(std::string_view raw, Rubric rubric,
                                     const RewardConfig& cfg = {});

/// JSON view of a breakdown (for the CLI and metrics files).
nlohmann::json to_json(const RewardBreakdown& b);

}  // namespace planexec::reward
