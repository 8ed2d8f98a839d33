#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protolens/prototype_model.hpp"

namespace protolens {

struct PrototypeExplanation {
  std::size_t prototype_id = 0;
  std::string aligned_sentence;
  std::string span_text;  // verbatim substring of the input; empty when no span
  std::optional<DiscreteSpan> span_part_range;  // 1-based inclusive part positions
  double similarity_score = 0.0;  // after RMSNorm
  double class_weight = 0.0;

  bool operator==(const PrototypeExplanation&) const = default;
};

struct ExplanationReport {
  std::string text;
  std::size_t predicted_class = 0;
  double probability = 0.0;
  std::vector<PrototypeExplanation> prototypes;  // descending similarity_score

  bool operator==(const ExplanationReport&) const = default;
};

/// Throws NotAlignedError when the model has no alignment log and
/// InvalidParameter when the text has no tokens.
ExplanationReport explain_instance(const Model& model, std::string_view text, double threshold = 0.5);

struct PrototypeRow {
  std::size_t prototype_id = 0;
  std::string aligned_sentence;
  double class_weight = 0.0;

  char polarity() const { return class_weight >= 0.0 ? '+' : '-'; }
};

/// Rows ordered by prototype id. Throws NotAlignedError without an alignment log.
std::vector<PrototypeRow> prototype_table(const Model& model);

enum class RenderFormat { Text, Json };

RenderFormat parse_render_format(const std::string& name);

/// `top` limits the listed prototypes (0 lists all).
std::string render(const ExplanationReport& report, RenderFormat format, std::size_t top = 0);
std::string render_table(const std::vector<PrototypeRow>& rows, RenderFormat format);

nlohmann::ordered_json report_to_json(const ExplanationReport& report, std::size_t top = 0);
ExplanationReport report_from_json(const nlohmann::json& j);

}  // namespace protolens
