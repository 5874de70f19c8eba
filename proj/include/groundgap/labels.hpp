#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace groundgap {

// Primary grounding act of an expert utterance; `none` means no grounding act.
enum class ActLabel { clarification, acknowledgement, followup, none };

inline constexpr std::array<ActLabel, 4> kAllLabels{ActLabel::clarification, ActLabel::acknowledgement,
                                                    ActLabel::followup, ActLabel::none};

// The three grounding acts, in the row order used by reports.
inline constexpr std::array<ActLabel, 3> kGroundingActs{ActLabel::followup, ActLabel::acknowledgement,
                                                        ActLabel::clarification};

std::string_view to_string(ActLabel label);

// Exact canonical names only ("clarification", "acknowledgement", "followup",
// "none"); free-form model output goes through parse_label instead.
std::optional<ActLabel> label_from_string(std::string_view name);
ActLabel require_label(std::string_view name);

// One expert position: the human turn, its counterfactual, and (once
// classified) both act labels.
struct LabeledPair {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::string human_text;
  std::string generated_text;
  std::optional<ActLabel> human_label;
  std::optional<ActLabel> generated_label;

  bool operator==(const LabeledPair&) const = default;
};

}  // namespace groundgap
