#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groundgap/acts.hpp"
#include "groundgap/classifier.hpp"
#include "groundgap/corpus.hpp"
#include "groundgap/labels.hpp"

namespace groundgap {

enum class ErrorCategory {
  ack_show_empathy,
  followup_continue,
  followup_inquire,
  clarification_verify,
  clarification_resolve_ambiguity,
  none,
};

inline constexpr std::array<ErrorCategory, 6> kErrorCategories{
    ErrorCategory::ack_show_empathy,     ErrorCategory::followup_continue,
    ErrorCategory::followup_inquire,     ErrorCategory::clarification_verify,
    ErrorCategory::clarification_resolve_ambiguity, ErrorCategory::none};

std::string_view to_string(ErrorCategory category);
ErrorCategory error_category_from_string(std::string_view name);

// A human/model pair where the human used a grounding act and the model did
// not, shown with the turn before it.
struct ErrorItem {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::optional<Utterance> previous;
  std::string expert_role;
  std::string human_text;
  std::string generated_text;
  ActLabel human_label = ActLabel::none;
};

inline constexpr std::size_t kErrorSampleSize = 160;

// Seeded uniform sample of at most n qualifying pairs, returned in position
// order. Every pair needs both labels.
std::vector<ErrorItem> sample_error_items(const Corpus& corpus, const std::vector<LabeledPair>& pairs,
                                          std::size_t n, std::uint64_t seed);

struct ErrorJudgment {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::string annotator;
  ErrorCategory category = ErrorCategory::none;
  bool operator==(const ErrorJudgment&) const = default;
};

// Repeated (annotator, conversation, turn) records keep the last one.
std::vector<ErrorJudgment> load_error_judgments(const std::filesystem::path& path);
void save_error_judgments(const std::filesystem::path& path, const std::vector<ErrorJudgment>& rows);

struct ResumeState {
  std::size_t cursor = 0;
  std::filesystem::path output;
  std::uint64_t seed = 0;
};

// nullopt if the file does not exist; AnnotationError if it is malformed.
std::optional<ResumeState> load_resume(const std::filesystem::path& path);
void save_resume(const std::filesystem::path& path, const ResumeState& state);

struct SessionOptions {
  std::string annotator;
  std::filesystem::path output;
  std::filesystem::path resume;
  std::uint64_t seed = 0;
};

enum class SessionOutcome { completed, quit, empty };

struct SessionSummary {
  SessionOutcome outcome = SessionOutcome::empty;
  std::size_t cursor = 0;
  std::size_t total = 0;
  std::size_t recorded = 0;  // judgments written during this session
};

// Keys: c, a, f, n to label; b steps back one item; q quits; ? shows help.
// Each judgment is appended to the output and the cursor saved before the
// next item is shown.
SessionSummary run_act_annotation(const std::vector<ClassificationTarget>& items, const SessionOptions& opts,
                                  std::istream& in, std::ostream& out);

// Keys 1-5 pick an error category, 0 records none; b, q, ? as above.
SessionSummary run_error_annotation(const std::vector<ErrorItem>& items, const SessionOptions& opts,
                                    std::istream& in, std::ostream& out);

struct AggregatedErrors {
  std::vector<ErrorJudgment> items;  // annotator "aggregate", position order
  double kappa = 0.0;
  double fraction_assigned = 0.0;  // share of items not aggregated to none
};

// An item keeps a category only when both annotators chose it.
AggregatedErrors aggregate_dual_annotations(const std::vector<ErrorJudgment>& a,
                                            const std::vector<ErrorJudgment>& b);

enum class GoldResolution { first_annotator_wins, adjudicated };

std::string_view to_string(GoldResolution mode);
GoldResolution gold_resolution_from_string(std::string_view name);

// Merges two annotators' act labels into annotator "gold". Agreements are
// kept; disagreements take the first annotator's label or, in adjudicated
// mode, the label from `adjudication`, which must cover every disagreement.
std::vector<GoldAnnotation> resolve_gold(const std::vector<GoldAnnotation>& first,
                                         const std::vector<GoldAnnotation>& second, GoldResolution mode,
                                         const std::vector<GoldAnnotation>& adjudication = {});

}  // namespace groundgap
