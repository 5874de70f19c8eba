#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "groundgap/labels.hpp"

namespace groundgap {

// Acknowledgement marker phrases, stored as lowercase token sequences.
class AckLexicon {
public:
  AckLexicon() = default;
  explicit AckLexicon(const std::vector<std::string>& phrases);

  // ok, okay, i understand, i see, it sounds like, right, got it, mhm, yeah
  static AckLexicon seed();

  // One phrase per line; blank lines and lines starting with '#' are ignored.
  static AckLexicon load(const std::filesystem::path& path);

  const std::vector<std::vector<std::string>>& markers() const { return markers_; }

private:
  std::vector<std::vector<std::string>> markers_;
};

// Lowercase, delete ASCII punctuation, split on whitespace.
std::vector<std::string> ack_tokens(std::string_view text);

// True iff the utterance tokens are entirely covered by a sequence of lexicon
// markers. Throws std::invalid_argument on blank input.
bool detect_acknowledgement_rule(std::string_view utterance, const AckLexicon& lexicon = AckLexicon::seed());

// First canonical label token in free-form model output, case-insensitive,
// accepting "acknowledgment" and "follow-up" spellings. Throws LabelParseError.
ActLabel parse_label(std::string_view raw);

struct GoldAnnotation {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::string annotator;
  ActLabel label = ActLabel::none;

  bool operator==(const GoldAnnotation&) const = default;
};

// A classifier output; mirrors GoldAnnotation without the annotator.
struct Prediction {
  std::string conversation_id;
  std::size_t turn_index = 0;
  ActLabel label = ActLabel::none;

  bool operator==(const Prediction&) const = default;
};

// Gold annotation JSONL; repeated (annotator, conversation, turn) records keep
// the last one, which is how session skip-backs are resolved.
std::vector<GoldAnnotation> load_gold_annotations(const std::filesystem::path& path);
void save_gold_annotations(const std::filesystem::path& path, const std::vector<GoldAnnotation>& rows);

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& rows,
                      const std::string& source = {});

struct ActScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ClassifierEvaluation {
  std::map<ActLabel, ActScore> per_act;  // the three grounding acts
  double macro_f1 = 0.0;
};

// One-vs-rest scores over the grounding acts; `none` is excluded from the
// macro average. Every gold item needs a prediction.
ClassifierEvaluation evaluate_classifier(const std::vector<Prediction>& predictions,
                                         const std::vector<GoldAnnotation>& gold);

// Multi-class kappa over the four labels for two annotators of the same items.
double inter_annotator_kappa(const std::vector<GoldAnnotation>& a, const std::vector<GoldAnnotation>& b);

}  // namespace groundgap
