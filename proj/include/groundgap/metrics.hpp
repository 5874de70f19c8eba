#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "groundgap/labels.hpp"

namespace groundgap {

inline constexpr std::size_t kDefaultBootstrapReplicates = 2000;
inline constexpr std::size_t kMinBootstrapReplicates = 1000;

// Aligned indicator pair for one act at one expert position. rater_a is the
// reference (human) side; support counts its positives.
struct BinaryItem {
  std::string conversation_id;
  std::size_t turn_index = 0;
  bool rater_a = false;
  bool rater_b = false;
};
using BinarySeries = std::vector<BinaryItem>;

// An expert utterance's label keyed by its conversation, the unit resampled
// by the bootstrap.
struct ConversationLabel {
  std::string conversation_id;
  ActLabel label = ActLabel::none;
};

// Percentages in [0, 100].
struct RateEstimate {
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_conversations = 0;
  std::size_t n_utterances = 0;
};

struct KappaEstimate {
  double kappa = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_o = 0.0;
  double p_e = 0.0;
  std::size_t support = 0;
  bool has_ci = false;
};

struct RateDifference {
  double delta = 0.0;  // rate_a - rate_b, percentage points
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool significant = false;
};

struct BootstrapOptions {
  std::size_t replicates = 0;  // 0 = point estimate only
  std::uint64_t seed = 0;
};

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

struct ChiSquare {
  double chi2 = 0.0;
  double p = 1.0;
};

struct PreferencePair {
  std::string id;
  std::vector<std::string> chosen_texts;
  std::vector<std::string> rejected_texts;
};

struct QuestionPrevalence {
  double pct_chosen = 0.0;
  double pct_rejected = 0.0;
  std::size_t n_pairs = 0;
  std::size_t chosen_with_question = 0;
  std::size_t rejected_with_question = 0;
  // Absent when the 2x2 table has a zero marginal.
  std::optional<ChiSquare> test;
};

// Type-7 (linear interpolation) quantile of an ascending-sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

// (p_o - p_e) / (1 - p_e), with kappa := 1 when p_e == 1.
double kappa_from_agreement(double p_o, double p_e);

KappaEstimate kappa_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

RateEstimate base_rate(std::span<const ConversationLabel> labels, ActLabel act,
                       std::size_t replicates, std::uint64_t seed);

KappaEstimate cohen_kappa_binary(const BinarySeries& series, const BootstrapOptions& bootstrap = {});

// Unweighted Cohen's kappa over arbitrary integer categories.
double cohen_kappa_categorical(std::span<const std::pair<int, int>> items);
double cohen_kappa_multiclass(std::span<const std::pair<ActLabel, ActLabel>> items);

// Paired conversation-level bootstrap of rate_a - rate_b; significant iff the
// 95% interval excludes zero.
RateDifference rate_difference_test(std::span<const ConversationLabel> labels_a,
                                    std::span<const ConversationLabel> labels_b, ActLabel act,
                                    std::size_t replicates, std::uint64_t seed);

Correlation pearson_r(std::span<const double> x, std::span<const double> y);

// Uncorrected Pearson chi-square for [[a, b], [c, d]], 1 degree of freedom.
ChiSquare chi_square_2x2(double a, double b, double c, double d);

bool contains_question(std::string_view text);

QuestionPrevalence question_prevalence(std::span<const PreferencePair> pairs);

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path);

BinarySeries binary_series(std::span<const LabeledPair> pairs, ActLabel act);

// Agreement between two independently generated continuations of the same
// contexts; support = positives in gen_a. Point estimate only.
KappaEstimate cross_rater_kappa(std::span<const LabeledPair> gen_a, std::span<const LabeledPair> gen_b,
                                ActLabel act);

struct ActMetrics {
  RateEstimate model_rate;
  RateEstimate human_rate;
  KappaEstimate kappa;
  RateDifference difference;  // model - human
};

struct MetricsReport {
  std::string dataset;
  std::string generator;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::map<ActLabel, ActMetrics> acts;
};

// Full per-act metrics over fully labeled pairs. Every bootstrap draws from a
// sub-seed named after its act and statistic.
MetricsReport compute_metrics_report(std::span<const LabeledPair> pairs, const std::string& dataset,
                                     const std::string& generator, std::size_t replicates,
                                     std::uint64_t seed);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& obj);

}  // namespace groundgap
