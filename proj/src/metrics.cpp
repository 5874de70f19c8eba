#include "groundgap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/random.hpp"
#include "groundgap/special_functions.hpp"

namespace groundgap {

using nlohmann::json;

namespace {

struct RateCounts {
  std::size_t hits = 0;
  std::size_t total = 0;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// Per-conversation counts in ascending id order.
std::map<std::string, RateCounts> counts_by_conversation(std::span<const ConversationLabel> labels,
                                                         ActLabel act) {
  std::map<std::string, RateCounts> out;
  for (const auto& item : labels) {
    auto& c = out[item.conversation_id];
    ++c.total;
    if (item.label == act) ++c.hits;
  }
  return out;
}

double percent(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

void check_replicates(std::size_t replicates) {
  if (replicates < kMinBootstrapReplicates) {
    throw MetricsError(fmt::format("bootstrap needs at least {} replicates, got {}",
                                   kMinBootstrapReplicates, replicates));
  }
}

// 2.5/97.5 percentile interval, widened if needed so it contains the point
// estimate.
std::pair<double, double> percentile_interval(std::vector<double>& draws, double point) {
  std::sort(draws.begin(), draws.end());
  const double lo = quantile_sorted(draws, 0.025);
  const double hi = quantile_sorted(draws, 0.975);
  return {std::min(lo, point), std::max(hi, point)};
}

// Draws `groups` indices with replacement for replicate r.
template <typename Fn>
void for_each_replicate(std::size_t replicates, std::uint64_t seed, std::size_t groups, Fn&& fn) {
  std::vector<std::size_t> sample(groups);
  for (std::size_t r = 0; r < replicates; ++r) {
    auto rng = replicate_rng(seed, r);
    for (auto& s : sample) {
      s = static_cast<std::size_t>(uniform_index(rng, groups));
    }
    fn(r, std::span<const std::size_t>(sample));
  }
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) {
    throw MetricsError("quantile of an empty sample");
  }
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const auto upper = std::min(lower + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lower);
  return sorted[lower] + frac * (sorted[upper] - sorted[lower]);
}

double kappa_from_agreement(double p_o, double p_e) {
  if (p_e >= 1.0) {
    return 1.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

KappaEstimate kappa_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  const auto n = static_cast<double>(tp + fp + fn + tn);
  if (n == 0.0) {
    throw MetricsError("kappa of an empty series");
  }
  KappaEstimate est;
  // rater A positives = tp + fn, rater B positives = tp + fp.
  const double a_pos = static_cast<double>(tp + fn) / n;
  const double b_pos = static_cast<double>(tp + fp) / n;
  est.p_o = static_cast<double>(tp + tn) / n;
  est.p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos);
  est.kappa = kappa_from_agreement(est.p_o, est.p_e);
  est.ci_low = est.ci_high = est.kappa;
  est.support = tp + fn;
  return est;
}

RateEstimate base_rate(std::span<const ConversationLabel> labels, ActLabel act,
                       std::size_t replicates, std::uint64_t seed) {
  if (labels.empty()) {
    throw MetricsError("base rate of an empty label set");
  }
  check_replicates(replicates);
  const auto by_conv = counts_by_conversation(labels, act);
  std::vector<RateCounts> groups;
  groups.reserve(by_conv.size());
  RateCounts all;
  for (const auto& [_, c] : by_conv) {
    groups.push_back(c);
    all.hits += c.hits;
    all.total += c.total;
  }

  RateEstimate est;
  est.rate = percent(all.hits, all.total);
  est.n_conversations = groups.size();
  est.n_utterances = all.total;

  std::vector<double> draws(replicates);
  for_each_replicate(replicates, seed, groups.size(), [&](std::size_t r, auto sample) {
    RateCounts acc;
    for (auto g : sample) {
      acc.hits += groups[g].hits;
      acc.total += groups[g].total;
    }
    draws[r] = percent(acc.hits, acc.total);
  });
  std::tie(est.ci_low, est.ci_high) = percentile_interval(draws, est.rate);
  return est;
}

KappaEstimate cohen_kappa_binary(const BinarySeries& series, const BootstrapOptions& bootstrap) {
  if (series.empty()) {
    throw MetricsError("kappa of an empty series");
  }
  std::map<std::string, Confusion> by_conv;
  std::set<std::pair<std::string, std::size_t>> positions;
  for (const auto& item : series) {
    if (!positions.emplace(item.conversation_id, item.turn_index).second) {
      throw MetricsError(fmt::format("duplicate position ({}, {}) in binary series",
                                     item.conversation_id, item.turn_index));
    }
    auto& c = by_conv[item.conversation_id];
    if (item.rater_a && item.rater_b) ++c.tp;
    else if (!item.rater_a && item.rater_b) ++c.fp;
    else if (item.rater_a && !item.rater_b) ++c.fn;
    else ++c.tn;
  }
  Confusion total;
  std::vector<Confusion> groups;
  groups.reserve(by_conv.size());
  for (const auto& [_, c] : by_conv) {
    groups.push_back(c);
    total += c;
  }
  auto est = kappa_from_counts(total.tp, total.fp, total.fn, total.tn);
  if (bootstrap.replicates == 0) {
    return est;
  }
  check_replicates(bootstrap.replicates);
  std::vector<double> draws(bootstrap.replicates);
  for_each_replicate(bootstrap.replicates, bootstrap.seed, groups.size(), [&](std::size_t r, auto sample) {
    Confusion acc;
    for (auto g : sample) acc += groups[g];
    draws[r] = kappa_from_counts(acc.tp, acc.fp, acc.fn, acc.tn).kappa;
  });
  std::tie(est.ci_low, est.ci_high) = percentile_interval(draws, est.kappa);
  est.has_ci = true;
  return est;
}

double cohen_kappa_categorical(std::span<const std::pair<int, int>> items) {
  if (items.empty()) {
    throw MetricsError("kappa of an empty item set");
  }
  std::map<int, double> marg_a;
  std::map<int, double> marg_b;
  std::size_t agree = 0;
  for (const auto& [a, b] : items) {
    marg_a[a] += 1.0;
    marg_b[b] += 1.0;
    if (a == b) ++agree;
  }
  const auto n = static_cast<double>(items.size());
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [cat, count] : marg_a) {
    if (auto it = marg_b.find(cat); it != marg_b.end()) {
      p_e += (count / n) * (it->second / n);
    }
  }
  return kappa_from_agreement(p_o, p_e);
}

double cohen_kappa_multiclass(std::span<const std::pair<ActLabel, ActLabel>> items) {
  std::vector<std::pair<int, int>> coded;
  coded.reserve(items.size());
  for (const auto& [a, b] : items) {
    coded.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return cohen_kappa_categorical(coded);
}

RateDifference rate_difference_test(std::span<const ConversationLabel> labels_a,
                                    std::span<const ConversationLabel> labels_b, ActLabel act,
                                    std::size_t replicates, std::uint64_t seed) {
  if (labels_a.empty() || labels_b.empty()) {
    throw MetricsError("rate difference needs non-empty label sets");
  }
  check_replicates(replicates);
  const auto by_a = counts_by_conversation(labels_a, act);
  const auto by_b = counts_by_conversation(labels_b, act);
  if (by_a.size() != by_b.size() ||
      !std::equal(by_a.begin(), by_a.end(), by_b.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw MetricsError("rate difference needs both label sets over the same conversation ids");
  }
  std::vector<std::pair<RateCounts, RateCounts>> groups;
  RateCounts all_a;
  RateCounts all_b;
  for (auto ia = by_a.begin(), ib = by_b.begin(); ia != by_a.end(); ++ia, ++ib) {
    groups.emplace_back(ia->second, ib->second);
    all_a.hits += ia->second.hits;
    all_a.total += ia->second.total;
    all_b.hits += ib->second.hits;
    all_b.total += ib->second.total;
  }
  RateDifference out;
  out.delta = percent(all_a.hits, all_a.total) - percent(all_b.hits, all_b.total);
  std::vector<double> draws(replicates);
  for_each_replicate(replicates, seed, groups.size(), [&](std::size_t r, auto sample) {
    RateCounts a;
    RateCounts b;
    for (auto g : sample) {
      a.hits += groups[g].first.hits;
      a.total += groups[g].first.total;
      b.hits += groups[g].second.hits;
      b.total += groups[g].second.total;
    }
    draws[r] = percent(a.hits, a.total) - percent(b.hits, b.total);
  });
  std::tie(out.ci_low, out.ci_high) = percentile_interval(draws, out.delta);
  out.significant = out.ci_low > 0.0 || out.ci_high < 0.0;
  return out;
}

Correlation pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw MetricsError(fmt::format("pearson_r needs equal lengths, got {} and {}", x.size(), y.size()));
  }
  const auto n = x.size();
  if (n < 3) {
    throw MetricsError(fmt::format("pearson_r needs at least 3 points, got {}", n));
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricsError("pearson_r is undefined for zero-variance input");
  }
  Correlation out;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus_r2 = 1.0 - out.r * out.r;
  if (one_minus_r2 <= 0.0) {
    out.p = 0.0;
    return out;
  }
  const double t = out.r * std::sqrt(df / one_minus_r2);
  out.p = special::student_t_two_sided_p(t, df);
  return out;
}

ChiSquare chi_square_2x2(double a, double b, double c, double d) {
  for (double v : {a, b, c, d}) {
    if (!(v >= 0.0)) {
      throw MetricsError("chi-square cell counts must be non-negative");
    }
  }
  const double r1 = a + b;
  const double r2 = c + d;
  const double c1 = a + c;
  const double c2 = b + d;
  if (r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0) {
    throw MetricsError("chi-square is not applicable: the table has a zero marginal");
  }
  const double n = r1 + r2;
  const double diff = a * d - b * c;
  ChiSquare out;
  out.chi2 = n * diff * diff / (r1 * r2 * c1 * c2);
  out.p = special::chi_square_1df_survival(out.chi2);
  return out;
}

bool contains_question(std::string_view text) { return text.find('?') != std::string_view::npos; }

QuestionPrevalence question_prevalence(std::span<const PreferencePair> pairs) {
  if (pairs.empty()) {
    throw MetricsError("question prevalence needs at least one preference pair");
  }
  auto any_question = [](const std::vector<std::string>& texts) {
    return std::any_of(texts.begin(), texts.end(), [](const auto& t) { return contains_question(t); });
  };
  QuestionPrevalence out;
  out.n_pairs = pairs.size();
  for (const auto& p : pairs) {
    if (any_question(p.chosen_texts)) ++out.chosen_with_question;
    if (any_question(p.rejected_texts)) ++out.rejected_with_question;
  }
  const auto n = static_cast<double>(out.n_pairs);
  out.pct_chosen = 100.0 * static_cast<double>(out.chosen_with_question) / n;
  out.pct_rejected = 100.0 * static_cast<double>(out.rejected_with_question) / n;
  const double a = static_cast<double>(out.chosen_with_question);
  const double c = static_cast<double>(out.rejected_with_question);
  try {
    out.test = chi_square_2x2(a, n - a, c, n - c);
  } catch (const MetricsError&) {
    out.test.reset();
  }
  return out;
}

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      PreferencePair p;
      p.id = obj.contains("id") && obj["id"].is_number_integer()
                 ? std::to_string(obj["id"].get<long long>())
                 : io::require_string(obj, "id", where);
      for (auto [field, dest] : {std::pair{"chosen", &p.chosen_texts}, std::pair{"rejected", &p.rejected_texts}}) {
        auto it = obj.find(field);
        if (it == obj.end() || !it->is_array()) {
          throw MetricsError(fmt::format("{}: \"{}\" must be an array of strings", where, field));
        }
        for (const auto& t : *it) {
          if (!t.is_string()) {
            throw MetricsError(fmt::format("{}: \"{}\" must be an array of strings", where, field));
          }
          dest->push_back(t.get<std::string>());
        }
        if (dest->empty()) {
          throw MetricsError(fmt::format("{}: \"{}\" is empty", where, field));
        }
      }
      out.push_back(std::move(p));
    });
  } catch (const MetricsError&) {
    throw;
  } catch (const Error& e) {
    throw MetricsError(e.what());
  }
  return out;
}

BinarySeries binary_series(std::span<const LabeledPair> pairs, ActLabel act) {
  BinarySeries out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!p.human_label || !p.generated_label) {
      throw MetricsError(fmt::format("pair ({}, {}) is missing a {} label", p.conversation_id,
                                     p.turn_index, p.human_label ? "generated" : "human"));
    }
    out.push_back({p.conversation_id, p.turn_index, *p.human_label == act, *p.generated_label == act});
  }
  return out;
}

KappaEstimate cross_rater_kappa(std::span<const LabeledPair> gen_a, std::span<const LabeledPair> gen_b,
                                ActLabel act) {
  std::map<std::pair<std::string, std::size_t>, ActLabel> b_labels;
  for (const auto& p : gen_b) {
    if (!p.generated_label) {
      throw MetricsError(fmt::format("pair ({}, {}) in the second set has no generated label",
                                     p.conversation_id, p.turn_index));
    }
    b_labels[{p.conversation_id, p.turn_index}] = *p.generated_label;
  }
  if (gen_a.size() != b_labels.size()) {
    throw MetricsError("cross-rater kappa needs both sets over the same positions");
  }
  BinarySeries series;
  for (const auto& p : gen_a) {
    auto it = b_labels.find({p.conversation_id, p.turn_index});
    if (it == b_labels.end()) {
      throw MetricsError(fmt::format("position ({}, {}) missing from the second set", p.conversation_id,
                                     p.turn_index));
    }
    if (!p.generated_label) {
      throw MetricsError(fmt::format("pair ({}, {}) in the first set has no generated label",
                                     p.conversation_id, p.turn_index));
    }
    series.push_back({p.conversation_id, p.turn_index, *p.generated_label == act, it->second == act});
  }
  return cohen_kappa_binary(series);
}

MetricsReport compute_metrics_report(std::span<const LabeledPair> pairs, const std::string& dataset,
                                     const std::string& generator, std::size_t replicates,
                                     std::uint64_t seed) {
  if (pairs.empty()) {
    throw MetricsError("no labeled pairs to compute metrics over");
  }
  std::vector<ConversationLabel> human;
  std::vector<ConversationLabel> model;
  for (const auto& p : pairs) {
    if (!p.human_label || !p.generated_label) {
      throw MetricsError(fmt::format("pair ({}, {}) is missing a {} label", p.conversation_id,
                                     p.turn_index, p.human_label ? "generated" : "human"));
    }
    human.push_back({p.conversation_id, *p.human_label});
    model.push_back({p.conversation_id, *p.generated_label});
  }
  MetricsReport report{dataset, generator, replicates, seed, {}};
  for (auto act : kGroundingActs) {
    const auto tag = std::string(to_string(act));
    ActMetrics m;
    m.model_rate = base_rate(model, act, replicates, derive_seed(seed, "bootstrap/" + tag + "/model"));
    m.human_rate = base_rate(human, act, replicates, derive_seed(seed, "bootstrap/" + tag + "/human"));
    m.kappa = cohen_kappa_binary(binary_series(pairs, act),
                                 {replicates, derive_seed(seed, "bootstrap/" + tag + "/kappa")});
    m.difference = rate_difference_test(model, human, act, replicates,
                                        derive_seed(seed, "bootstrap/" + tag + "/difference"));
    report.acts.emplace(act, m);
  }
  return report;
}

json report_to_json(const MetricsReport& report) {
  json acts = json::object();
  for (const auto& [act, m] : report.acts) {
    acts[std::string(to_string(act))] = json{
        {"base_rate", m.model_rate.rate},
        {"ci", {m.model_rate.ci_low, m.model_rate.ci_high}},
        {"human_base_rate", m.human_rate.rate},
        {"human_ci", {m.human_rate.ci_low, m.human_rate.ci_high}},
        {"kappa", m.kappa.kappa},
        {"kappa_ci", m.kappa.has_ci ? json{m.kappa.ci_low, m.kappa.ci_high} : json(nullptr)},
        {"p_o", m.kappa.p_o},
        {"p_e", m.kappa.p_e},
        {"support", m.kappa.support},
        {"delta", m.difference.delta},
        {"delta_ci", {m.difference.ci_low, m.difference.ci_high}},
        {"significant", m.difference.significant},
        {"n_conversations", m.model_rate.n_conversations},
        {"n_utterances", m.model_rate.n_utterances},
    };
  }
  return json{{"dataset", report.dataset},
              {"generator", report.generator},
              {"bootstrap", {{"replicates", report.replicates}, {"seed", report.seed}}},
              {"acts", std::move(acts)}};
}

MetricsReport report_from_json(const json& obj) {
  MetricsReport report;
  try {
    report.dataset = obj.at("dataset").get<std::string>();
    report.generator = obj.at("generator").get<std::string>();
    if (auto b = obj.find("bootstrap"); b != obj.end()) {
      report.replicates = b->value("replicates", std::size_t{0});
      report.seed = b->value("seed", std::uint64_t{0});
    }
    for (const auto& [name, a] : obj.at("acts").items()) {
      const auto act = label_from_string(name);
      if (!act || *act == ActLabel::none) {
        throw MetricsError(fmt::format("report: unknown act \"{}\"", name));
      }
      ActMetrics m;
      auto read_interval = [&](const char* field, double& lo, double& hi, double point) {
        if (auto it = a.find(field); it != a.end() && it->is_array()) {
          lo = it->at(0).get<double>();
          hi = it->at(1).get<double>();
        } else {
          lo = hi = point;
        }
      };
      m.model_rate.rate = a.at("base_rate").get<double>();
      read_interval("ci", m.model_rate.ci_low, m.model_rate.ci_high, m.model_rate.rate);
      m.human_rate.rate = a.value("human_base_rate", 0.0);
      read_interval("human_ci", m.human_rate.ci_low, m.human_rate.ci_high, m.human_rate.rate);
      m.kappa.kappa = a.at("kappa").get<double>();
      m.kappa.has_ci = a.contains("kappa_ci") && a["kappa_ci"].is_array();
      read_interval("kappa_ci", m.kappa.ci_low, m.kappa.ci_high, m.kappa.kappa);
      m.kappa.p_o = a.value("p_o", 0.0);
      m.kappa.p_e = a.value("p_e", 0.0);
      m.kappa.support = a.value("support", std::size_t{0});
      m.difference.delta = a.value("delta", m.model_rate.rate - m.human_rate.rate);
      read_interval("delta_ci", m.difference.ci_low, m.difference.ci_high, m.difference.delta);
      m.difference.significant = a.value("significant", false);
      m.model_rate.n_conversations = m.human_rate.n_conversations = a.value("n_conversations", std::size_t{0});
      m.model_rate.n_utterances = m.human_rate.n_utterances = a.value("n_utterances", std::size_t{0});
      report.acts.emplace(*act, m);
    }
  } catch (const json::exception& e) {
    throw MetricsError(fmt::format("malformed metrics report: {}", e.what()));
  }
  return report;
}

}  // namespace groundgap
