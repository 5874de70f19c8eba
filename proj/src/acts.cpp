#include "groundgap/acts.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/metrics.hpp"

namespace groundgap {

using nlohmann::json;

std::string_view to_string(ActLabel label) {
  switch (label) {
    case ActLabel::clarification:
      return "clarification";
    case ActLabel::acknowledgement:
      return "acknowledgement";
    case ActLabel::followup:
      return "followup";
    case ActLabel::none:
      return "none";
  }
  return "none";
}

std::optional<ActLabel> label_from_string(std::string_view name) {
  for (auto label : kAllLabels) {
    if (to_string(label) == name) return label;
  }
  return std::nullopt;
}

ActLabel require_label(std::string_view name) {
  if (auto label = label_from_string(name)) return *label;
  throw LabelParseError(fmt::format("unknown act label \"{}\"", name));
}

std::vector<std::string> ack_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned += static_cast<char>(std::tolower(c));
  }
  std::istringstream in(cleaned);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) {
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

AckLexicon::AckLexicon(const std::vector<std::string>& phrases) {
  for (const auto& phrase : phrases) {
    auto tokens = ack_tokens(phrase);
    if (!tokens.empty()) markers_.push_back(std::move(tokens));
  }
}

AckLexicon AckLexicon::seed() {
  return AckLexicon({"ok", "okay", "i understand", "i see", "it sounds like", "right", "got it", "mhm",
                     "yeah"});
}

AckLexicon AckLexicon::load(const std::filesystem::path& path) {
  std::istringstream in(io::read_text_file(path));
  std::vector<std::string> phrases;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    phrases.push_back(line);
  }
  return AckLexicon(phrases);
}

bool detect_acknowledgement_rule(std::string_view utterance, const AckLexicon& lexicon) {
  if (utterance.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw std::invalid_argument("acknowledgement detection needs a non-empty utterance");
  }
  const auto tokens = ack_tokens(utterance);
  if (tokens.empty()) {
    return false;
  }
  // covered[i]: tokens[0, i) is an exact concatenation of markers.
  std::vector<bool> covered(tokens.size() + 1, false);
  covered[0] = true;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!covered[i]) continue;
    for (const auto& marker : lexicon.markers()) {
      if (i + marker.size() <= tokens.size() &&
          std::equal(marker.begin(), marker.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        covered[i + marker.size()] = true;
      }
    }
  }
  return covered.back();
}

ActLabel parse_label(std::string_view raw) {
  static const std::vector<std::pair<std::string_view, ActLabel>> kTokens{
      {"clarification", ActLabel::clarification}, {"acknowledgement", ActLabel::acknowledgement},
      {"acknowledgment", ActLabel::acknowledgement}, {"follow-up", ActLabel::followup},
      {"followup", ActLabel::followup},           {"none", ActLabel::none},
  };
  std::string lower(raw);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-'; };

  std::size_t best_pos = std::string::npos;
  ActLabel best = ActLabel::none;
  for (const auto& [token, label] : kTokens) {
    for (auto pos = lower.find(token); pos != std::string::npos; pos = lower.find(token, pos + 1)) {
      auto end = pos + token.size();
      if (end < lower.size() && lower[end] == 's') ++end;  // plural
      const bool left_ok = pos == 0 || !is_word(lower[pos - 1]);
      const bool right_ok = end == lower.size() || !is_word(lower[end]);
      if (left_ok && right_ok) {
        if (pos < best_pos) {
          best_pos = pos;
          best = label;
        }
        break;
      }
    }
  }
  if (best_pos == std::string::npos) {
    throw LabelParseError(fmt::format("no act label found in \"{}\"", raw.substr(0, 200)));
  }
  return best;
}

std::vector<GoldAnnotation> load_gold_annotations(const std::filesystem::path& path) {
  std::vector<GoldAnnotation> rows;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> slot;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      GoldAnnotation g;
      g.conversation_id = io::require_string(obj, "conversation_id", where);
      const auto turn = io::require_int(obj, "turn_index", where);
      if (turn < 0) throw LabelParseError(fmt::format("{}: negative turn_index", where));
      g.turn_index = static_cast<std::size_t>(turn);
      g.annotator = io::require_string(obj, "annotator", where);
      g.label = require_label(io::require_string(obj, "label", where));
      auto key = std::make_tuple(g.annotator, g.conversation_id, g.turn_index);
      if (auto it = slot.find(key); it != slot.end()) {
        rows[it->second] = std::move(g);
      } else {
        slot.emplace(std::move(key), rows.size());
        rows.push_back(std::move(g));
      }
    });
  } catch (const LabelParseError& e) {
    throw Error("annotations", e.what());
  }
  return rows;
}

void save_gold_annotations(const std::filesystem::path& path, const std::vector<GoldAnnotation>& rows) {
  std::vector<json> out;
  for (const auto& g : rows) {
    out.push_back({{"conversation_id", g.conversation_id},
                   {"turn_index", g.turn_index},
                   {"annotator", g.annotator},
                   {"label", to_string(g.label)}});
  }
  io::write_file_atomic(path, io::to_jsonl(out));
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> rows;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      Prediction p;
      p.conversation_id = io::require_string(obj, "conversation_id", where);
      const auto turn = io::require_int(obj, "turn_index", where);
      if (turn < 0) throw LabelParseError(fmt::format("{}: negative turn_index", where));
      p.turn_index = static_cast<std::size_t>(turn);
      p.label = require_label(io::require_string(obj, "label", where));
      rows.push_back(std::move(p));
    });
  } catch (const LabelParseError& e) {
    throw Error("labels", e.what());
  }
  return rows;
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& rows,
                      const std::string& source) {
  std::vector<json> out;
  for (const auto& p : rows) {
    json row{{"conversation_id", p.conversation_id}, {"turn_index", p.turn_index}, {"label", to_string(p.label)}};
    if (!source.empty()) row["source"] = source;
    out.push_back(std::move(row));
  }
  io::write_file_atomic(path, io::to_jsonl(out));
}

ClassifierEvaluation evaluate_classifier(const std::vector<Prediction>& predictions,
                                         const std::vector<GoldAnnotation>& gold) {
  std::map<std::pair<std::string, std::size_t>, ActLabel> predicted;
  for (const auto& p : predictions) {
    predicted[{p.conversation_id, p.turn_index}] = p.label;
  }
  ClassifierEvaluation eval;
  for (auto act : kGroundingActs) eval.per_act[act] = {};
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& g : gold) {
    const std::pair key{g.conversation_id, g.turn_index};
    if (!seen.insert(key).second) {
      throw Error("evaluate", fmt::format("gold item ({}, {}) appears more than once", g.conversation_id,
                                          g.turn_index));
    }
    auto it = predicted.find(key);
    if (it == predicted.end()) {
      throw Error("evaluate", fmt::format("gold item ({}, {}) has no prediction", g.conversation_id,
                                          g.turn_index));
    }
    for (auto act : kGroundingActs) {
      auto& s = eval.per_act[act];
      const bool is_gold = g.label == act;
      const bool is_pred = it->second == act;
      if (is_gold) ++s.support;
      if (is_gold && is_pred) ++s.tp;
      if (!is_gold && is_pred) ++s.fp;
      if (is_gold && !is_pred) ++s.fn;
    }
  }
  double f1_sum = 0.0;
  for (auto& [act, s] : eval.per_act) {
    s.precision = s.tp + s.fp == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    s.recall = s.tp + s.fn == 0 ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
    // 2PR/(P+R) rewritten over counts: one rounding step.
    const auto denom = 2 * s.tp + s.fp + s.fn;
    s.f1 = denom == 0 ? 0.0 : static_cast<double>(2 * s.tp) / static_cast<double>(denom);
    f1_sum += s.f1;
  }
  eval.macro_f1 = f1_sum / static_cast<double>(eval.per_act.size());
  return eval;
}

double inter_annotator_kappa(const std::vector<GoldAnnotation>& a, const std::vector<GoldAnnotation>& b) {
  std::map<std::pair<std::string, std::size_t>, ActLabel> b_labels;
  for (const auto& g : b) b_labels[{g.conversation_id, g.turn_index}] = g.label;
  if (a.size() != b_labels.size()) {
    throw Error("annotations", "annotators labeled different item sets");
  }
  std::vector<std::pair<ActLabel, ActLabel>> items;
  items.reserve(a.size());
  for (const auto& g : a) {
    auto it = b_labels.find({g.conversation_id, g.turn_index});
    if (it == b_labels.end()) {
      throw Error("annotations", fmt::format("item ({}, {}) labeled by only one annotator",
                                             g.conversation_id, g.turn_index));
    }
    items.emplace_back(g.label, it->second);
  }
  return cohen_kappa_multiclass(items);
}

}  // namespace groundgap
