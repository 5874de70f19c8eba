#include "groundgap/annotate.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/metrics.hpp"
#include "groundgap/random.hpp"

namespace groundgap {

using nlohmann::json;

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::ack_show_empathy:
      return "ack_show_empathy";
    case ErrorCategory::followup_continue:
      return "followup_continue";
    case ErrorCategory::followup_inquire:
      return "followup_inquire";
    case ErrorCategory::clarification_verify:
      return "clarification_verify";
    case ErrorCategory::clarification_resolve_ambiguity:
      return "clarification_resolve_ambiguity";
    case ErrorCategory::none:
      return "none";
  }
  return "none";
}

ErrorCategory error_category_from_string(std::string_view name) {
  for (auto c : kErrorCategories) {
    if (to_string(c) == name) return c;
  }
  throw AnnotationError(fmt::format("unknown error category \"{}\"", name));
}

std::vector<ErrorItem> sample_error_items(const Corpus& corpus, const std::vector<LabeledPair>& pairs,
                                          std::size_t n, std::uint64_t seed) {
  std::map<std::string, const Conversation*> by_id;
  for (const auto& conv : corpus) by_id[conv.id] = &conv;

  std::vector<const LabeledPair*> qualifying;
  for (const auto& p : pairs) {
    if (!p.human_label || !p.generated_label) {
      throw AnnotationError(fmt::format("pair ({}, {}) needs both labels before error sampling",
                                        p.conversation_id, p.turn_index));
    }
    if (*p.human_label != ActLabel::none && *p.generated_label == ActLabel::none) {
      qualifying.push_back(&p);
    }
  }
  auto by_position = [](const LabeledPair* a, const LabeledPair* b) {
    return std::tie(a->conversation_id, a->turn_index) < std::tie(b->conversation_id, b->turn_index);
  };
  std::sort(qualifying.begin(), qualifying.end(), by_position);
  Rng rng(seed);
  shuffle(std::span(qualifying), rng);
  qualifying.resize(std::min(n, qualifying.size()));
  std::sort(qualifying.begin(), qualifying.end(), by_position);

  std::vector<ErrorItem> items;
  for (const auto* p : qualifying) {
    auto it = by_id.find(p->conversation_id);
    if (it == by_id.end()) {
      throw AnnotationError(fmt::format("pair references unknown conversation \"{}\"", p->conversation_id));
    }
    const auto& conv = *it->second;
    if (p->turn_index >= conv.turns.size()) {
      throw AnnotationError(fmt::format("conversation \"{}\" has no turn {}", conv.id, p->turn_index));
    }
    ErrorItem item;
    item.conversation_id = p->conversation_id;
    item.turn_index = p->turn_index;
    if (p->turn_index > 0) item.previous = conv.turns[p->turn_index - 1];
    item.expert_role = conv.expert_role;
    item.human_text = p->human_text;
    item.generated_text = p->generated_text;
    item.human_label = *p->human_label;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ErrorJudgment> load_error_judgments(const std::filesystem::path& path) {
  std::vector<ErrorJudgment> rows;
  std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> slot;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      ErrorJudgment j;
      j.conversation_id = io::require_string(obj, "conversation_id", where);
      const auto turn = io::require_int(obj, "turn_index", where);
      if (turn < 0) throw AnnotationError(fmt::format("{}: negative turn_index", where));
      j.turn_index = static_cast<std::size_t>(turn);
      j.annotator = io::require_string(obj, "annotator", where);
      j.category = error_category_from_string(io::require_string(obj, "category", where));
      auto key = std::make_tuple(j.annotator, j.conversation_id, j.turn_index);
      if (auto it = slot.find(key); it != slot.end()) {
        rows[it->second] = std::move(j);
      } else {
        slot.emplace(std::move(key), rows.size());
        rows.push_back(std::move(j));
      }
    });
  } catch (const AnnotationError&) {
    throw;
  } catch (const Error& e) {
    throw AnnotationError(e.what());
  }
  return rows;
}

namespace {

json judgment_json(const ErrorJudgment& j) {
  return {{"conversation_id", j.conversation_id},
          {"turn_index", j.turn_index},
          {"annotator", j.annotator},
          {"category", to_string(j.category)}};
}

json gold_json(const GoldAnnotation& g) {
  return {{"conversation_id", g.conversation_id},
          {"turn_index", g.turn_index},
          {"annotator", g.annotator},
          {"label", to_string(g.label)}};
}

}  // namespace

void save_error_judgments(const std::filesystem::path& path, const std::vector<ErrorJudgment>& rows) {
  std::vector<json> out;
  for (const auto& j : rows) out.push_back(judgment_json(j));
  io::write_file_atomic(path, io::to_jsonl(out));
}

std::optional<ResumeState> load_resume(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    const auto obj = io::read_json_file(path);
    const auto where = path.string();
    ResumeState s;
    const auto cursor = io::require_int(obj, "cursor", where);
    if (cursor < 0) throw AnnotationError(fmt::format("{}: negative cursor", where));
    s.cursor = static_cast<std::size_t>(cursor);
    s.output = io::require_string(obj, "output", where);
    auto seed = obj.find("seed");
    if (seed == obj.end() || !seed->is_number_integer()) {
      throw AnnotationError(fmt::format("{}: \"seed\" must be an integer", where));
    }
    s.seed = seed->get<std::uint64_t>();
    return s;
  } catch (const AnnotationError&) {
    throw;
  } catch (const std::exception& e) {
    throw AnnotationError(fmt::format("malformed resume file: {}", e.what()));
  }
}

void save_resume(const std::filesystem::path& path, const ResumeState& state) {
  io::write_json_file(path, {{"cursor", state.cursor}, {"output", state.output.string()}, {"seed", state.seed}});
}

namespace {

struct SessionSpec {
  std::size_t total = 0;
  std::function<void(std::size_t, std::ostream&)> show;
  std::string prompt;
  std::string help;
  // Valid keys and the JSON line each one appends for item i.
  std::vector<std::string> keys;
  std::function<json(std::size_t, const std::string&)> record;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

void append_line(const std::filesystem::path& path, const json& row) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << row.dump() << '\n';
  out.flush();
  if (!out) {
    throw AnnotationError(fmt::format("cannot write annotation to {}", path.string()));
  }
}

SessionSummary run_session(const SessionSpec& spec, const SessionOptions& opts, std::istream& in,
                           std::ostream& out) {
  if (opts.annotator.empty()) throw AnnotationError("an annotator id is required");
  SessionSummary summary;
  summary.total = spec.total;
  if (spec.total == 0) {
    out << "Nothing to annotate.\n";
    return summary;
  }

  ResumeState state{0, opts.output, opts.seed};
  if (auto saved = load_resume(opts.resume)) {
    if (saved->output.lexically_normal() != opts.output.lexically_normal()) {
      throw AnnotationError(fmt::format("resume file {} belongs to output {}, not {}", opts.resume.string(),
                                        saved->output.string(), opts.output.string()));
    }
    if (saved->seed != opts.seed) {
      throw AnnotationError(fmt::format("resume file {} was written with seed {}, not {}", opts.resume.string(),
                                        saved->seed, opts.seed));
    }
    if (saved->cursor > spec.total) {
      throw AnnotationError(fmt::format("resume cursor {} is past the {} items", saved->cursor, spec.total));
    }
    state.cursor = saved->cursor;
    if (state.cursor > 0 && state.cursor < spec.total) {
      out << fmt::format("Resuming at item {} of {}.\n", state.cursor + 1, spec.total);
    }
  }

  bool show_item = true;
  while (state.cursor < spec.total) {
    if (show_item) {
      out << fmt::format("\n[{}/{}]\n", state.cursor + 1, spec.total);
      spec.show(state.cursor, out);
      show_item = false;
    }
    out << spec.prompt << std::flush;
    std::string line;
    if (!std::getline(in, line)) {
      out << "\n";
      save_resume(opts.resume, state);
      summary.outcome = SessionOutcome::quit;
      summary.cursor = state.cursor;
      return summary;
    }
    const auto key = trim(line);
    if (key == "q") {
      save_resume(opts.resume, state);
      summary.outcome = SessionOutcome::quit;
      summary.cursor = state.cursor;
      return summary;
    }
    if (key == "?") {
      out << spec.help;
      continue;
    }
    if (key == "b") {
      if (state.cursor == 0) {
        out << "Already at the first item.\n";
        continue;
      }
      --state.cursor;
      save_resume(opts.resume, state);
      show_item = true;
      continue;
    }
    if (std::find(spec.keys.begin(), spec.keys.end(), key) == spec.keys.end()) {
      out << fmt::format("Unrecognized key \"{}\". Press ? for help.\n", key);
      continue;
    }
    append_line(opts.output, spec.record(state.cursor, key));
    ++summary.recorded;
    ++state.cursor;
    save_resume(opts.resume, state);
    show_item = true;
  }
  out << "All items annotated.\n";
  summary.outcome = SessionOutcome::completed;
  summary.cursor = state.cursor;
  return summary;
}

constexpr std::string_view kActHelp =
    "  c  clarification: checks or repairs understanding of something just said\n"
    "     (\"Do you mean your manager or your colleague?\")\n"
    "  a  acknowledgement: only signals understanding (\"ok\", \"I see\", \"got it\")\n"
    "  f  followup: asks for more about what was said, treating it as understood\n"
    "  n  none: no grounding act\n"
    "  b  back to the previous item, q  save and quit, ?  this help\n"
    "O.K. test: put \"O.K.\" in front of a question. If it still reads naturally,\n"
    "the question is a followup; if it sounds odd, it is a clarification.\n";

constexpr std::string_view kErrorHelp =
    "  1  ack_show_empathy: an acknowledgement would have shown empathy\n"
    "  2  followup_continue: a followup would have kept the conversation going\n"
    "  3  followup_inquire: a followup would have asked about a related topic\n"
    "  4  clarification_verify: a clarification would have checked understanding\n"
    "  5  clarification_resolve_ambiguity: a clarification would have resolved an ambiguity\n"
    "  0  none of the above\n"
    "  b  back to the previous item, q  save and quit, ?  this help\n";

}  // namespace

SessionSummary run_act_annotation(const std::vector<ClassificationTarget>& items, const SessionOptions& opts,
                                  std::istream& in, std::ostream& out) {
  static const std::map<std::string, ActLabel> kKeys{{"c", ActLabel::clarification},
                                                     {"a", ActLabel::acknowledgement},
                                                     {"f", ActLabel::followup},
                                                     {"n", ActLabel::none}};
  SessionSpec spec;
  spec.total = items.size();
  spec.prompt = "label [c/a/f/n, b back, q quit, ? help]: ";
  spec.help = std::string(kActHelp);
  for (const auto& [k, _] : kKeys) spec.keys.push_back(k);
  spec.show = [&](std::size_t i, std::ostream& os) {
    const auto& item = items[i];
    os << fmt::format("conversation {} turn {}\n", item.conversation_id, item.turn_index);
    for (const auto& u : item.context) os << fmt::format("  {}: {}\n", u.role, u.text);
    os << fmt::format("> {}: {}\n", item.target.role, item.target.text);
  };
  spec.record = [&](std::size_t i, const std::string& key) {
    return gold_json({items[i].conversation_id, items[i].turn_index, opts.annotator, kKeys.at(key)});
  };
  return run_session(spec, opts, in, out);
}

SessionSummary run_error_annotation(const std::vector<ErrorItem>& items, const SessionOptions& opts,
                                    std::istream& in, std::ostream& out) {
  static const std::map<std::string, ErrorCategory> kKeys{
      {"1", ErrorCategory::ack_show_empathy},     {"2", ErrorCategory::followup_continue},
      {"3", ErrorCategory::followup_inquire},     {"4", ErrorCategory::clarification_verify},
      {"5", ErrorCategory::clarification_resolve_ambiguity}, {"0", ErrorCategory::none}};
  SessionSpec spec;
  spec.total = items.size();
  spec.prompt = "category [1-5, 0 none, b back, q quit, ? help]: ";
  spec.help = std::string(kErrorHelp);
  for (const auto& [k, _] : kKeys) spec.keys.push_back(k);
  spec.show = [&](std::size_t i, std::ostream& os) {
    const auto& item = items[i];
    os << fmt::format("conversation {} turn {}\n", item.conversation_id, item.turn_index);
    if (item.previous) {
      os << fmt::format("  previous  {}: {}\n", item.previous->role, item.previous->text);
    }
    os << fmt::format("  human     {}: {}  [{}]\n", item.expert_role, item.human_text, to_string(item.human_label));
    os << fmt::format("  model     {}: {}\n", item.expert_role, item.generated_text);
  };
  spec.record = [&](std::size_t i, const std::string& key) {
    return judgment_json({items[i].conversation_id, items[i].turn_index, opts.annotator, kKeys.at(key)});
  };
  return run_session(spec, opts, in, out);
}

AggregatedErrors aggregate_dual_annotations(const std::vector<ErrorJudgment>& a,
                                            const std::vector<ErrorJudgment>& b) {
  using Key = std::pair<std::string, std::size_t>;
  auto index = [](const std::vector<ErrorJudgment>& rows, char which) {
    std::map<Key, ErrorCategory> out;
    for (const auto& j : rows) {
      if (!out.emplace(Key{j.conversation_id, j.turn_index}, j.category).second) {
        throw AnnotationError(fmt::format("annotator {} judged ({}, {}) more than once", which,
                                          j.conversation_id, j.turn_index));
      }
    }
    return out;
  };
  const auto ma = index(a, 'A');
  const auto mb = index(b, 'B');
  if (ma.empty()) throw AnnotationError("no judgments to aggregate");
  if (ma.size() != mb.size()) {
    throw AnnotationError(fmt::format("annotators judged different item sets ({} vs {} items)", ma.size(),
                                      mb.size()));
  }
  AggregatedErrors out;
  std::vector<std::pair<int, int>> pairs;
  std::size_t assigned = 0;
  for (const auto& [key, cat_a] : ma) {
    auto it = mb.find(key);
    if (it == mb.end()) {
      throw AnnotationError(
          fmt::format("item ({}, {}) judged by only one annotator", key.first, key.second));
    }
    const auto cat = cat_a == it->second ? cat_a : ErrorCategory::none;
    if (cat != ErrorCategory::none) ++assigned;
    out.items.push_back({key.first, key.second, "aggregate", cat});
    pairs.emplace_back(static_cast<int>(cat_a), static_cast<int>(it->second));
  }
  out.kappa = cohen_kappa_categorical(pairs);
  out.fraction_assigned = static_cast<double>(assigned) / static_cast<double>(out.items.size());
  return out;
}

std::string_view to_string(GoldResolution mode) {
  return mode == GoldResolution::first_annotator_wins ? "first-annotator-wins" : "adjudicated";
}

GoldResolution gold_resolution_from_string(std::string_view name) {
  for (auto mode : {GoldResolution::first_annotator_wins, GoldResolution::adjudicated}) {
    if (to_string(mode) == name) return mode;
  }
  throw AnnotationError(
      fmt::format("unknown gold resolution \"{}\" (first-annotator-wins, adjudicated)", name));
}

std::vector<GoldAnnotation> resolve_gold(const std::vector<GoldAnnotation>& first,
                                         const std::vector<GoldAnnotation>& second, GoldResolution mode,
                                         const std::vector<GoldAnnotation>& adjudication) {
  using Key = std::pair<std::string, std::size_t>;
  std::map<Key, ActLabel> a;
  std::map<Key, ActLabel> b;
  std::map<Key, ActLabel> adj;
  for (const auto& g : first) a[{g.conversation_id, g.turn_index}] = g.label;
  for (const auto& g : second) b[{g.conversation_id, g.turn_index}] = g.label;
  for (const auto& g : adjudication) adj[{g.conversation_id, g.turn_index}] = g.label;
  if (a.size() != b.size()) {
    throw AnnotationError(
        fmt::format("annotators labeled different item sets ({} vs {} items)", a.size(), b.size()));
  }
  std::vector<GoldAnnotation> out;
  std::vector<Key> unresolved;
  for (const auto& [key, label_a] : a) {
    auto it = b.find(key);
    if (it == b.end()) {
      throw AnnotationError(fmt::format("item ({}, {}) labeled by only one annotator", key.first, key.second));
    }
    ActLabel label = label_a;
    if (label_a != it->second && mode == GoldResolution::adjudicated) {
      auto decided = adj.find(key);
      if (decided == adj.end()) {
        unresolved.push_back(key);
        continue;
      }
      label = decided->second;
    }
    out.push_back({key.first, key.second, "gold", label});
  }
  if (!unresolved.empty()) {
    throw AnnotationError(fmt::format("{} disagreements have no adjudicated label; first is ({}, {})",
                                      unresolved.size(), unresolved.front().first, unresolved.front().second));
  }
  return out;
}

}  // namespace groundgap
