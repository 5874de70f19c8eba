// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "groundgap/acts.hpp"
#include "groundgap/backends.hpp"
#include "groundgap/chat_client.hpp"
#include "groundgap/classifier.hpp"
#include "groundgap/config.hpp"
#include "groundgap/corpus.hpp"
#include "groundgap/metrics.hpp"
#include "groundgap/random.hpp"
#include "groundgap/report.hpp"
#include "groundgap/simulate.hpp"
#include "corpus_gen.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace groundgap;
using namespace testing_support;

namespace {

constexpr double kKappaExactTol = 1e-12;
constexpr double kKappaOracleTol = 1e-9;
constexpr int kKappaRandomTables = 1000;
constexpr double kKappaSuiteSeconds = 1.0;

constexpr int kCoverageTrials = 500;
constexpr std::size_t kCoverageReplicates = 2000;
constexpr double kCoverageLow = 0.90;
constexpr double kCoverageHigh = 0.99;
constexpr double kCoverageSeconds = 120.0;

constexpr double kPearsonTol = 1e-6;
constexpr double kPearsonTableP = 0.104;
constexpr double kPearsonPTol = 1e-3;
constexpr double kChiSquareExpected = 9.5238;
constexpr double kChiSquareTol = 1e-3;

constexpr int kPropertyCases = 1000;

constexpr double kGoldenSeconds = 30.0;

constexpr double kSweepRTol = 1e-9;
constexpr double kSweepMaxP = 0.01;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++count_;
  }
  Outcome done(const std::string& summary) const {
    if (count_ == 0) return {true, summary};
    std::string detail = fmt::format("{} violation(s)", count_);
    for (const auto& f : failures_) detail += "; " + f;
    return {false, detail};
  }

private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BinarySeries counts_series(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinarySeries s;
  std::size_t i = 0;
  auto add = [&](std::size_t n, bool a, bool b) {
    for (std::size_t k = 0; k < n; ++k) s.push_back({"c", i++, a, b});
  };
  add(tp, true, true);
  add(fp, false, true);
  add(fn, true, false);
  add(tn, false, false);
  return s;
}

Outcome kappa_suite() {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  const double k = cohen_kappa_binary(counts_series(20, 5, 10, 15)).kappa;
  c.expect(std::abs(k - 0.4) < kKappaExactTol, fmt::format("worked table gave {:.15f}", k));
  const double constant = cohen_kappa_binary(counts_series(0, 0, 12, 28)).kappa;
  c.expect(std::abs(constant) < kKappaExactTol, fmt::format("constant rater gave {}", constant));
  const double identical = cohen_kappa_binary(counts_series(9, 0, 0, 31)).kappa;
  c.expect(std::abs(identical - 1.0) < kKappaExactTol, fmt::format("identical raters gave {}", identical));

  Rng rng(20240601);
  for (int trial = 0; trial < kKappaRandomTables; ++trial) {
    const auto n = 2 + uniform_index(rng, 79);
    std::vector<std::pair<int, int>> items;
    for (std::size_t i = 0; i < n; ++i) {
      items.emplace_back(static_cast<int>(uniform_index(rng, 4)), static_cast<int>(uniform_index(rng, 4)));
    }
    const double want = oracle::kappa(items);
    const double got = cohen_kappa_categorical(items);
    c.expect(std::abs(got - want) < kKappaOracleTol, fmt::format("table {}: {} vs oracle {}", trial, got, want));

    auto swapped = items;
    for (auto& [a, b] : swapped) std::swap(a, b);
    c.expect(std::abs(cohen_kappa_categorical(swapped) - got) < kKappaOracleTol,
             fmt::format("table {}: not symmetric", trial));

    std::array<int, 4> perm{0, 1, 2, 3};
    shuffle(std::span<int>(perm), rng);
    auto relabeled = items;
    for (auto& [a, b] : relabeled) {
      a = perm[a];
      b = perm[b];
    }
    c.expect(std::abs(cohen_kappa_categorical(relabeled) - got) < kKappaOracleTol,
             fmt::format("table {}: not relabel invariant", trial));

    // Binary route on the one-vs-rest projection of category 0.
    BinarySeries s;
    std::vector<std::pair<int, int>> projected;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back({"c", i, items[i].first == 0, items[i].second == 0});
      projected.emplace_back(items[i].first == 0, items[i].second == 0);
    }
    c.expect(std::abs(cohen_kappa_binary(s).kappa - oracle::kappa(projected)) < kKappaOracleTol,
             fmt::format("table {}: binary projection disagrees with oracle", trial));
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < kKappaSuiteSeconds, fmt::format("took {:.2f}s", elapsed));
  return c.done(fmt::format("kappa(20,5,10,15)={:.12f}, {} random tables, {:.3f}s", k, kKappaRandomTables, elapsed));
}

Outcome bootstrap_coverage() {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  std::string summary;
  for (double p : {0.1, 0.3}) {
    Rng world(static_cast<std::uint64_t>(p * 1000) + 17);
    int covered = 0;
    std::vector<ConversationLabel> labels;
    for (int trial = 0; trial < kCoverageTrials; ++trial) {
      labels.clear();
      for (int conv = 0; conv < 20; ++conv) {
        for (int u = 0; u < 20; ++u) {
          labels.push_back({"c" + std::to_string(conv),
                            uniform_unit(world) < p ? ActLabel::followup : ActLabel::none});
        }
      }
      const auto est = base_rate(labels, ActLabel::followup, kCoverageReplicates,
                                 derive_seed(static_cast<std::uint64_t>(trial), "coverage"));
      covered += est.ci_low <= 100 * p && 100 * p <= est.ci_high;
    }
    const double rate = static_cast<double>(covered) / kCoverageTrials;
    c.expect(rate >= kCoverageLow && rate <= kCoverageHigh, fmt::format("p={} coverage {:.3f}", p, rate));
    summary += fmt::format("p={} coverage {:.3f}; ", p, rate);
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < kCoverageSeconds, fmt::format("took {:.1f}s", elapsed));
  return c.done(summary + fmt::format("{:.1f}s", elapsed));
}

Outcome statistics_oracles() {
  Check c;
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 1, 4, 3, 5};
  const auto r = pearson_r(x, y);
  const auto ro = oracle::pearson(x, y);
  c.expect(std::abs(r.r - 0.8) < kPearsonTol, fmt::format("r = {}", r.r));
  c.expect(std::abs(r.r - ro.r) < kPearsonTol, fmt::format("r oracle = {}", ro.r));
  c.expect(std::abs(r.p - kPearsonTableP) < kPearsonPTol, fmt::format("p = {} vs table {}", r.p, kPearsonTableP));
  c.expect(std::abs(r.p - ro.p) < kPearsonPTol, fmt::format("p = {} vs boost {}", r.p, ro.p));

  const auto chi = chi_square_2x2(20, 80, 40, 60);
  const auto co = oracle::chi_square(20, 80, 40, 60);
  c.expect(std::abs(chi.chi2 - kChiSquareExpected) < kChiSquareTol, fmt::format("chi2 = {}", chi.chi2));
  c.expect(std::abs(chi.chi2 - co.chi2) < kChiSquareTol, fmt::format("chi2 oracle = {}", co.chi2));

  // gold  f f f a a c n n
  // pred  f f a a n c f n
  using L = ActLabel;
  const std::vector<L> gold_labels{L::followup, L::followup, L::followup, L::acknowledgement,
                                   L::acknowledgement, L::clarification, L::none, L::none};
  const std::vector<L> pred_labels{L::followup, L::followup, L::acknowledgement, L::acknowledgement,
                                   L::none, L::clarification, L::followup, L::none};
  std::vector<GoldAnnotation> gold;
  std::vector<Prediction> preds;
  std::vector<int> gi, pi;
  for (std::size_t i = 0; i < gold_labels.size(); ++i) {
    gold.push_back({"c", i, "g", gold_labels[i]});
    preds.push_back({"c", i, pred_labels[i]});
    gi.push_back(static_cast<int>(gold_labels[i]));
    pi.push_back(static_cast<int>(pred_labels[i]));
  }
  const auto eval = evaluate_classifier(preds, gold);
  const double hand = (2.0 / 3.0 + 0.5 + 1.0) / 3.0;
  c.expect(eval.macro_f1 == hand, fmt::format("macro F1 {:.17g} vs hand {:.17g}", eval.macro_f1, hand));
  c.expect(eval.per_act.at(L::followup).f1 == 2.0 / 3.0, "followup F1");
  c.expect(eval.per_act.at(L::acknowledgement).f1 == 0.5, "acknowledgement F1");
  c.expect(eval.per_act.at(L::clarification).f1 == 1.0, "clarification F1");
  for (auto act : kGroundingActs) {
    const auto o = oracle::prf(gi, pi, static_cast<int>(act));
    const auto& s = eval.per_act.at(act);
    c.expect(std::abs(s.precision - o.precision) < 1e-12 && std::abs(s.recall - o.recall) < 1e-12 &&
                 std::abs(s.f1 - o.f1) < 1e-12,
             fmt::format("{} disagrees with P/R oracle", to_string(act)));
  }
  return c.done(fmt::format("r={:.6f} p={:.4f}, chi2={:.4f}, macro F1={:.6f}", r.r, r.p, chi.chi2, eval.macro_f1));
}

// Same-role runs joined with "\n", built without the library.
std::vector<std::pair<std::string, std::string>> runs_of(const Conversation& conv) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& t : conv.turns) {
    if (!out.empty() && out.back().first == t.role) {
      out.back().second += "\n" + t.text;
    } else {
      out.emplace_back(t.role, t.text);
    }
  }
  return out;
}

Outcome preprocessing_properties() {
  Check c;
  Rng rng(777);
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const auto raw = random_corpus(rng);
    const auto merged = merge_consecutive_turns(raw);
    c.expect(merge_consecutive_turns(merged) == merged, fmt::format("case {}: merge not idempotent", trial));
    for (std::size_t i = 0; i < merged.size(); ++i) {
      const auto& conv = merged[i];
      const auto runs = runs_of(raw[i]);
      c.expect(conv.turns.size() == runs.size(), fmt::format("case {}: run count", trial));
      for (std::size_t t = 0; t < conv.turns.size() && t < runs.size(); ++t) {
        c.expect(conv.turns[t].index == t, fmt::format("case {}: index {}", trial, t));
        c.expect(conv.turns[t].role == runs[t].first && conv.turns[t].text == runs[t].second,
                 fmt::format("case {}: run {} content", trial, t));
        if (t > 0) {
          c.expect(conv.turns[t].role != conv.turns[t - 1].role,
                   fmt::format("case {}: roles repeat at {}", trial, t));
        }
      }
    }

    std::vector<std::size_t> lengths;
    for (const auto& conv : merged) lengths.push_back(conv.turns.size());
    std::sort(lengths.begin(), lengths.end());
    const auto median = lengths[(lengths.size() - 1) / 2];
    c.expect(median_message_count(merged) == median, fmt::format("case {}: median", trial));
    std::size_t eligible = 0;
    for (auto len : lengths) eligible += len >= median;

    const auto n = 1 + static_cast<std::size_t>(uniform_index(rng, eligible));
    const auto seed = rng();
    const auto sample = sample_and_truncate(merged, n, seed);
    c.expect(sample == sample_and_truncate(merged, n, seed), fmt::format("case {}: sampling not deterministic", trial));
    c.expect(sample.size() == n, fmt::format("case {}: sample size", trial));
    std::set<std::string> ids;
    for (const auto& conv : sample) {
      ids.insert(conv.id);
      c.expect(conv.turns.size() == median, fmt::format("case {}: {} has {} turns, median {}", trial, conv.id,
                                                        conv.turns.size(), median));
      auto source = std::find_if(merged.begin(), merged.end(), [&](const auto& m) { return m.id == conv.id; });
      c.expect(source != merged.end() && source->turns.size() >= median &&
                   std::equal(conv.turns.begin(), conv.turns.end(), source->turns.begin()),
               fmt::format("case {}: {} is not a prefix of an eligible conversation", trial, conv.id));
    }
    c.expect(ids.size() == sample.size(), fmt::format("case {}: duplicate ids", trial));
    try {
      sample_and_truncate(merged, eligible + 1, seed);
      c.expect(false, fmt::format("case {}: oversampling accepted", trial));
    } catch (const CorpusError&) {
    }
  }
  return c.done(fmt::format("{} randomized corpora, zero violations", kPropertyCases));
}

const std::vector<std::string> kGoldenFiles{"corpus.jsonl", "splits.json", "labels-human.jsonl", "pairs.jsonl",
                                            "labels-generated.jsonl", "report.json", "report.md", "rendered.md"};

Outcome golden_run(const TempDir& work) {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  const auto script = source_dir() / "tests" / "run_golden_pipeline.sh";
  const std::string cmd = fmt::format("sh '{}' '{}' '{}' > '{}' 2>&1", script.string(), GROUNDGAP_CLI,
                                      (work / "run").string(), (work / "log.txt").string());
  const int status = std::system(cmd.c_str());
  const double elapsed = seconds_since(start);
  if (status != 0) {
    return {false, "pipeline failed: " + read_text(work / "log.txt")};
  }
  for (const auto& name : kGoldenFiles) {
    const auto golden = source_dir() / "tests" / "golden" / name;
    c.expect(std::filesystem::exists(golden), name + " missing from golden set");
    c.expect(read_text(work / "run" / name) == read_text(golden), name + " differs from golden");
  }
  c.expect(elapsed < kGoldenSeconds, fmt::format("took {:.1f}s", elapsed));
  return c.done(fmt::format("{} artifacts byte-identical, {:.2f}s", kGoldenFiles.size(), elapsed));
}

MetricsReport load_report_fixture(const std::string& name) {
  std::ifstream in(fixture("reports/" + name));
  return report_from_json(nlohmann::json::parse(in));
}

Outcome table_rendering() {
  Check c;
  const auto table2 = render_dataset_table(load_report_fixture("table2_esconv.json"));
  c.expect(table2.find("27.87 ± 4.4") != std::string::npos, "human followup cell missing");
  c.expect(table2.find("12.47 ± 6.4") != std::string::npos, "followup kappa cell missing");
  std::vector<MetricsReport> reports;
  for (const char* name : {"human", "3.5-instruct-turbo", "3.5-turbo", "4", "mistral-sft", "mistral-rlhf",
                           "3.5-turbo-mitigation"}) {
    reports.push_back(load_report_fixture(std::string("table3_") + name + ".json"));
  }
  const auto table3 = render_model_comparison(reports);
  std::string sft_row;
  std::istringstream lines(table3);
  for (std::string line; std::getline(lines, line);) {
    if (line.starts_with("| mistral-sft |")) sft_row = line;
  }
  // Columns: generator, then base rate and kappa per act in followup, ack, clar order.
  std::vector<std::string> cells;
  std::istringstream row(sft_row);
  for (std::string cell; std::getline(row, cell, '|');) {
    const auto b = cell.find_first_not_of(' ');
    if (b != std::string::npos) cells.push_back(cell.substr(b, cell.find_last_not_of(' ') - b + 1));
  }
  c.expect(cells.size() == 7, "mistral-sft row has " + std::to_string(cells.size()) + " cells");
  if (cells.size() == 7) c.expect(cells[4] == "26.92 ± 9.6", "mistral-sft ack kappa cell is \"" + cells[4] + "\"");
  return c.done("27.87 ± 4.4, 12.47 ± 6.4, 26.92 ± 9.6 rendered");
}

Outcome prevalence() {
  Check c;
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 10000; ++i) {
    // Offsets keep the two question sets from lining up.
    const bool chosen_q = (i * 7) % 10000 < 1377;
    const bool rejected_q = (i * 13 + 5) % 10000 < 1835;
    pairs.push_back({std::to_string(i),
                     {"\n\nHuman: hello\n\nAssistant: " + std::string(chosen_q ? "Which part worries you?" : "Noted.")},
                     {"\n\nHuman: hello\n\nAssistant: " + std::string(rejected_q ? "Can you say more?" : "Fine.")}});
  }
  const auto prev = question_prevalence(pairs);
  c.expect(prev.pct_chosen == 13.77, fmt::format("chosen {:.17g}", prev.pct_chosen));
  c.expect(prev.pct_rejected == 18.35, fmt::format("rejected {:.17g}", prev.pct_rejected));
  c.expect(prev.pct_rejected > prev.pct_chosen, "direction");
  c.expect(prev.test.has_value() && prev.test->chi2 > 0, "chi2 not positive");
  if (prev.test) {
    const auto o = oracle::chi_square(1377, 10000 - 1377, 1835, 10000 - 1835);
    c.expect(std::abs(prev.test->chi2 - o.chi2) < 1e-6 * o.chi2, "chi2 disagrees with oracle");
  }
  return c.done(fmt::format("chosen {:.2f}%, rejected {:.2f}%, chi2={:.2f}", prev.pct_chosen, prev.pct_rejected,
                            prev.test ? prev.test->chi2 : 0.0));
}

Outcome context_isolation() {
  Check c;
  const auto corpus = load_corpus(source_dir() / "tests" / "golden" / "corpus.jsonl");
  const auto golden_pairs = load_pairs(source_dir() / "tests" / "golden" / "pairs.jsonl");
  const auto cfg = load_config(fixture("golden.toml"));
  // One worker keeps requests in pair order, so request i belongs to pair i.
  auto opts = client_options(cfg);
  opts.max_in_flight = 1;
  ChatClient client(opts);
  register_backends(client, cfg);
  const auto sim = simulation_config(cfg, false);
  BackendSpec spec;
  for (const auto& b : cfg.backends) {
    if (b.id == sim.backend) spec = b;
  }
  std::shared_ptr<ChatBackend> inner = MockBackend::from_spec(spec);
  std::mutex mu;
  std::vector<ChatRequest> seen;
  client.register_backend(sim.backend, std::make_shared<FunctionBackend>([&](const ChatRequest& r) {
    {
      std::lock_guard lock(mu);
      seen.push_back(r);
    }
    return inner->send(r);
  }));
  const auto result = simulate_corpus(corpus, sim, client);
  c.expect(result.pairs == golden_pairs, "re-simulated pairs differ from the golden pairs");
  c.expect(seen.size() == golden_pairs.size(), fmt::format("{} requests for {} pairs", seen.size(), golden_pairs.size()));

  std::size_t checked = 0;
  for (std::size_t k = 0; k < seen.size() && k < golden_pairs.size(); ++k) {
    const auto& req = seen[k];
    const auto& pair = golden_pairs[k];
    const auto conv = std::find_if(corpus.begin(), corpus.end(), [&](const auto& cv) { return cv.id == pair.conversation_id; });
    if (conv == corpus.end()) {
      c.expect(false, "pair references unknown conversation " + pair.conversation_id);
      continue;
    }
    c.expect(req.messages.size() == pair.turn_index + 1,
             fmt::format("({}, {}) prompt has {} messages", pair.conversation_id, pair.turn_index, req.messages.size()));
    const auto t = pair.turn_index;
    c.expect(conv->turns[t].text == pair.human_text, fmt::format("({}, {}) human text mismatch", conv->id, t));
    std::string prompt;
    for (const auto& m : req.messages) prompt += m.content + "\x1f";
    std::size_t pos = 0;
    for (std::size_t i = 0; i < t; ++i) {
      const auto found = prompt.find(conv->turns[i].text, pos);
      c.expect(found != std::string::npos, fmt::format("({}, {}) prompt lacks prior turn {}", conv->id, t, i));
      if (found != std::string::npos) pos = found + conv->turns[i].text.size();
    }
    for (std::size_t j = t; j < conv->turns.size(); ++j) {
      c.expect(prompt.find(conv->turns[j].text) == std::string::npos,
               fmt::format("({}, {}) prompt contains turn {}", conv->id, t, j));
    }
    ++checked;
  }
  return c.done(fmt::format("{} prompts checked against {} pairs", checked, golden_pairs.size()));
}

// 18 conversations x 5 expert positions. Human labels: positions 0-9
// followup, 10-19 acknowledgement, 20-29 clarification, the rest none.
// Checkpoint k moves k positives of each act to none and k human-none
// positions to that act, so marginals stay fixed and agreement drops by a
// constant amount per step.
constexpr std::size_t kSweepConversations = 18;
constexpr std::size_t kSweepTurns = 10;
constexpr int kSweepCheckpoints = 10;

ActLabel human_sweep_label(std::size_t pos) {
  return pos < 30 ? kGroundingActs[pos / 10] : ActLabel::none;
}

ActLabel generated_sweep_label(std::size_t pos, std::size_t k) {
  if (pos < 30) return pos % 10 < k ? ActLabel::none : kGroundingActs[pos / 10];
  const auto q = pos - 30;
  return q % 20 < k ? kGroundingActs[q / 20] : ActLabel::none;
}

Outcome sweep_machinery() {
  Check c;
  Corpus corpus;
  for (std::size_t i = 0; i < kSweepConversations; ++i) corpus.push_back(alternating(fmt::format("s{:02}", i), kSweepTurns));
  auto position = [&](const std::string& id, std::size_t turn) {
    return static_cast<std::size_t>(std::stoul(id.substr(1))) * 5 + (turn - 1) / 2;
  };
  std::vector<Prediction> human;
  for (const auto& conv : corpus) {
    for (std::size_t t = 1; t < kSweepTurns; t += 2) human.push_back({conv.id, t, human_sweep_label(position(conv.id, t))});
  }

  ClientOptions opts;
  opts.max_in_flight = 4;
  ChatClient client(opts);
  client.register_backend("family", std::make_shared<FunctionBackend>([&](const ChatRequest& r) {
    const auto k = static_cast<std::size_t>(std::stoul(r.model.substr(4)));
    const auto& first = r.messages.at(1).content;
    const auto id = first.substr(0, first.find(' '));
    const auto t = r.messages.size() - 1;
    return "GEN:" + std::string(to_string(generated_sweep_label(position(id, t), k)));
  }));
  client.register_backend("judge", std::make_shared<FunctionBackend>([](const ChatRequest& r) {
    const auto& u = r.messages.back().content;
    const auto at = u.find("GEN:");
    if (at == std::string::npos) return std::string("none");
    const auto end = u.find('\n', at);
    return u.substr(at + 4, end - at - 4);
  }));
  TemplateStore templates(data_dir() / "templates");
  ClassifierConfig ccfg;
  ccfg.mode = ClassifierMode::zero_shot;
  ccfg.template_name = "classify-zeroshot-v1";
  ccfg.backend = "judge";
  Classifier classifier(ccfg, client, templates);

  SweepSpec spec;
  spec.simulation.instruction = default_instruction("esconv");
  for (int k = 0; k < kSweepCheckpoints; ++k) spec.checkpoints.push_back({1000LL * k, "family", fmt::format("ckpt{}", k)});
  const auto rows = run_sweep(corpus, spec, human, classifier, client);
  c.expect(rows.size() == kSweepCheckpoints * kGroundingActs.size(), fmt::format("{} rows", rows.size()));

  std::string summary;
  for (auto act : kGroundingActs) {
    std::vector<double> steps, kappas;
    for (const auto& row : rows) {
      if (row.act != act) continue;
      steps.push_back(static_cast<double>(row.step));
      kappas.push_back(row.kappa);
    }
    const auto corr = pearson_r(steps, kappas);
    const auto o = oracle::pearson(steps, kappas);
    c.expect(std::abs(corr.r + 1.0) < kSweepRTol, fmt::format("{} r = {:.12f}", to_string(act), corr.r));
    c.expect(std::abs(o.r + 1.0) < kSweepRTol, fmt::format("{} oracle r = {:.12f}", to_string(act), o.r));
    c.expect(corr.p < kSweepMaxP, fmt::format("{} p = {}", to_string(act), corr.p));
    for (std::size_t i = 1; i < kappas.size(); ++i) {
      c.expect(kappas[i] < kappas[i - 1], fmt::format("{} kappa not decreasing at {}", to_string(act), i));
    }
    summary += fmt::format("{} r={:.9f}; ", to_string(act), corr.r);
  }
  const auto rendered = render_sweep(rows);
  c.expect(rendered.markdown.find("| Followup | -1.000 |") != std::string::npos, "sweep markdown lacks r = -1.000");
  return c.done(summary + fmt::format("{} checkpoints", kSweepCheckpoints));
}

}  // namespace

int main() {
  TempDir work;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kappa-oracle-suite", kappa_suite},
      {"bootstrap-coverage", bootstrap_coverage},
      {"pearson-chi2-f1-oracles", statistics_oracles},
      {"preprocessing-properties", preprocessing_properties},
      {"end-to-end-golden-run", [&] { return golden_run(work); }},
      {"table-rendering-fixtures", table_rendering},
      {"question-prevalence", prevalence},
      {"context-isolation", context_isolation},
      {"sweep-machinery", sweep_machinery},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail << std::endl;
    failed += outcome.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
