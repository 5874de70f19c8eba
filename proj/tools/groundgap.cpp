// groundgap command-line driver.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "groundgap/acts.hpp"
#include "groundgap/annotate.hpp"
#include "groundgap/classifier.hpp"
#include "groundgap/config.hpp"
#include "groundgap/corpus.hpp"
#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/metrics.hpp"
#include "groundgap/random.hpp"
#include "groundgap/report.hpp"
#include "groundgap/simulate.hpp"

namespace fs = std::filesystem;
using namespace groundgap;
using nlohmann::json;

namespace {

fs::path corpus_file(const fs::path& p) { return fs::is_directory(p) ? p / "corpus.jsonl" : p; }

fs::path corpus_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const Config* cfg) {
  if (flag) return *flag;
  if (cfg && cfg->seed) return *cfg->seed;
  return 0;
}

// Restricts a corpus to one split listed in <dir>/splits.json.
Corpus select_split(const Corpus& corpus, const fs::path& dir, const std::string& split) {
  if (split == "all") return corpus;
  const auto s = split_from_json(io::read_json_file(dir / "splits.json"));
  const std::vector<std::string>* ids = nullptr;
  if (split == "train") ids = &s.train_ids;
  if (split == "validation") ids = &s.validation_ids;
  if (split == "test") ids = &s.test_ids;
  if (!ids) throw ConfigError(fmt::format("unknown split \"{}\"", split));
  const std::set<std::string> keep(ids->begin(), ids->end());
  Corpus out;
  for (const auto& conv : corpus) {
    if (keep.contains(conv.id)) out.push_back(conv);
  }
  return out;
}

void print_stats(const ChatClient& client) {
  const auto s = client.stats();
  fmt::print("requests {}, cache hits {}, backend calls {}, retries {}\n", s.requests, s.cache_hits,
             s.backend_calls, s.retries);
  if (s.cache_write_failures > 0) fmt::print("cache write failures {}\n", s.cache_write_failures);
}

struct PrepArgs {
  fs::path corpus;
  fs::path out;
  std::size_t n = 100;
  std::optional<std::uint64_t> seed;
  std::string dataset;
};

int run_prep(const PrepArgs& a) {
  const auto seed = resolve_seed(a.seed, nullptr);
  const auto merged = merge_consecutive_turns(load_corpus(a.corpus, a.dataset));
  const auto median = median_message_count(merged);
  const auto sampled = sample_and_truncate(merged, a.n, derive_seed(seed, "prep"));
  const auto split = make_splits(sampled, derive_seed(seed, "split"));
  save_corpus(a.out / "corpus.jsonl", sampled);
  io::write_json_file(a.out / "splits.json", split_to_json(split));
  fmt::print("{} conversations read, median length {}, {} sampled\n", merged.size(), median, sampled.size());
  fmt::print("splits: train {}, validation {}, test {}\n", split.train_ids.size(), split.validation_ids.size(),
             split.test_ids.size());
  return 0;
}

struct ClassifyArgs {
  fs::path corpus;
  std::string who;
  fs::path config;
  fs::path pairs;
  fs::path out;
  std::string split = "all";
};

int run_classify(const ClassifyArgs& a) {
  const auto cfg = load_config(a.config);
  const auto dir = corpus_dir(a.corpus);
  const auto corpus = select_split(load_corpus(corpus_file(a.corpus)), dir, a.split);
  ChatClient client(client_options(cfg));
  register_backends(client, cfg);
  TemplateStore templates(cfg.classifier.templates_dir);
  Classifier classifier(classifier_config(cfg), client, templates);

  std::vector<ClassificationTarget> targets;
  if (a.who == "human") {
    targets = human_targets(corpus);
  } else {
    const auto pairs_path = a.pairs.empty() ? dir / "pairs.jsonl" : a.pairs;
    auto pairs = load_pairs(pairs_path);
    std::set<std::string> ids;
    for (const auto& c : corpus) ids.insert(c.id);
    std::erase_if(pairs, [&](const LabeledPair& p) { return !ids.contains(p.conversation_id); });
    targets = generated_targets(corpus, pairs);
  }
  const auto batch = classifier.classify_all(targets);
  const auto out = a.out.empty() ? dir / fmt::format("labels-{}.jsonl", a.who) : a.out;
  save_predictions(out, batch.predictions, a.who);
  fmt::print("{} labels written to {}\n", batch.predictions.size(), out.string());
  print_stats(client);
  if (!batch.failures.empty()) {
    std::vector<json> rows;
    for (const auto& f : batch.failures) {
      rows.push_back({{"conversation_id", f.conversation_id},
                      {"turn_index", f.turn_index},
                      {"message", f.message},
                      {"raw_text", f.raw_text}});
    }
    auto failures = out;
    failures.replace_extension(".failures.jsonl");
    io::write_file_atomic(failures, io::to_jsonl(rows));
    throw ClassificationError(fmt::format("{} of {} turns could not be classified; see {}", batch.failures.size(),
                                          targets.size(), failures.string()),
                              {});
  }
  return 0;
}

struct SimulateArgs {
  fs::path corpus;
  fs::path config;
  bool mitigation = false;
  fs::path out;
};

void write_failures(const fs::path& path, const std::vector<TurnFailure>& failures) {
  std::vector<json> rows;
  for (const auto& f : failures) {
    rows.push_back({{"conversation_id", f.conversation_id}, {"turn_index", f.turn_index}, {"message", f.message}});
  }
  io::write_file_atomic(path, io::to_jsonl(rows));
}

int run_simulate(const SimulateArgs& a) {
  const auto cfg = load_config(a.config);
  const auto dir = corpus_dir(a.corpus);
  const auto corpus = load_corpus(corpus_file(a.corpus));
  ChatClient client(client_options(cfg));
  register_backends(client, cfg);
  const auto sim = simulation_config(cfg, a.mitigation);
  auto out = a.out;
  if (out.empty()) {
    std::string name = "pairs";
    if (!sim.tag.empty()) name += "-" + sim.tag;
    if (a.mitigation) name += "-mitigation";
    out = dir / (name + ".jsonl");
  }
  auto failures_path = out;
  failures_path.replace_extension(".failures.jsonl");
  try {
    const auto result = simulate_corpus(corpus, sim, client);
    save_pairs(out, result.pairs);
    fmt::print("{} pairs written to {}\n", result.pairs.size(), out.string());
    if (!result.failures.empty()) {
      write_failures(failures_path, result.failures);
      fmt::print("{} turns failed; see {}\n", result.failures.size(), failures_path.string());
    }
  } catch (const SimulationAborted& e) {
    write_failures(failures_path, e.partial().failures);
    throw;
  }
  print_stats(client);
  return 0;
}

struct MetricsArgs {
  fs::path pairs;
  std::vector<fs::path> labels;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::size_t replicates = kDefaultBootstrapReplicates;
  std::string dataset;
  std::string generator = "model";
};

int run_metrics(const MetricsArgs& a) {
  if (a.labels.size() != 2) {
    throw ConfigError("--labels takes the human labels file and then the generated labels file");
  }
  const auto seed = resolve_seed(a.seed, nullptr);
  auto pairs = load_pairs(a.pairs);
  attach_labels(pairs, load_predictions(a.labels[0]), load_predictions(a.labels[1]));
  const auto report = compute_metrics_report(pairs, a.dataset, a.generator, a.replicates, derive_seed(seed, "bootstrap"));
  io::write_json_file(a.out / "report.json", report_to_json(report));
  const auto md = render_dataset_table(report);
  io::write_file_atomic(a.out / "report.md", md);
  fmt::print("{}", md);
  return 0;
}

struct ReportArgs {
  std::vector<fs::path> reports;
  fs::path out;
};

int run_report(const ReportArgs& a) {
  std::vector<MetricsReport> reports;
  for (const auto& p : a.reports) reports.push_back(report_from_json(io::read_json_file(p)));
  const auto md = reports.size() == 1 ? render_dataset_table(reports.front()) : render_model_comparison(reports);
  if (!a.out.empty()) io::write_file_atomic(a.out, md);
  fmt::print("{}", md);
  return 0;
}

struct SweepArgs {
  fs::path corpus;
  fs::path checkpoints;
  fs::path config;
  fs::path human_labels;
  fs::path out;
};

void write_sweep(const fs::path& dir, const std::vector<SweepRow>& rows) {
  SweepRender r;
  try {
    r = render_sweep(rows);
  } catch (const ReportError&) {
    // Too few checkpoints finished for a summary; keep the raw rows.
    r.csv = "step,act,kappa,base_rate\n";
    for (const auto& row : rows) {
      r.csv += fmt::format("{},{},{:.6f},{:.4f}\n", row.step, to_string(row.act), row.kappa, row.base_rate);
    }
  }
  io::write_file_atomic(dir / "sweep.csv", r.csv);
  if (!r.markdown.empty()) {
    io::write_file_atomic(dir / "sweep.md", r.markdown);
    fmt::print("{}", r.markdown);
  }
}

int run_sweep_cmd(const SweepArgs& a) {
  const auto cfg = load_config(a.config);
  const auto dir = corpus_dir(a.corpus);
  const auto corpus = load_corpus(corpus_file(a.corpus));
  SweepSpec spec;
  spec.checkpoints = a.checkpoints.empty() ? cfg.checkpoints : load_checkpoints(a.checkpoints);
  validate_sweep(spec);
  spec.simulation = simulation_config(cfg, false);
  ChatClient client(client_options(cfg));
  register_backends(client, cfg);
  for (const auto& c : spec.checkpoints) {
    if (!client.has_backend(c.backend)) {
      throw ConfigError(fmt::format("checkpoint {} uses undefined backend \"{}\"", c.step, c.backend));
    }
  }
  TemplateStore templates(cfg.classifier.templates_dir);
  Classifier classifier(classifier_config(cfg), client, templates);
  const auto human = load_predictions(a.human_labels.empty() ? dir / "labels-human.jsonl" : a.human_labels);
  const auto out = a.out.empty() ? dir : a.out;
  try {
    write_sweep(out, run_sweep(corpus, spec, human, classifier, client));
  } catch (const SweepAborted& e) {
    write_sweep(out, e.partial());
    throw;
  }
  print_stats(client);
  return 0;
}

int run_prefstats(const fs::path& path) {
  const auto stats = question_prevalence(load_preference_pairs(path));
  fmt::print("pairs {}\n", stats.n_pairs);
  fmt::print("pct_chosen {:.2f}\n", stats.pct_chosen);
  fmt::print("pct_rejected {:.2f}\n", stats.pct_rejected);
  if (stats.test) {
    fmt::print("chi2 {:.4f}\n", stats.test->chi2);
    fmt::print("p {:.4g}\n", stats.test->p);
  } else {
    fmt::print("chi2 not applicable: the 2x2 table has a zero marginal\n");
  }
  return 0;
}

struct AnnotateArgs {
  std::string mode;
  std::string annotator;
  fs::path corpus;
  std::string split = "test";
  fs::path pairs;
  fs::path human_labels;
  fs::path generated_labels;
  fs::path out;
  fs::path resume;
  std::optional<std::uint64_t> seed;
  std::size_t sample = kErrorSampleSize;
};

int run_annotate(const AnnotateArgs& a) {
  const auto seed = resolve_seed(a.seed, nullptr);
  const auto dir = corpus_dir(a.corpus);
  const auto corpus = load_corpus(corpus_file(a.corpus));
  SessionOptions opts;
  opts.annotator = a.annotator;
  opts.output = a.out.empty() ? dir / fmt::format("{}-{}.jsonl", a.mode, a.annotator) : a.out;
  opts.resume = a.resume.empty() ? fs::path(opts.output.string() + ".resume.json") : a.resume;
  opts.seed = seed;
  SessionSummary summary;
  if (a.mode == "acts") {
    summary = run_act_annotation(human_targets(select_split(corpus, dir, a.split)), opts, std::cin, std::cout);
  } else if (a.mode == "errors") {
    auto pairs = load_pairs(a.pairs.empty() ? dir / "pairs.jsonl" : a.pairs);
    attach_labels(pairs, load_predictions(a.human_labels.empty() ? dir / "labels-human.jsonl" : a.human_labels),
                  load_predictions(a.generated_labels.empty() ? dir / "labels-generated.jsonl" : a.generated_labels));
    const auto items = sample_error_items(corpus, pairs, a.sample, derive_seed(seed, "sampling"));
    summary = run_error_annotation(items, opts, std::cin, std::cout);
  } else {
    throw ConfigError(fmt::format("unknown annotation mode \"{}\" (acts, errors)", a.mode));
  }
  fmt::print("{} judgments recorded; {} of {} items done\n", summary.recorded, summary.cursor, summary.total);
  return 0;
}

int run_aggregate(const fs::path& a, const fs::path& b, const fs::path& out) {
  const auto agg = aggregate_dual_annotations(load_error_judgments(a), load_error_judgments(b));
  if (!out.empty()) save_error_judgments(out, agg.items);
  std::map<ErrorCategory, std::size_t> counts;
  for (const auto& j : agg.items) ++counts[j.category];
  fmt::print("items {}\nkappa {:.4f}\nassigned {:.2f}%\n", agg.items.size(), agg.kappa, 100.0 * agg.fraction_assigned);
  const auto assigned = static_cast<double>(agg.items.size()) * agg.fraction_assigned;
  for (auto c : kErrorCategories) {
    if (c == ErrorCategory::none) continue;
    const double share = assigned > 0 ? 100.0 * static_cast<double>(counts[c]) / assigned : 0.0;
    fmt::print("{} {} ({:.2f}% of assigned)\n", to_string(c), counts[c], share);
  }
  return 0;
}

struct GoldArgs {
  fs::path first;
  fs::path second;
  std::string mode = "adjudicated";
  fs::path adjudicated;
  fs::path out;
};

int run_gold(const GoldArgs& a) {
  const auto first = load_gold_annotations(a.first);
  const auto second = load_gold_annotations(a.second);
  const auto mode = gold_resolution_from_string(a.mode);
  std::vector<GoldAnnotation> adjudication;
  if (mode == GoldResolution::adjudicated) {
    if (a.adjudicated.empty()) throw AnnotationError("adjudicated mode needs --adjudicated <file>");
    adjudication = load_gold_annotations(a.adjudicated);
  }
  fmt::print("inter-annotator kappa {:.4f}\n", inter_annotator_kappa(first, second));
  const auto gold = resolve_gold(first, second, mode, adjudication);
  save_gold_annotations(a.out, gold);
  fmt::print("{} gold labels written to {}\n", gold.size(), a.out.string());
  return 0;
}

int run_evaluate(const fs::path& labels, const fs::path& gold_path) {
  const auto eval = evaluate_classifier(load_predictions(labels), load_gold_annotations(gold_path));
  fmt::print("| Act | Precision | Recall | F1 | Support |\n|---|---:|---:|---:|---:|\n");
  for (auto act : kGroundingActs) {
    const auto& s = eval.per_act.at(act);
    fmt::print("| {} | {:.2f} | {:.2f} | {:.2f} | {} |\n", act_display_name(act), s.precision, s.recall, s.f1,
               s.support);
  }
  fmt::print("macro F1 {:.4f}\n", eval.macro_f1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure grounding-act gaps between human and simulated dialogue turns"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  PrepArgs prep;
  auto* prep_cmd = app.add_subcommand("prep", "Merge, sample and truncate a corpus, and write splits");
  prep_cmd->add_option("--corpus", prep.corpus, "Canonical corpus JSONL")->required()->check(CLI::ExistingFile);
  prep_cmd->add_option("--out", prep.out, "Output directory")->required();
  prep_cmd->add_option("--n", prep.n, "Conversations to sample")->check(CLI::PositiveNumber);
  prep_cmd->add_option("--seed", prep.seed);
  prep_cmd->add_option("--dataset", prep.dataset, "Required dataset tag");

  ClassifyArgs classify;
  auto* classify_cmd = app.add_subcommand("classify", "Label expert turns with grounding acts");
  classify_cmd->add_option("--corpus", classify.corpus, "Prepped corpus directory or file")->required();
  classify_cmd->add_option("--who", classify.who)->required()->check(CLI::IsMember({"human", "generated"}));
  classify_cmd->add_option("--config", classify.config)->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--pairs", classify.pairs, "Pairs file (generated only)");
  classify_cmd->add_option("--out", classify.out, "Labels file");
  classify_cmd->add_option("--split", classify.split)->check(CLI::IsMember({"all", "train", "validation", "test"}));

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate counterfactual expert turns");
  simulate_cmd->add_option("--corpus", simulate.corpus)->required();
  simulate_cmd->add_option("--config", simulate.config)->required()->check(CLI::ExistingFile);
  simulate_cmd->add_flag("--mitigation", simulate.mitigation, "Append the mitigation prompt to the instruction");
  simulate_cmd->add_option("--out", simulate.out, "Pairs file");

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Base rates, kappa and rate-difference tests");
  metrics_cmd->add_option("--pairs", metrics.pairs)->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--labels", metrics.labels, "Human labels, then generated labels")
      ->required()
      ->expected(2)
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--out", metrics.out)->required();
  metrics_cmd->add_option("--seed", metrics.seed);
  metrics_cmd->add_option("-B,--replicates", metrics.replicates, "Bootstrap replicates")
      ->check(CLI::Range(kMinBootstrapReplicates, std::size_t{10'000'000}));
  metrics_cmd->add_option("--dataset", metrics.dataset);
  metrics_cmd->add_option("--generator", metrics.generator);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Render one or more metrics reports as Markdown");
  report_cmd->add_option("--reports", report.reports)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report.out);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Kappa trend across training checkpoints");
  sweep_cmd->add_option("--corpus", sweep.corpus)->required();
  sweep_cmd->add_option("--checkpoints", sweep.checkpoints, "TOML file of [[checkpoint]] tables")
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--config", sweep.config)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--human-labels", sweep.human_labels);
  sweep_cmd->add_option("--out", sweep.out, "Output directory");

  fs::path pref_path;
  auto* pref_cmd = app.add_subcommand("prefstats", "Question prevalence in preference data");
  pref_cmd->add_option("--pairs", pref_path)->required()->check(CLI::ExistingFile);

  AnnotateArgs annotate;
  auto* annotate_cmd = app.add_subcommand("annotate", "Interactive annotation session");
  annotate_cmd->add_option("--mode", annotate.mode)->required()->check(CLI::IsMember({"acts", "errors"}));
  annotate_cmd->add_option("--annotator", annotate.annotator)->required();
  annotate_cmd->add_option("--corpus", annotate.corpus)->required();
  annotate_cmd->add_option("--split", annotate.split)->check(CLI::IsMember({"all", "train", "validation", "test"}));
  annotate_cmd->add_option("--pairs", annotate.pairs);
  annotate_cmd->add_option("--human-labels", annotate.human_labels);
  annotate_cmd->add_option("--generated-labels", annotate.generated_labels);
  annotate_cmd->add_option("--out", annotate.out);
  annotate_cmd->add_option("--resume", annotate.resume);
  annotate_cmd->add_option("--seed", annotate.seed);
  annotate_cmd->add_option("--sample", annotate.sample, "Error items to sample")->check(CLI::PositiveNumber);

  fs::path agg_a;
  fs::path agg_b;
  fs::path agg_out;
  auto* agg_cmd = app.add_subcommand("aggregate", "Combine two annotators' error judgments");
  agg_cmd->add_option("--a", agg_a)->required()->check(CLI::ExistingFile);
  agg_cmd->add_option("--b", agg_b)->required()->check(CLI::ExistingFile);
  agg_cmd->add_option("--out", agg_out);

  GoldArgs gold;
  auto* gold_cmd = app.add_subcommand("gold", "Merge two annotators' act labels into a gold file");
  gold_cmd->add_option("--first", gold.first)->required()->check(CLI::ExistingFile);
  gold_cmd->add_option("--second", gold.second)->required()->check(CLI::ExistingFile);
  gold_cmd->add_option("--mode", gold.mode)->check(CLI::IsMember({"adjudicated", "first-annotator-wins"}));
  gold_cmd->add_option("--adjudicated", gold.adjudicated)->check(CLI::ExistingFile);
  gold_cmd->add_option("--out", gold.out)->required();

  fs::path eval_labels;
  fs::path eval_gold;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-act precision, recall and F1 against gold labels");
  eval_cmd->add_option("--labels", eval_labels)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", eval_gold)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("groundgap");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*prep_cmd) return run_prep(prep);
    if (*classify_cmd) return run_classify(classify);
    if (*simulate_cmd) return run_simulate(simulate);
    if (*metrics_cmd) return run_metrics(metrics);
    if (*report_cmd) return run_report(report);
    if (*sweep_cmd) return run_sweep_cmd(sweep);
    if (*pref_cmd) return run_prefstats(pref_path);
    if (*annotate_cmd) return run_annotate(annotate);
    if (*agg_cmd) return run_aggregate(agg_a, agg_b, agg_out);
    if (*gold_cmd) return run_gold(gold);
    if (*eval_cmd) return run_evaluate(eval_labels, eval_gold);
  } catch (const Error& e) {
    std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
