#include "groundgap/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "groundgap/error.hpp"

namespace groundgap {

namespace {

// Avoids "-0.00" for values that round to zero.
std::string fixed(double value, int decimals) {
  auto s = fmt::format("{:.{}f}", value, decimals);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, 1);
  }
  return s;
}

std::string bold(const std::string& cell) { return "**" + cell + "**"; }

const ActMetrics& require_act(const MetricsReport& report, ActLabel act) {
  auto it = report.acts.find(act);
  if (it == report.acts.end()) {
    throw ReportError(fmt::format("report for {} ({}) has no {} metrics", report.dataset, report.generator,
                                  to_string(act)));
  }
  return it->second;
}

std::string rate_cell(const RateEstimate& r) { return format_estimate(r.rate, r.ci_low, r.ci_high); }

std::string kappa_cell(const KappaEstimate& k) {
  if (!k.has_ci) return fixed(k.kappa * 100.0, 2);
  return format_estimate(k.kappa, k.ci_low, k.ci_high, 100.0);
}

}  // namespace

std::string act_display_name(ActLabel act) {
  switch (act) {
    case ActLabel::followup:
      return "Followup";
    case ActLabel::acknowledgement:
      return "Acknowledgement";
    case ActLabel::clarification:
      return "Clarification";
    case ActLabel::none:
      return "None";
  }
  return "None";
}

std::string format_estimate(double est, double lo, double hi, double scale) {
  const double half = std::max(std::abs(hi - est), std::abs(est - lo)) * scale;
  return fixed(est * scale, 2) + " ± " + fixed(half, 1);
}

std::string render_dataset_table(const MetricsReport& report) {
  std::string out = fmt::format("## {}: {} vs human\n\n", report.dataset, report.generator);
  out += fmt::format("| Act | {} | Human | Cohen κ |\n", report.generator);
  out += "|---|---:|---:|---:|\n";
  for (auto act : kGroundingActs) {
    const auto& m = require_act(report, act);
    auto model = rate_cell(m.model_rate);
    auto human = rate_cell(m.human_rate);
    if (m.difference.significant) {
      if (m.difference.delta > 0) {
        model = bold(model);
      } else if (m.difference.delta < 0) {
        human = bold(human);
      }
    }
    out += fmt::format("| {} | {} | {} | {} |\n", act_display_name(act), model, human, kappa_cell(m.kappa));
  }
  return out;
}

std::string render_model_comparison(const std::vector<MetricsReport>& reports) {
  auto human = std::find_if(reports.begin(), reports.end(),
                            [](const MetricsReport& r) { return r.generator == "human"; });
  if (human == reports.end()) {
    throw ReportError("model comparison needs a report with generator \"human\"");
  }
  std::set<std::string> seen;
  for (const auto& r : reports) {
    if (!seen.insert(r.generator).second) {
      throw ReportError(fmt::format("generator \"{}\" appears more than once", r.generator));
    }
  }
  std::vector<const MetricsReport*> rows{&*human};
  for (const auto& r : reports) {
    if (&r != &*human) rows.push_back(&r);
  }

  std::string out = "| Generator |";
  std::string rule = "|---|";
  for (auto act : kGroundingActs) {
    out += fmt::format(" {} base rate | {} κ |", act_display_name(act), act_display_name(act));
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  for (const auto* r : rows) {
    out += fmt::format("| {} |", r->generator);
    for (auto act : kGroundingActs) {
      const auto& m = require_act(*r, act);
      out += fmt::format(" {} | {} |", rate_cell(m.model_rate), kappa_cell(m.kappa));
    }
    out += "\n";
  }
  return out;
}

SweepRender render_sweep(const std::vector<SweepRow>& rows) {
  std::map<ActLabel, std::vector<std::pair<double, double>>> by_act;
  std::set<long long> steps;
  for (const auto& row : rows) {
    by_act[row.act].emplace_back(static_cast<double>(row.step), row.kappa);
    steps.insert(row.step);
  }
  if (steps.size() < kMinSweepCheckpoints) {
    throw ReportError(fmt::format("a sweep summary needs at least {} checkpoints, got {}", kMinSweepCheckpoints,
                                  steps.size()));
  }

  SweepRender out;
  out.csv = "step,act,kappa,base_rate\n";
  for (const auto& row : rows) {
    out.csv += fmt::format("{},{},{:.6f},{:.4f}\n", row.step, to_string(row.act), row.kappa, row.base_rate);
  }
  out.markdown = "| Act | Pearson r | p |\n|---|---:|---:|\n";
  for (auto act : kGroundingActs) {
    auto it = by_act.find(act);
    if (it == by_act.end()) continue;
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [step, kappa] : it->second) {
      x.push_back(step);
      y.push_back(kappa);
    }
    try {
      const auto c = pearson_r(x, y);
      out.markdown += fmt::format("| {} | {} | {:.3g} |\n", act_display_name(act), fixed(c.r, 3), c.p);
    } catch (const MetricsError&) {
      out.markdown += fmt::format("| {} | r undefined | - |\n", act_display_name(act));
    }
  }
  return out;
}

}  // namespace groundgap
