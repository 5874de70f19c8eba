#pragma once

#include <string>
#include <vector>

#include "groundgap/metrics.hpp"
#include "groundgap/simulate.hpp"

namespace groundgap {

// Display name used in table rows ("Followup", "Acknowledgement", ...).
std::string act_display_name(ActLabel act);

// "est ± half" with est to 2 decimals and half = max(|hi - est|, |est - lo|)
// to 1 decimal. scale multiplies all three values first.
std::string format_estimate(double est, double lo, double hi, double scale = 1.0);

// One row per grounding act: model rate, human rate, kappa (x100). A rate
// that is significantly greater than the other is bolded.
std::string render_dataset_table(const MetricsReport& report);

// Generators as rows, human first; each act contributes a base-rate and a
// kappa column. Requires a report whose generator is "human".
std::string render_model_comparison(const std::vector<MetricsReport>& reports);

struct SweepRender {
  std::string csv;       // step,act,kappa,base_rate
  std::string markdown;  // per-act Pearson r and p of kappa against step
};

SweepRender render_sweep(const std::vector<SweepRow>& rows);

}  // namespace groundgap
