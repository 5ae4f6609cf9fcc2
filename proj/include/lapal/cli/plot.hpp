#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lapal/orchestrator/run.hpp"

namespace lapal::cli {

// One row of the across-seed aggregate of learning curves.
struct AggregateRow {
  std::int64_t env_steps = 0;
  int n_seeds = 0;
  double mean_return = 0.0;  // mean over seeds of the per-seed mean return
  double std_return = 0.0;   // population std over seeds
  double normalized_mean = 0.0;
  double normalized_std = 0.0;
};

// Rows at every env-step count reported by at least one seed, in increasing
// order. Seeds that stopped early contribute to the rows they reached.
std::vector<AggregateRow> aggregate_curves(const std::vector<orch::LearningCurve>& curves);

// Columns: env_steps,n_seeds,mean_return,std_return,normalized_mean,normalized_std.
std::string aggregate_to_csv(const std::vector<AggregateRow>& rows);
// Throws IoError on a missing header, a malformed row, or no data rows.
std::vector<AggregateRow> aggregate_from_csv(const std::string& text);

struct PlotSeries {
  std::string label;
  std::vector<AggregateRow> rows;
};

// Line chart of mean vs env steps with a mean +- std band per series. With
// normalized set the expert-normalized columns are drawn instead of returns.
std::string render_svg(const std::vector<PlotSeries>& series, bool normalized,
                       const std::string& title);

}  // namespace lapal::cli
