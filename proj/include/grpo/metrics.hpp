#pragma once

// Per-step training metrics as CSV, and the two-panel SVG training chart.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "grpo/grpo.hpp"

namespace grpo {

inline constexpr std::string_view kMetricsHeader =
    "step,loss,reward_total,reward_acc,reward_fmt,kl,completion_len";

/// One CSV line (no newline); reals printed with 17 significant digits.
std::string format_metrics_row(const StepMetrics& m);

/// Parses a metrics CSV by column name (extra columns are ignored). Throws
/// ParseError naming the first missing column, on an empty file, or on a bad
/// cell.
std::vector<StepMetrics> parse_metrics_csv(std::string_view text);
std::vector<StepMetrics> read_metrics_csv(const std::filesystem::path& path);

/// Standalone SVG: accuracy reward vs step (top) and mean completion length vs
/// step (bottom). Every row is drawn as a marker joined by a polyline.
std::string render_training_svg(const std::vector<StepMetrics>& rows);

/// Least-squares slope of ys against xs.
double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace grpo
