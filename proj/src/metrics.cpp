#include "grpo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grpo/errors.hpp"

namespace grpo {

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double cell_value(const std::string& cell, std::size_t lineno, std::string_view column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ParseError("metrics line " + std::to_string(lineno) + ": bad value '" + cell + "' in column " +
                     std::string(column));
  }
  return v;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string format_metrics_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + g17(m.loss) + "," + g17(m.mean_total_reward) + "," +
         g17(m.mean_acc_reward) + "," + g17(m.mean_fmt_reward) + "," + g17(m.mean_kl) + "," +
         g17(m.mean_completion_len);
}

std::vector<StepMetrics> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw ParseError("metrics CSV is empty");
  }
  if (line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  const std::vector<std::string_view> required = {"step", "loss", "reward_total", "reward_acc",
                                                  "reward_fmt", "kl", "completion_len"};
  std::vector<std::size_t> col(required.size());
  for (std::size_t r = 0; r < required.size(); ++r) {
    auto it = std::find(header.begin(), header.end(), required[r]);
    if (it == header.end()) throw ParseError("metrics CSV lacks column '" + std::string(required[r]) + "'");
    col[r] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<StepMetrics> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw ParseError("metrics line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " cells");
    }
    double v[7];
    for (std::size_t r = 0; r < required.size(); ++r) v[r] = cell_value(cells[col[r]], lineno, required[r]);
    StepMetrics m;
    m.step = static_cast<std::size_t>(v[0]);
    m.loss = v[1];
    m.mean_total_reward = v[2];
    m.mean_acc_reward = v[3];
    m.mean_fmt_reward = v[4];
    m.mean_kl = v[5];
    m.mean_completion_len = v[6];
    rows.push_back(m);
  }
  if (rows.empty()) throw ParseError("metrics CSV has no data rows");
  return rows;
}

std::vector<StepMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open metrics CSV " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_metrics_csv(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  if (xs.size() != ys.size() || xs.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::string render_training_svg(const std::vector<StepMetrics>& rows) {
  if (rows.empty()) throw ParseError("no metrics to plot");
  constexpr double kWidth = 720, kPanelHeight = 260, kLeft = 70, kRight = 20, kTop = 40, kGap = 70;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanelHeight - 60;
  const double height = kTop + 2 * kPanelHeight + kGap - 20;

  double s_min = static_cast<double>(rows.front().step), s_max = s_min;
  for (const auto& r : rows) {
    s_min = std::min(s_min, static_cast<double>(r.step));
    s_max = std::max(s_max, static_cast<double>(r.step));
  }
  if (s_max == s_min) s_max = s_min + 1;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto panel = [&](int index, const char* title, const char* color, auto value) {
    const double top = kTop + index * (kPanelHeight + kGap);
    double lo = value(rows.front()), hi = lo;
    for (const auto& r : rows) {
      lo = std::min(lo, value(r));
      hi = std::max(hi, value(r));
    }
    if (index == 0) {
      lo = std::min(lo, 0.0);
      hi = std::max(hi, 1.0);
    } else {
      lo = std::min(lo, 0.0);
      if (hi <= lo) hi = lo + 1;
    }
    auto x = [&](double s) { return kLeft + (s - s_min) / (s_max - s_min) * plot_w; };
    auto y = [&](double v) { return top + plot_h - (v - lo) / (hi - lo) * plot_h; };

    svg << "<g>\n<text x=\"" << kLeft << "\" y=\"" << top - 12
        << "\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = lo + (hi - lo) * t / 4.0;
      svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(v) + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(v) << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
      const double s = s_min + (s_max - s_min) * t / 4.0;
      svg << "<text x=\"" << x(s) << "\" y=\"" << top + plot_h + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(s) << "</text>\n";
    }
    svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << top + plot_h + 34
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">step</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      svg << (i ? " " : "") << x(static_cast<double>(rows[i].step)) << ',' << y(value(rows[i]));
    }
    svg << "\"/>\n";
    for (const auto& r : rows) {
      svg << "<circle cx=\"" << x(static_cast<double>(r.step)) << "\" cy=\"" << y(value(r))
          << "\" r=\"1.8\" fill=\"" << color << "\"/>\n";
    }
    svg << "</g>\n";
  };
  panel(0, "(a) accuracy reward", "#1f77b4", [](const StepMetrics& m) { return m.mean_acc_reward; });
  panel(1, "(b) completion length (tokens)", "#d62728",
        [](const StepMetrics& m) { return m.mean_completion_len; });
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace grpo
