#include "lapal/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "lapal/common/errors.hpp"

namespace lapal::cli {

namespace {

constexpr char kHeader[] = "env_steps,n_seeds,mean_return,std_return,normalized_mean,normalized_std";

// Colour-blind safe palette.
constexpr const char* kColors[] = {"#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9"};

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string px(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void mean_std(const std::vector<double>& v, double& mean, double& std) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  std = 0.0;
  for (double x : v) std += (x - mean) * (x - mean);
  std = std::sqrt(std / static_cast<double>(v.size()));
}

// Roughly five round tick values covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

}  // namespace

std::vector<AggregateRow> aggregate_curves(const std::vector<orch::LearningCurve>& curves) {
  std::map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>> by_step;
  for (const auto& c : curves) {
    for (const auto& r : c.rows) {
      auto& slot = by_step[r.env_steps];
      slot.first.push_back(r.mean_return);
      slot.second.push_back(r.normalized_return);
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& [steps, vals] : by_step) {
    AggregateRow row;
    row.env_steps = steps;
    row.n_seeds = static_cast<int>(vals.first.size());
    mean_std(vals.first, row.mean_return, row.std_return);
    mean_std(vals.second, row.normalized_mean, row.normalized_std);
    out.push_back(row);
  }
  return out;
}

std::string aggregate_to_csv(const std::vector<AggregateRow>& rows) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.env_steps) + "," + std::to_string(r.n_seeds) + "," + num(r.mean_return) +
           "," + num(r.std_return) + "," + num(r.normalized_mean) + "," + num(r.normalized_std) + "\n";
  }
  return out;
}

std::vector<AggregateRow> aggregate_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("curve file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw IoError("curve file does not start with the aggregate header");
  std::vector<AggregateRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string f[6];
    for (auto& x : f) {
      if (!std::getline(fields, x, ',')) throw IoError("curve line " + std::to_string(lineno) + " has too few columns");
    }
    try {
      std::size_t used = 0;
      AggregateRow r;
      r.env_steps = std::stoll(f[0], &used);
      r.n_seeds = std::stoi(f[1]);
      r.mean_return = std::stod(f[2]);
      r.std_return = std::stod(f[3]);
      r.normalized_mean = std::stod(f[4]);
      r.normalized_std = std::stod(f[5]);
      if (!rows.empty() && r.env_steps <= rows.back().env_steps) {
        throw IoError("curve env_steps must increase");
      }
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("curve line " + std::to_string(lineno) + " is malformed");
    }
  }
  if (rows.empty()) throw IoError("curve file has no data rows");
  return rows;
}

std::string render_svg(const std::vector<PlotSeries>& series, bool normalized,
                       const std::string& title) {
  if (series.empty()) throw ConfigError("nothing to plot");
  auto mean_of = [&](const AggregateRow& r) { return normalized ? r.normalized_mean : r.mean_return; };
  auto std_of = [&](const AggregateRow& r) { return normalized ? r.normalized_std : r.std_return; };

  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  for (const auto& s : series) {
    if (s.rows.empty()) throw IoError("series '" + s.label + "' has no rows");
    for (const auto& r : s.rows) {
      x_hi = std::max(x_hi, static_cast<double>(r.env_steps));
      y_lo = std::min(y_lo, mean_of(r) - std_of(r));
      y_hi = std::max(y_hi, mean_of(r) + std_of(r));
    }
  }
  if (normalized) {
    y_lo = std::min(y_lo, 0.0);
    y_hi = std::max(y_hi, 1.0);
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi - y_lo < 1e-12) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto X = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto Y = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";

  for (double t : nice_ticks(x_lo, x_hi)) {
    o << "<line x1=\"" << px(X(t)) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(X(t)) << "\" y2=\""
      << px(kTop + ph) << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << px(X(t)) << "\" y=\"" << px(kTop + ph + 16) << "\" text-anchor=\"middle\">"
      << tick(t) << "</text>\n";
  }
  for (double t : nice_ticks(y_lo, y_hi)) {
    o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(Y(t)) << "\" x2=\"" << px(kLeft + pw) << "\" y2=\""
      << px(Y(t)) << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(Y(t) + 4) << "\" text-anchor=\"end\">"
      << tick(t) << "</text>\n";
  }
  o << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(pw) << "\" height=\""
    << px(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  o << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"" << px(kHeight - 18)
    << "\" text-anchor=\"middle\">environment steps</text>\n";
  o << "<text transform=\"translate(18 " << px(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << (normalized ? "expert-normalized return" : "evaluation return") << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    o << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
    o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& r : s.rows) o << px(X(static_cast<double>(r.env_steps))) << ',' << px(Y(mean_of(r) + std_of(r))) << ' ';
    for (auto it = s.rows.rbegin(); it != s.rows.rend(); ++it) {
      o << px(X(static_cast<double>(it->env_steps))) << ',' << px(Y(mean_of(*it) - std_of(*it))) << ' ';
    }
    o << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : s.rows) o << px(X(static_cast<double>(r.env_steps))) << ',' << px(Y(mean_of(r))) << ' ';
    o << "\"/>\n</g>\n";
    const double ly = kTop + 14 + 20 * static_cast<double>(i);
    o << "<line x1=\"" << px(kLeft + pw + 12) << "\" y1=\"" << px(ly) << "\" x2=\"" << px(kLeft + pw + 36)
      << "\" y2=\"" << px(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << px(kLeft + pw + 42) << "\" y=\"" << px(ly + 4) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace lapal::cli
