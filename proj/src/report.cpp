#include "deepalloc/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

namespace {

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr double kWidth = 900.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 40.0;

std::string cell(const Metric& m) {
  if (!m.defined || !std::isfinite(m.value)) return "undefined";
  return io::format_number(m.value);
}

std::string xml_escape(const std::string& s) {
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

struct Frame {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 0;

  double x(std::size_t i) const {
    const double span = kWidth - kLeft - kRight;
    return kLeft + (n > 1 ? span * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
  }
  double y(double v) const {
    const double span = kHeight - kTop - kBottom;
    return kTop + span * (1.0 - (v - lo) / (hi - lo));
  }
};

std::string svg_open(const std::string& title, const Frame& f, const std::vector<Date>& dates) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-size=\"15\">{3}</text>\n",
      kWidth, kHeight, kLeft, xml_escape(title));
  for (int k = 0; k <= 4; ++k) {
    const double v = f.lo + (f.hi - f.lo) * k / 4.0;
    const double y = f.y(v);
    s += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.3g}</text>\n",
        kLeft, y, kWidth - kRight, y, kLeft - 6, y + 4, v);
  }
  if (!dates.empty()) {
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kLeft, kHeight - 14, dates.front().iso());
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kWidth - kRight,
                     kHeight - 14, dates.back().iso());
  }
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const double y = kTop + 18.0 * static_cast<double>(j);
    s += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n",
        kWidth - kRight + 16, y, kPalette[j % kPalette.size()], kWidth - kRight + 34, y + 10,
        xml_escape(names[j]));
  }
  return s;
}

void check_series(const std::vector<Date>& dates, const std::vector<std::string>& names, const Panel& p) {
  if (p.rows() != static_cast<Eigen::Index>(dates.size()) || p.cols() != static_cast<Eigen::Index>(names.size())) {
    throw UsageError("chart data does not match its dates and names");
  }
  if (dates.empty()) throw UsageError("chart needs at least one date");
}

}  // namespace

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "model,horizon,steps,return,sortino,sharpe,max_dd\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.model, r.horizon, r.steps, cell(r.annualized_return),
                       cell(r.sortino), cell(r.sharpe), cell(r.max_drawdown));
  }
  return out;
}

std::string format_metrics_table(const std::vector<MetricRow>& rows) {
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({"model", "horizon", "return", "Sortino", "Sharpe", "max DD"});
  for (const auto& r : rows) {
    auto pct = [](const Metric& m) {
      return m.defined && std::isfinite(m.value) ? fmt::format("{:.2f}%", 100.0 * m.value) : "undefined";
    };
    cells.push_back({r.model, r.horizon, pct(r.annualized_return), format_metric(r.sortino, 2),
                     format_metric(r.sharpe, 2), pct(r.max_drawdown)});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (j < 2) {
        out += fmt::format("{:<{}}", cells[i][j], width[j]);
      } else {
        out += fmt::format("{:>{}}", cells[i][j], width[j]);
      }
      out += j + 1 < 6 ? "  " : "\n";
    }
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 10, '-') + "\n";
    }
  }
  return out;
}

std::string format_split_csv(const std::vector<WalkForwardResult>& results) {
  std::string out = "model,split,train_start,train_end,test_start,test_end,return,sortino,sharpe,max_dd\n";
  for (const auto& res : results) {
    for (std::size_t k = 0; k < res.splits.size(); ++k) {
      const auto& s = res.splits[k];
      out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", res.model, k, s.split.train_start.iso(),
                         s.split.train_end.iso(), s.split.test_start.iso(), s.split.test_end.iso(),
                         cell(s.annualized_return), cell(s.sortino), cell(s.sharpe), cell(s.max_drawdown));
    }
  }
  return out;
}

std::string format_equity_csv(const std::vector<WalkForwardResult>& results) {
  if (results.empty()) throw UsageError("no curves to write");
  const auto& dates = results.front().curve.dates;
  std::string out = "date";
  for (const auto& r : results) {
    if (r.curve.dates != dates) throw UsageError("equity curves do not share dates");
    out += "," + r.model;
  }
  out += '\n';
  for (std::size_t i = 0; i < dates.size(); ++i) {
    out += dates[i].iso();
    for (const auto& r : results) out += "," + io::format_number(r.curve.values[i]);
    out += '\n';
  }
  return out;
}

std::string format_weights_csv(const EquityCurve& curve, const std::vector<std::string>& assets) {
  std::string out = "date,leverage,turnover";
  for (const auto& a : assets) out += "," + a;
  out += '\n';
  for (std::size_t i = 0; i < curve.leverage.size(); ++i) {
    out += fmt::format("{},{},{}", curve.dates[i].iso(), io::format_number(curve.leverage[i]),
                       io::format_number(curve.turnover[i]));
    for (Eigen::Index j = 0; j < curve.weights.cols(); ++j) {
      out += "," + io::format_number(curve.weights(static_cast<Eigen::Index>(i), j));
    }
    out += '\n';
  }
  return out;
}

std::string svg_line_chart(const std::string& title, const std::vector<Date>& dates,
                           const std::vector<std::string>& names, const Panel& series) {
  check_series(dates, names, series);
  Frame f;
  f.n = dates.size();
  f.lo = series.minCoeff();
  f.hi = series.maxCoeff();
  if (!(f.hi > f.lo)) {
    f.lo -= 0.5;
    f.hi += 0.5;
  }
  std::string s = svg_open(title, f, dates);
  for (Eigen::Index j = 0; j < series.cols(); ++j) {
    s += fmt::format("<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"{}\" points=\"",
                     kPalette[static_cast<std::size_t>(j) % kPalette.size()]);
    for (std::size_t i = 0; i < f.n; ++i) {
      s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", f.x(i), f.y(series(static_cast<Eigen::Index>(i), j)));
    }
    s += "\"/>\n";
  }
  s += legend(names);
  s += "</svg>\n";
  return s;
}

std::string svg_stacked_area(const std::string& title, const std::vector<Date>& dates,
                             const std::vector<std::string>& names, const Panel& weights) {
  check_series(dates, names, weights);
  Frame f;
  f.n = dates.size();
  f.lo = 0.0;
  f.hi = std::max(1.0, weights.rowwise().sum().maxCoeff());
  std::string s = svg_open(title, f, dates);
  std::vector<double> base(f.n, 0.0);
  for (Eigen::Index j = 0; j < weights.cols(); ++j) {
    std::vector<double> top(f.n);
    for (std::size_t i = 0; i < f.n; ++i) top[i] = base[i] + weights(static_cast<Eigen::Index>(i), j);
    s += fmt::format("<polygon stroke=\"none\" fill=\"{}\" points=\"",
                     kPalette[static_cast<std::size_t>(j) % kPalette.size()]);
    for (std::size_t i = 0; i < f.n; ++i) s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", f.x(i), f.y(top[i]));
    for (std::size_t i = f.n; i-- > 0;) s += fmt::format(" {:.2f},{:.2f}", f.x(i), f.y(base[i]));
    s += "\"/>\n";
    base = std::move(top);
  }
  s += legend(names);
  s += "</svg>\n";
  return s;
}

}  // namespace deepalloc
