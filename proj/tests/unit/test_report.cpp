#include <gtest/gtest.h>

#include "deepalloc/errors.hpp"
#include "deepalloc/report.hpp"

namespace deepalloc {
namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

MetricRow row(std::string model, Metric sharpe_value) {
  MetricRow r;
  r.model = std::move(model);
  r.horizon = "full";
  r.steps = 10;
  r.annualized_return = Metric::of(0.125);
  r.sortino = Metric::undefined();
  r.sharpe = sharpe_value;
  r.max_drawdown = Metric::of(0.25);
  return r;
}

TEST(MetricsCsv, UndefinedCellsAreSpelledOut) {
  const auto csv = format_metrics_csv({row("drl", Metric::of(1.5)), row("markowitz", Metric::undefined())});
  EXPECT_EQ(csv,
            "model,horizon,steps,return,sortino,sharpe,max_dd\n"
            "drl,full,10,0.125,undefined,1.5,0.25\n"
            "markowitz,full,10,0.125,undefined,undefined,0.25\n");
  EXPECT_EQ(csv.find("nan"), std::string::npos);
}

TEST(MetricsTable, ColumnsMirrorTheComparisonLayout) {
  const auto t = format_metrics_table({row("drl", Metric::of(1.5)), row("riskparity", Metric::of(-0.2))});
  const auto header = t.substr(0, t.find('\n'));
  for (const char* col : {"model", "horizon", "return", "Sortino", "Sharpe", "max DD"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  EXPECT_LT(header.find("return"), header.find("Sortino"));
  EXPECT_LT(header.find("Sortino"), header.find("Sharpe"));
  EXPECT_LT(header.find("Sharpe"), header.find("max DD"));
  EXPECT_NE(t.find("12.50%"), std::string::npos);
  EXPECT_NE(t.find("25.00%"), std::string::npos);
  EXPECT_NE(t.find("-0.20"), std::string::npos);
  EXPECT_EQ(count(t, "undefined"), 2u);
}

TEST(EquityCsv, OneColumnPerModel) {
  WalkForwardResult a, b;
  a.model = "drl";
  b.model = "equalweight";
  a.curve.dates = b.curve.dates = {Date(2020, 1, 2), Date(2020, 1, 3)};
  a.curve.values = {1.0, 1.01};
  b.curve.values = {1.0, 0.995};
  EXPECT_EQ(format_equity_csv({a, b}), "date,drl,equalweight\n2020-01-02,1,1\n2020-01-03,1.01,0.995\n");
  b.curve.dates.pop_back();
  EXPECT_THROW(format_equity_csv({a, b}), UsageError);
}

TEST(WeightsCsv, Layout) {
  EquityCurve c;
  c.dates = {Date(2020, 1, 2), Date(2020, 1, 3)};
  c.values = {1.0, 1.0};
  c.weights = Eigen::MatrixXd(1, 2);
  c.weights << 0.25, 0.75;
  c.leverage = {2.0};
  c.turnover = {2.0};
  EXPECT_EQ(format_weights_csv(c, {"x", "y"}), "date,leverage,turnover,x,y\n2020-01-02,2,2,0.25,0.75\n");
}

TEST(Svg, ChartsAreSelfContained) {
  const std::vector<Date> dates{Date(2020, 1, 2), Date(2020, 1, 3), Date(2020, 1, 6)};
  Panel series(3, 2);
  series << 1.0, 1.0, 1.1, 0.9, 1.2, 0.95;
  const auto line = svg_line_chart("Equity <oos>", dates, {"drl", "ew"}, series);
  EXPECT_EQ(line.rfind("<svg", 0), 0u);
  EXPECT_NE(line.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(line, "<polyline"), 2u);
  EXPECT_NE(line.find("Equity &lt;oos&gt;"), std::string::npos);
  EXPECT_EQ(line.find("http://"), line.find("http://www.w3.org/2000/svg"));  // no external references

  Panel w(3, 2);
  w << 0.5, 0.5, 0.2, 0.8, 1.0, 0.0;
  const auto area = svg_stacked_area("Weights", dates, {"a", "b"}, w);
  EXPECT_EQ(count(area, "<polygon"), 2u);
  EXPECT_THROW(svg_stacked_area("Weights", dates, {"a"}, w), UsageError);
}

}  // namespace
}  // namespace deepalloc
