#pragma once

#include <string>
#include <vector>

#include "deepalloc/backtest.hpp"

namespace deepalloc {

/// model,horizon,steps,return,sortino,sharpe,max_dd. Undefined cells read "undefined".
std::string format_metrics_csv(const std::vector<MetricRow>& rows);
/// Aligned plain-text table with the same columns.
std::string format_metrics_table(const std::vector<MetricRow>& rows);

/// model,split,train_start,train_end,test_start,test_end,return,sortino,sharpe,max_dd
std::string format_split_csv(const std::vector<WalkForwardResult>& results);

/// date,<model>... One column per curve; curves must share dates.
std::string format_equity_csv(const std::vector<WalkForwardResult>& results);

/// date,leverage,turnover,<asset>... for the weights held over each step.
std::string format_weights_csv(const EquityCurve& curve, const std::vector<std::string>& assets);

/// Self-contained SVG line chart, one polyline per series.
std::string svg_line_chart(const std::string& title, const std::vector<Date>& dates,
                           const std::vector<std::string>& names, const Panel& series);

/// Self-contained SVG stacked-area chart; each row of `weights` should sum to 1.
std::string svg_stacked_area(const std::string& title, const std::vector<Date>& dates,
                             const std::vector<std::string>& names, const Panel& weights);

}  // namespace deepalloc
