#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepalloc/risk_models.hpp"

namespace deepalloc {

/// Long-only, fully invested allocation: 0 <= w_i <= 1, sum w_i = 1.
using Weights = Eigen::VectorXd;

struct SolverConfig {
  int max_iters = 20000;
  double step_size = 1.0;   // initial projected-gradient step
  double tolerance = 1e-10; // on the projected-gradient stationarity measure
  int restarts = 5;         // multi-start count, first start is the uniform portfolio
  std::uint64_t seed = 7;
};

struct SolveReport {
  Weights weights;
  double objective_value = 0.0;  // in the program's own units (D for max diversification)
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;
  std::vector<std::string> active_constraints;
  bool non_unique = false;  // restarts reached different weights with equal objective
};

/// True if w lies on the long-only simplex within `tol` on the budget.
bool is_feasible(const Weights& w, double tol = 1e-8);

/// Euclidean projection onto {w : sum w = 1, 0 <= w <= 1}.
Weights project_to_simplex(const Eigen::VectorXd& v);

/// Projection onto the simplex intersected with {mu^T w >= r_min}.
Weights project_to_simplex_with_return(const Eigen::VectorXd& v, const Eigen::VectorXd& mu,
                                       double r_min);

/// minimize w'Sigma w  s.t. mu'w >= r_min, w on the simplex.
SolveReport solve_markowitz_min_risk(const CovarianceStats& stats, double r_min,
                                     const SolverConfig& cfg = {});
/// maximize mu'w  s.t. w'Sigma w <= sigma_max^2, w on the simplex.
SolveReport solve_markowitz_max_return(const CovarianceStats& stats, double sigma_max,
                                       const SolverConfig& cfg = {});
SolveReport solve_min_variance(const CovarianceStats& stats, const SolverConfig& cfg = {});
/// maximize D = w'sigma / sqrt(w'Sigma w).
SolveReport solve_max_diversification(const CovarianceStats& stats, const SolverConfig& cfg = {});
/// minimize w'C w over the correlation matrix.
SolveReport solve_max_decorrelation(const CovarianceStats& stats, const SolverConfig& cfg = {});
/// Minimizes 1/2 y'Sigma y - (1/l) sum ln y_i over y > 0, then normalizes to the simplex.
SolveReport solve_risk_parity(const CovarianceStats& stats, const SolverConfig& cfg = {});

/// w_i (Sigma w)_i.
Eigen::VectorXd risk_contributions(const Weights& w, const Eigen::MatrixXd& sigma);
double diversification_ratio(const Weights& w, const CovarianceStats& stats);

enum class Method {
  kMarkowitz,
  kMaxReturn,
  kMinVariance,
  kMaxDiversification,
  kMaxDecorrelation,
  kRiskParity,
};

std::optional<Method> parse_method(std::string_view name);
std::string_view method_name(Method m);
std::vector<std::string> method_names();

struct MethodArgs {
  std::optional<double> r_min;
  std::optional<double> sigma_max;
};

/// Dispatches to the matching solver. Throws UsageError for missing targets.
SolveReport allocate(Method method, const CovarianceStats& stats, const MethodArgs& args,
                     const SolverConfig& cfg = {});

}  // namespace deepalloc
