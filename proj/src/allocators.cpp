#include "deepalloc/allocators.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>

#include "deepalloc/errors.hpp"
#include "deepalloc/random.hpp"

namespace deepalloc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Problem {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  std::function<VectorXd(const VectorXd&)> project;
};

struct Run {
  VectorXd w;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  double stationarity = std::numeric_limits<double>::infinity();
};

double stationarity_of(const Problem& p, const VectorXd& w, const VectorXd& g) {
  return (w - p.project(w - g)).lpNorm<Eigen::Infinity>();
}

// Projected gradient descent with Armijo backtracking along the projection arc.
Run projected_gradient(const Problem& p, const VectorXd& start, const SolverConfig& cfg) {
  Run run;
  run.w = p.project(start);
  run.f = p.value(run.w);
  VectorXd g = p.gradient(run.w);
  double alpha = cfg.step_size;
  for (int it = 0; it < cfg.max_iters; ++it) {
    run.stationarity = stationarity_of(p, run.w, g);
    if (run.stationarity <= cfg.tolerance) {
      run.converged = true;
      break;
    }
    run.iterations = it + 1;
    bool accepted = false;
    VectorXd candidate;
    double f_new = 0.0;
    while (alpha > 1e-20) {
      candidate = p.project(run.w - alpha * g);
      f_new = p.value(candidate);
      const double decrease = g.dot(candidate - run.w);
      if (f_new <= run.f + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || candidate == run.w) break;
    run.w = std::move(candidate);
    run.f = f_new;
    g = p.gradient(run.w);
    alpha = std::min(alpha * 2.0, 1e8);
  }
  if (!run.converged) {
    run.stationarity = stationarity_of(p, run.w, p.gradient(run.w));
    run.converged = run.stationarity <= cfg.tolerance;
  }
  return run;
}

std::vector<VectorXd> start_points(Eigen::Index l, const SolverConfig& cfg) {
  std::vector<VectorXd> starts;
  const int n = std::max(1, cfg.restarts);
  starts.push_back(VectorXd::Constant(l, 1.0 / static_cast<double>(l)));
  for (int i = 1; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    VectorXd w(l);
    sample_simplex(rng, w);
    starts.push_back(std::move(w));
  }
  return starts;
}

// Restarts run in parallel; the reduction walks them in index order so the
// answer does not depend on the thread count.
SolveReport multistart(const Problem& p, Eigen::Index l, const SolverConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.tolerance > 0.0)) {
    throw UsageError("solver config needs max_iters >= 1 and tolerance > 0");
  }
  const auto starts = start_points(l, cfg);
  std::vector<Run> runs(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  const auto n = static_cast<long>(starts.size());
#pragma omp parallel for schedule(static) if (n > 1)
  for (long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      runs[idx] = projected_gradient(p, starts[idx], cfg);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].f < runs[best].f - 1e-14 * std::max(1.0, std::abs(runs[best].f))) best = i;
  }
  SolveReport report;
  report.weights = runs[best].w;
  report.objective_value = runs[best].f;
  report.converged = runs[best].converged;
  report.stationarity = runs[best].stationarity;
  for (const auto& r : runs) {
    report.iterations += r.iterations;
    if (std::abs(r.f - runs[best].f) < 1e-8 &&
        (r.w - runs[best].w).lpNorm<Eigen::Infinity>() > 0.01) {
      report.non_unique = true;
    }
  }
  return report;
}

double scale_of(const MatrixXd& m) {
  const double s = m.diagonal().mean();
  return s > 0.0 ? s : 1.0;
}

void mark_bounds(SolveReport& report) {
  for (Eigen::Index i = 0; i < report.weights.size(); ++i) {
    if (report.weights(i) <= 0.0) report.active_constraints.push_back(fmt::format("w[{}]>=0", i));
    if (report.weights(i) >= 1.0) report.active_constraints.push_back(fmt::format("w[{}]<=1", i));
  }
}

void check_stats(const CovarianceStats& stats) {
  const auto l = stats.mu.size();
  if (l < 1 || stats.sigma.rows() != l || stats.sigma.cols() != l || stats.corr.rows() != l ||
      stats.vols.size() != l) {
    throw UsageError("inconsistent covariance stats dimensions");
  }
  if (!stats.sigma.allFinite() || !stats.mu.allFinite()) {
    throw NumericError("covariance stats contain non-finite values");
  }
}

Problem quadratic_on_simplex(const MatrixXd& q) {
  return Problem{
      [q](const VectorXd& w) { return w.dot(q * w); },
      [q](const VectorXd& w) -> VectorXd { return 2.0 * (q * w); },
      [](const VectorXd& v) { return project_to_simplex(v); },
  };
}

// mu rescaled so its range maps onto [0, 1]; budget makes the shift harmless.
struct NormalizedReturns {
  VectorXd mu;
  double offset = 0.0;
  double scale = 1.0;
  double map(double r) const { return (r - offset) / scale; }
};

NormalizedReturns normalize_returns(const VectorXd& mu) {
  NormalizedReturns n;
  n.offset = mu.minCoeff();
  const double range = mu.maxCoeff() - n.offset;
  n.scale = range > 0.0 ? range : 1.0;
  n.mu = (mu.array() - n.offset) / n.scale;
  return n;
}

}  // namespace

bool is_feasible(const Weights& w, double tol) {
  if (w.size() == 0 || !w.allFinite()) return false;
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) return false;
  return std::abs(w.sum() - 1.0) <= tol;
}

Weights project_to_simplex(const VectorXd& v) {
  if (v.size() == 0) throw UsageError("cannot project an empty vector");
  if (!v.allFinite()) throw UsageError("project_to_simplex: non-finite entries");
  const auto l = v.size();
  if (l == 1) return VectorXd::Ones(1);
  std::vector<double> u(v.data(), v.data() + l);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < l; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  VectorXd w = (v.array() - theta).cwiseMax(0.0);
  // Absorb rounding so the budget holds to machine precision.
  const double total = w.sum();
  if (total > 0.0) w /= total;
  return w.cwiseMin(1.0);
}

Weights project_to_simplex_with_return(const VectorXd& v, const VectorXd& mu, double r_min) {
  VectorXd w = project_to_simplex(v);
  const double slack = 1e-12 * std::max(1.0, std::abs(r_min));
  auto achieved = [&](const VectorXd& x) { return mu.dot(x); };
  if (achieved(w) >= r_min - slack) return w;
  if (r_min > mu.maxCoeff() + slack) {
    throw NumericError(fmt::format("infeasible return target {} (max mean {})", r_min, mu.maxCoeff()));
  }
  // mu'P(v + eta mu) is non-decreasing in eta; bracket then bisect.
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (achieved(project_to_simplex(v + hi * mu)) < r_min - slack) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw NumericError("return-constrained projection failed to bracket");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (achieved(project_to_simplex(v + mid * mu)) >= r_min - slack) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return project_to_simplex(v + hi * mu);
}

Eigen::VectorXd risk_contributions(const Weights& w, const MatrixXd& sigma) {
  return w.cwiseProduct(sigma * w);
}

double diversification_ratio(const Weights& w, const CovarianceStats& stats) {
  const double var = w.dot(stats.sigma * w);
  if (!(var > 0.0)) throw NumericError("degenerate risk: zero portfolio volatility");
  return w.dot(stats.vols) / std::sqrt(var);
}

SolveReport solve_min_variance(const CovarianceStats& stats, const SolverConfig& cfg) {
  check_stats(stats);
  const double s = scale_of(stats.sigma);
  auto report = multistart(quadratic_on_simplex(stats.sigma / s), stats.size(), cfg);
  report.objective_value = report.weights.dot(stats.sigma * report.weights);
  mark_bounds(report);
  return report;
}

SolveReport solve_max_decorrelation(const CovarianceStats& stats, const SolverConfig& cfg) {
  check_stats(stats);
  auto report = multistart(quadratic_on_simplex(stats.corr), stats.size(), cfg);
  report.objective_value = report.weights.dot(stats.corr * report.weights);
  mark_bounds(report);
  return report;
}

SolveReport solve_markowitz_min_risk(const CovarianceStats& stats, double r_min,
                                     const SolverConfig& cfg) {
  check_stats(stats);
  const double max_mu = stats.mu.maxCoeff();
  if (!std::isfinite(r_min) || r_min > max_mu + 1e-12 * std::max(1.0, std::abs(max_mu))) {
    throw NumericError(
        fmt::format("infeasible return target: r_min {} exceeds the best mean {}", r_min, max_mu));
  }
  const auto norm = normalize_returns(stats.mu);
  const double target = std::min(norm.map(r_min), 1.0);
  const double s = scale_of(stats.sigma);
  const MatrixXd q = stats.sigma / s;
  Problem p{
      [q](const VectorXd& w) { return w.dot(q * w); },
      [q](const VectorXd& w) -> VectorXd { return 2.0 * (q * w); },
      [mu = norm.mu, target](const VectorXd& v) {
        return project_to_simplex_with_return(v, mu, target);
      },
  };
  auto report = multistart(p, stats.size(), cfg);
  report.objective_value = report.weights.dot(stats.sigma * report.weights);
  mark_bounds(report);
  if (norm.mu.dot(report.weights) - target <= 1e-9) report.active_constraints.emplace_back("return_target");
  return report;
}

SolveReport solve_markowitz_max_return(const CovarianceStats& stats, double sigma_max,
                                       const SolverConfig& cfg) {
  check_stats(stats);
  if (!std::isfinite(sigma_max) || sigma_max < 0.0) {
    throw NumericError(fmt::format("infeasible risk bound sigma_max = {}", sigma_max));
  }
  const double s = scale_of(stats.sigma);
  const MatrixXd q = stats.sigma / s;
  const double budget = sigma_max * sigma_max / s;
  const auto norm = normalize_returns(stats.mu);
  const auto l = stats.size();

  // w(eta) = argmin -mu'w + eta w'Qw; its variance falls as eta grows, so the
  // risk bound is met by bisecting on log(eta).
  SolverConfig inner = cfg;
  inner.restarts = 1;
  int iterations = 0;
  auto solve_at = [&](double eta) {
    Problem p{
        [&, eta](const VectorXd& w) { return -norm.mu.dot(w) + eta * w.dot(q * w); },
        [&, eta](const VectorXd& w) -> VectorXd { return -norm.mu + 2.0 * eta * (q * w); },
        [](const VectorXd& v) { return project_to_simplex(v); },
    };
    auto run = projected_gradient(p, VectorXd::Constant(l, 1.0 / static_cast<double>(l)), inner);
    iterations += run.iterations;
    return run;
  };
  auto variance = [&](const VectorXd& w) { return w.dot(q * w); };
  const double slack = 1e-9;

  const SolveReport minvar = solve_min_variance(stats, cfg);
  const double min_budget = minvar.objective_value / s;
  if (budget < min_budget * (1.0 - slack)) {
    throw NumericError(fmt::format(
        "infeasible risk bound: sigma_max {} is below the minimum-variance volatility {}",
        sigma_max, std::sqrt(minvar.objective_value)));
  }

  SolveReport report;
  constexpr double kEtaFloor = 1e-8;
  Run best = solve_at(kEtaFloor);
  if (variance(best.w) > budget * (1.0 + slack)) {
    double lo = std::log(kEtaFloor);
    double hi = lo;
    Run feasible;
    bool found = false;
    for (int i = 0; i < 60; ++i) {
      hi += std::log(10.0);
      feasible = solve_at(std::exp(hi));
      if (variance(feasible.w) <= budget * (1.0 + slack)) {
        found = true;
        break;
      }
      lo = hi;
    }
    if (!found) {
      feasible.w = minvar.weights;
      feasible.converged = minvar.converged;
      feasible.stationarity = minvar.stationarity;
    } else {
      for (int i = 0; i < 80 && hi - lo > 1e-12; ++i) {
        const double mid = 0.5 * (lo + hi);
        Run r = solve_at(std::exp(mid));
        if (variance(r.w) <= budget * (1.0 + slack)) {
          hi = mid;
          feasible = std::move(r);
        } else {
          lo = mid;
        }
      }
    }
    best = std::move(feasible);
    report.active_constraints.emplace_back("risk_bound");
  }
  report.weights = best.w;
  report.objective_value = stats.mu.dot(best.w);
  report.iterations = iterations + minvar.iterations;
  report.converged = best.converged;
  report.stationarity = best.stationarity;
  mark_bounds(report);
  return report;
}

SolveReport solve_max_diversification(const CovarianceStats& stats, const SolverConfig& cfg) {
  check_stats(stats);
  if ((stats.vols.array() <= 0.0).any()) {
    throw NumericError("degenerate risk: an asset has zero volatility");
  }
  const MatrixXd& sigma = stats.sigma;
  const VectorXd& vols = stats.vols;
  Problem p{
      [&](const VectorXd& w) {
        const double var = w.dot(sigma * w);
        if (!(var > 0.0)) throw NumericError("degenerate risk: zero portfolio volatility");
        return -w.dot(vols) / std::sqrt(var);
      },
      [&](const VectorXd& w) -> VectorXd {
        const VectorXd sw = sigma * w;
        const double var = w.dot(sw);
        if (!(var > 0.0)) throw NumericError("degenerate risk: zero portfolio volatility");
        const double sd = std::sqrt(var);
        return -(vols / sd - (w.dot(vols) / (var * sd)) * sw);
      },
      [](const VectorXd& v) { return project_to_simplex(v); },
  };
  auto report = multistart(p, stats.size(), cfg);
  report.objective_value = -report.objective_value;
  mark_bounds(report);
  return report;
}

SolveReport solve_risk_parity(const CovarianceStats& stats, const SolverConfig& cfg) {
  check_stats(stats);
  const auto l = stats.size();
  const double s = scale_of(stats.sigma);
  const MatrixXd q = stats.sigma / s;
  const auto [lo, hi] = eigen_range(q);
  if (!(lo > 1e-12 * hi)) {
    throw NumericError(
        "singular covariance: risk parity needs a positive definite matrix; apply "
        "shrink_covariance");
  }
  const double c = 1.0 / static_cast<double>(l);
  auto value = [&](const VectorXd& y) { return 0.5 * y.dot(q * y) - c * y.array().log().sum(); };
  auto gradient = [&](const VectorXd& y) -> VectorXd { return q * y - c * y.cwiseInverse(); };

  // Damped Newton; the barrier keeps iterates strictly positive.
  VectorXd y = q.diagonal().cwiseSqrt().cwiseInverse();
  y *= std::sqrt(c * static_cast<double>(l) / y.dot(q * y));
  SolveReport report;
  double f = value(y);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const VectorXd g = gradient(y);
    report.stationarity = g.cwiseProduct(y).lpNorm<Eigen::Infinity>();
    if (report.stationarity <= cfg.tolerance) {
      report.converged = true;
      break;
    }
    report.iterations = it + 1;
    MatrixXd hess = q;
    hess.diagonal() += c * y.cwiseInverse().cwiseAbs2();
    const VectorXd step = -hess.llt().solve(g);
    double t = 1.0;
    while ((y + t * step).minCoeff() <= 0.0) t *= 0.5;
    VectorXd next = y + t * step;
    double f_next = value(next);
    while (f_next > f + 1e-4 * t * g.dot(step) && t > 1e-20) {
      t *= 0.5;
      next = y + t * step;
      f_next = value(next);
    }
    if (next == y) break;
    y = std::move(next);
    f = f_next;
  }
  if (!report.converged) {
    report.stationarity = gradient(y).cwiseProduct(y).lpNorm<Eigen::Infinity>();
    report.converged = report.stationarity <= cfg.tolerance;
  }
  report.weights = y / y.sum();
  report.objective_value = 0.5 * report.weights.dot(stats.sigma * report.weights) -
                           c * report.weights.array().log().sum();
  mark_bounds(report);
  return report;
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "markowitz") return Method::kMarkowitz;
  if (name == "maxreturn") return Method::kMaxReturn;
  if (name == "minvariance") return Method::kMinVariance;
  if (name == "maxdiversification") return Method::kMaxDiversification;
  if (name == "maxdecorrelation") return Method::kMaxDecorrelation;
  if (name == "riskparity") return Method::kRiskParity;
  return std::nullopt;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kMarkowitz: return "markowitz";
    case Method::kMaxReturn: return "maxreturn";
    case Method::kMinVariance: return "minvariance";
    case Method::kMaxDiversification: return "maxdiversification";
    case Method::kMaxDecorrelation: return "maxdecorrelation";
    case Method::kRiskParity: return "riskparity";
  }
  return "unknown";
}

std::vector<std::string> method_names() {
  return {"markowitz", "maxreturn", "minvariance", "maxdiversification", "maxdecorrelation",
          "riskparity"};
}

SolveReport allocate(Method method, const CovarianceStats& stats, const MethodArgs& args,
                     const SolverConfig& cfg) {
  switch (method) {
    case Method::kMarkowitz:
      if (!args.r_min) throw UsageError("missing --r-min");
      return solve_markowitz_min_risk(stats, *args.r_min, cfg);
    case Method::kMaxReturn:
      if (!args.sigma_max) throw UsageError("missing --sigma-max");
      return solve_markowitz_max_return(stats, *args.sigma_max, cfg);
    case Method::kMinVariance: return solve_min_variance(stats, cfg);
    case Method::kMaxDiversification: return solve_max_diversification(stats, cfg);
    case Method::kMaxDecorrelation: return solve_max_decorrelation(stats, cfg);
    case Method::kRiskParity: return solve_risk_parity(stats, cfg);
  }
  throw UsageError("unknown allocation method");
}

}  // namespace deepalloc
