#pragma once

#include <Eigen/Dense>

#include <functional>

#include "deepalloc/allocators.hpp"

namespace deepalloc::testing {

/// Calls `visit` for every point of the simplex whose coordinates are
/// multiples of `step`.
void for_each_grid_point(Eigen::Index l, double step, const std::function<void(const Eigen::VectorXd&)>& visit);

/// Objective of each program written as a minimization, evaluated directly
/// from its definition. Infeasible points return +infinity.
double oracle_objective(Method method, const CovarianceStats& stats, const MethodArgs& args,
                        const Eigen::VectorXd& w);

struct GridResult {
  Eigen::VectorXd weights;
  double objective = 0.0;
  bool found = false;
};

/// Exhaustive search of the simplex grid.
GridResult grid_search(Method method, const CovarianceStats& stats, const MethodArgs& args, double step = 0.005);

}  // namespace deepalloc::testing
