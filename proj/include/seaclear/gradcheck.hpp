#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "seaclear/grid.hpp"

namespace seaclear {

using ScalarFn = std::function<double(const Grid&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares `analytic` to central differences (f(x+h) - f(x-h)) / 2h taken
/// coordinate by coordinate around `point`. The per-coordinate error is
/// |a - n| / max(|a|, |n|, 1e-8); the maximum is reported.
///
/// Throws ParameterError for h <= 0, DimensionError on shape mismatch and
/// EvaluationError if fn returns a non-finite value.
GradCheckReport finite_diff_report(const ScalarFn& fn, const Grid& point, const Grid& analytic,
                                   double h);

double finite_diff_check(const ScalarFn& fn, const Grid& point, const Grid& analytic, double h);

/// Same check for a flat parameter vector.
GradCheckReport finite_diff_report(const std::function<double(const std::vector<double>&)>& fn,
                                   const std::vector<double>& point,
                                   const std::vector<double>& analytic, double h);

/// Checks only the listed coordinates; large parameter vectors are spot
/// checked this way.
GradCheckReport finite_diff_report(const std::function<double(const std::vector<double>&)>& fn,
                                   const std::vector<double>& point,
                                   const std::vector<double>& analytic, double h,
                                   const std::vector<std::size_t>& coordinates);

/// Sum of elementwise products; handy for turning a Grid-valued op into a
/// scalar probe whose gradient with respect to the output is `weights`.
double dot(const Grid& a, const Grid& b);

/// Σ weights·(out - base). With `base` fixed at the unperturbed output this
/// has the same gradient as dot(out, weights) but avoids summing large
/// terms, which keeps finite-difference rounding well below the step.
double centered_dot(const Grid& out, const Grid& base, const Grid& weights);

}  // namespace seaclear
