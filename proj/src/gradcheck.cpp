#include "seaclear/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

// Checks the listed coordinates, or all of them when `subset` is null.
template <typename Eval>
GradCheckReport run_check(std::vector<double> x, const std::vector<double>& analytic, double h,
                          const std::vector<std::size_t>* subset, Eval&& eval) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_check: step h must be positive");
  if (x.size() != analytic.size()) {
    throw DimensionError("finite_diff_check: " + std::to_string(x.size()) + " coordinates but " +
                         std::to_string(analytic.size()) + " analytic gradient entries");
  }
  auto finite_eval = [&](std::size_t i) {
    const double f = eval(x);
    if (!std::isfinite(f)) {
      throw EvaluationError("finite_diff_check: function is not finite near coordinate " +
                            std::to_string(i));
    }
    return f;
  };
  const std::size_t n = subset ? subset->size() : x.size();
  GradCheckReport report;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = subset ? (*subset)[k] : k;
    if (i >= x.size()) {
      throw DimensionError("finite_diff_check: coordinate " + std::to_string(i) +
                           " out of range for " + std::to_string(x.size()) + " entries");
    }
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = finite_eval(i);
    x[i] = saved - h;
    const double fm = finite_eval(i);
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double err =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (k == 0 || err > report.max_rel_error) report = {err, i, a, numeric};
  }
  return report;
}

}  // namespace

GradCheckReport finite_diff_report(const ScalarFn& fn, const Grid& point, const Grid& analytic,
                                   double h) {
  require_same_shape(point, analytic, "finite_diff_check");
  Grid probe = point;
  return run_check(point.values(), analytic.values(), h, nullptr, [&](const std::vector<double>& x) {
    probe.values() = x;
    return fn(probe);
  });
}

double finite_diff_check(const ScalarFn& fn, const Grid& point, const Grid& analytic, double h) {
  return finite_diff_report(fn, point, analytic, h).max_rel_error;
}

GradCheckReport finite_diff_report(const std::function<double(const std::vector<double>&)>& fn,
                                   const std::vector<double>& point,
                                   const std::vector<double>& analytic, double h) {
  return run_check(point, analytic, h, nullptr, fn);
}

GradCheckReport finite_diff_report(const std::function<double(const std::vector<double>&)>& fn,
                                   const std::vector<double>& point,
                                   const std::vector<double>& analytic, double h,
                                   const std::vector<std::size_t>& coordinates) {
  return run_check(point, analytic, h, &coordinates, fn);
}

double dot(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double centered_dot(const Grid& out, const Grid& base, const Grid& weights) {
  require_same_shape(out, base, "centered_dot");
  require_same_shape(out, weights, "centered_dot");
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * (out[i] - base[i]);
  return s;
}

}  // namespace seaclear
