#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "evlab/common.hpp"

// Central-difference gradient verification. Everything runs in double; the
// layer templates are instantiated with double for the functions under test
// so the checker is limited by truncation error, not by float rounding.

namespace evlab {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool ok(double threshold = 1e-4) const { return max_rel_err < threshold; }
};

/// Compares an analytic gradient against (f(x+e_i*eps) - f(x-e_i*eps)) / (2*eps)
/// per coordinate. Relative error per element is |a - n| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                                  std::vector<double> point,
                                  std::span<const double> analytic, double eps = 1e-5) {
  if (point.size() != analytic.size())
    throw ValidationError("grad_check: point and analytic gradient differ in size");
  GradCheckReport report;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double fp = f(point);
    point[i] = saved - eps;
    const double fm = f(point);
    point[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace evlab
