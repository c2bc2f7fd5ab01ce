#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "hyssra/errors.hpp"

namespace hyssra::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Relative error used by the gradient checks; falls back to absolute error
/// when both gradients are below `floor`.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  return scale > floor ? diff / scale : diff;
}

/// Compares `analytic` against central differences of `loss` with respect to
/// each entry of `params`. `loss` is re-evaluated with params perturbed in place;
/// params are restored exactly afterwards.
template <class LossFn>
GradCheckReport grad_check(std::span<double> params, std::span<const double> analytic, LossFn&& loss,
                           double step = 1e-5) {
  if (params.size() != analytic.size()) throw ShapeError("grad_check: size mismatch");
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    if (err > report.max_relative_error) {
      report = {err, i, analytic[i], numeric};
    }
  }
  return report;
}

}  // namespace hyssra::nn
