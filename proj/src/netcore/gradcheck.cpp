#include "convat/netcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "convat/netcore/errors.hpp"

namespace convat {

GradCheckReport finite_difference_check(const std::function<double()>& objective,
                                        std::span<double> params,
                                        std::span<const double> analytic,
                                        const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw DimensionError("finite_difference_check: " + std::to_string(params.size()) +
                         " params vs " + std::to_string(analytic.size()) + " gradient entries");
  }
  if (!(options.tolerance > 0.0) || !(options.step > 0.0)) {
    throw InvalidInputError("finite_difference_check: tolerance and step must be positive");
  }

  const std::size_t n = params.size();
  const std::size_t count = options.max_params == 0 ? n : std::min(n, options.max_params);
  const double h = options.step;

  GradCheckReport report;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = count == n ? k : (k * n) / count;
    const double saved = params[i];
    params[i] = saved + h;
    const double plus = objective();
    params[i] = saved - h;
    const double minus = objective();
    params[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw GradCheckAborted(i);

    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    ++report.num_params_checked;
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace convat
