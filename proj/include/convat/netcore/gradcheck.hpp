#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace convat {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t num_params_checked = 0;
  std::size_t worst_index = 0;
  bool passed = false;
};

class GradCheckAborted : public std::runtime_error {
 public:
  explicit GradCheckAborted(std::size_t index)
      : std::runtime_error("non-finite objective while perturbing parameter " +
                           std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// 0 checks every parameter; otherwise an evenly strided subset of this size.
  std::size_t max_params = 0;
};

/// Compares `analytic` against central differences of `objective`.
///
/// `objective` must read the current contents of `params`; the checker perturbs
/// one entry at a time and restores it. Relative error per entry is
/// |a - n| / max(1, |a| + |n|).
GradCheckReport finite_difference_check(const std::function<double()>& objective,
                                        std::span<double> params,
                                        std::span<const double> analytic,
                                        const GradCheckOptions& options = {});

}  // namespace convat
