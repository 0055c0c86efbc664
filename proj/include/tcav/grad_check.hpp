#pragma once

#include <cmath>
#include <functional>

#include "tcav/error.hpp"
#include "tcav/tensor.hpp"

namespace tcav::num {

// Compares an analytic gradient against central finite differences.
// Returns max over coordinates of |analytic - central| / max(1, |central|).
//
// The function must be smooth in an epsilon-neighbourhood of `point`;
// non-differentiable points (e.g. |x| at 0) are unsupported and it is the
// caller's responsibility to avoid them.
inline double grad_check(const std::function<double(const Tensor&)>& f,
                         const std::function<Tensor(const Tensor&)>& analytic_grad,
                         const Tensor& point, double epsilon) {
  require(epsilon > 0.0, "grad_check: epsilon must be positive");
  const Tensor g = analytic_grad(point);
  require(g.same_shape(point), "grad_check: gradient shape does not match point");

  double max_rel = 0.0;
  Tensor p = point;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + epsilon;
    const double fp = f(p);
    p[i] = orig - epsilon;
    const double fm = f(p);
    p[i] = orig;
    require(std::isfinite(fp) && std::isfinite(fm),
            "grad_check: non-finite function value at coordinate " + std::to_string(i));
    const double central = (fp - fm) / (2.0 * epsilon);
    const double rel = std::abs(g[i] - central) / std::max(1.0, std::abs(central));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace tcav::num
