#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "hubpath/tape.hpp"

namespace hubpath {

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  std::string diagnostic;
};

/// Builds the scalar to differentiate on a fresh tape. Must be a pure
/// function of the current parameter values.
using ScalarFn = std::function<Var(Tape&)>;

/// Compares reverse-mode d f / d theta against central differences with
/// step h, coordinate by coordinate. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
/// theta's gradient buffer is overwritten; its values are restored.
GradCheckReport grad_check(const ScalarFn& f, Parameter& theta, double h = 1e-5, double tol = 1e-6);

}  // namespace hubpath
