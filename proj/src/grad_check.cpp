#include "hubpath/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hubpath {

namespace {
double evaluate(const ScalarFn& f) {
  Tape tape;
  return f(tape).value()[0];
}
}  // namespace

GradCheckReport grad_check(const ScalarFn& f, Parameter& theta, double h, double tol) {
  GradCheckReport report;
  report.coordinates = theta.size();

  theta.tensor.grad();
  theta.tensor.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Var out = f(tape);
    if (!std::isfinite(out.value()[0])) {
      report.diagnostic = "objective is not finite at theta";
      return report;
    }
    tape.backward(out);
    auto g = theta.tensor.grad();
    analytic.assign(g.begin(), g.end());
  }

  auto& values = theta.tensor.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = evaluate(f);
    values[i] = saved - h;
    const double down = evaluate(f);
    values[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      report.diagnostic = "objective is not finite at coordinate " + std::to_string(i) + " of " + theta.name;
      report.worst_index = i;
      return report;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_error <= tol;
  if (!report.pass)
    report.diagnostic = theta.name + ": max relative error " + std::to_string(report.max_rel_error) +
                        " at coordinate " + std::to_string(report.worst_index);
  theta.tensor.zero_grad();
  return report;
}

}  // namespace hubpath
