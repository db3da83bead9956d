#include "gazebar/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gazebar/rng.hpp"

namespace gazebar {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& loss_fn, const std::vector<ParamRef>& params,
                           const GradCheckOptions& options, const PieceFn& piece) {
  if (!(options.h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
  if (params.empty()) throw std::invalid_argument("grad_check: no parameters");

  for (const auto& p : params) p.grad->fill(0.0);
  loss_fn(true);
  const std::uint64_t base_piece = piece ? piece() : 0;
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(*p.grad);

  // Spread the coordinate budget evenly; small tensors are checked exhaustively.
  const std::size_t per_param = (options.min_coords + params.size() - 1) / params.size();
  Rng rng = Rng::stream(options.seed, "grad-check");
  GradCheckReport report;
  std::size_t leftover = 0;
  // Smallest tensors first, so budget they cannot use carries to larger ones.
  std::vector<std::size_t> visit(params.size());
  std::iota(visit.begin(), visit.end(), std::size_t{0});
  std::stable_sort(visit.begin(), visit.end(),
                   [&](std::size_t a, std::size_t b) { return params[a].value->size() < params[b].value->size(); });
  for (std::size_t pi : visit) {
    Tensor& value = *params[pi].value;
    const std::size_t budget = per_param + leftover;
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > budget) rng.shuffle(coords);

    std::size_t used = 0;
    for (std::size_t idx : coords) {
      if (used == budget) break;
      const double orig = value[idx];
      value[idx] = orig + options.h;
      const double f_plus = loss_fn(false);
      const bool plus_same = !piece || piece() == base_piece;
      value[idx] = orig - options.h;
      const double f_minus = loss_fn(false);
      const bool minus_same = !piece || piece() == base_piece;
      value[idx] = orig;
      if (!plus_same || !minus_same) {
        ++report.coords_skipped;
        continue;
      }
      ++used;
      const double numeric = (f_plus - f_minus) / (2.0 * options.h);
      const double a = analytic[pi][idx];
      const double err = relative_error(a, numeric, options.abs_floor);
      ++report.coords_checked;
      if (err > report.max_relative_error || report.coords_checked == 1) {
        report.max_relative_error = err;
        report.worst_param = params[pi].name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    leftover = budget - used;
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) *params[pi].grad = analytic[pi];
  report.passed = report.max_relative_error < options.tol && report.coords_checked >= options.min_coords;
  return report;
}

}  // namespace gazebar
