#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gazebar/tensor.hpp"

namespace gazebar {

/// A parameter tensor paired with the buffer its analytic gradient lands in.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

/// Evaluates the loss at the current parameter values. When `with_grad` is
/// true it must also accumulate the analytic gradient into every ParamRef::grad
/// (which grad_check zeroes beforehand).
using LossFn = std::function<double(bool with_grad)>;

/// Identifies the smooth piece of a piecewise-smooth loss at the current
/// parameters (e.g. a hash of ReLU masks). Queried right after a loss_fn call.
using PieceFn = std::function<std::uint64_t()>;

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t min_coords = 200;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error, so exact-zero gradients compare
  /// against finite-difference round-off in absolute terms.
  double abs_floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
  /// Coordinates dropped because x+h or x-h fell on another smooth piece.
  std::size_t coords_skipped = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

/// Compares analytic gradients with central differences (f(x+h)-f(x-h))/2h
/// on a random subsample of coordinates spread evenly over `params`. With
/// `piece`, coordinates whose probes cross a kink are replaced by others.
GradCheckReport grad_check(const LossFn& loss_fn, const std::vector<ParamRef>& params,
                           const GradCheckOptions& options = {}, const PieceFn& piece = {});

double relative_error(double analytic, double numeric, double abs_floor);

}  // namespace gazebar
