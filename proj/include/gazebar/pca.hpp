#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gazebar {

struct PcaOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
};

struct Pca {
  std::vector<double> mean;
  /// Unit-norm, mutually orthogonal axes, largest variance first.
  std::vector<std::vector<double>> axes;
  std::vector<double> eigenvalues;

  std::vector<double> project(std::span<const double> row) const;
};

class DegenerateCovariance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Top `n_components` eigenvectors of the sample covariance of `rows`
/// (all of equal length), found by power iteration with deflation.
/// A covariance with no variance at all throws DegenerateCovariance.
Pca fit_pca(const std::vector<std::vector<double>>& rows, std::size_t n_components, const PcaOptions& options = {});

/// Pearson correlation; 0 when either side has no variance.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace gazebar
