#include "gazebar/pca.hpp"

#include <cmath>
#include <string>

#include "gazebar/rng.hpp"

namespace gazebar {

namespace {

using Matrix = std::vector<std::vector<double>>;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void remove_components(std::vector<double>& v, const Matrix& basis) {
  for (const auto& u : basis) {
    const double p = dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * u[i];
  }
}

std::vector<double> multiply(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = dot(m[i], v);
  return out;
}

}  // namespace

std::vector<double> Pca::project(std::span<const double> row) const {
  if (row.size() != mean.size()) throw std::invalid_argument("Pca::project: dimension mismatch");
  std::vector<double> centered(row.begin(), row.end());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] -= mean[i];
  std::vector<double> out;
  for (const auto& a : axes) out.push_back(dot(centered, a));
  return out;
}

Pca fit_pca(const Matrix& rows, std::size_t n_components, const PcaOptions& options) {
  if (rows.size() < 2) throw std::invalid_argument("fit_pca: need at least two rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw std::invalid_argument("fit_pca: empty rows");
  if (n_components < 1 || n_components > d) throw std::invalid_argument("fit_pca: bad component count");
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("fit_pca: rows differ in length");
  }

  Pca pca;
  pca.mean.assign(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) pca.mean[i] += r[i];
  }
  for (double& m : pca.mean) m /= static_cast<double>(rows.size());

  Matrix cov(d, std::vector<double>(d, 0.0));
  std::vector<double> c(d);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) c[i] = r[i] - pca.mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov[i][j] += c[i] * c[j];
    }
  }
  const double denom = static_cast<double>(rows.size() - 1);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= denom;
      cov[j][i] = cov[i][j];
    }
    trace += cov[i][i];
  }
  if (!(trace > 0.0)) throw DegenerateCovariance("fit_pca: covariance is zero (rank 0)");

  Rng rng = Rng::stream(options.seed, "pca");
  for (std::size_t k = 0; k < n_components; ++k) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    remove_components(v, pca.axes);
    double nv = norm(v);
    for (double& x : v) x /= nv;

    double lambda = 0.0;
    for (std::size_t it = 0; it < options.max_iter; ++it) {
      std::vector<double> w = multiply(cov, v);
      // Deflation: keep the iterate orthogonal to axes already found.
      remove_components(w, pca.axes);
      const double nw = norm(w);
      if (nw <= 1e-12 * trace) {
        lambda = 0.0;  // remaining spectrum is zero; any orthogonal unit vector will do
        break;
      }
      for (double& x : w) x /= nw;
      double diff = 0.0;
      for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(w[i] - v[i]));
      v = std::move(w);
      lambda = nw;
      if (diff < options.tol) break;
    }
    remove_components(v, pca.axes);
    remove_components(v, pca.axes);
    nv = norm(v);
    for (double& x : v) x /= nv;
    // Sign convention: the largest-magnitude component is positive.
    std::size_t big = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[big])) big = i;
    }
    if (v[big] < 0.0) {
      for (double& x : v) x = -x;
    }
    pca.axes.push_back(std::move(v));
    pca.eigenvalues.push_back(lambda);
  }
  return pca;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace gazebar
