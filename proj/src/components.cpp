#include "tvmix/components.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "tvmix/errors.hpp"

namespace tvmix {

void ComponentSet::validate(double variance_floor) const {
  const int k = count();
  const int d = dim();
  if (k < 1 || d < 1) throw InvalidInput("ComponentSet: empty");
  if (static_cast<int>(chol.size()) != k)
    throw InvalidInput("ComponentSet: means/chol count mismatch");
  const double min_diag = std::sqrt(variance_floor) * (1.0 - 1e-12);
  for (const auto& L : chol) {
    if (L.rows() != d || L.cols() != d)
      throw InvalidInput("ComponentSet: factor dimension mismatch");
    for (int i = 0; i < d; ++i) {
      if (!(L(i, i) >= min_diag))
        throw InvalidInput("ComponentSet: factor diagonal below variance floor");
      for (int j = i + 1; j < d; ++j)
        if (L(i, j) != 0.0)
          throw InvalidInput("ComponentSet: factor not lower triangular");
    }
  }
}

ComponentSet make_components(const Eigen::MatrixXd& means,
                             const std::vector<Eigen::MatrixXd>& covariances,
                             double variance_floor) {
  ComponentSet out;
  out.means = means;
  out.chol.reserve(covariances.size());
  for (const auto& cov : covariances) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
      throw NumericalError("make_components: eigendecomposition failed");
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(variance_floor);
    Eigen::MatrixXd floored =
        eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(floored);
    if (llt.info() != Eigen::Success)
      throw NumericalError("make_components: Cholesky factorization failed");
    out.chol.push_back(llt.matrixL());
  }
  return out;
}

Eigen::MatrixXd sample_mixture(const ComponentSet& components,
                               const Eigen::VectorXd& weights, int n,
                               SplitMix64& rng) {
  const int k = components.count();
  const int d = components.dim();
  if (weights.size() != k) throw InvalidInput("sample_mixture: weight size mismatch");

  Eigen::VectorXd cumulative(k);
  double acc = 0.0;
  for (int s = 0; s < k; ++s) {
    acc += weights[s];
    cumulative[s] = acc;
  }

  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d);
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double() * acc;
    int s = 0;
    while (s + 1 < k && u > cumulative[s]) ++s;
    for (int j = 0; j < d; ++j) z[j] = rng.next_normal();
    out.row(i) = components.means.row(s) +
                 (components.chol[s] * z).transpose();
  }
  return out;
}

}  // namespace tvmix
