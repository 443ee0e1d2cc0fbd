#pragma once

#include <Eigen/Core>
#include <vector>

#include "tvmix/rng.hpp"

namespace tvmix {

// The K shared Gaussian components of the mixture: means m_s and covariances
// Sigma_s = L_s L_s^T held through their lower-triangular Cholesky factors,
// which keeps every Sigma_s symmetric positive definite by construction.
struct ComponentSet {
  Eigen::MatrixXd means;              // K x d
  std::vector<Eigen::MatrixXd> chol;  // K lower-triangular d x d factors

  int count() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }

  Eigen::MatrixXd covariance(int s) const { return chol[s] * chol[s].transpose(); }

  // Free parameters: K (1 + d + d(d+1)/2) counting one weight, the mean and
  // the covariance triangle per component.
  int parameter_count() const {
    const int d = dim();
    return count() * (1 + d + d * (d + 1) / 2);
  }

  // Throws InvalidInput unless every factor is square, matches d, and carries
  // diagonal entries >= sqrt(variance_floor).
  void validate(double variance_floor) const;
};

// Builds a ComponentSet from explicit covariance matrices (factorized here).
// Covariance eigenvalues are floored at variance_floor before factorization.
ComponentSet make_components(const Eigen::MatrixXd& means,
                             const std::vector<Eigen::MatrixXd>& covariances,
                             double variance_floor);

// Draws n points from the mixture (weights, components); one point per row.
Eigen::MatrixXd sample_mixture(const ComponentSet& components,
                               const Eigen::VectorXd& weights, int n,
                               SplitMix64& rng);

}  // namespace tvmix
