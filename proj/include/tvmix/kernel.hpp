#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "tvmix/components.hpp"

namespace tvmix {

// Gaussian kernel k(x, y) = exp(-||x - y||^2 / (2 sigma_sq)) in dimension dim.
struct KernelConfig {
  double sigma_sq = 1.0;
  int dim = 1;

  void validate() const;
};

// Result of the median-heuristic bandwidth rule. degenerate is set when all
// pairwise distances were zero and sigma_sq fell back to 1.
struct MedianBandwidth {
  KernelConfig config;
  bool degenerate = false;
};

// Closed-form pieces of the squared MMD between a K-component mixture and an
// empirical sample:
//   gram_components(s, r)  component-component kernel integral,
//   cross_vector(s)        sum over samples of the component-sample integral,
//   empirical_constant     data-only V-statistic (1/n^2) sum_{j,l} k(X_j, X_l).
struct MmdTerms {
  Eigen::MatrixXd gram_components;  // K x K, symmetric PSD
  Eigen::VectorXd cross_vector;     // K, summed over samples (not averaged)
  double empirical_constant = 0.0;
};

struct MonteCarloMmd {
  double estimate = 0.0;
  double std_error = 0.0;
};

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const KernelConfig& cfg);

// sigma_sq = (median of pairwise Euclidean distances over j != k)^2, taking
// the lower middle order statistic when the pair count is even. Needs at
// least two sample rows.
MedianBandwidth median_heuristic(const Eigen::MatrixXd& samples);

// (sigma^2)^{d/2} det(S_s + S_r + sigma^2 I)^{-1/2}
//   exp(-1/2 (m_s - m_r)^T (S_s + S_r + sigma^2 I)^{-1} (m_s - m_r)).
double gauss_gauss_term(const ComponentSet& components, int s, int r,
                        const KernelConfig& cfg);

// (sigma^2)^{d/2} det(S_s + sigma^2 I)^{-1/2}
//   exp(-1/2 (x - m_s)^T (S_s + sigma^2 I)^{-1} (x - m_s)).
double gauss_point_term(const ComponentSet& components, int s,
                        const Eigen::VectorXd& x, const KernelConfig& cfg);

// Assembles all three MMD^2 pieces for one sample block (rows = samples).
// with_empirical=false skips the O(n^2) V-statistic, leaving
// empirical_constant at 0; enough for weight updates, which only use the
// quadratic and linear pieces.
MmdTerms mmd_terms(const ComponentSet& components, const Eigen::MatrixXd& samples,
                   const KernelConfig& cfg, bool with_empirical = true);

// w^T G w - (2/n) w^T cross + empirical_constant, clamped to 0 when the
// floating-point result lands in (-1e-10, 0). Weights must lie on the simplex
// within 1e-8.
double mmd_sq(const Eigen::VectorXd& weights, const MmdTerms& terms, int n);

// Kernel mean embedding of the mixture at z. Carries the same (sigma^2)^{d/2}
// constant as gauss_point_term, so it equals sum_s w_s gauss_point_term(s, z)
// and matches E[k(z, X)] for X drawn from the mixture.
double mean_embedding(const ComponentSet& components, const Eigen::VectorXd& weights,
                      const Eigen::VectorXd& z, const KernelConfig& cfg);

// Closed-form squared MMD between two Gaussian mixtures under the same kernel.
double mixture_mmd_sq(const ComponentSet& a, const Eigen::VectorXd& wa,
                      const ComponentSet& b, const Eigen::VectorXd& wb,
                      const KernelConfig& cfg);

// Monte Carlo estimate of MMD^2(mixture, empirical sample) from independent
// mixture draws, with its standard error. Test oracle for the closed forms;
// deterministic per seed. Requires draws >= 10^4.
MonteCarloMmd mmd_sq_monte_carlo(const ComponentSet& components,
                                 const Eigen::VectorXd& weights,
                                 const Eigen::MatrixXd& samples,
                                 const KernelConfig& cfg, std::int64_t draws,
                                 std::uint64_t seed);

}  // namespace tvmix
