#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "tvmix/components.hpp"
#include "tvmix/kernel.hpp"
#include "tvmix/panel.hpp"

namespace tvmix {

// Per-time mixture weights, one simplex row per grid time.
struct DiscreteWeights {
  std::vector<double> times;  // strictly increasing, within [0, 1]
  Eigen::MatrixXd weights;    // (m+1) x K

  void validate() const;
};

struct FitConfig {
  // Per-component ridge penalties lambda_s >= 0 on the weight QP. Leave empty
  // for the uniform default 1e-6.
  Eigen::VectorXd ridge;
  double adam_lr = 1e-2;
  std::pair<double, double> adam_betas{0.9, 0.999};
  int adam_steps = 200;  // inner Adam steps per M-step epoch
  int outer_rounds = 50;
  double qp_tol = 1e-10;
  int qp_max_iter = 10000;
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;

  Eigen::VectorXd ridge_for(int k) const;
  void validate() const;
};

// Euclidean projection onto the probability simplex (exact, sorting-based).
Eigen::VectorXd simplex_project(const Eigen::VectorXd& v);

struct KmeansInit {
  ComponentSet components;
  Eigen::VectorXd weights;  // cluster shares c_s / n
};

// Lloyd's algorithm with k-means++ seeding on the pooled samples; 100
// restarts capped at 100 iterations each, best inertia wins. Cluster
// covariances are eigenvalue-floored at variance_floor; empty clusters are
// re-seeded from the point farthest from its assigned center.
KmeansInit kmeans_init(const PanelDataset& data, int k, std::uint64_t seed,
                       double variance_floor);

struct EStepResult {
  Eigen::VectorXd weights;
  bool converged = true;
  int iterations = 0;
  // w^T G w - (2/n) w^T cross + sum_s lambda_s w_s^2 at the solution
  // (excludes the data-only constant).
  double objective_core = 0.0;
};

// Solves min_{w in simplex} w^T G w - (2/n) w^T cross + sum_s lambda_s w_s^2
// by projected gradient with step 1/L, L = 2 (lambda_max(G) + max lambda_s).
// Stops at ||w_{k+1} - w_k||_inf < qp_tol or qp_max_iter (converged=false).
EStepResult e_step_weights(const MmdTerms& terms, int n, const Eigen::VectorXd& ridge,
                           const FitConfig& cfg);

// One Adam epoch (cfg.adam_steps updates) on the shared means and Cholesky
// factors, minimizing the pooled squared-MMD objective over all time blocks
// at fixed weights. Factor diagonals are clamped at sqrt(variance_floor) and
// covariance eigenvalues floored after every step.
ComponentSet m_step_components(const ComponentSet& components, const PanelDataset& data,
                               const DiscreteWeights& weights,
                               const std::vector<KernelConfig>& kernels,
                               const FitConfig& cfg);

// Pooled penalized objective at fixed parameters:
//   sum_i [ MMD^2(block_i, mixture(alpha_i)) + sum_s lambda_s alpha_{i,s}^2 ].
double pooled_objective(const ComponentSet& components, const PanelDataset& data,
                        const DiscreteWeights& weights,
                        const std::vector<KernelConfig>& kernels,
                        const std::vector<double>& empirical_constants,
                        const Eigen::VectorXd& ridge);

// Analytic gradient of the pooled squared-MMD objective (weights fixed, data
// constants drop out) with respect to the means and Cholesky factors. This is
// the gradient the M-step descends.
struct ObjectiveGradient {
  Eigen::MatrixXd d_means;              // K x d
  std::vector<Eigen::MatrixXd> d_chol;  // K of d x d, lower part meaningful
};
ObjectiveGradient pooled_objective_gradient(const ComponentSet& components,
                                            const PanelDataset& data,
                                            const DiscreteWeights& weights,
                                            const std::vector<KernelConfig>& kernels);

// Everything stage one learned about one subject.
struct StageOneEstimate {
  DiscreteWeights weights;
  std::vector<KernelConfig> kernels;        // frozen per-time bandwidths
  std::vector<double> empirical_constants;  // per-time V-statistics
};

struct DiscreteFitResult {
  ComponentSet components;
  StageOneEstimate subject;
  std::vector<double> trace;  // penalized pooled objective after each E-step
  int estep_warnings = 0;
};

struct SharedFitResult {
  ComponentSet components;
  std::vector<StageOneEstimate> subjects;
  std::vector<double> trace;
  int estep_warnings = 0;
};

// Alternates per-time weight QPs (independent across times, run in parallel)
// with the shared M-step until outer_rounds or pooled improvement < 1e-8.
// With outer_rounds = 0 returns the k-means initialization verbatim.
DiscreteFitResult fit_discrete(const PanelDataset& data, int k, const FitConfig& cfg);

// Same alternation with components shared across subjects: k-means and the
// M-step pool every subject's samples, the weight QPs stay per subject and
// per time.
SharedFitResult fit_discrete_shared(const std::vector<PanelDataset>& subjects, int k,
                                    const FitConfig& cfg);

}  // namespace tvmix
