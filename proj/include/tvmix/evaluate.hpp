#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tvmix/data_io.hpp"
#include "tvmix/discrete_fit.hpp"
#include "tvmix/panel.hpp"
#include "tvmix/weight_ode.hpp"

namespace tvmix {

// Batched density: rows of nodes are evaluation points, the result holds one
// density value per row. Batching lets model adapters resolve the weight
// trajectory once per time instead of once per point.
using DensityEvaluator =
    std::function<Eigen::VectorXd(const Eigen::MatrixXd& nodes, double t)>;

DensityEvaluator model_density_evaluator(const FittedModel& model);

// Time-conditional KDE over the block observed at t (t must match a block
// time): product Gaussian kernel with Silverman's rule per coordinate,
// h_j = 1.06 sd_j n^{-1/5}.
DensityEvaluator kde_density_evaluator(const PanelDataset& data);
Eigen::VectorXd kde_time_conditional(const PanelDataset& data, double t_query,
                                     const Eigen::MatrixXd& x_grid);

struct DensityErrorReport {
  std::vector<double> times;
  std::vector<double> l2;  // sqrt integral (f_hat - f)^2 per time
  std::vector<double> l1;  // integral |f_hat - f| per time
  double sup_l1 = 0.0;
  double wall_seconds = 0.0;
};

// d = 1: trapezoid rule on the supplied grid.
DensityErrorReport density_error_grid(const DensityEvaluator& estimate,
                                      const GroundTruth& truth,
                                      const std::vector<double>& times,
                                      const Eigen::VectorXd& x_grid);

// d >= 1: importance sampling with the truth as proposal, using nodes fresh
// draws from the truth per time.
DensityErrorReport density_error_monte_carlo(const DensityEvaluator& estimate,
                                             const GroundTruth& truth,
                                             const std::vector<double>& times,
                                             int nodes, std::uint64_t seed);

// 2048 points spanning [min mean - 8 sd_max, max mean + 8 sd_max] over the
// requested times (d = 1 only).
Eigen::VectorXd default_error_grid(const GroundTruth& truth,
                                   const std::vector<double>& times);

enum class RateRegime { regular, singular };

struct RateReport {
  std::vector<int> sizes;
  Eigen::MatrixXd sup_mmd;  // replicates x sizes
  double slope = 0.0;       // least-squares slope of log sup-MMD vs log n
  std::string regime;
  double separation = 0.0;  // component separation of the fixture
};

// Convergence-rate experiment: for each n, fit the two-component estimator on
// data from a fixed mixture (regular: separation 5; singular: coincident
// components) over a 3-point time grid and record the sup-over-time
// closed-form MMD between fitted and true mixtures under a unit-bandwidth
// kernel. Replicates run in parallel with derived seeds.
RateReport rate_experiment(RateRegime regime, const std::vector<int>& sizes,
                           int replicates, std::uint64_t seed);

struct CenteredTrajectories {
  std::vector<double> t_grid;
  std::vector<double> quantile_levels;
  // curves[i](g, s) = subject i's weight s at t_grid[g] minus its value at 0
  std::vector<Eigen::MatrixXd> curves;
  // quantiles[q](g, s) = cross-subject quantile of the centered weights
  std::vector<Eigen::MatrixXd> quantiles;
};

CenteredTrajectories centered_trajectories(
    const std::vector<FittedModel>& models, const std::vector<double>& t_grid,
    const std::vector<double>& quantile_levels = {0.1, 0.25, 0.5, 0.75, 0.9});

struct BandReport {
  std::vector<double> times;
  Eigen::VectorXd x_grid;
  std::vector<Eigen::VectorXd> lower;   // per time, over the grid
  std::vector<Eigen::VectorXd> upper;
  std::vector<Eigen::VectorXd> center;  // full-sample point estimate
  int estep_warnings = 0;
};

// Pointwise bootstrap density bands at the requested observed times: each of
// the B replicates resamples the blocks, re-solves the weight QP with the
// model's components frozen, and evaluates the density on x_grid. Bands are
// the (level/2, 1 - level/2) empirical quantiles, so level = 0.05 gives 95%
// bands. Bandwidths are frozen too: the model's stored per-time sigmas when
// they match the grid, otherwise the median heuristic on the given data.
BandReport bootstrap_bands(const PanelDataset& data, const FittedModel& model,
                           const std::vector<double>& times_of_interest,
                           const Eigen::VectorXd& x_grid, int replicates,
                           double level, std::uint64_t seed,
                           const FitConfig& fit_cfg = FitConfig{});

}  // namespace tvmix
