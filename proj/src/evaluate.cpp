#include "tvmix/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tvmix/errors.hpp"
#include "tvmix/kernel.hpp"
#include "tvmix/parallel.hpp"
#include "tvmix/rng.hpp"

namespace tvmix {

namespace {

Eigen::VectorXd mixture_density_grid(const ComponentSet& components,
                                     const Eigen::VectorXd& weights,
                                     const Eigen::MatrixXd& nodes) {
  const int d = components.dim();
  if (nodes.cols() != d) throw InvalidInput("density grid dimension mismatch");
  const double norm_const = std::pow(2.0 * M_PI, -0.5 * d);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nodes.rows());
  for (int s = 0; s < components.count(); ++s) {
    const Eigen::MatrixXd& chol = components.chol[s];
    const Eigen::MatrixXd centered =
        (nodes.rowwise() - components.means.row(s)).transpose();  // d x m
    const Eigen::MatrixXd solved =
        chol.triangularView<Eigen::Lower>().solve(centered);
    const Eigen::ArrayXd quad = solved.colwise().squaredNorm().transpose();
    out += (weights[s] * norm_const / chol.diagonal().prod()) *
           (-0.5 * quad).exp().matrix();
  }
  return out;
}

std::size_t block_index_for(const PanelDataset& data, double t) {
  for (std::size_t i = 0; i < data.block_count(); ++i)
    if (std::abs(data.times[i] - t) < 1e-12) return i;
  throw InvalidInput("time " + std::to_string(t) + " is not an observed time");
}

double trapezoid(const Eigen::VectorXd& grid, const Eigen::ArrayXd& values) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < grid.size(); ++i)
    acc += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
  return acc;
}

// Empirical quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

struct KdeBlock {
  Eigen::MatrixXd samples;
  Eigen::VectorXd bandwidth;  // per coordinate
};

KdeBlock kde_block(const Eigen::MatrixXd& block) {
  const Eigen::Index n = block.rows();
  const int d = static_cast<int>(block.cols());
  KdeBlock out;
  out.samples = block;
  out.bandwidth.resize(d);
  // Silverman's rule per coordinate: h_j = 1.06 sd_j n^{-1/5}.
  const double factor = 1.06 * std::pow(static_cast<double>(n), -0.2);
  for (int j = 0; j < d; ++j) {
    double sd = 0.0;
    if (n > 1) {
      const double mean = block.col(j).mean();
      sd = std::sqrt((block.col(j).array() - mean).square().sum() / (n - 1.0));
    }
    const double h = sd * factor;
    out.bandwidth[j] = h > 0.0 ? h : 1.0;
  }
  return out;
}

Eigen::VectorXd kde_eval(const KdeBlock& kde, const Eigen::MatrixXd& nodes) {
  const Eigen::Index n = kde.samples.rows();
  const int d = static_cast<int>(kde.samples.cols());
  const double norm_const =
      1.0 / (static_cast<double>(n) *
             std::pow(2.0 * M_PI, 0.5 * d) * kde.bandwidth.prod());
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(nodes.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXXd scaled =
        (nodes.rowwise() - kde.samples.row(i)).array().rowwise() /
        kde.bandwidth.transpose().array();
    acc += (-0.5 * scaled.square().rowwise().sum()).exp();
  }
  return (norm_const * acc).matrix();
}

}  // namespace

DensityEvaluator model_density_evaluator(const FittedModel& model) {
  return [model](const Eigen::MatrixXd& nodes, double t) {
    return mixture_density_grid(model.components, predict_weights(model, t), nodes);
  };
}

DensityEvaluator kde_density_evaluator(const PanelDataset& data) {
  data.validate();
  return [data](const Eigen::MatrixXd& nodes, double t) {
    return kde_eval(kde_block(data.blocks[block_index_for(data, t)]), nodes);
  };
}

Eigen::VectorXd kde_time_conditional(const PanelDataset& data, double t_query,
                                     const Eigen::MatrixXd& x_grid) {
  data.validate();
  return kde_eval(kde_block(data.blocks[block_index_for(data, t_query)]), x_grid);
}

DensityErrorReport density_error_grid(const DensityEvaluator& estimate,
                                      const GroundTruth& truth,
                                      const std::vector<double>& times,
                                      const Eigen::VectorXd& x_grid) {
  if (truth.dim != 1)
    throw InvalidInput("density_error_grid: grid quadrature is d = 1 only");
  const auto started = std::chrono::steady_clock::now();

  DensityErrorReport report;
  report.times = times;
  const Eigen::MatrixXd nodes = x_grid;
  for (double t : times) {
    const Eigen::VectorXd est = estimate(nodes, t);
    Eigen::ArrayXd truth_vals(x_grid.size());
    for (Eigen::Index i = 0; i < x_grid.size(); ++i)
      truth_vals[i] = truth.density(x_grid.segment(i, 1), t);
    const Eigen::ArrayXd diff = est.array() - truth_vals;
    report.l2.push_back(std::sqrt(trapezoid(x_grid, diff.square())));
    report.l1.push_back(trapezoid(x_grid, diff.abs()));
  }
  report.sup_l1 = *std::max_element(report.l1.begin(), report.l1.end());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

DensityErrorReport density_error_monte_carlo(const DensityEvaluator& estimate,
                                             const GroundTruth& truth,
                                             const std::vector<double>& times,
                                             int nodes, std::uint64_t seed) {
  if (nodes < 1) throw InvalidInput("density_error_monte_carlo: nodes must be >= 1");
  const auto started = std::chrono::steady_clock::now();

  DensityErrorReport report;
  report.times = times;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    SplitMix64 rng(derive_seed(seed, i));
    const Eigen::MatrixXd draws = truth.sample(t, nodes, rng);
    const Eigen::VectorXd est = estimate(draws, t);
    double l1 = 0.0, l2sq = 0.0;
    for (int r = 0; r < nodes; ++r) {
      const double f = truth.density(draws.row(r).transpose(), t);
      const double diff = est[r] - f;
      l1 += std::abs(diff) / f;
      l2sq += diff * diff / f;
    }
    report.l1.push_back(l1 / nodes);
    report.l2.push_back(std::sqrt(std::max(0.0, l2sq / nodes)));
  }
  report.sup_l1 = *std::max_element(report.l1.begin(), report.l1.end());
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

Eigen::VectorXd default_error_grid(const GroundTruth& truth,
                                   const std::vector<double>& times) {
  if (truth.dim != 1) throw InvalidInput("default_error_grid: d = 1 only");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double sd_max = 0.0;
  for (double t : times) {
    for (int s = 0; s < truth.component_count(); ++s) {
      const double m = truth.mean_base[s] + truth.mean_slope[s] * t;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    sd_max = std::max(sd_max, std::sqrt(truth.variance(t)));
  }
  return Eigen::VectorXd::LinSpaced(2048, lo - 8.0 * sd_max, hi + 8.0 * sd_max);
}

RateReport rate_experiment(RateRegime regime, const std::vector<int>& sizes,
                           int replicates, std::uint64_t seed) {
  if (sizes.empty() || replicates < 1)
    throw InvalidInput("rate_experiment: need sizes and replicates");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw InvalidInput("rate_experiment: sizes must be strictly increasing");

  GroundTruth truth;
  truth.dim = 1;
  truth.var_base = 1.0;
  truth.var_slope = 0.0;
  truth.weights = Eigen::Vector2d(0.5, 0.5);
  truth.mean_slope = Eigen::Vector2d(0.0, 0.0);
  const double separation = regime == RateRegime::regular ? 5.0 : 0.0;
  truth.mean_base = Eigen::Vector2d(-0.5 * separation, 0.5 * separation);

  const std::vector<double> grid{0.0, 0.5, 1.0};
  const KernelConfig eval_kernel{1.0, 1};
  const ComponentSet truth_components = truth.components_at(0.0);

  RateReport report;
  report.sizes = sizes;
  report.regime = regime == RateRegime::regular ? "regular" : "singular";
  report.separation = separation;
  report.sup_mmd.resize(replicates, static_cast<Eigen::Index>(sizes.size()));

  const std::size_t jobs = sizes.size() * static_cast<std::size_t>(replicates);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t size_idx = job / replicates;
    const int rep = static_cast<int>(job % replicates);
    const int n = sizes[size_idx];
    SplitMix64 rng(derive_seed(seed, job));

    PanelDataset data;
    data.dim = 1;
    data.times = grid;
    for (std::size_t i = 0; i < grid.size(); ++i)
      data.blocks.push_back(truth.sample(grid[i], n, rng));

    FitConfig cfg;
    cfg.outer_rounds = 40;
    cfg.adam_steps = 120;
    cfg.seed = derive_seed(seed, jobs + job);
    const DiscreteFitResult fit = fit_discrete(data, 2, cfg);

    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double mmd2 = mixture_mmd_sq(
          fit.components, fit.subject.weights.weights.row(static_cast<Eigen::Index>(i)),
          truth_components, truth.weights, eval_kernel);
      sup = std::max(sup, std::sqrt(std::max(0.0, mmd2)));
    }
    report.sup_mmd(rep, static_cast<Eigen::Index>(size_idx)) = sup;
  });

  // Least-squares slope of log sup-MMD against log n over every replicate.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double count = static_cast<double>(jobs);
  for (std::size_t si = 0; si < sizes.size(); ++si)
    for (int rep = 0; rep < replicates; ++rep) {
      const double x = std::log(static_cast<double>(sizes[si]));
      const double y =
          std::log(std::max(report.sup_mmd(rep, static_cast<Eigen::Index>(si)), 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
  report.slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return report;
}

CenteredTrajectories centered_trajectories(
    const std::vector<FittedModel>& models, const std::vector<double>& t_grid,
    const std::vector<double>& quantile_levels) {
  if (models.empty()) throw InvalidInput("centered_trajectories: no models");
  const int k = models.front().components.count();
  for (const auto& m : models)
    if (m.components.count() != k)
      throw InvalidInput("centered_trajectories: models disagree on K");

  CenteredTrajectories out;
  out.t_grid = t_grid;
  out.quantile_levels = quantile_levels;
  out.curves.resize(models.size());

  parallel_for(models.size(), [&](std::size_t i) {
    const Eigen::VectorXd base = predict_weights(models[i], 0.0);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(t_grid.size()), k);
    for (std::size_t g = 0; g < t_grid.size(); ++g)
      z.row(static_cast<Eigen::Index>(g)) =
          (predict_weights(models[i], t_grid[g]) - base).transpose();
    out.curves[i] = std::move(z);
  });

  out.quantiles.assign(quantile_levels.size(),
                       Eigen::MatrixXd(static_cast<Eigen::Index>(t_grid.size()), k));
  std::vector<double> column(models.size());
  for (std::size_t g = 0; g < t_grid.size(); ++g)
    for (int s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < models.size(); ++i)
        column[i] = out.curves[i](static_cast<Eigen::Index>(g), s);
      std::sort(column.begin(), column.end());
      for (std::size_t q = 0; q < quantile_levels.size(); ++q)
        out.quantiles[q](static_cast<Eigen::Index>(g), s) =
            quantile_sorted(column, quantile_levels[q]);
    }
  return out;
}

BandReport bootstrap_bands(const PanelDataset& data, const FittedModel& model,
                           const std::vector<double>& times_of_interest,
                           const Eigen::VectorXd& x_grid, int replicates,
                           double level, std::uint64_t seed,
                           const FitConfig& fit_cfg) {
  data.validate();
  if (replicates < 50) throw InvalidInput("bootstrap_bands: need B >= 50");
  if (!(level > 0.0 && level < 1.0))
    throw InvalidInput("bootstrap_bands: level must lie in (0, 1)");
  if (times_of_interest.empty())
    throw InvalidInput("bootstrap_bands: no times requested");

  const int k = model.components.count();
  const Eigen::VectorXd ridge = fit_cfg.ridge_for(k);
  const Eigen::MatrixXd nodes = x_grid;

  std::vector<std::size_t> block_idx;
  for (double t : times_of_interest) block_idx.push_back(block_index_for(data, t));

  // Frozen bandwidths: the model's stored sigmas when they line up with this
  // grid, otherwise the median heuristic on the given blocks.
  std::vector<KernelConfig> kernels(block_idx.size());
  const bool use_stored = model.kernel_sigmas.size() == data.block_count();
  for (std::size_t j = 0; j < block_idx.size(); ++j) {
    if (use_stored) {
      kernels[j] = KernelConfig{model.kernel_sigmas[block_idx[j]], data.dim};
    } else if (data.blocks[block_idx[j]].rows() >= 2) {
      kernels[j] = median_heuristic(data.blocks[block_idx[j]]).config;
    } else {
      kernels[j] = KernelConfig{1.0, data.dim};
    }
  }

  FitConfig qp_cfg = fit_cfg;
  auto solve_weights = [&](const Eigen::MatrixXd& block, std::size_t j,
                           int* warn) {
    const MmdTerms terms = mmd_terms(model.components, block, kernels[j], false);
    const EStepResult res =
        e_step_weights(terms, static_cast<int>(block.rows()), ridge, qp_cfg);
    if (warn && !res.converged) ++*warn;
    return res.weights;
  };

  BandReport report;
  report.times = times_of_interest;
  report.x_grid = x_grid;
  report.center.resize(block_idx.size());
  for (std::size_t j = 0; j < block_idx.size(); ++j)
    report.center[j] = mixture_density_grid(
        model.components, solve_weights(data.blocks[block_idx[j]], j, nullptr),
        nodes);

  // replicate x (time, grid point) draws of the density
  std::vector<Eigen::MatrixXd> draws(
      block_idx.size(), Eigen::MatrixXd(replicates, x_grid.size()));
  std::vector<int> warns(replicates, 0);
  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t b) {
    const PanelDataset resampled = bootstrap_resample(data, derive_seed(seed, b));
    for (std::size_t j = 0; j < block_idx.size(); ++j) {
      const Eigen::VectorXd w =
          solve_weights(resampled.blocks[block_idx[j]], j, &warns[b]);
      draws[j].row(static_cast<Eigen::Index>(b)) =
          mixture_density_grid(model.components, w, nodes).transpose();
    }
  });
  report.estep_warnings = std::accumulate(warns.begin(), warns.end(), 0);

  std::vector<double> column(replicates);
  for (std::size_t j = 0; j < block_idx.size(); ++j) {
    Eigen::VectorXd lower(x_grid.size()), upper(x_grid.size());
    for (Eigen::Index g = 0; g < x_grid.size(); ++g) {
      for (int b = 0; b < replicates; ++b) column[b] = draws[j](b, g);
      std::sort(column.begin(), column.end());
      lower[g] = quantile_sorted(column, 0.5 * level);
      upper[g] = quantile_sorted(column, 1.0 - 0.5 * level);
    }
    report.lower.push_back(std::move(lower));
    report.upper.push_back(std::move(upper));
  }
  return report;
}

}  // namespace tvmix
