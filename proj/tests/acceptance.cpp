// Acceptance suite: runs the project's ten acceptance criteria end to end and
// prints one [PASS]/[FAIL] line per criterion with the measured quantities.
// Run all with no arguments, or a single one with --criterion N.
// Exit status is the number of failed criteria.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "tvmix/data_io.hpp"
#include "tvmix/discrete_fit.hpp"
#include "tvmix/evaluate.hpp"
#include "tvmix/kernel.hpp"
#include "tvmix/parallel.hpp"
#include "tvmix/weight_ode.hpp"

using namespace tvmix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// Two-stage fit mirroring the CLI path.
FittedModel fit_model(const PanelDataset& data, int k, std::uint64_t seed,
                      int node_epochs = 2000) {
  FitConfig cfg;
  cfg.seed = seed;
  const DiscreteFitResult stage_one = fit_discrete(data, k, cfg);
  OdeConfig ode;
  ode.seed = derive_seed(seed, 1);
  ode.epochs = node_epochs;
  const TrainResult trained = train_node(stage_one.subject.weights, ode);
  FittedModel model;
  model.components = stage_one.components;
  model.field = trained.field;
  model.alpha0 = trained.alpha0;
  for (const auto& kc : stage_one.subject.kernels)
    model.kernel_sigmas.push_back(kc.sigma_sq);
  return model;
}

// ---------------------------------------------------------------- criterion 1
Outcome criterion_closed_form_vs_monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  const int instances = 100;
  std::vector<int> agree(instances, 0);

  std::vector<std::uint64_t> seeds(instances);
  SplitMix64 seeder(20260811);
  for (auto& s : seeds) s = seeder.next_u64();

  parallel_for(instances, [&](std::size_t i) {
    SplitMix64 rng(seeds[i]);
    const int k = 1 + static_cast<int>(rng.next_index(4));
    const int d = 1 + static_cast<int>(rng.next_index(3));
    const int n = 2 + static_cast<int>(rng.next_index(49));
    const ComponentSet comps = test_util::random_components(k, d, rng);
    const Eigen::VectorXd w = test_util::random_simplex(k, rng);
    const KernelConfig cfg{0.5 + 2.5 * rng.next_double(), d};
    SplitMix64 data_rng(rng.next_u64());
    const Eigen::MatrixXd samples = sample_mixture(comps, w, n, data_rng);

    const double closed = mmd_sq(w, mmd_terms(comps, samples, cfg), n);
    const MonteCarloMmd mc =
        mmd_sq_monte_carlo(comps, w, samples, cfg, 1000000, rng.next_u64());
    agree[i] = std::abs(closed - mc.estimate) <= 3.0 * mc.std_error ? 1 : 0;
  });

  int hits = 0;
  for (int a : agree) hits += a;
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = hits >= 95 && secs < 300.0;
  out.detail = std::to_string(hits) + "/100 instances within 3 SE (need >= 95); " +
               fmt(secs, 3) + " s (limit 300)";
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion_estep_vs_grid_search() {
  const auto t0 = std::chrono::steady_clock::now();
  SplitMix64 rng(422);
  FitConfig cfg;
  double worst_gap = -1e9;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.next_normal();
    const Eigen::MatrixXd gram = a * a.transpose();
    Eigen::VectorXd cross(3);
    for (int i = 0; i < 3; ++i) cross[i] = 2.0 * rng.next_normal();
    const Eigen::VectorXd ridge = Eigen::VectorXd::Constant(3, 1e-6);

    MmdTerms terms;
    terms.gram_components = gram;
    terms.cross_vector = cross;
    const EStepResult res = e_step_weights(terms, 1, ridge, cfg);

    double grid_best = std::numeric_limits<double>::infinity();
    const double h = 1e-3;
    Eigen::Vector3d w;
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; j <= 1000 - i; ++j) {
        w << i * h, j * h, 1.0 - (i + j) * h;
        const double obj =
            w.dot(gram * w) - 2.0 * w.dot(cross) + ridge.dot(w.cwiseAbs2());
        grid_best = std::min(grid_best, obj);
      }
    worst_gap = std::max(worst_gap, res.objective_core - grid_best);
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = worst_gap <= 1e-5 && secs < 60.0;
  out.detail = "worst objective gap to grid oracle " + fmt(worst_gap, 3) +
               " (limit 1e-5); " + fmt(secs, 3) + " s (limit 60)";
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion_gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_rel = 0.0;

  // Pooled-objective gradient on small random instances.
  SplitMix64 rng(333);
  for (int rep = 0; rep < 3; ++rep) {
    const int d = rep == 2 ? 2 : 1;
    const ComponentSet comps = test_util::random_components(2, d, rng);
    SplitMix64 data_rng(rng.next_u64());
    const Eigen::MatrixXd x =
        sample_mixture(comps, Eigen::Vector2d(0.5, 0.5), 10, data_rng);
    PanelDataset data;
    data.dim = d;
    data.times = {0.0};
    data.blocks = {x};
    const std::vector<KernelConfig> kernels{median_heuristic(x).config};
    DiscreteWeights w;
    w.times = {0.0};
    w.weights = test_util::random_simplex(2, rng).transpose();
    const Eigen::VectorXd ridge = Eigen::VectorXd::Zero(2);
    const std::vector<double> consts{0.0};

    const ObjectiveGradient grad = pooled_objective_gradient(comps, data, w, kernels);
    auto objective_at = [&](const ComponentSet& c) {
      return pooled_objective(c, data, w, kernels, consts, ridge);
    };
    const double h = 1e-5;
    auto check = [&](auto&& bump, double analytic) {
      ComponentSet plus = comps, minus = comps;
      bump(plus, h);
      bump(minus, -h);
      const double fd = (objective_at(plus) - objective_at(minus)) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      worst_rel = std::max(worst_rel, std::abs(fd - analytic) / scale);
    };
    for (int s = 0; s < 2; ++s)
      for (int j = 0; j < d; ++j)
        check([&](ComponentSet& c, double e) { c.means(s, j) += e; },
              grad.d_means(s, j));
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j)
          check([&](ComponentSet& c, double e) { c.chol[s](i, j) += e; },
                grad.d_chol[s](i, j));
  }

  // node_loss gradient on a K=2, 2-hidden-unit instance.
  OdeConfig cfg;
  cfg.rk4_steps = 10;
  cfg.nu = 1e-4;
  const VectorFieldParams f = VectorFieldParams::glorot({3, 2, 2}, 5);
  DiscreteWeights targets;
  targets.times = {0.4, 1.0};
  targets.weights.resize(2, 2);
  targets.weights << 0.7, 0.3, 0.4, 0.6;
  const Eigen::Vector2d alpha0(0.55, 0.45);
  const NodeLossGrad g = node_loss_grad(f, alpha0, targets, cfg);
  const double h = 1e-5;
  for (int i = 0; i < f.params.size(); ++i) {
    VectorFieldParams plus = f, minus = f;
    plus.params[i] += h;
    minus.params[i] -= h;
    const double fd = (node_loss(plus, alpha0, targets, cfg) -
                       node_loss(minus, alpha0, targets, cfg)) /
                      (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(g.d_params[i]), 1e-6});
    worst_rel = std::max(worst_rel, std::abs(fd - g.d_params[i]) / scale);
  }

  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = worst_rel < 1e-3 && secs < 60.0;
  out.detail = "worst relative error " + fmt(worst_rel, 3) + " (limit 1e-3); " +
               fmt(secs, 3) + " s (limit 60)";
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome criterion_rk4_order() {
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::Matrix2d a;
  a << 0.3, -0.8, 0.5, -0.2;
  VectorFieldParams f = VectorFieldParams::zeros({3, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) f.params[i * 3 + j] = a(i, j);
  const Eigen::Vector2d alpha0(0.9, 0.1);
  const Eigen::Vector2d exact = test_util::expm(a) * alpha0;

  auto err = [&](int steps) {
    OdeConfig cfg;
    cfg.rk4_steps = steps;
    return (integrate_rk4(f, alpha0, 0.0, 1.0, cfg).back().state - exact).norm();
  };
  const double order = std::log2(err(8) / err(16));
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = order >= 3.5 && order <= 4.5 && secs < 60.0;
  out.detail = "empirical order " + fmt(order, 4) + " (window [3.5, 4.5]); " +
               fmt(secs, 3) + " s";
  return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome criterion_scenario_a() {
  const int replicates = 20;
  double model_l2 = 0.0, kde_l2 = 0.0, max_secs = 0.0;
  std::size_t cells = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    const auto [data, truth] = simulate_scenario(1, 500, 11, derive_seed(7, rep));
    const auto t0 = std::chrono::steady_clock::now();
    const FittedModel model = fit_model(data, 3, derive_seed(7, 100 + rep));
    max_secs = std::max(max_secs, seconds_since(t0));

    const Eigen::VectorXd grid = default_error_grid(truth, data.times);
    const DensityErrorReport ours =
        density_error_grid(model_density_evaluator(model), truth, data.times, grid);
    const DensityErrorReport kde =
        density_error_grid(kde_density_evaluator(data), truth, data.times, grid);
    for (std::size_t i = 0; i < data.times.size(); ++i) {
      model_l2 += ours.l2[i];
      kde_l2 += kde.l2[i];
      ++cells;
    }
  }
  model_l2 /= cells;
  kde_l2 /= cells;

  Outcome out;
  out.pass = model_l2 <= kde_l2 && max_secs < 60.0;
  out.detail = "mean L2 model " + fmt(model_l2, 4) + " vs KDE " + fmt(kde_l2, 4) +
               " (need model <= KDE); slowest replicate " + fmt(max_secs, 3) +
               " s (limit 60)";
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome criterion_rate_windows() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> sizes{20, 50, 100, 200, 300, 500};
  const RateReport regular = rate_experiment(RateRegime::regular, sizes, 20, 606);
  const RateReport singular = rate_experiment(RateRegime::singular, sizes, 20, 607);

  // Module invariant: per-n medians decrease (Spearman rho < 0, p < 0.05).
  auto medians = [&](const RateReport& r) {
    std::vector<double> med;
    for (Eigen::Index c = 0; c < r.sup_mmd.cols(); ++c) {
      std::vector<double> col(r.sup_mmd.rows());
      for (Eigen::Index b = 0; b < r.sup_mmd.rows(); ++b) col[b] = r.sup_mmd(b, c);
      std::sort(col.begin(), col.end());
      med.push_back(col[col.size() / 2]);
    }
    return med;
  };
  const std::vector<double> ns(sizes.begin(), sizes.end());
  const auto sp_reg = test_util::spearman_exact(ns, medians(regular));
  const auto sp_sin = test_util::spearman_exact(ns, medians(singular));

  const bool reg_ok = regular.slope >= -0.65 && regular.slope <= -0.35;
  const bool sin_ok = singular.slope >= -0.45 && singular.slope <= -0.10;
  const bool trend_ok = sp_reg.rho < 0.0 && sp_reg.p_one_sided < 0.05 &&
                        sp_sin.rho < 0.0 && sp_sin.p_one_sided < 0.05;
  const double secs = seconds_since(t0);

  Outcome out;
  out.pass = reg_ok && sin_ok && trend_ok && secs < 900.0;
  out.detail = "regular slope " + fmt(regular.slope, 4) + " (window [-0.65,-0.35]" +
               (reg_ok ? ", ok" : ", OUT") + "); singular slope " +
               fmt(singular.slope, 4) + " (window [-0.45,-0.10]" +
               (sin_ok ? ", ok" : ", OUT") + "); monotone-trend Spearman p " +
               fmt(sp_reg.p_one_sided, 3) + "/" + fmt(sp_sin.p_one_sided, 3) +
               "; " + fmt(secs, 3) + " s (limit 900)";
  return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome criterion_simplex_invariants() {
  double worst_sum_err = 0.0;
  double worst_min = 0.0;
  auto scan = [&](const Eigen::VectorXd& w) {
    worst_sum_err = std::max(worst_sum_err, std::abs(w.sum() - 1.0));
    worst_min = std::min(worst_min, w.minCoeff());
  };

  // Stage one on fuzzed datasets.
  SplitMix64 rng(787);
  for (int rep = 0; rep < 8; ++rep) {
    const int k = 2 + static_cast<int>(rng.next_index(3));
    const int blocks = 2 + static_cast<int>(rng.next_index(3));
    PanelDataset data;
    data.dim = 1;
    for (int b = 0; b < blocks; ++b) {
      data.times.push_back(static_cast<double>(b) / (blocks - 1));
      const int n = k + 3 + static_cast<int>(rng.next_index(40));
      Eigen::MatrixXd block(n, 1);
      for (int i = 0; i < n; ++i)
        block(i, 0) = 8.0 * rng.next_normal() + 3.0 * rng.next_double();
      data.blocks.push_back(block);
    }
    FitConfig cfg;
    cfg.outer_rounds = 3;
    cfg.adam_steps = 30;
    cfg.seed = rng.next_u64();
    const DiscreteFitResult fit = fit_discrete(data, k, cfg);
    for (Eigen::Index i = 0; i < fit.subject.weights.weights.rows(); ++i)
      scan(fit.subject.weights.weights.row(i).transpose());
  }

  // Raw QP outputs on fuzzed terms.
  for (int rep = 0; rep < 200; ++rep) {
    const int k = 2 + static_cast<int>(rng.next_index(5));
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k * k; ++i) a(i / k, i % k) = rng.next_normal();
    MmdTerms terms;
    terms.gram_components = a * a.transpose();
    terms.cross_vector = Eigen::VectorXd::NullaryExpr(
        k, [&](Eigen::Index) { return 3.0 * rng.next_normal(); });
    FitConfig cfg;
    scan(e_step_weights(terms, 1, Eigen::VectorXd::Constant(k, 1e-6), cfg).weights);
  }

  // Weight-ODE read-outs on fuzzed fields.
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 2 + static_cast<int>(rng.next_index(3));
    FittedModel model;
    model.components.means = Eigen::MatrixXd::Zero(k, 1);
    model.components.chol.assign(k, Eigen::MatrixXd::Identity(1, 1));
    model.field = VectorFieldParams::glorot({k + 1, 16, k}, rng.next_u64());
    model.field.params *= 3.0;  // push the dynamics hard
    model.alpha0 = test_util::random_simplex(k, rng);
    for (int i = 0; i < 10; ++i) scan(predict_weights(model, rng.next_double()));
  }

  // CLI export path.
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "tvmix_acceptance_cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string cli = TVMIX_CLI_PATH;
  const std::string log = " >/dev/null 2>&1";
  int rc = std::system((cli + " simulate --d 1 --n-t 60 --grid 5 --seed 3 --out " +
                        (dir / "sim").string() + log)
                           .c_str());
  rc |= std::system((cli + " fit --input " + (dir / "sim/scenario_rep000.csv").string() +
                     " --k 3 --outer-rounds 4 --epochs 60 --seed 3 --out " +
                     (dir / "fit").string() + log)
                        .c_str());
  rc |= std::system((cli + " predict --model " + (dir / "fit/model_sim.json").string() +
                     " --t-grid 51 --out " + (dir / "pred").string() + log)
                        .c_str());
  std::size_t cli_rows = 0;
  if (rc == 0) {
    std::ifstream in(dir / "pred/weights.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string tok;
      std::getline(ss, tok, ',');
      Eigen::Vector3d w;
      for (int s = 0; s < 3; ++s) {
        std::getline(ss, tok, ',');
        w[s] = std::stod(tok);
      }
      scan(w);
      ++cli_rows;
    }
  }
  std::filesystem::remove_all(dir);

  Outcome out;
  out.pass = rc == 0 && cli_rows == 51 && worst_sum_err <= 1e-9 && worst_min >= 0.0;
  out.detail = "worst |sum-1| " + fmt(worst_sum_err, 3) + " (limit 1e-9); min entry " +
               fmt(worst_min, 3) + " (need >= 0); CLI rows " + std::to_string(cli_rows);
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome criterion_scenario_b() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto [data, truth] = simulate_scenario(10, 200, 11, derive_seed(88, 0));
  FittedModel model;
  try {
    model = fit_model(data, 3, derive_seed(88, 1));
  } catch (const std::exception& e) {
    Outcome out;
    out.detail = std::string("fit failed: ") + e.what();
    return out;
  }
  const DensityErrorReport ours = density_error_monte_carlo(
      model_density_evaluator(model), truth, data.times, 2000, derive_seed(88, 2));
  const DensityErrorReport kde = density_error_monte_carlo(
      kde_density_evaluator(data), truth, data.times, 2000, derive_seed(88, 2));
  double ours_mean = 0.0, kde_mean = 0.0;
  for (std::size_t i = 0; i < data.times.size(); ++i) {
    ours_mean += ours.l2[i];
    kde_mean += kde.l2[i];
  }
  ours_mean /= data.times.size();
  kde_mean /= data.times.size();
  const double secs = seconds_since(t0);

  Outcome out;
  out.pass = ours_mean < kde_mean && secs < 600.0;
  out.detail = "mean L2 model " + fmt(ours_mean, 4) + " vs KDE " + fmt(kde_mean, 4) +
               " (need model < KDE); " + fmt(secs, 3) + " s (limit 600)";
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion_persistence() {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "tvmix_acceptance_persist";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  const auto [data, truth] = simulate_scenario(1, 80, 5, 31);
  const FittedModel model = fit_model(data, 2, 32, 200);
  save_model(model, (dir / "model.json").string());
  const FittedModel back = load_model((dir / "model.json").string());

  double worst = 0.0;
  SplitMix64 rng(33);
  for (int i = 0; i < 10; ++i) {
    const double t = rng.next_double();
    worst = std::max(worst, (predict_weights(model, t) - predict_weights(back, t))
                                .lpNorm<Eigen::Infinity>());
  }

  write_csv(data, (dir / "panel.csv").string());
  const CsvLoadResult loaded = load_csv((dir / "panel.csv").string());
  bool csv_ok = loaded.subjects.size() == 1 && loaded.rows_rejected == 0;
  if (csv_ok) {
    const PanelDataset& b = loaded.subjects[0];
    csv_ok = b.times == data.times;
    for (std::size_t i = 0; csv_ok && i < data.block_count(); ++i)
      csv_ok = b.blocks[i] == data.blocks[i];
  }
  std::filesystem::remove_all(dir);

  Outcome out;
  out.pass = worst <= 1e-12 && csv_ok;
  out.detail = "predict_weights round-trip max deviation " + fmt(worst, 3) +
               " (limit 1e-12); CSV round-trip " + (csv_ok ? "lossless" : "LOSSY");
  return out;
}

// --------------------------------------------------------------- criterion 10
Outcome criterion_bootstrap_bands() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> times{0.0, 0.5, 1.0};

  auto bands_for = [&](int n_t, std::uint64_t seed) {
    const auto [data, truth] = simulate_scenario(1, n_t, 11, derive_seed(seed, 0));
    const FittedModel model = fit_model(data, 3, derive_seed(seed, 1), 300);
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(256, -13.3, 29.3);
    return bootstrap_bands(data, model, times, grid, 200, 0.05, derive_seed(seed, 2));
  };

  const BandReport big = bands_for(500, 111);
  const BandReport small = bands_for(50, 222);

  std::size_t contained = 0, total = 0;
  std::vector<double> widths_big, widths_small;
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (Eigen::Index g = 0; g < big.x_grid.size(); ++g) {
      if (big.center[j][g] >= big.lower[j][g] && big.center[j][g] <= big.upper[j][g])
        ++contained;
      ++total;
      widths_big.push_back(big.upper[j][g] - big.lower[j][g]);
      widths_small.push_back(small.upper[j][g] - small.lower[j][g]);
    }
  }
  std::sort(widths_big.begin(), widths_big.end());
  std::sort(widths_small.begin(), widths_small.end());
  const double med_big = widths_big[widths_big.size() / 2];
  const double med_small = widths_small[widths_small.size() / 2];
  const double coverage = static_cast<double>(contained) / total;
  const double secs = seconds_since(t0);

  Outcome out;
  out.pass = coverage >= 0.99 && med_big < med_small && secs < 300.0;
  out.detail = "point estimate inside 95% bands at " + fmt(100.0 * coverage, 4) +
               "% of grid points (need >= 99%); median width n500 " +
               fmt(med_big, 3) + " < n50 " + fmt(med_small, 3) + " " +
               (med_big < med_small ? "ok" : "VIOLATED") + "; " + fmt(secs, 3) +
               " s (limit 300)";
  return out;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "closed-form MMD vs Monte Carlo oracle", criterion_closed_form_vs_monte_carlo},
    {2, "E-step optimality vs simplex grid search", criterion_estep_vs_grid_search},
    {3, "analytic gradients vs finite differences", criterion_gradient_checks},
    {4, "RK4 empirical convergence order", criterion_rk4_order},
    {5, "Scenario A recovery vs KDE baseline", criterion_scenario_a},
    {6, "convergence-rate slope windows", criterion_rate_windows},
    {7, "simplex invariants under fuzzing", criterion_simplex_invariants},
    {8, "Scenario B (d=10) smoke vs KDE", criterion_scenario_b},
    {9, "model and CSV persistence round-trips", criterion_persistence},
    {10, "bootstrap confidence bands", criterion_bootstrap_bands},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0) only = std::atoi(argv[i + 1]);
  }

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    const Outcome res = c.run();
    std::printf("[%s] criterion %d: %s — %s\n", res.pass ? "PASS" : "FAIL", c.id,
                c.name, res.detail.c_str());
    std::fflush(stdout);
    if (!res.pass) ++failures;
  }
  if (only == 0)
    std::printf("%d/%zu criteria passed\n",
                static_cast<int>(std::size(kCriteria)) - failures,
                std::size(kCriteria));
  return failures;
}
