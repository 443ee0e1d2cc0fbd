// Command-line front end: simulate / fit / predict / evaluate / bootstrap.
// Every run writes a manifest echoing its fully resolved configuration, and
// all randomness flows from --seed. Exit codes: 0 success, 2 usage error,
// 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tvmix/data_io.hpp"
#include "tvmix/discrete_fit.hpp"
#include "tvmix/errors.hpp"
#include "tvmix/evaluate.hpp"
#include "tvmix/weight_ode.hpp"

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw tvmix::DataError("cannot open '" + path.string() + "' for writing");
  out << content;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const json& parameters, const json& outputs) {
  json doc;
  doc["command"] = command;
  doc["parameters"] = parameters;
  doc["outputs"] = outputs;
  write_text(dir / "manifest.json", doc.dump(2) + "\n");
}

std::filesystem::path ensure_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out.empty() ? "_" : out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw tvmix::InvalidInput(std::string(what) + ": cannot parse '" + tok + "'");
    }
  }
  if (out.empty()) throw tvmix::InvalidInput(std::string(what) + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  for (double v : parse_double_list(csv, what)) out.push_back(static_cast<int>(v));
  return out;
}

// "min:max:count" evaluation grid.
Eigen::VectorXd parse_grid_spec(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  std::stringstream ss(spec);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
    throw tvmix::InvalidInput("grid spec must be min:max:count");
  try {
    lo = std::stod(a);
    hi = std::stod(b);
    count = std::stoi(c);
  } catch (const std::exception&) {
    throw tvmix::InvalidInput("grid spec must be min:max:count");
  }
  if (count < 2 || !(hi > lo))
    throw tvmix::InvalidInput("grid spec needs count >= 2 and max > min");
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

struct FitOptions {
  int k = 3;
  double ridge = 1e-6;
  int outer_rounds = 50;
  double adam_lr = 1e-2;
  int adam_steps = 200;
  double qp_tol = 1e-10;
  int qp_max_iter = 10000;
  double variance_floor = 1e-6;
  int epochs = 2000;
  double ode_lr = 1e-2;
  double nu = 1e-4;
  int rk4_steps = 100;
  std::string hidden = "32,32";

  tvmix::FitConfig stage_one(std::uint64_t seed) const {
    tvmix::FitConfig cfg;
    cfg.ridge = Eigen::VectorXd::Constant(k, ridge);
    cfg.outer_rounds = outer_rounds;
    cfg.adam_lr = adam_lr;
    cfg.adam_steps = adam_steps;
    cfg.qp_tol = qp_tol;
    cfg.qp_max_iter = qp_max_iter;
    cfg.variance_floor = variance_floor;
    cfg.seed = seed;
    return cfg;
  }

  tvmix::OdeConfig stage_two(std::uint64_t seed) const {
    tvmix::OdeConfig cfg;
    cfg.epochs = epochs;
    cfg.lr = ode_lr;
    cfg.nu = nu;
    cfg.rk4_steps = rk4_steps;
    cfg.seed = seed;
    cfg.hidden.clear();
    for (int h : parse_int_list(hidden, "--hidden")) cfg.hidden.push_back(h);
    return cfg;
  }

  json echo() const {
    json p;
    p["k"] = k;
    p["ridge"] = ridge;
    p["outer_rounds"] = outer_rounds;
    p["adam_lr"] = adam_lr;
    p["adam_steps"] = adam_steps;
    p["qp_tol"] = qp_tol;
    p["qp_max_iter"] = qp_max_iter;
    p["variance_floor"] = variance_floor;
    p["epochs"] = epochs;
    p["ode_lr"] = ode_lr;
    p["nu"] = nu;
    p["rk4_steps"] = rk4_steps;
    p["hidden"] = hidden;
    return p;
  }
};

void add_fit_options(CLI::App* cmd, FitOptions& opt) {
  cmd->add_option("--k", opt.k, "mixture components");
  cmd->add_option("--ridge", opt.ridge, "uniform ridge penalty on the weight QP");
  cmd->add_option("--outer-rounds", opt.outer_rounds, "alternation rounds");
  cmd->add_option("--adam-lr", opt.adam_lr, "M-step Adam learning rate");
  cmd->add_option("--adam-steps", opt.adam_steps, "Adam steps per M-step epoch");
  cmd->add_option("--qp-tol", opt.qp_tol, "weight QP stopping tolerance");
  cmd->add_option("--qp-max-iter", opt.qp_max_iter, "weight QP iteration cap");
  cmd->add_option("--variance-floor", opt.variance_floor, "covariance eigenvalue floor");
  cmd->add_option("--epochs", opt.epochs, "weight-ODE training epochs");
  cmd->add_option("--ode-lr", opt.ode_lr, "weight-ODE Adam learning rate");
  cmd->add_option("--nu", opt.nu, "ridge on the vector-field parameters");
  cmd->add_option("--rk4-steps", opt.rk4_steps, "RK4 steps per unit time (training)");
  cmd->add_option("--hidden", opt.hidden, "hidden layer widths, comma separated");
}

// Stage one + stage two for one subject with given shared components.
struct SubjectFit {
  tvmix::FittedModel model;
  json report;
};

SubjectFit assemble_model(const tvmix::ComponentSet& components,
                          const tvmix::StageOneEstimate& stage_one,
                          const FitOptions& opt, std::uint64_t seed,
                          const std::string& subject) {
  const auto started = std::chrono::steady_clock::now();
  const tvmix::TrainResult trained = tvmix::train_node(stage_one.weights, opt.stage_two(seed));

  SubjectFit out;
  out.model.components = components;
  out.model.field = trained.field;
  out.model.alpha0 = trained.alpha0;
  out.model.time_domain = {0.0, 1.0};
  for (const auto& kc : stage_one.kernels) out.model.kernel_sigmas.push_back(kc.sigma_sq);

  out.report["subject"] = subject;
  out.report["node_initial_loss"] = trained.initial_loss;
  out.report["node_final_loss"] = trained.final_loss;
  out.report["node_lr_restarts"] = trained.lr_restarts;
  out.report["node_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

int run_simulate(int d, int n_t, int grid, int replicates, std::uint64_t seed,
                 const std::string& out) {
  const auto dir = ensure_out_dir(out);
  json outputs = json::array();
  for (int rep = 0; rep < replicates; ++rep) {
    const auto [data, truth] =
        tvmix::simulate_scenario(d, n_t, grid, tvmix::derive_seed(seed, rep));
    char name[64];
    std::snprintf(name, sizeof(name), "scenario_rep%03d.csv", rep);
    tvmix::write_csv(data, (dir / name).string());
    outputs.push_back(name);
  }
  json params;
  params["d"] = d;
  params["n_t"] = n_t;
  params["grid"] = grid;
  params["replicates"] = replicates;
  params["seed"] = seed;
  params["truth"] = {{"mean_base", {-2.0, 0.0, 5.0}},
                     {"mean_slope", {20.0, 16.0, 6.0}},
                     {"variance", "1 + t"},
                     {"weights", {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}};
  write_manifest(dir, "simulate", params, outputs);
  return 0;
}

int run_fit(const std::string& input, const FitOptions& opt, bool share,
            std::uint64_t seed, const std::string& out) {
  const auto dir = ensure_out_dir(out);
  const tvmix::CsvLoadResult loaded = tvmix::load_csv(input);
  if (loaded.subjects.empty())
    throw tvmix::DataError("'" + input + "': no usable subjects");

  json outputs = json::array();
  json report;
  report["rejected_rows"] = loaded.rows_rejected;
  report["reject_messages"] = loaded.reject_messages;
  json subjects_report = json::array();

  const auto fit_started = std::chrono::steady_clock::now();
  std::vector<SubjectFit> fits;
  if (share) {
    const tvmix::SharedFitResult shared =
        tvmix::fit_discrete_shared(loaded.subjects, opt.k, opt.stage_one(seed));
    for (std::size_t s = 0; s < loaded.subjects.size(); ++s) {
      const std::string id = loaded.subjects[s].subject_id.value_or("s" + std::to_string(s));
      SubjectFit fit = assemble_model(shared.components, shared.subjects[s], opt,
                                      tvmix::derive_seed(seed, 1000 + s), id);
      fit.report["stage_one_trace"] = shared.trace;
      fit.report["estep_warnings"] = shared.estep_warnings;
      fits.push_back(std::move(fit));
    }
  } else {
    for (std::size_t s = 0; s < loaded.subjects.size(); ++s) {
      const std::string id = loaded.subjects[s].subject_id.value_or("s" + std::to_string(s));
      const tvmix::DiscreteFitResult single = tvmix::fit_discrete(
          loaded.subjects[s], opt.k, opt.stage_one(tvmix::derive_seed(seed, s)));
      SubjectFit fit = assemble_model(single.components, single.subject, opt,
                                      tvmix::derive_seed(seed, 1000 + s), id);
      fit.report["stage_one_trace"] = single.trace;
      fit.report["estep_warnings"] = single.estep_warnings;
      fits.push_back(std::move(fit));
    }
  }

  for (std::size_t s = 0; s < fits.size(); ++s) {
    const std::string id =
        loaded.subjects[s].subject_id.value_or("s" + std::to_string(s));
    const std::string name = "model_" + sanitize(id) + ".json";
    tvmix::save_model(fits[s].model, (dir / name).string());
    outputs.push_back(name);
    subjects_report.push_back(fits[s].report);
  }
  report["subjects"] = subjects_report;
  report["total_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - fit_started).count();
  write_text(dir / "fit_report.json", report.dump(2) + "\n");
  outputs.push_back("fit_report.json");

  json params = opt.echo();
  params["input"] = input;
  params["share_components"] = share;
  params["seed"] = seed;
  write_manifest(dir, "fit", params, outputs);
  return 0;
}

int run_predict(const std::string& model_path, int t_grid,
                const std::string& times_csv, const std::string& density_spec,
                const std::string& out) {
  const auto dir = ensure_out_dir(out);
  const tvmix::FittedModel model = tvmix::load_model(model_path);
  const int k = model.components.count();

  std::vector<double> times;
  if (!times_csv.empty()) {
    times = parse_double_list(times_csv, "--times");
  } else {
    for (int i = 0; i < t_grid; ++i)
      times.push_back(static_cast<double>(i) / (t_grid - 1));
  }

  std::ostringstream weights_csv;
  weights_csv << "t";
  for (int s = 1; s <= k; ++s) weights_csv << ",alpha" << s;
  weights_csv << "\n";
  for (double t : times) {
    const Eigen::VectorXd w = tvmix::predict_weights(model, t);
    weights_csv << format_double(t);
    for (int s = 0; s < k; ++s) weights_csv << ',' << format_double(w[s]);
    weights_csv << "\n";
  }
  write_text(dir / "weights.csv", weights_csv.str());
  json outputs = json::array({"weights.csv"});

  if (!density_spec.empty()) {
    if (model.components.dim() != 1)
      throw tvmix::InvalidInput("--density-grid export is d = 1 only");
    const Eigen::VectorXd grid = parse_grid_spec(density_spec);
    const tvmix::DensityEvaluator density = tvmix::model_density_evaluator(model);
    std::ostringstream density_csv;
    density_csv << "t,x,f\n";
    for (double t : times) {
      const Eigen::VectorXd f = density(grid, t);
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        density_csv << format_double(t) << ',' << format_double(grid[i]) << ','
                    << format_double(f[i]) << "\n";
    }
    write_text(dir / "density.csv", density_csv.str());
    outputs.push_back("density.csv");
  }

  json params;
  params["model"] = model_path;
  params["t_grid"] = t_grid;
  params["times"] = times_csv;
  params["density_grid"] = density_spec;
  write_manifest(dir, "predict", params, outputs);
  return 0;
}

int run_evaluate_scenario(int d, int n_t, int grid, int replicates,
                          const FitOptions& opt, std::uint64_t seed,
                          const std::string& out) {
  const auto dir = ensure_out_dir(out);
  std::ostringstream rows;
  rows << "replicate,time,method,l2,l1\n";
  double model_l2_sum = 0.0, kde_l2_sum = 0.0;
  std::size_t cells = 0;
  double fit_seconds_max = 0.0;

  for (int rep = 0; rep < replicates; ++rep) {
    const auto [data, truth] =
        tvmix::simulate_scenario(d, n_t, grid, tvmix::derive_seed(seed, rep));

    const auto started = std::chrono::steady_clock::now();
    const tvmix::DiscreteFitResult stage_one = tvmix::fit_discrete(
        data, opt.k, opt.stage_one(tvmix::derive_seed(seed, 100000 + rep)));
    SubjectFit fit = assemble_model(stage_one.components, stage_one.subject, opt,
                                    tvmix::derive_seed(seed, 200000 + rep), "sim");
    fit_seconds_max = std::max(
        fit_seconds_max,
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

    tvmix::DensityErrorReport model_err, kde_err;
    if (d == 1) {
      const Eigen::VectorXd x_grid = tvmix::default_error_grid(truth, data.times);
      model_err = tvmix::density_error_grid(tvmix::model_density_evaluator(fit.model),
                                            truth, data.times, x_grid);
      kde_err = tvmix::density_error_grid(tvmix::kde_density_evaluator(data), truth,
                                          data.times, x_grid);
    } else {
      model_err = tvmix::density_error_monte_carlo(
          tvmix::model_density_evaluator(fit.model), truth, data.times, 2000,
          tvmix::derive_seed(seed, 300000 + rep));
      kde_err = tvmix::density_error_monte_carlo(
          tvmix::kde_density_evaluator(data), truth, data.times, 2000,
          tvmix::derive_seed(seed, 300000 + rep));
    }
    for (std::size_t i = 0; i < data.times.size(); ++i) {
      rows << rep << ',' << format_double(data.times[i]) << ",model,"
           << format_double(model_err.l2[i]) << ',' << format_double(model_err.l1[i])
           << "\n";
      rows << rep << ',' << format_double(data.times[i]) << ",kde,"
           << format_double(kde_err.l2[i]) << ',' << format_double(kde_err.l1[i])
           << "\n";
      model_l2_sum += model_err.l2[i];
      kde_l2_sum += kde_err.l2[i];
      ++cells;
    }
  }
  write_text(dir / "errors.csv", rows.str());

  json summary;
  summary["mean_l2_model"] = model_l2_sum / cells;
  summary["mean_l2_kde"] = kde_l2_sum / cells;
  summary["max_fit_seconds"] = fit_seconds_max;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  json params = opt.echo();
  params["mode"] = "scenario";
  params["d"] = d;
  params["n_t"] = n_t;
  params["grid"] = grid;
  params["replicates"] = replicates;
  params["seed"] = seed;
  write_manifest(dir, "evaluate", params, json::array({"errors.csv", "summary.json"}));
  return 0;
}

int run_evaluate_rate(const std::string& regime, const std::vector<int>& sizes,
                      int replicates, std::uint64_t seed, const std::string& out) {
  const auto dir = ensure_out_dir(out);
  std::vector<tvmix::RateRegime> regimes;
  if (regime == "regular" || regime == "both")
    regimes.push_back(tvmix::RateRegime::regular);
  if (regime == "singular" || regime == "both")
    regimes.push_back(tvmix::RateRegime::singular);
  if (regimes.empty())
    throw tvmix::InvalidInput("--regime must be regular, singular, or both");

  std::ostringstream rows;
  rows << "regime,n,replicate,sup_mmd\n";
  json summary;
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    const tvmix::RateReport report =
        tvmix::rate_experiment(regimes[r], sizes, replicates, tvmix::derive_seed(seed, r));
    for (std::size_t si = 0; si < sizes.size(); ++si)
      for (int rep = 0; rep < replicates; ++rep)
        rows << report.regime << ',' << sizes[si] << ',' << rep << ','
             << format_double(report.sup_mmd(rep, static_cast<Eigen::Index>(si)))
             << "\n";
    summary[report.regime + "_slope"] = report.slope;
  }
  write_text(dir / "rate.csv", rows.str());
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  json params;
  params["mode"] = "rate";
  params["regime"] = regime;
  params["sizes"] = sizes;
  params["replicates"] = replicates;
  params["seed"] = seed;
  write_manifest(dir, "evaluate", params, json::array({"rate.csv", "summary.json"}));
  return 0;
}

int run_bootstrap(const std::string& input, const std::string& model_path,
                  const std::string& times_csv, int replicates, double level,
                  const std::string& grid_spec, std::uint64_t seed,
                  const std::string& out) {
  const auto dir = ensure_out_dir(out);
  const tvmix::CsvLoadResult loaded = tvmix::load_csv(input);
  if (loaded.subjects.size() != 1)
    throw tvmix::DataError("bootstrap expects a single-subject CSV; got " +
                           std::to_string(loaded.subjects.size()));
  const tvmix::FittedModel model = tvmix::load_model(model_path);
  const std::vector<double> times = parse_double_list(times_csv, "--times");
  const Eigen::VectorXd x_grid = parse_grid_spec(grid_spec);

  const tvmix::BandReport bands = tvmix::bootstrap_bands(
      loaded.subjects[0], model, times, x_grid, replicates, level, seed);

  json outputs = json::array();
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::ostringstream rows;
    rows << "x,lower,center,upper\n";
    for (Eigen::Index i = 0; i < x_grid.size(); ++i)
      rows << format_double(x_grid[i]) << ',' << format_double(bands.lower[j][i])
           << ',' << format_double(bands.center[j][i]) << ','
           << format_double(bands.upper[j][i]) << "\n";
    const std::string name = "bands_t" + std::to_string(j) + ".csv";
    write_text(dir / name, rows.str());
    outputs.push_back(name);
  }

  json params;
  params["input"] = input;
  params["model"] = model_path;
  params["times"] = times;
  params["B"] = replicates;
  params["level"] = level;
  params["x_grid"] = grid_spec;
  params["seed"] = seed;
  params["estep_warnings"] = bands.estep_warnings;
  write_manifest(dir, "bootstrap", params, outputs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-varying Gaussian mixture estimation"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate synthetic panel data");
  int sim_d = 1, sim_nt = 100, sim_grid = 11, sim_reps = 1;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "sim_out";
  simulate->add_option("--d", sim_d, "dimension");
  simulate->add_option("--n-t", sim_nt, "samples per time point");
  simulate->add_option("--grid", sim_grid, "number of time points");
  simulate->add_option("--replicates", sim_reps, "independent replicates");
  simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--out", sim_out, "output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "two-stage fit of a panel CSV");
  FitOptions fit_opt;
  std::string fit_input, fit_out = "fit_out";
  bool fit_share = false;
  std::uint64_t fit_seed = 0;
  fit->add_option("--input", fit_input, "panel CSV")->required();
  add_fit_options(fit, fit_opt);
  fit->add_flag("--share-components", fit_share,
                "pool subjects for k-means and the M-step");
  fit->add_option("--seed", fit_seed, "master seed");
  fit->add_option("--out", fit_out, "output directory");

  // predict
  auto* predict = app.add_subcommand("predict", "export weight trajectories");
  std::string pred_model, pred_times, pred_density, pred_out = "predict_out";
  int pred_grid = 101;
  predict->add_option("--model", pred_model, "model file")->required();
  predict->add_option("--t-grid", pred_grid, "evaluation grid size on [0,1]");
  predict->add_option("--times", pred_times, "explicit comma-separated times");
  predict->add_option("--density-grid", pred_density, "density export, min:max:count");
  predict->add_option("--out", pred_out, "output directory");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "scenario or rate experiments");
  FitOptions eval_opt;
  std::string eval_mode = "scenario", eval_regime = "both",
              eval_sizes = "20,50,100,200,300,500", eval_out = "evaluate_out";
  int eval_d = 1, eval_nt = 500, eval_grid = 11, eval_reps = 20;
  std::uint64_t eval_seed = 0;
  evaluate->add_option("--mode", eval_mode, "scenario | rate");
  evaluate->add_option("--d", eval_d, "dimension (scenario mode)");
  evaluate->add_option("--n-t", eval_nt, "samples per time point");
  evaluate->add_option("--grid", eval_grid, "number of time points");
  evaluate->add_option("--replicates", eval_reps, "replicates");
  evaluate->add_option("--regime", eval_regime, "regular | singular | both");
  evaluate->add_option("--sizes", eval_sizes, "rate-mode sample sizes");
  add_fit_options(evaluate, eval_opt);
  evaluate->add_option("--seed", eval_seed, "master seed");
  evaluate->add_option("--out", eval_out, "output directory");

  // bootstrap
  auto* bootstrap = app.add_subcommand("bootstrap", "density confidence bands");
  std::string boot_input, boot_model, boot_times = "0,0.5,1",
              boot_grid = "-15:30:256", boot_out = "bootstrap_out";
  int boot_b = 200;
  double boot_level = 0.05;
  std::uint64_t boot_seed = 0;
  bootstrap->add_option("--input", boot_input, "panel CSV")->required();
  bootstrap->add_option("--model", boot_model, "fitted model file")->required();
  bootstrap->add_option("--times", boot_times, "times of interest");
  bootstrap->add_option("--bootstrap-b", boot_b, "bootstrap replicates");
  bootstrap->add_option("--level", boot_level, "two-sided significance level");
  bootstrap->add_option("--x-grid", boot_grid, "evaluation grid, min:max:count");
  bootstrap->add_option("--seed", boot_seed, "master seed");
  bootstrap->add_option("--out", boot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed())
      return run_simulate(sim_d, sim_nt, sim_grid, sim_reps, sim_seed, sim_out);
    if (fit->parsed()) return run_fit(fit_input, fit_opt, fit_share, fit_seed, fit_out);
    if (predict->parsed())
      return run_predict(pred_model, pred_grid, pred_times, pred_density, pred_out);
    if (evaluate->parsed()) {
      if (eval_mode == "scenario")
        return run_evaluate_scenario(eval_d, eval_nt, eval_grid, eval_reps, eval_opt,
                                     eval_seed, eval_out);
      if (eval_mode == "rate")
        return run_evaluate_rate(eval_regime, parse_int_list(eval_sizes, "--sizes"),
                                 eval_reps, eval_seed, eval_out);
      throw tvmix::InvalidInput("--mode must be scenario or rate");
    }
    if (bootstrap->parsed())
      return run_bootstrap(boot_input, boot_model, boot_times, boot_b, boot_level,
                           boot_grid, boot_seed, boot_out);
    return 2;
  } catch (const tvmix::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tvmix::UnsupportedOperation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tvmix::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const tvmix::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 4;
  }
}
