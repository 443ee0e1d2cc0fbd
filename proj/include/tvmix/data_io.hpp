#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tvmix/components.hpp"
#include "tvmix/panel.hpp"
#include "tvmix/weight_ode.hpp"

namespace tvmix {

// A mixture whose component means move linearly in time under a shared
// isotropic variance, evaluable as a density and samplable at any t. Mean
// coordinates are replicated across dimensions for d >= 2.
struct GroundTruth {
  int dim = 1;
  Eigen::VectorXd mean_base;   // per component, at t = 0
  Eigen::VectorXd mean_slope;  // per component, per unit time
  double var_base = 1.0;
  double var_slope = 0.0;
  Eigen::VectorXd weights;

  int component_count() const { return static_cast<int>(mean_base.size()); }
  double variance(double t) const { return var_base + var_slope * t; }

  double density(const Eigen::VectorXd& x, double t) const;
  Eigen::MatrixXd sample(double t, int n, SplitMix64& rng) const;
  // The exact mixture at time t, for closed-form MMD comparisons.
  ComponentSet components_at(double t) const;

  // Three equal-weight components with means -2 + 20t, 16t, 5 + 6t and
  // variance (1 + t) I.
  static GroundTruth scenario(int dim);
};

// Draws n_t points per time from the scenario mixture on an equally spaced
// grid of m_points times in [0, 1]. Bit-reproducible per seed.
std::pair<PanelDataset, GroundTruth> simulate_scenario(int dim, int n_t,
                                                       int m_points,
                                                       std::uint64_t seed);

// CSV schema: header "subject,t,x1[,x2,...]", one reading per row, '.'
// decimal separator. Times are rescaled per subject to [0, 1] by
// (t - t_min) / (t_max - t_min); rows of equal (subject, t) merge into one
// block. Subjects with a single distinct time cannot be rescaled and are
// rejected (counted, never silently dropped).
struct CsvLoadResult {
  std::vector<PanelDataset> subjects;  // in order of first appearance
  std::size_t rows_total = 0;
  std::size_t rows_rejected = 0;
  std::vector<std::string> reject_messages;
};

CsvLoadResult load_csv(const std::string& path);

// Full round-trip float precision; whole-file atomic (temp file + rename).
void write_csv(const std::vector<PanelDataset>& subjects, const std::string& path);
void write_csv(const PanelDataset& data, const std::string& path);

// Versioned JSON model document; save -> load -> save is byte-identical.
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

// Resamples each time block with replacement, preserving block sizes.
PanelDataset bootstrap_resample(const PanelDataset& data, std::uint64_t seed);

}  // namespace tvmix
