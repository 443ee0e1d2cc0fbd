#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace tvmix {

// Samples grouped by strictly increasing observation times on a normalized
// time axis. blocks[i] holds the n_i observations recorded at times[i], one
// observation per row.
struct PanelDataset {
  int dim = 0;
  std::vector<double> times;             // strictly increasing, within [0, 1]
  std::vector<Eigen::MatrixXd> blocks;   // blocks[i] is n_i x dim, n_i >= 1
  std::optional<std::string> subject_id;

  std::size_t block_count() const { return times.size(); }
  std::size_t total_samples() const;

  // Stacks every block into one (sum n_i) x dim matrix, in time order.
  Eigen::MatrixXd pooled() const;

  // Throws InvalidInput if any structural invariant is violated.
  void validate() const;
};

}  // namespace tvmix
