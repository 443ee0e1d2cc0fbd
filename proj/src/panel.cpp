#include "tvmix/panel.hpp"

#include "tvmix/errors.hpp"

namespace tvmix {

std::size_t PanelDataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.rows());
  return n;
}

Eigen::MatrixXd PanelDataset::pooled() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total_samples()), dim);
  Eigen::Index row = 0;
  for (const auto& b : blocks) {
    out.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  return out;
}

void PanelDataset::validate() const {
  if (dim < 1) throw InvalidInput("PanelDataset: dim must be >= 1");
  if (times.empty()) throw InvalidInput("PanelDataset: no time blocks");
  if (times.size() != blocks.size())
    throw InvalidInput("PanelDataset: times/blocks size mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || times[i] > 1.0)
      throw InvalidInput("PanelDataset: time outside [0, 1]");
    if (i > 0 && times[i] <= times[i - 1])
      throw InvalidInput("PanelDataset: times not strictly increasing");
    if (blocks[i].rows() < 1)
      throw InvalidInput("PanelDataset: empty block");
    if (blocks[i].cols() != dim)
      throw InvalidInput("PanelDataset: block dimension mismatch");
  }
}

}  // namespace tvmix
