#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "tvmix/components.hpp"
#include "tvmix/discrete_fit.hpp"

namespace tvmix {

// Fixed integration rule used whenever a FittedModel is evaluated: the model
// file stores no solver settings, so prediction is pinned to this grid.
inline constexpr int kPredictRk4Steps = 100;       // steps per unit time
inline constexpr double kPredictWeightFloor = 1e-8;

// Parameters of the MLP vector field f(alpha, t): input [alpha; t] of width
// K+1, tanh hidden layers, linear output of width K. params packs, layer by
// layer, the row-major weight matrix followed by the bias vector.
struct VectorFieldParams {
  std::vector<int> layer_sizes;  // {K+1, hidden..., K}
  Eigen::VectorXd params;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int state_dim() const { return layer_sizes.back(); }

  static int param_count(const std::vector<int>& layer_sizes);
  static VectorFieldParams zeros(std::vector<int> layer_sizes);
  static VectorFieldParams glorot(std::vector<int> layer_sizes, std::uint64_t seed);

  // Row-major view of layer l's weight matrix / bias within params.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  layer_weight(int l) const;
  Eigen::Map<const Eigen::VectorXd> layer_bias(int l) const;

  void validate() const;
};

struct OdeConfig {
  int rk4_steps = 100;         // fixed steps per unit time
  double nu = 1e-4;            // ridge coefficient on the field parameters
  double lr = 1e-2;
  int epochs = 2000;
  double weight_floor = 1e-8;  // clamp before renormalization
  std::uint64_t seed = 0;
  std::vector<int> hidden = {32, 32};

  void validate() const;
};

// Components, trained vector field and initial weights; evaluable as a
// density/CDF at any (x, t) in the unit time domain.
struct FittedModel {
  ComponentSet components;
  VectorFieldParams field;
  Eigen::VectorXd alpha0;
  std::array<double, 2> time_domain{0.0, 1.0};
  std::vector<double> kernel_sigmas;  // per fitted time, diagnostic
};

Eigen::VectorXd vector_field_eval(const VectorFieldParams& field,
                                  const Eigen::VectorXd& alpha, double t);

struct OdePoint {
  double t;
  Eigen::VectorXd state;
};

// Classical RK4 with fixed step; the step count is ceil((t_end - t_start) *
// rk4_steps), at least 1. Returns start, every intermediate state, and end.
std::vector<OdePoint> integrate_rk4(const VectorFieldParams& field,
                                    const Eigen::VectorXd& alpha0, double t_start,
                                    double t_end, const OdeConfig& cfg);

// Clamps entries at floor, then divides by the sum; maps any vector onto the
// simplex and is the identity (up to rounding) on simplex input.
Eigen::VectorXd normalize_weights(const Eigen::VectorXd& alpha, double floor);

// sum_i || normalize(alpha(t_i)) - target_i ||^2 + nu ||phi||^2, integrating
// once from t = 0 through all target times.
double node_loss(const VectorFieldParams& field, const Eigen::VectorXd& alpha0,
                 const DiscreteWeights& targets, const OdeConfig& cfg);

// node_loss gradient by reverse-mode differentiation through the unrolled
// RK4 steps. d_alpha0 is the gradient with respect to the raw initial state.
struct NodeLossGrad {
  double loss = 0.0;
  Eigen::VectorXd d_params;
  Eigen::VectorXd d_alpha0;
};
NodeLossGrad node_loss_grad(const VectorFieldParams& field,
                            const Eigen::VectorXd& alpha0,
                            const DiscreteWeights& targets, const OdeConfig& cfg);

struct TrainResult {
  VectorFieldParams field;
  Eigen::VectorXd alpha0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int lr_restarts = 0;
};

// Adam on (phi, logits of alpha0), initialized from the first target row.
// Tracks the best iterate, so the returned loss never exceeds the initial
// one. On divergence the learning rate is halved and training restarts, at
// most three times.
TrainResult train_node(const DiscreteWeights& targets, const OdeConfig& cfg);

// Integrates the model's weight ODE from 0 to t on the fixed prediction grid
// and renormalizes. t must lie in the model's time domain.
Eigen::VectorXd predict_weights(const FittedModel& model, double t);

// Mixture density sum_s alpha_s(t) N(x; m_s, Sigma_s).
double density_at(const FittedModel& model, const Eigen::VectorXd& x, double t);

// Mixture CDF; defined for d = 1 only.
double cdf_at(const FittedModel& model, double x, double t);

}  // namespace tvmix
