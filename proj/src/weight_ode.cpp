#include "tvmix/weight_ode.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tvmix/errors.hpp"
#include "tvmix/parallel.hpp"

namespace tvmix {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

int layer_count(const std::vector<int>& sizes) {
  return static_cast<int>(sizes.size()) - 1;
}

// Offset of layer l's weight block within the packed parameter vector.
int weight_offset(const std::vector<int>& sizes, int l) {
  int off = 0;
  for (int i = 0; i < l; ++i) off += sizes[i + 1] * sizes[i] + sizes[i + 1];
  return off;
}

struct MlpCache {
  // acts[0] is the input; acts[l+1] the output of layer l (tanh for hidden
  // layers, linear for the last).
  std::vector<Eigen::VectorXd> acts;
};

Eigen::VectorXd mlp_forward(const VectorFieldParams& f, const Eigen::VectorXd& input,
                            MlpCache* cache) {
  const int layers = layer_count(f.layer_sizes);
  Eigen::VectorXd h = input;
  if (cache) {
    cache->acts.clear();
    cache->acts.reserve(layers + 1);
    cache->acts.push_back(h);
  }
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = f.layer_weight(l) * h + f.layer_bias(l);
    h = (l + 1 < layers) ? z.array().tanh().matrix() : z;
    if (cache) cache->acts.push_back(h);
  }
  return h;
}

// Accumulates dL/d(params) into d_params and returns dL/d(input).
Eigen::VectorXd mlp_backward(const VectorFieldParams& f, const MlpCache& cache,
                             const Eigen::VectorXd& out_grad,
                             Eigen::VectorXd& d_params) {
  const int layers = layer_count(f.layer_sizes);
  Eigen::VectorXd delta = out_grad;
  for (int l = layers - 1; l >= 0; --l) {
    const int n_in = f.layer_sizes[l];
    const int n_out = f.layer_sizes[l + 1];
    const int w_off = weight_offset(f.layer_sizes, l);
    const Eigen::VectorXd& a = cache.acts[l];

    for (int i = 0; i < n_out; ++i) {
      double* row = d_params.data() + w_off + i * n_in;
      const double di = delta[i];
      for (int j = 0; j < n_in; ++j) row[j] += di * a[j];
      d_params[w_off + n_out * n_in + i] += di;
    }

    Eigen::VectorXd input_grad = f.layer_weight(l).transpose() * delta;
    if (l == 0) return input_grad;
    delta = input_grad.cwiseProduct(
        (1.0 - cache.acts[l].array().square()).matrix());
  }
  return Eigen::VectorXd();  // unreachable
}

Eigen::VectorXd field_input(const Eigen::VectorXd& alpha, double t) {
  Eigen::VectorXd in(alpha.size() + 1);
  in.head(alpha.size()) = alpha;
  in[alpha.size()] = t;
  return in;
}

Eigen::VectorXd eval_field(const VectorFieldParams& f, const Eigen::VectorXd& alpha,
                           double t) {
  return mlp_forward(f, field_input(alpha, t), nullptr);
}

// One classical RK4 step from (t, y) with step h.
Eigen::VectorXd rk4_step(const VectorFieldParams& f, double t, double h,
                         const Eigen::VectorXd& y, Eigen::VectorXd* k1_out,
                         Eigen::VectorXd* k2_out, Eigen::VectorXd* k3_out) {
  const Eigen::VectorXd k1 = eval_field(f, y, t);
  const Eigen::VectorXd k2 = eval_field(f, y + 0.5 * h * k1, t + 0.5 * h);
  const Eigen::VectorXd k3 = eval_field(f, y + 0.5 * h * k2, t + 0.5 * h);
  const Eigen::VectorXd k4 = eval_field(f, y + h * k3, t + h);
  if (k1_out) *k1_out = k1;
  if (k2_out) *k2_out = k2;
  if (k3_out) *k3_out = k3;
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

int steps_for_interval(double span, int steps_per_unit) {
  return std::max(1, static_cast<int>(std::ceil(span * steps_per_unit - 1e-9)));
}

struct StepRecord {
  double t = 0.0, h = 0.0;
  Eigen::VectorXd y, k1, k2, k3;  // state at step start and the first three slopes
};

struct ForwardPass {
  std::vector<StepRecord> steps;
  // (number of steps taken before the read-off, raw state at the read-off)
  std::vector<std::pair<std::size_t, Eigen::VectorXd>> readoffs;
};

// Integrates from t = 0 through every target time in one pass, recording what
// the backward sweep needs.
ForwardPass forward_through_targets(const VectorFieldParams& f,
                                    const Eigen::VectorXd& alpha0,
                                    const std::vector<double>& times,
                                    const OdeConfig& cfg, bool record) {
  ForwardPass pass;
  Eigen::VectorXd state = alpha0;
  double t = 0.0;
  for (double target_t : times) {
    if (target_t > t + 1e-15) {
      const int n = steps_for_interval(target_t - t, cfg.rk4_steps);
      const double h = (target_t - t) / n;
      for (int s = 0; s < n; ++s) {
        StepRecord rec;
        rec.t = t + s * h;
        rec.h = h;
        if (record) rec.y = state;
        state = rk4_step(f, rec.t, h, state, record ? &rec.k1 : nullptr,
                         record ? &rec.k2 : nullptr, record ? &rec.k3 : nullptr);
        if (!state.allFinite())
          throw NumericalError("weight ODE diverged at step " +
                               std::to_string(pass.steps.size()));
        if (record) pass.steps.push_back(std::move(rec));
        else pass.steps.emplace_back();  // position bookkeeping only
      }
      t = target_t;
    }
    pass.readoffs.emplace_back(pass.steps.size(), state);
  }
  return pass;
}

// VJP of normalize_weights at raw input alpha.
Eigen::VectorXd normalize_vjp(const Eigen::VectorXd& alpha, double floor,
                              const Eigen::VectorXd& y_grad) {
  const Eigen::VectorXd clamped = alpha.cwiseMax(floor);
  const double total = clamped.sum();
  const double common = y_grad.dot(clamped) / (total * total);
  Eigen::VectorXd out(alpha.size());
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    out[j] = alpha[j] > floor ? y_grad[j] / total - common : 0.0;
  return out;
}

}  // namespace

int VectorFieldParams::param_count(const std::vector<int>& sizes) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    n += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return n;
}

VectorFieldParams VectorFieldParams::zeros(std::vector<int> sizes) {
  VectorFieldParams f;
  f.layer_sizes = std::move(sizes);
  f.params = Eigen::VectorXd::Zero(param_count(f.layer_sizes));
  f.validate();
  return f;
}

VectorFieldParams VectorFieldParams::glorot(std::vector<int> sizes,
                                            std::uint64_t seed) {
  VectorFieldParams f;
  f.layer_sizes = std::move(sizes);
  f.params = Eigen::VectorXd::Zero(param_count(f.layer_sizes));
  SplitMix64 rng(seed);
  for (int l = 0; l + 1 < static_cast<int>(f.layer_sizes.size()); ++l) {
    const int n_in = f.layer_sizes[l];
    const int n_out = f.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    const int off = weight_offset(f.layer_sizes, l);
    for (int i = 0; i < n_out * n_in; ++i)
      f.params[off + i] = bound * (2.0 * rng.next_double() - 1.0);
    // biases stay zero
  }
  f.validate();
  return f;
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
VectorFieldParams::layer_weight(int l) const {
  const int off = weight_offset(layer_sizes, l);
  return {params.data() + off, layer_sizes[l + 1], layer_sizes[l]};
}

Eigen::Map<const Eigen::VectorXd> VectorFieldParams::layer_bias(int l) const {
  const int off = weight_offset(layer_sizes, l) + layer_sizes[l + 1] * layer_sizes[l];
  return {params.data() + off, layer_sizes[l + 1]};
}

void VectorFieldParams::validate() const {
  if (layer_sizes.size() < 2)
    throw InvalidInput("VectorFieldParams: need at least input and output layers");
  for (int s : layer_sizes)
    if (s < 1) throw InvalidInput("VectorFieldParams: layer width must be >= 1");
  if (layer_sizes.front() != layer_sizes.back() + 1)
    throw InvalidInput("VectorFieldParams: input width must be state width + 1");
  if (params.size() != param_count(layer_sizes))
    throw InvalidInput("VectorFieldParams: parameter vector size mismatch");
}

void OdeConfig::validate() const {
  if (rk4_steps < 1) throw InvalidInput("OdeConfig: rk4_steps must be >= 1");
  if (nu < 0.0) throw InvalidInput("OdeConfig: nu must be >= 0");
  if (!(lr > 0.0)) throw InvalidInput("OdeConfig: lr must be > 0");
  if (epochs < 0) throw InvalidInput("OdeConfig: epochs must be >= 0");
  if (!(weight_floor > 0.0)) throw InvalidInput("OdeConfig: weight_floor must be > 0");
}

Eigen::VectorXd vector_field_eval(const VectorFieldParams& field,
                                  const Eigen::VectorXd& alpha, double t) {
  field.validate();
  if (alpha.size() != field.state_dim())
    throw InvalidInput("vector_field_eval: state size mismatch");
  if (!alpha.allFinite() || !std::isfinite(t))
    throw InvalidInput("vector_field_eval: non-finite input");
  return eval_field(field, alpha, t);
}

std::vector<OdePoint> integrate_rk4(const VectorFieldParams& field,
                                    const Eigen::VectorXd& alpha0, double t_start,
                                    double t_end, const OdeConfig& cfg) {
  cfg.validate();
  field.validate();
  if (alpha0.size() != field.state_dim())
    throw InvalidInput("integrate_rk4: state size mismatch");
  if (t_start > t_end) throw InvalidInput("integrate_rk4: t_start must be <= t_end");

  std::vector<OdePoint> trajectory;
  if (t_end == t_start) {
    trajectory.push_back({t_start, alpha0});
    return trajectory;
  }
  const int n = steps_for_interval(t_end - t_start, cfg.rk4_steps);
  const double h = (t_end - t_start) / n;
  trajectory.reserve(n + 1);
  trajectory.push_back({t_start, alpha0});
  Eigen::VectorXd state = alpha0;
  for (int s = 0; s < n; ++s) {
    const double t = t_start + s * h;
    state = rk4_step(field, t, h, state, nullptr, nullptr, nullptr);
    if (!state.allFinite())
      throw NumericalError("integrate_rk4: diverged at step " + std::to_string(s));
    trajectory.push_back({s + 1 == n ? t_end : t + h, state});
  }
  return trajectory;
}

Eigen::VectorXd normalize_weights(const Eigen::VectorXd& alpha, double floor) {
  if (!(floor > 0.0)) throw InvalidInput("normalize_weights: floor must be > 0");
  const Eigen::VectorXd clamped = alpha.cwiseMax(floor);
  return clamped / clamped.sum();
}

double node_loss(const VectorFieldParams& field, const Eigen::VectorXd& alpha0,
                 const DiscreteWeights& targets, const OdeConfig& cfg) {
  cfg.validate();
  field.validate();
  targets.validate();
  if (alpha0.size() != field.state_dim() ||
      targets.weights.cols() != field.state_dim())
    throw InvalidInput("node_loss: state size mismatch");

  const ForwardPass pass =
      forward_through_targets(field, alpha0, targets.times, cfg, false);
  double loss = 0.0;
  for (std::size_t i = 0; i < pass.readoffs.size(); ++i) {
    const Eigen::VectorXd y =
        normalize_weights(pass.readoffs[i].second, cfg.weight_floor);
    loss += (y - targets.weights.row(static_cast<Eigen::Index>(i)).transpose())
                .squaredNorm();
  }
  return loss + cfg.nu * field.params.squaredNorm();
}

NodeLossGrad node_loss_grad(const VectorFieldParams& field,
                            const Eigen::VectorXd& alpha0,
                            const DiscreteWeights& targets, const OdeConfig& cfg) {
  cfg.validate();
  field.validate();
  targets.validate();
  if (alpha0.size() != field.state_dim() ||
      targets.weights.cols() != field.state_dim())
    throw InvalidInput("node_loss_grad: state size mismatch");

  const int k = field.state_dim();
  const ForwardPass pass =
      forward_through_targets(field, alpha0, targets.times, cfg, true);

  NodeLossGrad out;
  out.d_params = Eigen::VectorXd::Zero(field.params.size());

  // Loss value plus, per read-off, the gradient with respect to the raw state.
  std::vector<Eigen::VectorXd> readoff_grads(pass.readoffs.size());
  for (std::size_t i = 0; i < pass.readoffs.size(); ++i) {
    const Eigen::VectorXd& raw = pass.readoffs[i].second;
    const Eigen::VectorXd y = normalize_weights(raw, cfg.weight_floor);
    const Eigen::VectorXd diff =
        y - targets.weights.row(static_cast<Eigen::Index>(i)).transpose();
    out.loss += diff.squaredNorm();
    readoff_grads[i] = normalize_vjp(raw, cfg.weight_floor, 2.0 * diff);
  }
  out.loss += cfg.nu * field.params.squaredNorm();

  // Adjoint sweep through the recorded steps.
  auto backward_eval = [&](const Eigen::VectorXd& x, double t,
                           const Eigen::VectorXd& kbar) {
    MlpCache cache;
    mlp_forward(field, field_input(x, t), &cache);
    const Eigen::VectorXd in_grad = mlp_backward(field, cache, kbar, out.d_params);
    return in_grad.head(k).eval();
  };

  Eigen::VectorXd abar = Eigen::VectorXd::Zero(k);
  std::ptrdiff_t ro = static_cast<std::ptrdiff_t>(pass.readoffs.size()) - 1;
  for (std::size_t pos = pass.steps.size();; --pos) {
    while (ro >= 0 && pass.readoffs[ro].first == pos) {
      abar += readoff_grads[ro];
      --ro;
    }
    if (pos == 0) break;

    const StepRecord& rec = pass.steps[pos - 1];
    const double h = rec.h;
    const Eigen::VectorXd x2 = rec.y + 0.5 * h * rec.k1;
    const Eigen::VectorXd x3 = rec.y + 0.5 * h * rec.k2;
    const Eigen::VectorXd x4 = rec.y + h * rec.k3;

    Eigen::VectorXd kbar1 = (h / 6.0) * abar;
    Eigen::VectorXd kbar2 = (h / 3.0) * abar;
    Eigen::VectorXd kbar3 = (h / 3.0) * abar;
    const Eigen::VectorXd kbar4 = (h / 6.0) * abar;

    const Eigen::VectorXd xbar4 = backward_eval(x4, rec.t + h, kbar4);
    kbar3 += h * xbar4;
    const Eigen::VectorXd xbar3 = backward_eval(x3, rec.t + 0.5 * h, kbar3);
    kbar2 += 0.5 * h * xbar3;
    const Eigen::VectorXd xbar2 = backward_eval(x2, rec.t + 0.5 * h, kbar2);
    kbar1 += 0.5 * h * xbar2;
    const Eigen::VectorXd xbar1 = backward_eval(rec.y, rec.t, kbar1);

    abar += xbar1 + xbar2 + xbar3 + xbar4;
  }

  out.d_params += 2.0 * cfg.nu * field.params;
  out.d_alpha0 = abar;
  return out;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  const Eigen::ArrayXd e = (v.array() - v.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

// One full Adam run from a fixed initialization; halves the learning rate and
// restarts on divergence, at most three times.
TrainResult train_single_start(const DiscreteWeights& targets, const OdeConfig& cfg,
                               const std::vector<int>& sizes,
                               const Eigen::VectorXd& init_logits,
                               std::uint64_t field_seed) {
  const int k = static_cast<int>(targets.weights.cols());
  for (int attempt = 0; attempt < 4; ++attempt) {
    const double lr = cfg.lr / static_cast<double>(1 << attempt);
    VectorFieldParams field = VectorFieldParams::glorot(sizes, field_seed);
    Eigen::VectorXd logits = init_logits;

    const Eigen::Index p = field.params.size();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(p + k);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p + k);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    double best_loss = std::numeric_limits<double>::infinity();
    double initial_loss = 0.0;
    Eigen::VectorXd best_params, best_logits;
    bool diverged = false;

    for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
      const Eigen::VectorXd alpha0 = softmax(logits);
      NodeLossGrad g;
      try {
        g = node_loss_grad(field, alpha0, targets, cfg);
      } catch (const NumericalError&) {
        diverged = true;
        break;
      }
      if (!std::isfinite(g.loss)) {
        diverged = true;
        break;
      }
      if (epoch == 0) initial_loss = g.loss;
      if (g.loss < best_loss) {
        best_loss = g.loss;
        best_params = field.params;
        best_logits = logits;
      }
      if (epoch == cfg.epochs) break;

      const Eigen::VectorXd d_logits = alpha0.cwiseProduct(
          g.d_alpha0 - Eigen::VectorXd::Constant(k, g.d_alpha0.dot(alpha0)));
      Eigen::VectorXd grad(p + k);
      grad.head(p) = g.d_params;
      grad.tail(k) = d_logits;

      const int step = epoch + 1;
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(beta1, step);
      const double bc2 = 1.0 - std::pow(beta2, step);
      const Eigen::VectorXd update =
          (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
      field.params -= update.head(p);
      logits -= update.tail(k);
      if (!field.params.allFinite() || !logits.allFinite()) {
        diverged = true;
        break;
      }
    }

    if (!diverged) {
      TrainResult out;
      out.field = field;
      out.field.params = best_params;
      out.alpha0 = softmax(best_logits);
      out.initial_loss = initial_loss;
      out.final_loss = best_loss;
      out.lr_restarts = attempt;
      return out;
    }
  }
  throw NumericalError("train_node: training diverged after 3 learning-rate restarts");
}

}  // namespace

TrainResult train_node(const DiscreteWeights& targets, const OdeConfig& cfg) {
  cfg.validate();
  targets.validate();
  if (targets.times.size() < 2)
    throw InvalidInput("train_node: need at least 2 target times");
  const int k = static_cast<int>(targets.weights.cols());

  std::vector<int> sizes;
  sizes.push_back(k + 1);
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(k);

  // Logits start at the first target row, floored at 1e-3 so that every
  // coordinate begins with usable gradient: the read-out clamp has zero
  // derivative below weight_floor, and a coordinate whose raw trajectory
  // starts pinned there could never receive a training signal.
  const Eigen::VectorXd init_logits =
      targets.weights.row(0).transpose().cwiseMax(1e-3).array().log();

  // The clamp also makes the loss multimodal (a coordinate pushed below the
  // floor across its read-offs goes silent), so train a few independent
  // field initializations and keep the best final loss. Start seeds derive
  // from cfg.seed; ties resolve to the lowest start index.
  constexpr int kStarts = 4;
  std::vector<TrainResult> results(kStarts);
  std::vector<std::string> errors(kStarts);
  parallel_for(kStarts, [&](std::size_t s) {
    try {
      results[s] = train_single_start(targets, cfg, sizes, init_logits,
                                      derive_seed(cfg.seed, s));
    } catch (const NumericalError& e) {
      errors[s] = e.what();
    }
  });

  int best = -1;
  for (int s = 0; s < kStarts; ++s) {
    if (!errors[s].empty()) continue;
    if (best < 0 || results[s].final_loss < results[best].final_loss) best = s;
  }
  if (best < 0) throw NumericalError(errors[0]);
  return results[best];
}

Eigen::VectorXd predict_weights(const FittedModel& model, double t) {
  if (t < model.time_domain[0] - 1e-12 || t > model.time_domain[1] + 1e-12)
    throw InvalidInput("predict_weights: t outside the model time domain");
  t = std::min(std::max(t, model.time_domain[0]), model.time_domain[1]);

  OdeConfig cfg;
  cfg.rk4_steps = kPredictRk4Steps;
  cfg.weight_floor = kPredictWeightFloor;
  const auto trajectory =
      integrate_rk4(model.field, model.alpha0, model.time_domain[0], t, cfg);
  return normalize_weights(trajectory.back().state, kPredictWeightFloor);
}

double density_at(const FittedModel& model, const Eigen::VectorXd& x, double t) {
  const int d = model.components.dim();
  if (x.size() != d) throw InvalidInput("density_at: dimension mismatch");
  const Eigen::VectorXd w = predict_weights(model, t);

  const double norm_const = std::pow(2.0 * M_PI, -0.5 * d);
  double acc = 0.0;
  for (int s = 0; s < model.components.count(); ++s) {
    const Eigen::MatrixXd& chol = model.components.chol[s];
    const Eigen::VectorXd diff = x - model.components.means.row(s).transpose();
    const Eigen::VectorXd solved =
        chol.triangularView<Eigen::Lower>().solve(diff);
    acc += w[s] * norm_const / chol.diagonal().prod() *
           std::exp(-0.5 * solved.squaredNorm());
  }
  return acc;
}

double cdf_at(const FittedModel& model, double x, double t) {
  if (model.components.dim() != 1)
    throw UnsupportedOperation("cdf_at: defined for d = 1 only");
  const Eigen::VectorXd w = predict_weights(model, t);
  double acc = 0.0;
  for (int s = 0; s < model.components.count(); ++s) {
    const double z = (x - model.components.means(s, 0)) / model.components.chol[s](0, 0);
    acc += w[s] * 0.5 * std::erfc(-z * kInvSqrt2);
  }
  return acc;
}

}  // namespace tvmix
