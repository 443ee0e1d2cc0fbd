#include "tvmix/discrete_fit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tvmix/errors.hpp"
#include "tvmix/parallel.hpp"

namespace tvmix {

namespace {

constexpr double kConvergenceTol = 1e-8;  // stop when pooled improvement drops below

struct ParamGrad {
  Eigen::MatrixXd means;              // K x d
  std::vector<Eigen::MatrixXd> chol;  // K of d x d, lower part meaningful

  static ParamGrad zero(int k, int d) {
    ParamGrad g;
    g.means = Eigen::MatrixXd::Zero(k, d);
    g.chol.assign(k, Eigen::MatrixXd::Zero(d, d));
    return g;
  }

  ParamGrad& operator+=(const ParamGrad& o) {
    means += o.means;
    for (std::size_t s = 0; s < chol.size(); ++s) chol[s] += o.chol[s];
    return *this;
  }
};

double sigma_pow_d(const KernelConfig& cfg) {
  return std::pow(cfg.sigma_sq, 0.5 * cfg.dim);
}

// Gradient of one block's MMD^2 (constant term excluded) with respect to the
// component means and Cholesky factors, at fixed weights.
ParamGrad block_gradient(const ComponentSet& c, const Eigen::MatrixXd& samples,
                         const Eigen::VectorXd& w, const KernelConfig& cfg) {
  const int k = c.count();
  const int d = c.dim();
  const Eigen::Index n = samples.rows();
  const double scale = sigma_pow_d(cfg);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);

  std::vector<Eigen::MatrixXd> cov(k);
  for (int s = 0; s < k; ++s) cov[s] = c.covariance(s);

  Eigen::MatrixXd d_means = Eigen::MatrixXd::Zero(k, d);
  std::vector<Eigen::MatrixXd> d_sigma(k, Eigen::MatrixXd::Zero(d, d));

  // Component-component part: d/dSigma_a of the double sum is
  // 2 w_a sum_r w_r G_ar with G_ar = I_ar/2 (A^{-1} dd^T A^{-1} - A^{-1}),
  // A = Sigma_a + Sigma_r + sigma^2 I, d = m_a - m_r.
  for (int a = 0; a < k; ++a) {
    for (int r = a; r < k; ++r) {
      Eigen::MatrixXd am = cov[a] + cov[r];
      am.diagonal().array() += cfg.sigma_sq;
      Eigen::LLT<Eigen::MatrixXd> llt(am);
      if (llt.info() != Eigen::Success)
        throw NumericalError("m-step gradient: pair factorization failed");
      const Eigen::MatrixXd a_inv = llt.solve(identity);
      const Eigen::VectorXd delta = c.means.row(a) - c.means.row(r);
      const Eigen::VectorXd a_inv_delta = a_inv * delta;
      const double term = scale / llt.matrixL().determinant() *
                          std::exp(-0.5 * delta.dot(a_inv_delta));
      const Eigen::MatrixXd g =
          0.5 * term * (a_inv_delta * a_inv_delta.transpose() - a_inv);
      if (a == r) {
        d_sigma[a] += 2.0 * w[a] * w[a] * g;
      } else {
        d_sigma[a] += 2.0 * w[a] * w[r] * g;
        d_sigma[r] += 2.0 * w[a] * w[r] * g;
        const Eigen::VectorXd dm = 2.0 * w[a] * w[r] * term * a_inv_delta;
        d_means.row(a) -= dm;
        d_means.row(r) += dm;
      }
    }
  }

  // Component-sample part, batched over the block.
  for (int a = 0; a < k; ++a) {
    Eigen::MatrixXd bm = cov[a];
    bm.diagonal().array() += cfg.sigma_sq;
    Eigen::LLT<Eigen::MatrixXd> llt(bm);
    if (llt.info() != Eigen::Success)
      throw NumericalError("m-step gradient: component factorization failed");
    const Eigen::MatrixXd b_inv = llt.solve(identity);
    const Eigen::MatrixXd centered =
        (samples.rowwise() - c.means.row(a)).transpose();  // d x n
    const Eigen::MatrixXd solved = b_inv * centered;       // v_j columns
    const Eigen::ArrayXd quad =
        (centered.array() * solved.array()).colwise().sum().transpose();
    const Eigen::VectorXd j_vals =
        (scale / llt.matrixL().determinant()) * (-0.5 * quad).exp().matrix();

    const double coeff = 2.0 * w[a] / static_cast<double>(n);
    d_means.row(a) -= coeff * (solved * j_vals).transpose();
    const Eigen::MatrixXd m_mat = solved * j_vals.asDiagonal() * solved.transpose();
    d_sigma[a] -= 0.5 * coeff * (m_mat - j_vals.sum() * b_inv);
  }

  ParamGrad g = ParamGrad::zero(k, d);
  g.means = d_means;
  for (int a = 0; a < k; ++a)
    g.chol[a] = (2.0 * d_sigma[a] * c.chol[a])
                    .triangularView<Eigen::Lower>();
  return g;
}

// One time block as seen by the pooled objective.
struct BlockRef {
  const Eigen::MatrixXd* samples = nullptr;
  const Eigen::VectorXd* weights = nullptr;  // current alpha row
  KernelConfig kernel;
  double empirical_constant = 0.0;
};

double block_objective_core(const ComponentSet& c, const BlockRef& b,
                            const Eigen::VectorXd& ridge) {
  const MmdTerms terms = mmd_terms(c, *b.samples, b.kernel, false);
  const Eigen::VectorXd& w = *b.weights;
  return w.dot(terms.gram_components * w) -
         (2.0 / static_cast<double>(b.samples->rows())) * w.dot(terms.cross_vector) +
         ridge.dot(w.cwiseAbs2());
}

double pooled_objective_blocks(const ComponentSet& c, const std::vector<BlockRef>& blocks,
                               const Eigen::VectorXd& ridge) {
  std::vector<double> vals(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    vals[i] = block_objective_core(c, blocks[i], ridge) + blocks[i].empirical_constant;
  });
  return std::accumulate(vals.begin(), vals.end(), 0.0);
}

int chol_param_count(int d) { return d * (d + 1) / 2; }

Eigen::VectorXd pack_params(const ComponentSet& c) {
  const int k = c.count();
  const int d = c.dim();
  Eigen::VectorXd theta(k * d + k * chol_param_count(d));
  Eigen::Index at = 0;
  for (int s = 0; s < k; ++s)
    for (int j = 0; j < d; ++j) theta[at++] = c.means(s, j);
  for (int s = 0; s < k; ++s)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) theta[at++] = c.chol[s](i, j);
  return theta;
}

Eigen::VectorXd pack_grad(const ParamGrad& g) {
  const int k = static_cast<int>(g.means.rows());
  const int d = static_cast<int>(g.means.cols());
  Eigen::VectorXd out(k * d + k * chol_param_count(d));
  Eigen::Index at = 0;
  for (int s = 0; s < k; ++s)
    for (int j = 0; j < d; ++j) out[at++] = g.means(s, j);
  for (int s = 0; s < k; ++s)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) out[at++] = g.chol[s](i, j);
  return out;
}

ComponentSet unpack_params(const Eigen::VectorXd& theta, int k, int d) {
  ComponentSet c;
  c.means.resize(k, d);
  c.chol.assign(k, Eigen::MatrixXd::Zero(d, d));
  Eigen::Index at = 0;
  for (int s = 0; s < k; ++s)
    for (int j = 0; j < d; ++j) c.means(s, j) = theta[at++];
  for (int s = 0; s < k; ++s)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) c.chol[s](i, j) = theta[at++];
  return c;
}

// Clamp factor diagonals, then re-factorize any component whose covariance
// eigenvalues dipped below the floor.
void enforce_floor(ComponentSet& c, double variance_floor) {
  const double min_diag = std::sqrt(variance_floor);
  const int d = c.dim();
  for (auto& L : c.chol) {
    for (int i = 0; i < d; ++i) L(i, i) = std::max(L(i, i), min_diag);
    if (d == 1) continue;
    const Eigen::MatrixXd sigma = L * L.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.eigenvalues().minCoeff() >= variance_floor) continue;
    const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(variance_floor);
    const Eigen::MatrixXd floored =
        eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(floored);
    if (llt.info() != Eigen::Success)
      throw NumericalError("variance floor projection failed");
    L = llt.matrixL();
  }
}

// Adam epoch over the packed (means, chol) vector on the pooled objective.
ComponentSet m_step_run(const ComponentSet& start, const std::vector<BlockRef>& blocks,
                        const FitConfig& cfg, double lr) {
  const int k = start.count();
  const int d = start.dim();
  ComponentSet c = start;

  Eigen::VectorXd theta = pack_params(c);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  const double beta1 = cfg.adam_betas.first;
  const double beta2 = cfg.adam_betas.second;
  constexpr double eps = 1e-8;

  std::vector<ParamGrad> per_block(blocks.size());
  for (int step = 1; step <= cfg.adam_steps; ++step) {
    parallel_for(blocks.size(), [&](std::size_t i) {
      per_block[i] = block_gradient(c, *blocks[i].samples, *blocks[i].weights,
                                    blocks[i].kernel);
    });
    ParamGrad total = ParamGrad::zero(k, d);
    for (const auto& g : per_block) total += g;  // fixed reduction order

    const Eigen::VectorXd grad = pack_grad(total);
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    theta -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
    if (!theta.allFinite())
      throw NumericalError("m-step: parameters became non-finite");

    c = unpack_params(theta, k, d);
    enforce_floor(c, cfg.variance_floor);
    theta = pack_params(c);
  }
  return c;
}

struct SubjectBlocks {
  StageOneEstimate estimate;
  std::vector<EStepResult> estep;  // scratch, per time
};

}  // namespace

void DiscreteWeights::validate() const {
  if (times.empty()) throw InvalidInput("DiscreteWeights: empty grid");
  if (static_cast<Eigen::Index>(times.size()) != weights.rows())
    throw InvalidInput("DiscreteWeights: times/weights size mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || times[i] > 1.0)
      throw InvalidInput("DiscreteWeights: time outside [0, 1]");
    if (i > 0 && times[i] <= times[i - 1])
      throw InvalidInput("DiscreteWeights: times not strictly increasing");
    if (weights.row(i).minCoeff() < 0.0 ||
        std::abs(weights.row(i).sum() - 1.0) > 1e-9)
      throw InvalidInput("DiscreteWeights: row off the probability simplex");
  }
}

Eigen::VectorXd FitConfig::ridge_for(int k) const {
  if (ridge.size() == 0) return Eigen::VectorXd::Constant(k, 1e-6);
  if (ridge.size() != k) throw InvalidInput("FitConfig: ridge size mismatch");
  return ridge;
}

void FitConfig::validate() const {
  if (ridge.size() > 0 && ridge.minCoeff() < 0.0)
    throw InvalidInput("FitConfig: ridge must be >= 0");
  if (adam_lr < 0.0) throw InvalidInput("FitConfig: adam_lr must be >= 0");
  if (adam_betas.first <= 0.0 || adam_betas.first >= 1.0 ||
      adam_betas.second <= 0.0 || adam_betas.second >= 1.0)
    throw InvalidInput("FitConfig: adam_betas must lie in (0, 1)");
  if (adam_steps < 0) throw InvalidInput("FitConfig: adam_steps must be >= 0");
  if (outer_rounds < 0) throw InvalidInput("FitConfig: outer_rounds must be >= 0");
  if (!(qp_tol > 0.0)) throw InvalidInput("FitConfig: qp_tol must be > 0");
  if (qp_max_iter < 1) throw InvalidInput("FitConfig: qp_max_iter must be >= 1");
  if (!(variance_floor > 0.0)) throw InvalidInput("FitConfig: variance_floor must be > 0");
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
  const int k = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<double>());

  double cum = 0.0;
  double theta = 0.0;
  for (int j = 0; j < k; ++j) {
    cum += u[j];
    const double candidate = (1.0 - cum) / (j + 1);
    if (u[j] + candidate > 0.0) theta = candidate;
  }
  return (v.array() + theta).cwiseMax(0.0);
}

KmeansInit kmeans_init(const PanelDataset& data, int k, std::uint64_t seed,
                       double variance_floor) {
  data.validate();
  if (k < 1) throw InvalidInput("kmeans_init: k must be >= 1");
  const Eigen::MatrixXd x = data.pooled();
  const Eigen::Index n = x.rows();
  const int d = data.dim;
  if (n < k) throw InvalidInput("kmeans_init: fewer pooled samples than clusters");

  constexpr int kRestarts = 100;
  constexpr int kMaxIter = 100;

  double best_inertia = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_centers;
  std::vector<int> best_assign;

  Eigen::MatrixXd centers(k, d);
  std::vector<int> assign(n, -1);
  Eigen::VectorXd min_d2(n);

  for (int restart = 0; restart < kRestarts; ++restart) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));

    // k-means++ seeding.
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.next_index(n)));
    min_d2.setConstant(std::numeric_limits<double>::infinity());
    for (int s = 1; s < k; ++s) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d2 = (x.row(i) - centers.row(s - 1)).squaredNorm();
        if (d2 < min_d2[i]) min_d2[i] = d2;
        total += min_d2[i];
      }
      if (total <= 0.0) {
        centers.row(s) = x.row(static_cast<Eigen::Index>(rng.next_index(n)));
        continue;
      }
      const double u = rng.next_double() * total;
      double acc = 0.0;
      Eigen::Index pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
      centers.row(s) = x.row(pick);
    }

    std::fill(assign.begin(), assign.end(), -1);
    for (int iter = 0; iter < kMaxIter; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double best = (x.row(i) - centers.row(0)).squaredNorm();
        for (int s = 1; s < k; ++s) {
          const double d2 = (x.row(i) - centers.row(s)).squaredNorm();
          if (d2 < best) {
            best = d2;
            arg = s;
          }
        }
        if (assign[i] != arg) {
          assign[i] = arg;
          changed = true;
        }
      }

      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
      std::vector<Eigen::Index> counts(k, 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[i]) += x.row(i);
        ++counts[assign[i]];
      }
      for (int s = 0; s < k; ++s) {
        if (counts[s] > 0) {
          centers.row(s) = sums.row(s) / static_cast<double>(counts[s]);
        } else {
          // Re-seed the empty cluster from the point farthest from its
          // currently assigned center.
          Eigen::Index far = 0;
          double far_d2 = -1.0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double d2 = (x.row(i) - centers.row(assign[i])).squaredNorm();
            if (d2 > far_d2) {
              far_d2 = d2;
              far = i;
            }
          }
          centers.row(s) = x.row(far);
          changed = true;
        }
      }
      if (!changed) break;
    }

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += (x.row(i) - centers.row(assign[i])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_centers = centers;
      best_assign = assign;
    }
  }

  // Per-cluster empirical covariances about the cluster means.
  std::vector<Eigen::MatrixXd> covs(k, Eigen::MatrixXd::Zero(d, d));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = best_assign[i];
    const Eigen::VectorXd dx = (x.row(i) - best_centers.row(s)).transpose();
    covs[s] += dx * dx.transpose();
    counts[s] += 1.0;
  }
  for (int s = 0; s < k; ++s) covs[s] /= std::max(counts[s], 1.0);

  KmeansInit out;
  out.components = make_components(best_centers, covs, variance_floor);
  out.weights = counts / static_cast<double>(n);
  return out;
}

EStepResult e_step_weights(const MmdTerms& terms, int n, const Eigen::VectorXd& ridge,
                           const FitConfig& cfg) {
  cfg.validate();
  const int k = static_cast<int>(terms.gram_components.rows());
  if (ridge.size() != k) throw InvalidInput("e_step_weights: ridge size mismatch");
  if (ridge.minCoeff() < 0.0) throw InvalidInput("e_step_weights: ridge must be >= 0");
  if (n < 1) throw InvalidInput("e_step_weights: sample count must be >= 1");

  const Eigen::MatrixXd& gram = terms.gram_components;
  const Eigen::VectorXd linear = terms.cross_vector / static_cast<double>(n);

  EStepResult out;
  if (k == 1) {
    out.weights = Eigen::VectorXd::Ones(1);
    out.objective_core = gram(0, 0) - 2.0 * linear[0] + ridge[0];
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lip = 2.0 * (std::max(0.0, eig.eigenvalues().maxCoeff()) +
                            ridge.maxCoeff());
  const double step = 1.0 / std::max(lip, 1e-12);

  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / k);
  out.converged = false;
  for (int it = 1; it <= cfg.qp_max_iter; ++it) {
    const Eigen::VectorXd grad =
        2.0 * (gram * w) - 2.0 * linear + 2.0 * ridge.cwiseProduct(w);
    const Eigen::VectorXd next = simplex_project(w - step * grad);
    const double delta = (next - w).lpNorm<Eigen::Infinity>();
    w = next;
    out.iterations = it;
    if (delta < cfg.qp_tol) {
      out.converged = true;
      break;
    }
  }

  out.weights = w;
  out.objective_core =
      w.dot(gram * w) - 2.0 * w.dot(linear) + ridge.dot(w.cwiseAbs2());
  return out;
}

ComponentSet m_step_components(const ComponentSet& components, const PanelDataset& data,
                               const DiscreteWeights& weights,
                               const std::vector<KernelConfig>& kernels,
                               const FitConfig& cfg) {
  cfg.validate();
  data.validate();
  weights.validate();
  if (weights.times.size() != data.block_count() ||
      kernels.size() != data.block_count())
    throw InvalidInput("m_step_components: grid size mismatch");

  std::vector<Eigen::VectorXd> rows(data.block_count());
  std::vector<BlockRef> blocks(data.block_count());
  for (std::size_t i = 0; i < data.block_count(); ++i) {
    rows[i] = weights.weights.row(i);
    blocks[i] = BlockRef{&data.blocks[i], &rows[i], kernels[i], 0.0};
  }
  return m_step_run(components, blocks, cfg, cfg.adam_lr);
}

ObjectiveGradient pooled_objective_gradient(const ComponentSet& components,
                                            const PanelDataset& data,
                                            const DiscreteWeights& weights,
                                            const std::vector<KernelConfig>& kernels) {
  data.validate();
  weights.validate();
  if (weights.times.size() != data.block_count() ||
      kernels.size() != data.block_count())
    throw InvalidInput("pooled_objective_gradient: grid size mismatch");

  std::vector<ParamGrad> per_block(data.block_count());
  parallel_for(data.block_count(), [&](std::size_t i) {
    per_block[i] =
        block_gradient(components, data.blocks[i],
                       weights.weights.row(static_cast<Eigen::Index>(i)), kernels[i]);
  });
  ParamGrad total = ParamGrad::zero(components.count(), components.dim());
  for (const auto& g : per_block) total += g;

  ObjectiveGradient out;
  out.d_means = std::move(total.means);
  out.d_chol = std::move(total.chol);
  return out;
}

double pooled_objective(const ComponentSet& components, const PanelDataset& data,
                        const DiscreteWeights& weights,
                        const std::vector<KernelConfig>& kernels,
                        const std::vector<double>& empirical_constants,
                        const Eigen::VectorXd& ridge) {
  std::vector<Eigen::VectorXd> rows(data.block_count());
  std::vector<BlockRef> blocks(data.block_count());
  for (std::size_t i = 0; i < data.block_count(); ++i) {
    rows[i] = weights.weights.row(i);
    blocks[i] = BlockRef{&data.blocks[i], &rows[i], kernels[i],
                         empirical_constants[i]};
  }
  return pooled_objective_blocks(components, blocks, ridge);
}

SharedFitResult fit_discrete_shared(const std::vector<PanelDataset>& subjects, int k,
                                    const FitConfig& cfg) {
  cfg.validate();
  if (subjects.empty()) throw InvalidInput("fit_discrete_shared: no subjects");
  const int d = subjects.front().dim;
  std::size_t pooled_n = 0;
  for (const auto& s : subjects) {
    s.validate();
    if (s.dim != d) throw InvalidInput("fit_discrete_shared: mixed dimensions");
    pooled_n += s.total_samples();
  }
  if (pooled_n < static_cast<std::size_t>(k))
    throw InvalidInput("fit_discrete_shared: fewer pooled samples than clusters");

  // Shared k-means over everything.
  PanelDataset pooled;
  pooled.dim = d;
  pooled.times = {0.0};
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(pooled_n), d);
  Eigen::Index row = 0;
  for (const auto& s : subjects)
    for (const auto& b : s.blocks) {
      stacked.middleRows(row, b.rows()) = b;
      row += b.rows();
    }
  pooled.blocks = {stacked};
  KmeansInit init = kmeans_init(pooled, k, cfg.seed, cfg.variance_floor);

  const Eigen::VectorXd ridge = cfg.ridge_for(k);

  SharedFitResult out;
  out.components = init.components;
  out.subjects.resize(subjects.size());

  // Frozen per-time bandwidths and data constants; initial weights replicate
  // the k-means cluster shares.
  struct FlatBlock {
    std::size_t subject;
    std::size_t time_idx;
  };
  std::vector<FlatBlock> flat;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    auto& est = out.subjects[s];
    est.weights.times = subjects[s].times;
    est.weights.weights =
        init.weights.transpose().replicate(static_cast<Eigen::Index>(subjects[s].block_count()), 1);
    est.kernels.resize(subjects[s].block_count());
    est.empirical_constants.resize(subjects[s].block_count());
    for (std::size_t i = 0; i < subjects[s].block_count(); ++i)
      flat.push_back({s, i});
  }
  parallel_for(flat.size(), [&](std::size_t f) {
    const auto [s, i] = flat[f];
    auto& est = out.subjects[s];
    if (subjects[s].blocks[i].rows() >= 2) {
      est.kernels[i] = median_heuristic(subjects[s].blocks[i]).config;
    } else {
      est.kernels[i] = KernelConfig{1.0, d};
    }
    est.empirical_constants[i] =
        mmd_terms(out.components, subjects[s].blocks[i], est.kernels[i], true)
            .empirical_constant;
  });

  if (cfg.outer_rounds == 0) return out;

  auto make_blocks = [&](std::vector<Eigen::VectorXd>& rows) {
    std::vector<BlockRef> blocks(flat.size());
    rows.resize(flat.size());
    for (std::size_t f = 0; f < flat.size(); ++f) {
      const auto [s, i] = flat[f];
      rows[f] = out.subjects[s].weights.weights.row(static_cast<Eigen::Index>(i));
      blocks[f] = BlockRef{&subjects[s].blocks[i], &rows[f],
                           out.subjects[s].kernels[i],
                           out.subjects[s].empirical_constants[i]};
    }
    return blocks;
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int round = 0; round < cfg.outer_rounds; ++round) {
    // E-step: independent QPs, disjoint weight rows.
    std::vector<double> cores(flat.size());
    std::vector<int> warns(flat.size(), 0);
    parallel_for(flat.size(), [&](std::size_t f) {
      const auto [s, i] = flat[f];
      const MmdTerms terms =
          mmd_terms(out.components, subjects[s].blocks[i],
                    out.subjects[s].kernels[i], false);
      const EStepResult res = e_step_weights(
          terms, static_cast<int>(subjects[s].blocks[i].rows()), ridge, cfg);
      out.subjects[s].weights.weights.row(static_cast<Eigen::Index>(i)) =
          res.weights.transpose();
      cores[f] = res.objective_core + out.subjects[s].empirical_constants[i];
      warns[f] = res.converged ? 0 : 1;
    });
    for (int w : warns) out.estep_warnings += w;
    const double objective = std::accumulate(cores.begin(), cores.end(), 0.0);
    out.trace.push_back(objective);
    if (prev - objective < kConvergenceTol) break;
    prev = objective;

    if (round + 1 == cfg.outer_rounds) break;  // no M-step after the last E-step

    // M-step, guarded so the pooled objective never increases: on an
    // unsuccessful epoch retry at half the learning rate, then keep the
    // previous components.
    std::vector<Eigen::VectorXd> rows;
    const std::vector<BlockRef> blocks = make_blocks(rows);
    double lr = cfg.adam_lr;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const ComponentSet candidate = m_step_run(out.components, blocks, cfg, lr);
      if (pooled_objective_blocks(candidate, blocks, ridge) <= objective) {
        out.components = candidate;
        break;
      }
      lr *= 0.5;
    }
  }
  return out;
}

DiscreteFitResult fit_discrete(const PanelDataset& data, int k, const FitConfig& cfg) {
  SharedFitResult shared = fit_discrete_shared({data}, k, cfg);
  DiscreteFitResult out;
  out.components = std::move(shared.components);
  out.subject = std::move(shared.subjects.front());
  out.trace = std::move(shared.trace);
  out.estep_warnings = shared.estep_warnings;
  return out;
}

}  // namespace tvmix
