#include "tvmix/kernel.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <vector>

#include "tvmix/errors.hpp"

namespace tvmix {

namespace {

// det(A)^{-1/2} and the solve operator for an SPD matrix A.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double inv_sqrt_det;

  explicit SpdFactor(const Eigen::MatrixXd& a) : llt(a) {
    if (llt.info() != Eigen::Success)
      throw NumericalError("SPD factorization failed; covariance not positive definite");
    inv_sqrt_det = 1.0 / llt.matrixL().determinant();
  }

  double quad_form(const Eigen::VectorXd& v) const {
    return v.dot(llt.solve(v));
  }
};

double sigma_pow_d(const KernelConfig& cfg) {
  return std::pow(cfg.sigma_sq, 0.5 * cfg.dim);
}

void check_component_index(const ComponentSet& c, int s) {
  if (s < 0 || s >= c.count()) throw InvalidInput("component index out of range");
}

void check_weights_on_simplex(const Eigen::VectorXd& w, int k) {
  if (w.size() != k) throw InvalidInput("weight vector size mismatch");
  if (w.minCoeff() < -1e-8 || std::abs(w.sum() - 1.0) > 1e-8)
    throw InvalidInput("weight vector off the probability simplex");
}

}  // namespace

void KernelConfig::validate() const {
  if (!(sigma_sq > 0.0)) throw InvalidInput("KernelConfig: sigma_sq must be > 0");
  if (dim < 1) throw InvalidInput("KernelConfig: dim must be >= 1");
}

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const KernelConfig& cfg) {
  cfg.validate();
  if (x.size() != cfg.dim || y.size() != cfg.dim)
    throw InvalidInput("gaussian_kernel: dimension mismatch");
  return std::exp(-(x - y).squaredNorm() / (2.0 * cfg.sigma_sq));
}

MedianBandwidth median_heuristic(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw InvalidInput("median_heuristic: need at least 2 samples");

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index j = 0; j + 1 < n; ++j)
    for (Eigen::Index l = j + 1; l < n; ++l)
      dists.push_back((samples.row(j) - samples.row(l)).norm());

  // Lower middle order statistic for even pair counts.
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double med = dists[mid];

  MedianBandwidth out;
  out.config.dim = static_cast<int>(samples.cols());
  if (med > 0.0) {
    out.config.sigma_sq = med * med;
  } else {
    out.config.sigma_sq = 1.0;
    out.degenerate = true;
  }
  return out;
}

double gauss_gauss_term(const ComponentSet& components, int s, int r,
                        const KernelConfig& cfg) {
  cfg.validate();
  check_component_index(components, s);
  check_component_index(components, r);
  if (components.dim() != cfg.dim)
    throw InvalidInput("gauss_gauss_term: dimension mismatch");

  Eigen::MatrixXd a = components.covariance(s) + components.covariance(r);
  a.diagonal().array() += cfg.sigma_sq;
  const SpdFactor f(a);
  const Eigen::VectorXd delta = components.means.row(s) - components.means.row(r);
  return sigma_pow_d(cfg) * f.inv_sqrt_det * std::exp(-0.5 * f.quad_form(delta));
}

double gauss_point_term(const ComponentSet& components, int s,
                        const Eigen::VectorXd& x, const KernelConfig& cfg) {
  cfg.validate();
  check_component_index(components, s);
  if (components.dim() != cfg.dim || x.size() != cfg.dim)
    throw InvalidInput("gauss_point_term: dimension mismatch");

  Eigen::MatrixXd b = components.covariance(s);
  b.diagonal().array() += cfg.sigma_sq;
  const SpdFactor f(b);
  const Eigen::VectorXd u = x - components.means.row(s).transpose();
  return sigma_pow_d(cfg) * f.inv_sqrt_det * std::exp(-0.5 * f.quad_form(u));
}

MmdTerms mmd_terms(const ComponentSet& components, const Eigen::MatrixXd& samples,
                   const KernelConfig& cfg, bool with_empirical) {
  cfg.validate();
  const int k = components.count();
  const Eigen::Index n = samples.rows();
  if (n < 1) throw InvalidInput("mmd_terms: empty sample block");
  if (samples.cols() != cfg.dim || components.dim() != cfg.dim)
    throw InvalidInput("mmd_terms: dimension mismatch");

  MmdTerms out;
  out.gram_components.resize(k, k);
  for (int s = 0; s < k; ++s)
    for (int r = s; r < k; ++r) {
      const double v = gauss_gauss_term(components, s, r, cfg);
      out.gram_components(s, r) = v;
      out.gram_components(r, s) = v;
    }

  // cross_vector(s) = sum_j gauss_point_term(s, X_j), batched per component.
  out.cross_vector.resize(k);
  const double scale = sigma_pow_d(cfg);
  for (int s = 0; s < k; ++s) {
    Eigen::MatrixXd b = components.covariance(s);
    b.diagonal().array() += cfg.sigma_sq;
    const SpdFactor f(b);
    Eigen::MatrixXd centered =
        (samples.rowwise() - components.means.row(s)).transpose();  // d x n
    const Eigen::MatrixXd solved = f.llt.solve(centered);
    const Eigen::ArrayXd quad =
        (centered.array() * solved.array()).colwise().sum().transpose();
    out.cross_vector[s] = scale * f.inv_sqrt_det * (-0.5 * quad).exp().sum();
  }

  if (with_empirical) {
    // V-statistic over all n^2 ordered pairs, diagonal included.
    double acc = static_cast<double>(n);  // k(x, x) = 1 on the diagonal
    const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma_sq);
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const Eigen::ArrayXd sq = (samples.bottomRows(n - j - 1).rowwise() -
                                 samples.row(j)).rowwise().squaredNorm();
      acc += 2.0 * (-inv_two_sigma_sq * sq).exp().sum();
    }
    out.empirical_constant = acc / (static_cast<double>(n) * static_cast<double>(n));
  }
  return out;
}

double mmd_sq(const Eigen::VectorXd& weights, const MmdTerms& terms, int n) {
  const int k = static_cast<int>(terms.gram_components.rows());
  check_weights_on_simplex(weights, k);
  if (n < 1) throw InvalidInput("mmd_sq: sample count must be >= 1");

  const double value = weights.dot(terms.gram_components * weights) -
                       (2.0 / n) * weights.dot(terms.cross_vector) +
                       terms.empirical_constant;
  if (value < 0.0 && value > -1e-10) return 0.0;
  return value;
}

double mean_embedding(const ComponentSet& components, const Eigen::VectorXd& weights,
                      const Eigen::VectorXd& z, const KernelConfig& cfg) {
  check_weights_on_simplex(weights, components.count());
  double acc = 0.0;
  for (int s = 0; s < components.count(); ++s)
    acc += weights[s] * gauss_point_term(components, s, z, cfg);
  return acc;
}

double mixture_mmd_sq(const ComponentSet& a, const Eigen::VectorXd& wa,
                      const ComponentSet& b, const Eigen::VectorXd& wb,
                      const KernelConfig& cfg) {
  check_weights_on_simplex(wa, a.count());
  check_weights_on_simplex(wb, b.count());
  if (a.dim() != b.dim()) throw InvalidInput("mixture_mmd_sq: dimension mismatch");

  // Stack both component sets and read the three blocks off one gram matrix.
  ComponentSet joint;
  joint.means.resize(a.count() + b.count(), a.dim());
  joint.means << a.means, b.means;
  joint.chol = a.chol;
  joint.chol.insert(joint.chol.end(), b.chol.begin(), b.chol.end());

  double self_a = 0.0, self_b = 0.0, cross = 0.0;
  for (int s = 0; s < a.count(); ++s)
    for (int r = 0; r < a.count(); ++r)
      self_a += wa[s] * wa[r] * gauss_gauss_term(joint, s, r, cfg);
  for (int s = 0; s < b.count(); ++s)
    for (int r = 0; r < b.count(); ++r)
      self_b += wb[s] * wb[r] *
                gauss_gauss_term(joint, a.count() + s, a.count() + r, cfg);
  for (int s = 0; s < a.count(); ++s)
    for (int r = 0; r < b.count(); ++r)
      cross += wa[s] * wb[r] * gauss_gauss_term(joint, s, a.count() + r, cfg);

  const double value = self_a + self_b - 2.0 * cross;
  if (value < 0.0 && value > -1e-10) return 0.0;
  return value;
}

MonteCarloMmd mmd_sq_monte_carlo(const ComponentSet& components,
                                 const Eigen::VectorXd& weights,
                                 const Eigen::MatrixXd& samples,
                                 const KernelConfig& cfg, std::int64_t draws,
                                 std::uint64_t seed) {
  cfg.validate();
  check_weights_on_simplex(weights, components.count());
  if (draws < 10000) throw InvalidInput("mmd_sq_monte_carlo: draws must be >= 10^4");
  const Eigen::Index n = samples.rows();
  if (n < 1) throw InvalidInput("mmd_sq_monte_carlo: empty sample block");
  if (samples.cols() != cfg.dim || components.dim() != cfg.dim)
    throw InvalidInput("mmd_sq_monte_carlo: dimension mismatch");

  // The empirical-empirical piece is a finite sum, computed exactly; only
  // E[k(X, X')] and E[k(X, X_j)] over mixture draws are estimated.
  const MmdTerms exact = mmd_terms(components, samples, cfg, true);

  SplitMix64 rng(seed);
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma_sq);
  const std::int64_t chunk = 65536;

  double sum_pair = 0.0, sumsq_pair = 0.0;
  double sum_cross = 0.0, sumsq_cross = 0.0;
  std::int64_t done = 0;
  while (done < draws) {
    const std::int64_t m = std::min(chunk, draws - done);
    const Eigen::MatrixXd xa = sample_mixture(components, weights, static_cast<int>(m), rng);
    const Eigen::MatrixXd xb = sample_mixture(components, weights, static_cast<int>(m), rng);
    const Eigen::MatrixXd xc = sample_mixture(components, weights, static_cast<int>(m), rng);

    const Eigen::ArrayXd pair_vals =
        (-inv_two_sigma_sq * (xa - xb).rowwise().squaredNorm().array()).exp();
    sum_pair += pair_vals.sum();
    sumsq_pair += pair_vals.square().sum();

    Eigen::ArrayXd cross_vals = Eigen::ArrayXd::Zero(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      cross_vals += (-inv_two_sigma_sq *
                     (xc.rowwise() - samples.row(j)).rowwise().squaredNorm().array())
                        .exp();
    }
    cross_vals /= static_cast<double>(n);
    sum_cross += cross_vals.sum();
    sumsq_cross += cross_vals.square().sum();

    done += m;
  }

  const double nn = static_cast<double>(draws);
  const double mean_pair = sum_pair / nn;
  const double mean_cross = sum_cross / nn;
  const double var_pair = std::max(0.0, sumsq_pair / nn - mean_pair * mean_pair);
  const double var_cross = std::max(0.0, sumsq_cross / nn - mean_cross * mean_cross);

  MonteCarloMmd out;
  out.estimate = mean_pair - 2.0 * mean_cross + exact.empirical_constant;
  out.std_error = std::sqrt(var_pair / nn + 4.0 * var_cross / nn);
  return out;
}

}  // namespace tvmix
