#include "lrf/nonlin_fit.hpp"

#include "lrf/errors.hpp"
#include "lrf/triangular.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace lrf {

void RestoringForceSamples::validate() const {
  if (z.size() != zdot.size() || z.size() != f_hat.size()) {
    throw DataError("restoring-force samples have unequal lengths");
  }
  if (!z.allFinite() || !zdot.allFinite() || !f_hat.allFinite()) {
    throw DataError("restoring-force samples contain non-finite values");
  }
}

Eigen::VectorXd direct_restoring_force(const Eigen::VectorXd& u, const Eigen::VectorXd& zdd,
                                       double m) {
  if (u.size() != zdd.size()) throw DataError("direct_restoring_force: length mismatch");
  return u - m * zdd;
}

Eigen::VectorXd assemble_total_rf(const RestoringForceSamples& samples, double k_map,
                                  double c_map) {
  samples.validate();
  return k_map * samples.z + c_map * samples.zdot + samples.f_hat;
}

std::vector<Monomial> polynomial_basis(int order, const BasisOptions& options) {
  if (order < 1) throw InvalidArgument("polynomial order must be at least 1");
  std::vector<Monomial> basis;
  if (options.intercept) basis.push_back({0, 0});
  for (int total = 1; total <= order; ++total) {
    if (!options.velocity_terms) {
      basis.push_back({total, 0});
      continue;
    }
    for (int b = 0; b <= total; ++b) basis.push_back({total - b, b});
  }
  return basis;
}

double PolynomialPosterior::coefficient(int z_degree, int zdot_degree) const {
  for (std::size_t j = 0; j < basis.size(); ++j) {
    if (basis[j].z_degree == z_degree && basis[j].zdot_degree == zdot_degree) {
      return weight_mean(static_cast<Eigen::Index>(j));
    }
  }
  return 0.0;
}

Eigen::VectorXd PolynomialPosterior::predict(const Eigen::VectorXd& z,
                                             const Eigen::VectorXd& zdot) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.size());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const auto& mono = basis[j];
    if (mono.zdot_degree > 0 && zdot.size() != z.size()) {
      throw InvalidArgument("predict: basis has velocity terms but no velocity given");
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      double v = std::pow(z(i), mono.z_degree);
      if (mono.zdot_degree > 0) v *= std::pow(zdot(i), mono.zdot_degree);
      out(i) += weight_mean(static_cast<Eigen::Index>(j)) * v;
    }
  }
  return out;
}

double bic(std::size_t n_params, std::size_t n_data, double log_likelihood) {
  return static_cast<double>(n_params) * std::log(static_cast<double>(n_data)) -
         2.0 * log_likelihood;
}

namespace {

double population_sd(const Eigen::VectorXd& x) {
  if (x.size() == 0) return 1.0;
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

void features(const std::vector<Monomial>& basis, double zs, double zds, Eigen::VectorXd& out) {
  for (std::size_t j = 0; j < basis.size(); ++j) {
    double v = 1.0;
    for (int a = 0; a < basis[j].z_degree; ++a) v *= zs;
    for (int b = 0; b < basis[j].zdot_degree; ++b) v *= zds;
    out(static_cast<Eigen::Index>(j)) = v;
  }
}

struct Conjugate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_evidence = 0.0;
};

// Posterior for fixed noise variance from sufficient statistics.
Conjugate solve_conjugate(const Eigen::MatrixXd& G, const Eigen::VectorXd& h, double ff,
                          std::size_t n, double prior_var, double noise_var) {
  const Eigen::Index P = G.rows();
  const bool flat = std::isinf(prior_var);
  Eigen::MatrixXd A = G / noise_var;
  if (!flat) A.diagonal().array() += 1.0 / prior_var;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("blr_fit: rank-deficient design with a flat weight prior");
  }
  Conjugate out;
  const Eigen::VectorXd b = h / noise_var;
  out.mean = llt.solve(b);
  out.cov = llt.solve(Eigen::MatrixXd::Identity(P, P));
  if (flat) {
    out.log_evidence = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det_a = 2.0 * L.diagonal().array().log().sum();
  const double quad = ff / noise_var - b.dot(out.mean);
  out.log_evidence = -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi * noise_var) +
                             static_cast<double>(P) * std::log(prior_var) + log_det_a + quad);
  return out;
}

}  // namespace

PolynomialPosterior blr_fit(const Eigen::VectorXd& z, const Eigen::VectorXd& f, int order,
                            const BlrOptions& options, const Eigen::VectorXd& zdot) {
  if (z.size() != f.size()) throw DataError("blr_fit: z and f lengths differ");
  if (options.basis.velocity_terms && zdot.size() != z.size()) {
    throw DataError("blr_fit: velocity terms requested but z' has the wrong length");
  }
  const double prior_var = options.weight_prior_variance;
  if (!(prior_var > 0.0)) throw InvalidArgument("blr_fit: weight prior variance must be positive");

  PolynomialPosterior post;
  post.order = order;
  post.basis = polynomial_basis(order, options.basis);
  const Eigen::Index P = static_cast<Eigen::Index>(post.basis.size());
  const std::size_t N = static_cast<std::size_t>(z.size());
  post.n_data = N;
  const bool flat = std::isinf(prior_var);

  if (N == 0) {
    if (flat) throw NumericalError("blr_fit: no data and a flat weight prior");
    post.weight_mean = Eigen::VectorXd::Zero(P);
    post.weight_cov = prior_var * Eigen::MatrixXd::Identity(P, P);
    post.weight_sqrt_cov = std::sqrt(prior_var) * Eigen::MatrixXd::Identity(P, P);
    post.noise_variance = options.noise_variance.value_or(1.0);
    post.log_evidence = 0.0;
    post.log_likelihood = 0.0;
    post.bic = std::numeric_limits<double>::quiet_NaN();
    return post;
  }

  const double sz = population_sd(z);
  const double szd = options.basis.velocity_terms ? population_sd(zdot) : 1.0;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(P);
  double ff = 0.0;
  Eigen::VectorXd phi(P);
  for (std::size_t i = 0; i < N; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    features(post.basis, z(ii) / sz, options.basis.velocity_terms ? zdot(ii) / szd : 0.0, phi);
    G.selfadjointView<Eigen::Lower>().rankUpdate(phi);
    h += f(ii) * phi;
    ff += f(ii) * f(ii);
  }
  G = G.selfadjointView<Eigen::Lower>();

  double noise_var = 0.0;
  if (options.noise_variance) {
    noise_var = *options.noise_variance;
    if (!(noise_var > 0.0)) throw InvalidArgument("blr_fit: noise variance must be positive");
  } else if (flat) {
    // Maximum likelihood: RSS / N at the least-squares solution.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const Eigen::VectorXd w = ldlt.solve(h);
    const double rss = std::max(ff - 2.0 * h.dot(w) + w.dot(G * w), 0.0);
    noise_var = std::max(rss / static_cast<double>(N), 1e-300);
  } else {
    const double scale = std::max(ff / static_cast<double>(N), 1e-300);
    const double lo = std::log(scale * 1e-16);
    const double hi = std::log(scale * 10.0);
    auto neg_evidence = [&](double log_var) {
      return -solve_conjugate(G, h, ff, N, prior_var, std::exp(log_var)).log_evidence;
    };
    const auto best = boost::math::tools::brent_find_minima(neg_evidence, lo, hi, 40);
    noise_var = std::exp(best.first);
  }

  const Conjugate post_s = solve_conjugate(G, h, ff, N, prior_var, noise_var);

  // Undo the standardization: w_j = ws_j / (sz^a szd^b).
  Eigen::VectorXd unscale(P);
  for (Eigen::Index j = 0; j < P; ++j) {
    const auto& mono = post.basis[static_cast<std::size_t>(j)];
    unscale(j) = 1.0 / (std::pow(sz, mono.z_degree) * std::pow(szd, mono.zdot_degree));
  }
  post.weight_mean = post_s.mean.cwiseProduct(unscale);
  post.weight_cov = unscale.asDiagonal() * post_s.cov * unscale.asDiagonal();
  post.weight_sqrt_cov = psd_sqrt_factor(post.weight_cov);
  post.noise_variance = noise_var;
  post.log_evidence = post_s.log_evidence;

  // Residual sum of squares by a direct pass (avoids cancellation on near-exact fits).
  double rss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    features(post.basis, z(ii) / sz, options.basis.velocity_terms ? zdot(ii) / szd : 0.0, phi);
    const double r = f(ii) - phi.dot(post_s.mean);
    rss += r * r;
  }
  post.log_likelihood = -0.5 * (static_cast<double>(N) * std::log(2.0 * std::numbers::pi * noise_var) +
                                rss / noise_var);
  const double reps = static_cast<double>(std::max<std::size_t>(options.replicates, 1));
  post.bic = static_cast<double>(P) * std::log(static_cast<double>(N) / reps) - 2.0 * post.log_likelihood / reps;
  return post;
}

BicScan bic_scan(const Eigen::VectorXd& z, const Eigen::VectorXd& f, int max_order,
                 const BlrOptions& options, const Eigen::VectorXd& zdot) {
  if (max_order < 1) throw InvalidArgument("bic_scan: max_order must be at least 1");
  BicScan scan;
  scan.fits.reserve(static_cast<std::size_t>(max_order));
  double best = std::numeric_limits<double>::infinity();
  for (int order = 1; order <= max_order; ++order) {
    scan.fits.push_back(blr_fit(z, f, order, options, zdot));
    if (scan.fits.back().bic < best) {
      best = scan.fits.back().bic;
      scan.best_order = order;
    }
  }
  return scan;
}

double bias_correct(double k_map, double alpha) { return k_map + alpha; }

}  // namespace lrf
