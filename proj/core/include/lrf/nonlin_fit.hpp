#pragma once

// Static identification of the extracted restoring force: polynomial Bayesian
// linear regression, BIC order selection and linear-stiffness bias correction.

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

namespace lrf {

struct RestoringForceSamples {
  Eigen::VectorXd z;
  Eigen::VectorXd zdot;
  Eigen::VectorXd f_hat;

  void validate() const;
};

/// Classic restoring-force-surface estimate u - m z''.
Eigen::VectorXd direct_restoring_force(const Eigen::VectorXd& u, const Eigen::VectorXd& zdd,
                                       double m);

/// k z + c z' + f_hat per time step.
Eigen::VectorXd assemble_total_rf(const RestoringForceSamples& samples, double k_map,
                                  double c_map);

/// z^z_degree * z'^zdot_degree.
struct Monomial {
  int z_degree = 1;
  int zdot_degree = 0;
  int total() const { return z_degree + zdot_degree; }
};

struct BasisOptions {
  bool intercept = false;       ///< include the constant monomial
  bool velocity_terms = false;  ///< all monomials in (z, z') up to the order
};

std::vector<Monomial> polynomial_basis(int order, const BasisOptions& options = {});

struct PolynomialPosterior {
  int order = 0;
  std::vector<Monomial> basis;
  Eigen::VectorXd weight_mean;      ///< in the original (unstandardized) units
  Eigen::MatrixXd weight_cov;
  Eigen::MatrixXd weight_sqrt_cov;  ///< upper triangular, S^T S = weight_cov
  double noise_variance = 0.0;
  double log_evidence = 0.0;
  double log_likelihood = 0.0;      ///< at the posterior mean
  double bic = 0.0;
  std::size_t n_data = 0;

  Eigen::VectorXd weight_std() const { return weight_cov.diagonal().cwiseSqrt(); }
  /// Coefficient of z^degree (0 if absent).
  double coefficient(int z_degree, int zdot_degree = 0) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& z,
                          const Eigen::VectorXd& zdot = Eigen::VectorXd()) const;
};

struct BlrOptions {
  BasisOptions basis;
  /// Prior variance of each weight on the standardized basis (z / sd(z))^d.
  /// +infinity gives a flat prior (ordinary least squares).
  double weight_prior_variance = 1e4;
  /// Fixed noise variance; when empty it is chosen by maximum evidence.
  std::optional<double> noise_variance;
  /// Number of equally long replicate draws stacked in the data, such as
  /// sampled state trajectories. BIC then uses N / replicates points and the
  /// log-likelihood per replicate.
  std::size_t replicates = 1;
};

/// Conjugate Gaussian regression of f on polynomial features of z (and z').
/// Throws NumericalError for a rank-deficient design under a flat prior.
PolynomialPosterior blr_fit(const Eigen::VectorXd& z, const Eigen::VectorXd& f, int order,
                            const BlrOptions& options = {},
                            const Eigen::VectorXd& zdot = Eigen::VectorXd());

/// P ln N - 2 ln L.
double bic(std::size_t n_params, std::size_t n_data, double log_likelihood);

struct BicScan {
  std::vector<PolynomialPosterior> fits;  ///< orders 1..max_order
  int best_order = 0;

  const PolynomialPosterior& best() const { return fits.at(static_cast<std::size_t>(best_order - 1)); }
};

BicScan bic_scan(const Eigen::VectorXd& z, const Eigen::VectorXd& f, int max_order,
                 const BlrOptions& options = {},
                 const Eigen::VectorXd& zdot = Eigen::VectorXd());

/// Folds the fitted linear coefficient of the GP force into the stiffness.
double bias_correct(double k_map, double alpha);

}  // namespace lrf
