#pragma once

// Small dense helpers shared by the square-root filter and smoother.

#include <Eigen/Dense>

namespace lrf {

/// In-place Householder triangularization of a tall (rows >= cols) block.
/// On return the top cols x cols block is upper triangular with a
/// non-negative diagonal and R^T R equals the original M^T M; the rows below
/// are zero. `work` must hold at least M.cols() entries.
void triangularize(Eigen::Ref<Eigen::MatrixXd> M, Eigen::Ref<Eigen::VectorXd> work);

/// Upper-triangular factor S with S^T S = P for a symmetric PSD P.
/// Negative eigenvalues within round-off are clipped to zero.
Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& P);

/// Solves R X = B for upper-triangular R, zeroing rows of X that correspond
/// to diagonal entries below rel_tol * max|diag(R)| (pseudo-inverse on the
/// numerically null directions).
void solve_upper_pinv(const Eigen::Ref<const Eigen::MatrixXd>& R, Eigen::Ref<Eigen::MatrixXd> B,
                      double rel_tol = 1e-13);

}  // namespace lrf
