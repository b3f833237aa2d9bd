#include "lrf/triangular.hpp"

#include <algorithm>
#include <cmath>

namespace lrf {

void triangularize(Eigen::Ref<Eigen::MatrixXd> M, Eigen::Ref<Eigen::VectorXd> work) {
  const Eigen::Index rows = M.rows();
  const Eigen::Index cols = M.cols();
  const Eigen::Index steps = std::min(rows, cols);
  for (Eigen::Index j = 0; j < steps; ++j) {
    const Eigen::Index len = rows - j;
    if (len > 1) {
      double tau = 0.0;
      double beta = 0.0;
      auto column = M.col(j).tail(len);
      auto essential = column.tail(len - 1);
      column.makeHouseholderInPlace(tau, beta);
      if (j + 1 < cols) {
        M.bottomRightCorner(len, cols - j - 1)
            .applyHouseholderOnTheLeft(essential, tau, work.data());
      }
      M(j, j) = beta;
      essential.setZero();
    }
    if (M(j, j) < 0.0) M.row(j).tail(cols - j) *= -1.0;
  }
}

Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& P) {
  const Eigen::Index n = P.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() == Eigen::Success) {
    return llt.matrixU();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (P + P.transpose()));
  Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd F = root.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::VectorXd work(n);
  triangularize(F, work);
  return F.triangularView<Eigen::Upper>();
}

void solve_upper_pinv(const Eigen::Ref<const Eigen::MatrixXd>& R, Eigen::Ref<Eigen::MatrixXd> B,
                      double rel_tol) {
  const Eigen::Index n = R.rows();
  const double scale = R.diagonal().cwiseAbs().maxCoeff();
  const double tol = rel_tol * scale;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const double d = R(i, i);
    if (!(std::abs(d) > tol)) {
      B.row(i).setZero();
      continue;
    }
    if (i + 1 < n) {
      B.row(i) -= R.row(i).tail(n - i - 1) * B.bottomRows(n - i - 1);
    }
    B.row(i) /= d;
  }
}

}  // namespace lrf
