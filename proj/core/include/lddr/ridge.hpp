#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lddr {

/// Linear map from a shape-indexed feature to a shape increment.
struct StageRegressor {
  Eigen::MatrixXd W;  // (2L) x D
  double lambda = 0.0;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& feature) const { return W * feature; }
};

/// Minimises sum_i ||targets_i - W features_i||^2 + lambda ||W||_F^2.
/// `features` is N x D, `targets` is N x (2L), one sample per row. Solves the
/// N x N dual system when N <= D and the D x D primal system otherwise; both
/// through Cholesky with a pivoted LDL^T fallback. With lambda == 0 a singular
/// or ill-conditioned system raises NumericalError.
StageRegressor train_stage(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                           double lambda);

/// The regularised least-squares objective at W.
double ridge_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& features,
                       const Eigen::MatrixXd& targets, double lambda);

inline const std::vector<double> kDefaultLambdaGrid{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> errors;  // mean squared validation error per grid value
};

/// k-fold cross-validation over `grid` using an eigendecomposition of each
/// training-fold Gram matrix, so every grid value costs one small product.
/// Fold assignment is a seeded shuffle. Requires N >= 2.
CvResult cross_validate_lambda(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                               const std::vector<double>& grid, int folds, std::uint64_t seed);

}  // namespace lddr
