#include "lddr/ridge.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <string>

#include "lddr/error.hpp"
#include "lddr/rng.hpp"

namespace lddr {

namespace {

// Smallest accepted pivot relative to the largest when lambda == 0.
constexpr double kMinPivotRatio = 1e-12;

bool pivots_ok(const Eigen::VectorXd& pivots) {
  return pivots.size() > 0 && pivots.minCoeff() > kMinPivotRatio * pivots.maxCoeff();
}

// Solves (gram + lambda I) X = rhs for symmetric positive (semi)definite gram.
Eigen::MatrixXd solve_regularised(Eigen::MatrixXd gram, const Eigen::MatrixXd& rhs, double lambda) {
  gram.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success &&
      (lambda > 0.0 || pivots_ok(llt.matrixLLT().diagonal().array().square().matrix()))) {
    return llt.solve(rhs);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !pivots_ok(ldlt.vectorD())) {
    throw NumericalError(lambda > 0.0
                             ? "regularised normal system is numerically singular"
                             : "normal system is singular with lambda = 0; use lambda > 0");
  }
  return ldlt.solve(rhs);
}

}  // namespace

StageRegressor train_stage(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                           double lambda) {
  if (features.rows() < 1) throw InputError("train_stage: no samples");
  if (features.rows() != targets.rows()) {
    throw InputError("train_stage: " + std::to_string(features.rows()) + " feature rows vs " +
                     std::to_string(targets.rows()) + " target rows");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InputError("train_stage: lambda must be finite and >= 0");
  }
  StageRegressor reg;
  reg.lambda = lambda;
  if (features.rows() <= features.cols()) {
    // W = T^T (Phi Phi^T + lambda I)^-1 Phi
    Eigen::MatrixXd gram = features * features.transpose();
    Eigen::MatrixXd dual = solve_regularised(std::move(gram), targets, lambda);
    reg.W = dual.transpose() * features;
  } else {
    // W^T = (Phi^T Phi + lambda I)^-1 Phi^T T
    Eigen::MatrixXd gram = features.transpose() * features;
    Eigen::MatrixXd rhs = features.transpose() * targets;
    reg.W = solve_regularised(std::move(gram), rhs, lambda).transpose();
  }
  if (!reg.W.allFinite()) throw NumericalError("train_stage: non-finite solution");
  return reg;
}

double ridge_objective(const Eigen::MatrixXd& W, const Eigen::MatrixXd& features,
                       const Eigen::MatrixXd& targets, double lambda) {
  return (targets - features * W.transpose()).squaredNorm() + lambda * W.squaredNorm();
}

CvResult cross_validate_lambda(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                               const std::vector<double>& grid, int folds, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw InputError("cross-validation needs at least 2 samples");
  if (targets.rows() != n) throw InputError("cross-validation: feature/target row mismatch");
  if (grid.empty()) throw ConfigError("cross-validation: empty lambda grid");
  for (double l : grid) {
    if (!(l > 0.0)) throw ConfigError("cross-validation: grid values must be positive");
  }
  if (folds < 2) throw ConfigError("cross-validation: need at least 2 folds");
  folds = static_cast<int>(std::min<Eigen::Index>(folds, n));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % folds);
  }

  const Eigen::MatrixXd gram = features * features.transpose();
  CvResult result;
  result.grid = grid;
  result.errors.assign(grid.size(), 0.0);

  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, valid;
    for (Eigen::Index i = 0; i < n; ++i) (fold_of[i] == f ? valid : train).push_back(i);
    const Eigen::MatrixXd k_train = gram(train, train);
    const Eigen::MatrixXd k_valid = gram(valid, train);
    const Eigen::MatrixXd t_train = targets(train, Eigen::all);
    const Eigen::MatrixXd t_valid = targets(valid, Eigen::all);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_train);
    if (eig.info() != Eigen::Success) throw NumericalError("cross-validation: eigensolver failed");
    const Eigen::MatrixXd& u = eig.eigenvectors();
    const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd projected = u.transpose() * t_train;
    const Eigen::MatrixXd kv_u = k_valid * u;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Eigen::VectorXd inv = (s.array() + grid[g]).inverse();
      const Eigen::MatrixXd pred = kv_u * (inv.asDiagonal() * projected);
      result.errors[g] += (pred - t_valid).squaredNorm();
    }
  }
  for (double& e : result.errors) e /= static_cast<double>(n);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (result.errors[g] < result.errors[best]) best = g;
  }
  result.lambda = grid[best];
  return result;
}

}  // namespace lddr
