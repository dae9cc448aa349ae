#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairdca/common.hpp"

namespace fairdca {

// Per-column centering/scaling record. Identity means the stored design is on
// the original scale of its inputs.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    bool identity = true;
};

// Design matrix with a leading constant intercept column. feature names are
// unique; names[0] is the intercept.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
    Standardization standardization;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Prepends the intercept column to a raw feature block.
DesignMatrix make_design(const Eigen::MatrixXd& features,
                         const std::vector<std::string>& feature_names);

// Intercept-only design (used by the recalibration fits).
DesignMatrix intercept_only_design(Eigen::Index rows);

struct FittedModel {
    Eigen::VectorXd coef;  // aligned with design columns, coef[0] = intercept
    std::vector<std::string> names;
    bool converged = false;
    int iterations = 0;
    double deviance = 0.0;
    std::string variant;      // training metadata: which model recipe
    std::string weight_note;  // training metadata: where the weights came from
};

struct FitOptions {
    int max_iterations = 100;
    double step_tolerance = 1e-8;      // convergence on max |delta beta|
    double gradient_tolerance = 1e-8;  // and on the score inf-norm
    int max_halvings = 20;
    double separation_bound = 30.0;    // on the per-SD standardized scale
};

// Weighted maximum-likelihood logistic regression by iteratively reweighted
// least squares with step-halving. The weighted score equations hold to
// gradient_tolerance at every reported solution. Throws SeparationError when
// a standardized coefficient passes separation_bound and ConvergenceError
// when the iteration budget runs out.
FittedModel fit_logistic(
    const DesignMatrix& design, const Eigen::VectorXd& outcome,
    const std::optional<Eigen::VectorXd>& weights = std::nullopt,
    const std::optional<Eigen::VectorXd>& offset = std::nullopt,
    const FitOptions& options = FitOptions{});

struct LassoOptions {
    int max_outer = 200;
    int max_inner = 2000;
    double tolerance = 1e-11;  // coordinate updates, standardized scale
    double probability_clamp = 1e-9;
    double separation_bound = 30.0;
};

// L1-penalized logistic regression by coordinate descent on the working
// least-squares problem. Features are standardized internally and the
// intercept is unpenalized; reported coefficients are on the original scale.
// The objective is -(1/W) sum w_i loglik_i + penalty * sum |beta_j|.
FittedModel fit_lasso_logistic(
    const DesignMatrix& design, const Eigen::VectorXd& outcome, double penalty,
    const std::optional<Eigen::VectorXd>& weights = std::nullopt,
    const LassoOptions& options = LassoOptions{});

// Mean validation deviance over k folds for each candidate penalty; returns
// the minimizer (ties go to the larger penalty). Folds are assigned by a
// seeded shuffle, so the choice is deterministic.
double choose_lasso_penalty(const DesignMatrix& design,
                            const Eigen::VectorXd& outcome,
                            const std::vector<double>& candidates, int folds,
                            std::uint64_t seed,
                            const std::optional<Eigen::VectorXd>& weights =
                                std::nullopt);

// Linear predictor / probability for one observation. `features` excludes the
// intercept and must match the non-intercept design columns.
double linear_predictor(const FittedModel& model, std::span<const double> features);
double predict_prob(const FittedModel& model, std::span<const double> features);

// Batch versions over a feature block (rows are observations).
Eigen::VectorXd linear_predictor(const FittedModel& model,
                                 const Eigen::MatrixXd& features);
Eigen::VectorXd predict_prob(const FittedModel& model,
                             const Eigen::MatrixXd& features);

}  // namespace fairdca
