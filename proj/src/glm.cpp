#include "fairdca/glm.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fairdca/rng.hpp"

namespace fairdca {

namespace {

void check_design(const DesignMatrix& design) {
    if (design.rows() < 1 || design.cols() < 1) {
        throw Error("design: empty design matrix");
    }
    if (design.names.size() != static_cast<std::size_t>(design.cols())) {
        throw Error("design: name count does not match columns");
    }
    std::set<std::string> unique(design.names.begin(), design.names.end());
    if (unique.size() != design.names.size()) {
        throw Error("design: duplicate column names");
    }
    if (!design.values.allFinite()) throw Error("design: non-finite value");
    if ((design.values.col(0).array() != 1.0).any()) {
        throw Error("design: first column must be the constant intercept");
    }
}

void check_outcome(const Eigen::VectorXd& y, Eigen::Index rows) {
    if (y.size() != rows) throw Error("fit: outcome length mismatch");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw Error("fit: non-binary outcome at row " + std::to_string(i));
        }
    }
}

Eigen::VectorXd checked_weights(const std::optional<Eigen::VectorXd>& weights,
                                Eigen::Index rows) {
    if (!weights) return Eigen::VectorXd::Ones(rows);
    if (weights->size() != rows) throw Error("fit: weight length mismatch");
    if ((weights->array() < 0.0).any()) {
        throw Error("fit: negative weight");
    }
    if (!(weights->sum() > 0.0)) throw Error("fit: weights sum to zero");
    return *weights;
}

Eigen::VectorXd checked_offset(const std::optional<Eigen::VectorXd>& offset,
                               Eigen::Index rows) {
    if (!offset) return Eigen::VectorXd::Zero(rows);
    if (offset->size() != rows) throw Error("fit: offset length mismatch");
    if (!offset->allFinite()) throw Error("fit: non-finite offset");
    return *offset;
}

// Sample SD per column; the intercept gets 1 and other constant columns 0.
Eigen::VectorXd column_scales(const Eigen::MatrixXd& x) {
    const double n = static_cast<double>(x.rows());
    Eigen::VectorXd scales(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().sum() / n;
        scales[j] = std::sqrt(std::max(var, 0.0));
        if (scales[j] == 0.0 && j == 0) scales[j] = 1.0;
    }
    return scales;
}

double weighted_deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w) {
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        loglik += w[i] * (y[i] * eta[i] - log1pexp(eta[i]));
    }
    return -2.0 * loglik;
}

double soft_threshold(double value, double gamma) {
    if (value > gamma) return value - gamma;
    if (value < -gamma) return value + gamma;
    return 0.0;
}

}  // namespace

DesignMatrix make_design(const Eigen::MatrixXd& features,
                         const std::vector<std::string>& feature_names) {
    if (static_cast<std::size_t>(features.cols()) != feature_names.size()) {
        throw Error("make_design: name count does not match feature columns");
    }
    DesignMatrix d;
    d.values.resize(features.rows(), features.cols() + 1);
    d.values.col(0).setOnes();
    if (features.cols() > 0) d.values.rightCols(features.cols()) = features;
    d.names.reserve(feature_names.size() + 1);
    d.names.emplace_back("(intercept)");
    d.names.insert(d.names.end(), feature_names.begin(), feature_names.end());
    check_design(d);
    return d;
}

DesignMatrix intercept_only_design(Eigen::Index rows) {
    DesignMatrix d;
    d.values = Eigen::MatrixXd::Ones(rows, 1);
    d.names = {"(intercept)"};
    return d;
}

FittedModel fit_logistic(const DesignMatrix& design, const Eigen::VectorXd& y,
                         const std::optional<Eigen::VectorXd>& weights,
                         const std::optional<Eigen::VectorXd>& offset,
                         const FitOptions& options) {
    check_design(design);
    const Eigen::MatrixXd& x = design.values;
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    check_outcome(y, n);
    const Eigen::VectorXd w = checked_weights(weights, n);
    const Eigen::VectorXd off = checked_offset(offset, n);
    const Eigen::VectorXd scales = column_scales(x);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = off;
    double dev = weighted_deviance(eta, y, w);
    double last_step = std::numeric_limits<double>::infinity();
    int accepted = 0;
    bool converged = false;

    for (int pass = 0; pass < options.max_iterations; ++pass) {
        const Eigen::VectorXd prob = eta.unaryExpr([](double v) { return expit(v); });
        const Eigen::VectorXd grad = x.transpose() * (w.cwiseProduct(y - prob));
        if (last_step < options.step_tolerance &&
            grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            converged = true;
            break;
        }
        const Eigen::VectorXd working =
            w.cwiseProduct(prob.cwiseProduct(Eigen::VectorXd::Ones(n) - prob));
        const Eigen::MatrixXd info = x.transpose() * working.asDiagonal() * x;
        const Eigen::VectorXd delta = info.ldlt().solve(grad);
        if (!delta.allFinite()) {
            throw ConvergenceError("fit_logistic: singular information matrix");
        }

        double step = 1.0;
        bool step_ok = false;
        Eigen::VectorXd beta_new, eta_new;
        double dev_new = dev;
        for (int h = 0; h <= options.max_halvings; ++h) {
            beta_new = beta + step * delta;
            eta_new = x * beta_new + off;
            dev_new = weighted_deviance(eta_new, y, w);
            if (std::isfinite(dev_new) &&
                dev_new <= dev + 1e-10 * (1.0 + std::abs(dev))) {
                step_ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!step_ok) {
            throw ConvergenceError(
                "fit_logistic: step halving failed to reduce the deviance");
        }
        last_step = (step * delta).lpNorm<Eigen::Infinity>();
        beta = beta_new;
        eta = eta_new;
        dev = dev_new;
        ++accepted;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (scales[j] > 0.0 &&
                std::abs(beta[j]) * scales[j] > options.separation_bound) {
                throw SeparationError(
                    "fit_logistic: coefficient for '" + design.names[static_cast<std::size_t>(j)] +
                    "' diverged (quasi-complete separation)");
            }
        }
    }
    if (!converged) {
        throw ConvergenceError("fit_logistic: no convergence in " +
                               std::to_string(options.max_iterations) +
                               " iterations");
    }

    FittedModel model;
    model.coef = beta;
    model.names = design.names;
    model.converged = true;
    model.iterations = accepted;
    model.deviance = dev;
    return model;
}

FittedModel fit_lasso_logistic(const DesignMatrix& design,
                               const Eigen::VectorXd& y, double penalty,
                               const std::optional<Eigen::VectorXd>& weights,
                               const LassoOptions& options) {
    check_design(design);
    if (!(penalty >= 0.0)) throw Error("fit_lasso_logistic: negative penalty");
    const Eigen::MatrixXd& x = design.values;
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    check_outcome(y, n);
    const Eigen::VectorXd w = checked_weights(weights, n);
    const double wsum = w.sum();
    const Eigen::VectorXd wn = w / wsum;  // normalized weights

    // Weighted standardization of the non-intercept columns; constant columns
    // are dropped from the optimization and keep a zero coefficient.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
    std::vector<bool> active(static_cast<std::size_t>(p), true);
    Eigen::MatrixXd xs = x;
    for (Eigen::Index j = 1; j < p; ++j) {
        mean[j] = wn.dot(x.col(j));
        const double var = wn.dot((x.col(j).array() - mean[j]).square().matrix());
        scale[j] = std::sqrt(std::max(var, 0.0));
        if (scale[j] > 0.0) {
            xs.col(j) = (x.col(j).array() - mean[j]) / scale[j];
        } else {
            xs.col(j).setZero();
            active[static_cast<std::size_t>(j)] = false;
        }
    }

    const double ybar =
        std::clamp(wn.dot(y), 1e-12, 1.0 - 1e-12);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = logit(ybar);
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, beta[0]);

    bool converged = false;
    int outer = 0;
    for (; outer < options.max_outer; ++outer) {
        // quadratic approximation at the current linear predictor
        Eigen::VectorXd prob = eta.unaryExpr([](double v) { return expit(v); });
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = std::clamp(prob[i], options.probability_clamp,
                                 1.0 - options.probability_clamp);
        }
        const Eigen::VectorXd vw =
            wn.cwiseProduct(prob.cwiseProduct(Eigen::VectorXd::Ones(n) - prob));
        Eigen::VectorXd residual(n);  // z - eta where z is the working response
        for (Eigen::Index i = 0; i < n; ++i) {
            residual[i] = (y[i] - prob[i]) / (prob[i] * (1.0 - prob[i]));
        }
        Eigen::VectorXd denom(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            denom[j] = vw.dot(xs.col(j).cwiseProduct(xs.col(j)));
        }

        double outer_change = 0.0;
        for (int inner = 0; inner < options.max_inner; ++inner) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                if (!(denom[j] > 0.0)) continue;
                const double rho =
                    vw.dot(xs.col(j).cwiseProduct(residual)) + beta[j] * denom[j];
                const double updated =
                    (j == 0) ? rho / denom[j]
                             : soft_threshold(rho, penalty) / denom[j];
                const double change = updated - beta[j];
                if (change != 0.0) {
                    residual -= xs.col(j) * change;
                    beta[j] = updated;
                    max_change = std::max(max_change, std::abs(change));
                }
            }
            outer_change = std::max(outer_change, max_change);
            if (max_change < options.tolerance) break;
        }
        eta = xs * beta;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::abs(beta[j]) > options.separation_bound) {
                throw SeparationError(
                    "fit_lasso_logistic: coefficient diverged "
                    "(quasi-complete separation)");
            }
        }
        if (outer_change < 10.0 * options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw ConvergenceError("fit_lasso_logistic: coordinate descent did not "
                               "converge");
    }

    // back to the original scale
    FittedModel model;
    model.coef = Eigen::VectorXd::Zero(p);
    double intercept_shift = 0.0;
    for (Eigen::Index j = 1; j < p; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        model.coef[j] = beta[j] / scale[j];
        intercept_shift += beta[j] * mean[j] / scale[j];
    }
    model.coef[0] = beta[0] - intercept_shift;
    model.names = design.names;
    model.converged = true;
    model.iterations = outer + 1;
    model.deviance = weighted_deviance(x * model.coef, y, w);
    return model;
}

double choose_lasso_penalty(const DesignMatrix& design,
                            const Eigen::VectorXd& y,
                            const std::vector<double>& candidates, int folds,
                            std::uint64_t seed,
                            const std::optional<Eigen::VectorXd>& weights) {
    check_design(design);
    if (candidates.empty()) throw Error("choose_lasso_penalty: no candidates");
    for (double c : candidates) {
        if (!(c >= 0.0)) throw Error("choose_lasso_penalty: negative candidate");
    }
    const Eigen::Index n = design.rows();
    if (folds < 2 || folds > n) {
        throw Error("choose_lasso_penalty: fold count must lie in [2, n]");
    }
    const Eigen::VectorXd w = checked_weights(weights, n);

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed, 0);
    for (std::size_t i = order.size(); i-- > 1;) {
        std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
    }

    double best_penalty = candidates.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (const double penalty : candidates) {
        double loss = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < order.size(); ++i) {
                (static_cast<int>(i) % folds == f ? test : train).push_back(order[i]);
            }
            DesignMatrix dtrain;
            dtrain.names = design.names;
            dtrain.values.resize(static_cast<Eigen::Index>(train.size()), design.cols());
            Eigen::VectorXd ytrain(static_cast<Eigen::Index>(train.size()));
            Eigen::VectorXd wtrain(static_cast<Eigen::Index>(train.size()));
            for (std::size_t k = 0; k < train.size(); ++k) {
                dtrain.values.row(static_cast<Eigen::Index>(k)) =
                    design.values.row(static_cast<Eigen::Index>(train[k]));
                ytrain[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(train[k])];
                wtrain[static_cast<Eigen::Index>(k)] = w[static_cast<Eigen::Index>(train[k])];
            }
            const FittedModel model =
                fit_lasso_logistic(dtrain, ytrain, penalty, wtrain);
            for (const std::size_t i : test) {
                const Eigen::Index row = static_cast<Eigen::Index>(i);
                const double eta = design.values.row(row).dot(model.coef);
                loss += -2.0 * w[row] * (y[row] * eta - log1pexp(eta));
            }
        }
        // ties go to the larger (sparser) penalty
        if (loss < best_loss - 1e-12 ||
            (std::abs(loss - best_loss) <= 1e-12 && penalty > best_penalty)) {
            best_loss = loss;
            best_penalty = penalty;
        }
    }
    return best_penalty;
}

double linear_predictor(const FittedModel& model,
                        std::span<const double> features) {
    if (static_cast<Eigen::Index>(features.size()) + 1 != model.coef.size()) {
        throw Error("linear_predictor: feature dimension mismatch");
    }
    double eta = model.coef[0];
    for (std::size_t j = 0; j < features.size(); ++j) {
        eta += model.coef[static_cast<Eigen::Index>(j + 1)] * features[j];
    }
    return eta;
}

double predict_prob(const FittedModel& model, std::span<const double> features) {
    return expit(linear_predictor(model, features));
}

Eigen::VectorXd linear_predictor(const FittedModel& model,
                                 const Eigen::MatrixXd& features) {
    if (features.cols() + 1 != model.coef.size()) {
        throw Error("linear_predictor: feature dimension mismatch");
    }
    return (features * model.coef.tail(features.cols())).array() + model.coef[0];
}

Eigen::VectorXd predict_prob(const FittedModel& model,
                             const Eigen::MatrixXd& features) {
    return linear_predictor(model, features)
        .unaryExpr([](double v) { return expit(v); });
}

}  // namespace fairdca
