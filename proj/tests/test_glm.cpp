#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairdca/glm.hpp"
#include "fairdca/rng.hpp"

using namespace fairdca;

namespace {

// small random logistic dataset with known structure
struct TestData {
    DesignMatrix design;
    Eigen::VectorXd y;
};

TestData random_data(std::uint64_t seed, Eigen::Index n, Eigen::Index p,
                     double effect = 0.8) {
    CounterRng rng(seed, 0);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double eta = -0.4;
        for (Eigen::Index j = 0; j < p; ++j) {
            x(i, j) = rng.normal();
            eta += effect * x(i, j) * (j % 2 == 0 ? 1.0 : -0.5);
        }
        y[i] = rng.bernoulli(expit(eta)) ? 1.0 : 0.0;
    }
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
    return {make_design(x, names), y};
}

double gradient_inf_norm(const DesignMatrix& design, const Eigen::VectorXd& y,
                         const FittedModel& model,
                         const Eigen::VectorXd& weights) {
    const Eigen::VectorXd eta = design.values * model.coef;
    const Eigen::VectorXd p = eta.unaryExpr([](double v) { return expit(v); });
    return (design.values.transpose() * weights.cwiseProduct(y - p))
        .lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("intercept-only fit equals logit of the mean") {
    const Eigen::Index n = 400;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n / 4; ++i) y[i] = 1.0;  // mean 0.25
    const FittedModel m = fit_logistic(intercept_only_design(n), y);
    CHECK(m.converged);
    CHECK(m.coef[0] == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-10));
    CHECK(m.coef[0] == doctest::Approx(-1.098612288668).epsilon(1e-10));
}

TEST_CASE("weights of two equal duplicated rows") {
    const TestData data = random_data(21, 80, 4);
    const Eigen::VectorXd w2 = Eigen::VectorXd::Constant(80, 2.0);
    const FittedModel weighted = fit_logistic(data.design, data.y, w2);

    DesignMatrix doubled;
    doubled.names = data.design.names;
    doubled.values.resize(160, data.design.cols());
    doubled.values.topRows(80) = data.design.values;
    doubled.values.bottomRows(80) = data.design.values;
    Eigen::VectorXd y2(160);
    y2 << data.y, data.y;
    const FittedModel duplicated = fit_logistic(doubled, y2);

    CHECK((weighted.coef - duplicated.coef).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("perfectly separated data raises SeparationError") {
    Eigen::MatrixXd x(2, 1);
    x << -1.0, 1.0;
    Eigen::VectorXd y(2);
    y << 0.0, 1.0;
    CHECK_THROWS_AS(fit_logistic(make_design(x, {"x"}), y), SeparationError);
}

TEST_CASE("gradient optimality at every converged fit") {
    for (const std::uint64_t seed : {31ULL, 32ULL, 33ULL, 34ULL, 35ULL}) {
        const TestData data = random_data(seed, 300, 5);
        const FittedModel m = fit_logistic(data.design, data.y);
        CHECK(m.converged);
        CHECK(gradient_inf_norm(data.design, data.y, m,
                                Eigen::VectorXd::Ones(300)) < 1e-8);
    }
}

TEST_CASE("row permutation does not move the coefficients") {
    const TestData data = random_data(41, 200, 4);
    const FittedModel base = fit_logistic(data.design, data.y);

    CounterRng rng(42, 0);
    std::vector<Eigen::Index> perm(200);
    for (Eigen::Index i = 0; i < 200; ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i-- > 1;) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
    }
    DesignMatrix permuted;
    permuted.names = data.design.names;
    permuted.values.resize(200, data.design.cols());
    Eigen::VectorXd py(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
        permuted.values.row(i) = data.design.values.row(perm[i]);
        py[i] = data.y[perm[i]];
    }
    const FittedModel shuffled = fit_logistic(permuted, py);
    CHECK((base.coef - shuffled.coef).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("deviance decreases monotonically (never increases on acceptance)") {
    // indirect check: refitting from the solution cannot find a lower deviance
    const TestData data = random_data(51, 250, 3);
    const FittedModel m = fit_logistic(data.design, data.y);
    const Eigen::VectorXd eta = data.design.values * m.coef;
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < 250; ++i) {
        loglik += data.y[i] * eta[i] - log1pexp(eta[i]);
    }
    CHECK(m.deviance == doctest::Approx(-2.0 * loglik).epsilon(1e-10));
}

TEST_CASE("predict and linear_predictor") {
    const TestData data = random_data(61, 150, 2);
    FittedModel m = fit_logistic(data.design, data.y);

    // all-zero coefficients give probability one half
    FittedModel zero = m;
    zero.coef.setZero();
    CHECK(predict_prob(zero, std::vector<double>{0.3, -2.0}) == 0.5);
    CHECK(linear_predictor(zero, std::vector<double>{0.3, -2.0}) == 0.0);

    // logit and expit invert each other through the two entry points
    const std::vector<double> row{0.7, 1.3};
    CHECK(logit(predict_prob(m, row)) ==
          doctest::Approx(linear_predictor(m, row)).epsilon(1e-12));

    // hand dot product: coefficients (1,2), input (3,-1), intercept 0.5
    FittedModel hand = m;
    hand.coef << 0.5, 1.0, 2.0;
    CHECK(linear_predictor(hand, std::vector<double>{3.0, -1.0}) ==
          doctest::Approx(1.5).epsilon(1e-15));

    // linear predictor hitting logit(0.15) maps to probability 0.15
    FittedModel fixed = m;
    fixed.coef << logit(0.15), 0.0, 0.0;
    CHECK(predict_prob(fixed, row) == doctest::Approx(0.15).epsilon(1e-12));

    // an intercept-only model predicts its training mean everywhere
    Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
    for (Eigen::Index i = 0; i < 25; ++i) y[i] = 1.0;
    const FittedModel intercept = fit_logistic(intercept_only_design(100), y);
    CHECK(expit(intercept.coef[0]) == doctest::Approx(0.25).epsilon(1e-10));

    CHECK_THROWS_AS(predict_prob(m, std::vector<double>{1.0}), Error);
}

TEST_CASE("offset support: the offset shifts the intercept") {
    const Eigen::Index n = 300;
    CounterRng rng(71, 0);
    Eigen::VectorXd offset(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        offset[i] = rng.normal();
        y[i] = rng.bernoulli(expit(offset[i] - 0.5)) ? 1.0 : 0.0;
    }
    const FittedModel m =
        fit_logistic(intercept_only_design(n), y, std::nullopt, offset);
    CHECK(m.converged);
    // score equation: sum(y - expit(offset + b0)) = 0
    double score = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) score += y[i] - expit(offset[i] + m.coef[0]);
    CHECK(std::abs(score) < 1e-8);
}

TEST_CASE("lasso: full shrinkage under a huge penalty") {
    const TestData data = random_data(81, 200, 4);
    const FittedModel m = fit_lasso_logistic(data.design, data.y, 10.0);
    for (Eigen::Index j = 1; j < m.coef.size(); ++j) CHECK(m.coef[j] == 0.0);
    const double ybar = data.y.mean();
    CHECK(m.coef[0] == doctest::Approx(logit(ybar)).epsilon(1e-8));
}

TEST_CASE("lasso: zero penalty reduces to the MLE") {
    const TestData data = random_data(82, 250, 4);
    const FittedModel mle = fit_logistic(data.design, data.y);
    const FittedModel lasso = fit_lasso_logistic(data.design, data.y, 0.0);
    CHECK((mle.coef - lasso.coef).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("lasso: KKT conditions at the solution") {
    const TestData data = random_data(83, 400, 6, 0.5);
    const double penalty = 0.02;
    const FittedModel m = fit_lasso_logistic(data.design, data.y, penalty);

    // rebuild the standardized score vector (1/W) Xs^T (y - p)
    const Eigen::Index n = data.design.rows();
    const Eigen::Index p = data.design.cols();
    const Eigen::VectorXd eta = data.design.values * m.coef;
    const Eigen::VectorXd prob = eta.unaryExpr([](double v) { return expit(v); });
    const Eigen::VectorXd resid = (data.y - prob) / static_cast<double>(n);
    double worst = 0.0;
    for (Eigen::Index j = 1; j < p; ++j) {
        const double mean = data.design.values.col(j).mean();
        const double sd = std::sqrt(
            (data.design.values.col(j).array() - mean).square().sum() / n);
        const Eigen::VectorXd xs = (data.design.values.col(j).array() - mean) / sd;
        const double score = xs.dot(resid);
        // standardized coefficient decides active vs inactive
        if (m.coef[j] == 0.0) {
            worst = std::max(worst, std::abs(score) - penalty);
        } else {
            const double sign = m.coef[j] > 0.0 ? 1.0 : -1.0;
            worst = std::max(worst, std::abs(score - sign * penalty));
        }
    }
    CHECK(worst < 1e-6);
    // intercept stays unpenalized: its score is zero
    CHECK(std::abs(resid.sum()) < 1e-10);
}

TEST_CASE("lasso: activation just below the null score") {
    // single standardized feature; at the null model the score magnitude
    // bounds the activation penalty
    CounterRng rng(84, 0);
    const Eigen::Index n = 500;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y[i] = rng.bernoulli(expit(0.9 * x(i, 0))) ? 1.0 : 0.0;
    }
    const DesignMatrix design = make_design(x, {"x"});

    const double mean = x.col(0).mean();
    const double sd = std::sqrt((x.col(0).array() - mean).square().sum() / n);
    const double ybar = y.mean();
    const Eigen::VectorXd xs = (x.col(0).array() - mean) / sd;
    double null_score = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) null_score += xs[i] * (y[i] - ybar);
    null_score /= static_cast<double>(n);

    const FittedModel below =
        fit_lasso_logistic(design, y, std::abs(null_score) * 0.95);
    CHECK(below.coef[1] != 0.0);
    CHECK(below.coef[1] * null_score > 0.0);  // sign follows the score

    const FittedModel above =
        fit_lasso_logistic(design, y, std::abs(null_score) * 1.05);
    CHECK(above.coef[1] == 0.0);
}

TEST_CASE("penalty selection by cross-validation is deterministic") {
    const TestData data = random_data(85, 300, 5, 0.6);
    const std::vector<double> candidates{0.0005, 0.005, 0.05, 0.5};
    const double chosen =
        choose_lasso_penalty(data.design, data.y, candidates, 5, 99);
    const double again =
        choose_lasso_penalty(data.design, data.y, candidates, 5, 99);
    CHECK(chosen == again);
    CHECK(std::count(candidates.begin(), candidates.end(), chosen) == 1);
    // heavy shrinkage must lose to a mild penalty on informative data
    CHECK(chosen < 0.5);
}
