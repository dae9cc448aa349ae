#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairdca/metrics.hpp"
#include "fairdca/rng.hpp"

using namespace fairdca;

namespace {

// brute-force strict-above rule, the oracle for ScoreIndex / decision_curve
ConfusionCounts naive_confusion(const std::vector<double>& scores,
                                const std::vector<double>& labels, double t) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] > t;
        if (flagged && labels[i] == 1.0) c.tp += 1;
        else if (flagged) c.fp += 1;
        else if (labels[i] == 1.0) c.fn += 1;
        else c.tn += 1;
    }
    return c;
}

}  // namespace

TEST_CASE("confusion_at_threshold applies the strict above rule") {
    // perfect split
    ConfusionCounts c = confusion_at_threshold(std::vector<double>{0.2, 0.8},
                                               std::vector<double>{0.0, 1.0}, 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tn == 1);

    // all scores below the threshold: treat-no-one limit
    c = confusion_at_threshold(std::vector<double>{0.1, 0.2, 0.05},
                               std::vector<double>{1.0, 0.0, 1.0}, 0.5);
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 2);
    CHECK(c.tn == 1);

    // ties at the threshold are negative
    c = confusion_at_threshold(std::vector<double>{0.3, 0.3, 0.6},
                               std::vector<double>{1.0, 0.0, 0.0}, 0.3);
    CHECK(c.tp == 0);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
}

TEST_CASE("confusion_at_threshold input validation") {
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{},
                                           std::vector<double>{}, 0.5),
                    Error);
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{1.2},
                                           std::vector<double>{1.0}, 0.5),
                    Error);
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{0.2},
                                           std::vector<double>{2.0}, 0.5),
                    Error);
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{0.2},
                                           std::vector<double>{0.0}, 1.0),
                    Error);
    CHECK_THROWS_AS(confusion_at_threshold(std::vector<double>{0.2},
                                           std::vector<double>{0.0}, 0.0),
                    Error);
}

TEST_CASE("net_benefit") {
    // treat-no-one gives exactly zero for any threshold
    CHECK(net_benefit(ConfusionCounts{0, 0, 7, 13}, 0.37) == 0.0);
    // hand evaluation
    CHECK(net_benefit(ConfusionCounts{30, 70, 70, 830}, 0.15) ==
          doctest::Approx(0.03 - (0.15 / 0.85) * 0.07).epsilon(1e-12));
    CHECK(net_benefit(ConfusionCounts{30, 70, 70, 830}, 0.15) ==
          doctest::Approx(0.017647058824).epsilon(1e-9));
    // treat-all vanishes at t = prevalence
    const ConfusionCounts all{100, 900, 0, 0};  // pi = 0.1
    CHECK(net_benefit(all, 0.1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(net_benefit(all, 1.0), Error);
    CHECK_THROWS_AS(net_benefit(ConfusionCounts{0, 0, 0, 0}, 0.2), Error);
}

TEST_CASE("subgroup_net_benefit") {
    // treat-no-one equals 1 - prevalence exactly, for any lambda
    const double n = 10000;
    ConfusionCounts none{0, 0, 0.062 * n, (1 - 0.062) * n};
    CHECK(subgroup_net_benefit(none, 0.58, 0.15) == 0.938);
    CHECK(per_ten_thousand(subgroup_net_benefit(none, 0.58, 0.15)) == 9380);

    ConfusionCounts none_lung{0, 0, 0.0067 * n, (1 - 0.0067) * n};
    CHECK(subgroup_net_benefit(none_lung, 0.20, 0.015) ==
          doctest::Approx(0.9933).epsilon(1e-12));
    CHECK(per_ten_thousand(subgroup_net_benefit(none_lung, 0.20, 0.015)) == 9933);

    // a fully effective treatment catching every case: fully unburdened
    ConfusionCounts perfect{250, 0, 0, 750};
    CHECK(subgroup_net_benefit(perfect, 1.0, 0.15) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(subgroup_net_benefit(none, -0.1, 0.15), Error);
    CHECK_THROWS_AS(subgroup_net_benefit(ConfusionCounts{}, 1.0, 0.15), Error);
}

TEST_CASE("sNB marginal effects are lambda/n and lambda*t/((1-t)n)") {
    CounterRng rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const double tp = static_cast<double>(rng.below(50));
        const double fp = static_cast<double>(rng.below(50));
        const double fn = 1.0 + static_cast<double>(rng.below(50));
        const double tn = 1.0 + static_cast<double>(rng.below(50));
        const double lambda = rng.uniform01() * 1.5;
        const double t = 0.01 + 0.9 * rng.uniform01();
        const ConfusionCounts base{tp, fp, fn, tn};
        const double n = base.n();
        const double snb = subgroup_net_benefit(base, lambda, t);

        const ConfusionCounts fn_to_tp{tp + 1, fp, fn - 1, tn};
        CHECK(subgroup_net_benefit(fn_to_tp, lambda, t) - snb ==
              doctest::Approx(lambda / n).epsilon(1e-10));

        const ConfusionCounts tn_to_fp{tp, fp + 1, fn, tn - 1};
        CHECK(subgroup_net_benefit(tn_to_fp, lambda, t) - snb ==
              doctest::Approx(-lambda * t / ((1.0 - t) * n)).epsilon(1e-10));
    }
}

TEST_CASE("sNB bounds are attained by the all-flagged extremes") {
    CounterRng rng(12, 0);
    for (int trial = 0; trial < 500; ++trial) {
        const double pos = 1.0 + static_cast<double>(rng.below(100));
        const double neg = 1.0 + static_cast<double>(rng.below(100));
        const double tp = std::floor(rng.uniform01() * (pos + 1.0));
        const double fp = std::floor(rng.uniform01() * (neg + 1.0));
        const double lambda = rng.uniform01();
        const double t = 0.02 + 0.9 * rng.uniform01();
        const ConfusionCounts c{tp, fp, pos - tp, neg - fp};
        const double n = c.n();
        const double pi = pos / n;
        const double snb = subgroup_net_benefit(c, lambda, t);
        const double upper = 1.0 - pi + lambda * pi;
        const double lower =
            1.0 - pi - lambda * (t / (1.0 - t)) * (1.0 - pi);
        CHECK(snb <= upper + 1e-12);
        CHECK(snb >= lower - 1e-12);
        CHECK(upper <= 1.0 + 1e-12);
        // extremes
        CHECK(subgroup_net_benefit(ConfusionCounts{pos, 0, 0, neg}, lambda, t) ==
              doctest::Approx(upper).epsilon(1e-12));
        CHECK(subgroup_net_benefit(ConfusionCounts{0, neg, pos, 0}, lambda, t) ==
              doctest::Approx(lower).epsilon(1e-12));
    }
}

TEST_CASE("lambda_from_utilities") {
    CHECK(lambda_from_utilities(UtilitySpec{1, 0, 0, 1}) == 1.0);
    CHECK(lambda_from_utilities(UtilitySpec{0.4, 0, 0.4, 1}) == 0.0);
    CHECK(lambda_from_utilities(UtilitySpec{0.79, 0, 0.50, 1}) ==
          doctest::Approx(0.58).epsilon(1e-12));
    CHECK_THROWS_AS(lambda_from_utilities(UtilitySpec{1, 0, 1, 0.5}), Error);
}

TEST_CASE("lambda_from_rrr") {
    CHECK(lambda_from_rrr(ProxyRisk{0.50, 0.21}) ==
          doctest::Approx(0.58).epsilon(1e-12));
    CHECK(lambda_from_rrr(ProxyRisk{0.3, 0.3}) == 0.0);
    CHECK(lambda_from_rrr(ProxyRisk{0.3, 0.0}) == 1.0);
    CHECK_THROWS_AS(lambda_from_rrr(ProxyRisk{0.0, 0.0}), Error);
    CHECK_THROWS_AS(lambda_from_rrr(ProxyRisk{0.2, 0.5}), Error);
}

TEST_CASE("optimal_threshold") {
    CHECK(optimal_threshold(UtilitySpec{2, 0.5, 1, 1.5}) == 0.5);
    CHECK(optimal_threshold(UtilitySpec{9.5, 0, 0.5, 1}) ==
          doctest::Approx(0.1).epsilon(1e-14));
    // (d - b)/(a - c) = 3/17 puts the optimum at 15%
    CHECK(optimal_threshold(UtilitySpec{17.0 / 3.0 + 1.0, 0, 1.0, 1.0}) ==
          doctest::Approx(0.15).epsilon(1e-12));
    CHECK_THROWS_AS(optimal_threshold(UtilitySpec{1, 0, 2, 1}), Error);
    CHECK_THROWS_AS(optimal_threshold(UtilitySpec{1, 1, 0, 0.5}), Error);
}

TEST_CASE("balance identity holds at the optimum") {
    CounterRng rng(13, 0);
    for (int trial = 0; trial < 500; ++trial) {
        const double c = rng.uniform01();
        const double a = c + 0.05 + 2.0 * rng.uniform01();
        const double d = c + 0.05 + 2.0 * rng.uniform01();
        const double b = d - 0.05 - 2.0 * rng.uniform01();
        const double t = optimal_threshold(UtilitySpec{a, b, c, d});
        CHECK(t > 0.0);
        CHECK(t < 1.0);
        CHECK(a * t + b * (1 - t) ==
              doctest::Approx(c * t + d * (1 - t)).epsilon(1e-12));
    }
}

TEST_CASE("aggregate_snb") {
    const auto group = [](const char* id, double n, double snb) {
        GroupSummary g;
        g.group_id = id;
        g.counts = ConfusionCounts{0, 0, n / 2, n / 2};
        g.snb = snb;
        return g;
    };
    CHECK(aggregate_snb({group("a", 100, 0.91)}) == 0.91);
    CHECK(aggregate_snb({group("a", 500, 0.9), group("b", 500, 1.0)}) ==
          doctest::Approx(0.95).epsilon(1e-15));
    CHECK(aggregate_snb({group("a", 1000, 0.80), group("b", 3000, 1.00)}) ==
          doctest::Approx(0.95).epsilon(1e-15));
    CHECK_THROWS_AS(aggregate_snb({}), Error);
}

TEST_CASE("collapsibility over random partitions") {
    CounterRng rng(14, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_groups = 2 + rng.below(5);
        std::vector<GroupSummary> groups;
        double pooled_pos = 0.0, pooled_n = 0.0, pooled_benefit = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double tp = static_cast<double>(rng.below(200));
            const double fp = static_cast<double>(rng.below(200));
            const double fn = static_cast<double>(rng.below(200));
            const double tn = 1.0 + static_cast<double>(rng.below(200));
            const double lambda = rng.uniform01() * 1.2;
            const double t = 0.02 + 0.9 * rng.uniform01();
            GroupSummary s;
            s.group_id = "g" + std::to_string(g);
            s.counts = ConfusionCounts{tp, fp, fn, tn};
            s.lambda = lambda;
            s.t_star = t;
            s.snb = subgroup_net_benefit(s.counts, lambda, t);
            pooled_pos += tp + fn;
            pooled_n += s.counts.n();
            pooled_benefit += lambda * (tp - t / (1.0 - t) * fp);
            groups.push_back(std::move(s));
        }
        // the population quantity computed without per-group sNB values
        const double pooled =
            1.0 - pooled_pos / pooled_n + pooled_benefit / pooled_n;
        CHECK(std::abs(aggregate_snb(groups) - pooled) < 1e-12);
    }
}

TEST_CASE("ranking by utility equals ranking by sNB") {
    // utilities on a 1/64 grid make the utility comparison exact in doubles
    CounterRng rng(15, 0);
    const double n = 1000.0, pos = 300.0, neg = 700.0;
    for (int trial = 0; trial < 200; ++trial) {
        const double c = static_cast<double>(rng.below(64)) / 64.0;
        const double a = c + static_cast<double>(1 + rng.below(128)) / 64.0;
        const double d = c + static_cast<double>(1 + rng.below(128)) / 64.0;
        const double b = d - static_cast<double>(1 + rng.below(128)) / 64.0;
        const UtilitySpec u{a, b, c, d};
        const double t_star = optimal_threshold(u);
        const double lambda = lambda_from_utilities(u);

        const auto utility = [&](double tp, double fp) {
            const double fn = pos - tp;
            const double tn = neg - fp;
            return (a * tp + b * fp + c * fn + d * tn) / n;
        };
        const auto snb = [&](double tp, double fp) {
            return subgroup_net_benefit(ConfusionCounts{tp, fp, pos - tp, neg - fp},
                                        lambda, t_star);
        };
        const double tp1 = static_cast<double>(rng.below(301));
        const double fp1 = static_cast<double>(rng.below(701));
        const double tp2 = static_cast<double>(rng.below(301));
        const double fp2 = static_cast<double>(rng.below(701));
        const double du = utility(tp1, fp1) - utility(tp2, fp2);
        const double ds = snb(tp1, fp1) - snb(tp2, fp2);
        if (du == 0.0) {
            CHECK(std::abs(ds) < 1e-12);
        } else {
            CHECK(du * ds > 0.0);
        }
    }
}

TEST_CASE("ScoreIndex equals the naive rule everywhere") {
    CounterRng rng(16, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<double> scores(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            // deliberately coarse scores to force ties
            scores[i] = static_cast<double>(rng.below(12)) / 11.0;
            labels[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
        }
        const ScoreIndex index(scores, labels);
        for (const double t : {0.05, 1.0 / 11.0, 0.3, 0.5, 10.0 / 11.0, 0.99}) {
            const ConfusionCounts fast = index.at(t);
            const ConfusionCounts slow = naive_confusion(scores, labels, t);
            CHECK(fast.tp == slow.tp);
            CHECK(fast.fp == slow.fp);
            CHECK(fast.fn == slow.fn);
            CHECK(fast.tn == slow.tn);
        }
    }
}

TEST_CASE("decision_curve reference series") {
    const std::vector<double> grid = threshold_grid(0.001, 0.30, 0.001);
    CHECK(grid.size() == 300);

    // a model that outputs the true label as its score is worth pi everywhere
    std::vector<double> labels;
    for (int i = 0; i < 200; ++i) labels.push_back(i % 10 == 0 ? 1.0 : 0.0);
    const DecisionCurve curve = decision_curve(labels, labels, grid);
    const double pi = 20.0 / 200.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(curve.nb_treat_none[i] == 0.0);
        CHECK(curve.nb_model[i] == doctest::Approx(pi).epsilon(1e-12));
        CHECK(curve.nb_treat_all[i] ==
              doctest::Approx(pi - grid[i] / (1.0 - grid[i]) * (1.0 - pi))
                  .epsilon(1e-12));
    }
    // treat-all tends to pi as t goes to zero
    CHECK(std::abs(curve.nb_treat_all.front() - pi) < 2e-3);

    // lambda scales the model series only
    const DecisionCurve scaled = decision_curve(labels, labels, grid, 0.58);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(scaled.nb_model[i] ==
              doctest::Approx(0.58 * curve.nb_model[i]).epsilon(1e-12));
        CHECK(scaled.nb_treat_all[i] == curve.nb_treat_all[i]);
    }

    CHECK_THROWS_AS(decision_curve(labels, labels, {0.2, 0.1}), Error);
    CHECK_THROWS_AS(decision_curve(labels, labels, {}), Error);
}

TEST_CASE("decision_curve matches the op-by-op composition") {
    CounterRng rng(17, 0);
    const std::size_t n = 500;
    std::vector<double> scores(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform01();
        labels[i] = rng.bernoulli(0.25) ? 1.0 : 0.0;
    }
    const std::vector<double> grid = threshold_grid(0.01, 0.9, 0.037);
    const DecisionCurve curve = decision_curve(scores, labels, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ConfusionCounts c = confusion_at_threshold(scores, labels, grid[i]);
        CHECK(curve.nb_model[i] == net_benefit(c, grid[i]));
    }
}

TEST_CASE("gap_report") {
    // feeding the published per-10k values reproduces the gap reduction of 48
    const GapReport baseline =
        gap_report({{"White", 9801.0}, {"Asian", 9380.0}}, "White");
    const GapReport with_model =
        gap_report({{"White", 9808.0}, {"Asian", 9435.0}}, "White");
    CHECK(baseline.max_minus_min == 421.0);
    CHECK(with_model.max_minus_min == 373.0);
    CHECK(baseline.max_minus_min - with_model.max_minus_min == 48.0);
    CHECK(baseline.gap_vs_reference.at("Asian") == 421.0);
    CHECK(baseline.gap_vs_reference.at("White") == 0.0);

    const GapReport equal = gap_report({{"a", 0.95}, {"b", 0.95}}, "a");
    CHECK(equal.max_minus_min == 0.0);
    CHECK(equal.mean_gap_vs_reference == 0.0);

    const GapReport three =
        gap_report({{"a", 1.0}, {"b", 0.9}, {"c", 0.8}}, "a");
    CHECK(three.mean_gap_vs_reference == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(three.max_minus_min == doctest::Approx(0.2).epsilon(1e-15));

    CHECK_THROWS_AS(gap_report({{"a", 1.0}}, "a"), Error);
    CHECK_THROWS_AS(gap_report({{"a", 1.0}, {"b", 0.9}}, "zzz"), Error);
}

TEST_CASE("PerGroup lookup") {
    const PerGroup uniform(0.58);
    CHECK(uniform.at("anything") == 0.58);
    const PerGroup mixed(std::map<std::string, double>{{"Q5", 0.015}}, 0.10);
    CHECK(mixed.at("Q5") == 0.015);
    CHECK(mixed.at("Q1") == 0.10);
    const PerGroup strict(std::map<std::string, double>{{"Q5", 0.015}});
    CHECK_THROWS_AS(strict.at("Q1"), Error);
}

TEST_CASE("per_ten_thousand rounds to the published unit") {
    CHECK(per_ten_thousand(0.938) == 9380);
    CHECK(per_ten_thousand(0.95719) == 9572);
    CHECK(per_ten_thousand(0.0048) == 48);
}
