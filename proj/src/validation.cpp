#include "fairdca/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairdca/glm.hpp"

namespace fairdca {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_binary(std::span<const double> labels, const char* who) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw Error(std::string(who) + ": non-binary label at row " +
                        std::to_string(i));
        }
    }
}

}  // namespace

double c_statistic(std::span<const double> scores,
                   std::span<const double> labels) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw Error("c_statistic: empty input or length mismatch");
    }
    check_binary(labels, "c_statistic");
    for (const double s : scores) {
        if (!std::isfinite(s)) throw Error("c_statistic: non-finite score");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    double positives = 0.0;
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // midrank of the tie block [i, j), 1-based
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1.0) {
                positives += 1.0;
                rank_sum += midrank;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) {
        throw Error("c_statistic: needs both outcome classes");
    }
    return (rank_sum - positives * (positives + 1.0) / 2.0) /
           (positives * negatives);
}

std::pair<double, double> calibration_slope_intercept(
    std::span<const double> linear_predictors, std::span<const double> labels) {
    if (linear_predictors.empty() ||
        linear_predictors.size() != labels.size()) {
        throw Error("calibration: empty input or length mismatch");
    }
    check_binary(labels, "calibration");
    const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
    Eigen::VectorXd lp(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = linear_predictors[static_cast<std::size_t>(i)];
        if (!std::isfinite(v)) throw Error("calibration: non-finite predictor");
        lp[i] = v;
        y[i] = labels[static_cast<std::size_t>(i)];
    }

    DesignMatrix slope_design = make_design(lp, {"linear_predictor"});
    const FittedModel slope_fit = fit_logistic(slope_design, y);

    const DesignMatrix offset_design = intercept_only_design(n);
    const FittedModel intercept_fit =
        fit_logistic(offset_design, y, std::nullopt, lp);

    return {slope_fit.coef[1], intercept_fit.coef[0]};
}

MetricSet compute_metrics(const RiskScorer& scorer, const Cohort& cohort,
                          const SnbSettings& settings) {
    const std::vector<double> scores = scorer.score(cohort);
    const std::vector<double> lp = scorer.linear(cohort);

    MetricSet m;
    m.c_statistic = c_statistic(scores, cohort.outcome);
    std::tie(m.calibration_slope, m.calibration_intercept) =
        calibration_slope_intercept(lp, cohort.outcome);

    std::vector<GroupSummary> summaries;
    for (const auto& [label, rows] : cohort.rows_by_group()) {
        std::vector<double> gs, gy;
        gs.reserve(rows.size());
        gy.reserve(rows.size());
        for (const std::size_t i : rows) {
            gs.push_back(scores[i]);
            gy.push_back(cohort.outcome[i]);
        }
        const double lambda = settings.lambda.at(label);
        const double t_star = settings.t_star.at(label);
        GroupSummary summary;
        summary.group_id = label;
        summary.counts = confusion_at_threshold(gs, gy, t_star);
        summary.lambda = lambda;
        summary.t_star = t_star;
        summary.policy_threshold = t_star;
        summary.snb = subgroup_net_benefit(summary.counts, lambda, t_star);
        m.snb_by_group[label] = summary.snb;
        summaries.push_back(std::move(summary));
    }
    m.overall_snb = aggregate_snb(summaries);
    return m;
}

std::vector<std::string> metric_keys(const std::vector<std::string>& groups) {
    std::vector<std::string> keys = {"c_statistic", "calibration_slope",
                                     "calibration_intercept", "snb_overall"};
    for (const auto& g : groups) keys.push_back("snb:" + g);
    return keys;
}

std::vector<double> flatten_metrics(const MetricSet& metrics,
                                    const std::vector<std::string>& groups) {
    std::vector<double> values = {metrics.c_statistic, metrics.calibration_slope,
                                  metrics.calibration_intercept,
                                  metrics.overall_snb};
    for (const auto& g : groups) {
        const auto it = metrics.snb_by_group.find(g);
        values.push_back(it == metrics.snb_by_group.end() ? kNaN : it->second);
    }
    return values;
}

MetricSet unflatten_metrics(const std::vector<double>& values,
                            const std::vector<std::string>& groups) {
    if (values.size() != 4 + groups.size()) {
        throw Error("unflatten_metrics: size mismatch");
    }
    MetricSet m;
    m.c_statistic = values[0];
    m.calibration_slope = values[1];
    m.calibration_intercept = values[2];
    m.overall_snb = values[3];
    for (std::size_t g = 0; g < groups.size(); ++g) {
        m.snb_by_group[groups[g]] = values[4 + g];
    }
    return m;
}

ReplicateStudy replicate_study(
    const Cohort& cohort, const Trainer& trainer,
    const std::function<std::vector<double>(const RiskScorer&, const Cohort&)>&
        evaluate,
    const BootstrapOptions& options) {
    cohort.validate();
    if (options.replicates < 1) {
        throw Error("replicate_study: needs at least one replicate");
    }
    const auto original = trainer(cohort);
    ReplicateStudy study;
    study.apparent = evaluate(*original, cohort);
    const std::size_t width = study.apparent.size();

    const std::size_t B = static_cast<std::size_t>(options.replicates);
    study.boot_values.assign(B, {});
    study.orig_values.assign(B, {});
    study.ok.assign(B, false);

    parallel_for(B, options.workers, [&](std::size_t b) {
        CounterRng rng(options.seed, static_cast<std::uint64_t>(b) + 1);
        const std::vector<std::size_t> idx =
            options.resampler ? options.resampler(cohort, rng)
            : options.stratified ? stratified_bootstrap_indices(cohort, rng)
                                 : bootstrap_indices(cohort.size(), rng);
        try {
            const Cohort boot = subset(cohort, idx);
            const auto scorer = trainer(boot);
            std::vector<double> bv = evaluate(*scorer, boot);
            std::vector<double> ov = evaluate(*scorer, cohort);
            if (bv.size() != width || ov.size() != width) {
                throw Error("replicate statistic changed dimension");
            }
            study.boot_values[b] = std::move(bv);
            study.orig_values[b] = std::move(ov);
            study.ok[b] = true;
        } catch (const std::exception&) {
            study.ok[b] = false;
        }
    });

    study.skipped = static_cast<int>(
        std::count(study.ok.begin(), study.ok.end(), false));
    if (study.skipped >
        options.max_skip_fraction * static_cast<double>(options.replicates)) {
        throw Error("bootstrap: " + std::to_string(study.skipped) + " of " +
                    std::to_string(options.replicates) +
                    " replicates failed (above the skip budget)");
    }
    return study;
}

VectorOptimism optimism_corrected_values(
    const Cohort& cohort, const Trainer& trainer,
    const std::function<std::vector<double>(const RiskScorer&, const Cohort&)>&
        evaluate,
    const BootstrapOptions& options) {
    const ReplicateStudy study =
        replicate_study(cohort, trainer, evaluate, options);

    const std::size_t width = study.apparent.size();
    VectorOptimism out;
    out.apparent = study.apparent;
    out.optimism.assign(width, 0.0);
    out.corrected.assign(width, kNaN);
    out.valid.assign(width, 0);
    out.ci.assign(width, Interval{kNaN, kNaN, options.ci_level});
    out.skipped = study.skipped;
    out.replicates = options.replicates;

    std::vector<std::vector<double>> corrected_draws(width);
    for (std::size_t b = 0; b < study.ok.size(); ++b) {
        if (!study.ok[b]) continue;
        for (std::size_t k = 0; k < width; ++k) {
            const double delta = study.boot_values[b][k] - study.orig_values[b][k];
            if (!std::isfinite(delta)) continue;
            out.optimism[k] += delta;
            ++out.valid[k];
            corrected_draws[k].push_back(study.apparent[k] - delta);
        }
    }
    const double alpha = (1.0 - options.ci_level) / 2.0;
    for (std::size_t k = 0; k < width; ++k) {
        out.optimism[k] = out.valid[k] > 0 ? out.optimism[k] / out.valid[k] : kNaN;
        out.corrected[k] = out.apparent[k] - out.optimism[k];
        if (!corrected_draws[k].empty()) {
            std::sort(corrected_draws[k].begin(), corrected_draws[k].end());
            out.ci[k] = Interval{quantile_sorted(corrected_draws[k], alpha),
                                 quantile_sorted(corrected_draws[k], 1.0 - alpha),
                                 options.ci_level};
        }
    }
    return out;
}

OptimismReport optimism_corrected(const Cohort& cohort, const Trainer& trainer,
                                  const SnbSettings& settings,
                                  const BootstrapOptions& options) {
    const std::vector<std::string> groups = cohort.group_labels();
    const std::vector<std::string> keys = metric_keys(groups);

    const auto evaluate = [&](const RiskScorer& scorer, const Cohort& data) {
        return flatten_metrics(compute_metrics(scorer, data, settings), groups);
    };
    const VectorOptimism values =
        optimism_corrected_values(cohort, trainer, evaluate, options);

    OptimismReport report;
    report.replicates = values.replicates;
    report.skipped = values.skipped;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        report.valid_replicates[keys[k]] = values.valid[k];
        if (values.valid[k] > 0) report.ci[keys[k]] = values.ci[k];
    }
    report.apparent = unflatten_metrics(values.apparent, groups);
    report.optimism = unflatten_metrics(values.optimism, groups);
    report.corrected = unflatten_metrics(values.corrected, groups);
    return report;
}

Interval bootstrap_ci(const std::function<double(const Cohort&)>& statistic,
                      const Cohort& cohort, const BootstrapOptions& options) {
    cohort.validate();
    if (options.replicates < 1) {
        throw Error("bootstrap_ci: needs at least one replicate");
    }
    const std::size_t B = static_cast<std::size_t>(options.replicates);
    std::vector<double> values(B, kNaN);
    std::vector<char> ok(B, 0);
    parallel_for(B, options.workers, [&](std::size_t b) {
        CounterRng rng(options.seed, static_cast<std::uint64_t>(b) + 1);
        const std::vector<std::size_t> idx =
            options.resampler ? options.resampler(cohort, rng)
            : options.stratified ? stratified_bootstrap_indices(cohort, rng)
                                 : bootstrap_indices(cohort.size(), rng);
        try {
            const double v = statistic(subset(cohort, idx));
            if (std::isfinite(v)) {
                values[b] = v;
                ok[b] = 1;
            }
        } catch (const std::exception&) {
            ok[b] = 0;
        }
    });
    std::vector<double> kept;
    kept.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (ok[b]) kept.push_back(values[b]);
    }
    const int skipped = static_cast<int>(B - kept.size());
    if (skipped > options.max_skip_fraction * static_cast<double>(B)) {
        throw Error("bootstrap_ci: " + std::to_string(skipped) + " of " +
                    std::to_string(B) + " replicates failed");
    }
    std::sort(kept.begin(), kept.end());
    const double alpha = (1.0 - options.ci_level) / 2.0;
    return Interval{quantile_sorted(kept, alpha),
                    quantile_sorted(kept, 1.0 - alpha), options.ci_level};
}

}  // namespace fairdca
