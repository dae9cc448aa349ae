#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fairdca/cohort.hpp"
#include "fairdca/ensemble.hpp"
#include "fairdca/metrics.hpp"

namespace fairdca {

// Discrimination, calibration and benefit metrics of one model on one cohort.
struct MetricSet {
    double c_statistic = 0.0;
    double calibration_slope = 0.0;
    double calibration_intercept = 0.0;
    double overall_snb = 0.0;
    std::map<std::string, double> snb_by_group;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
};

// Concordance probability over (case, non-case) pairs, ties counting one
// half, computed by the O(n log n) midrank method. Equal to the O(n^2) pair
// count on every input.
double c_statistic(std::span<const double> scores,
                   std::span<const double> labels);

// Slope: coefficient of the linear predictor in a logistic refit of the
// outcome on it. Intercept: intercept of a logistic fit with the linear
// predictor as a fixed offset.
std::pair<double, double> calibration_slope_intercept(
    std::span<const double> linear_predictors, std::span<const double> labels);

// Per-group lambda / t*; the classification threshold of the model policy is
// t* itself unless stated otherwise at the call site.
struct SnbSettings {
    PerGroup lambda{1.0};
    PerGroup t_star{0.5};
};

// Metrics of a scorer on a cohort; the per-group sNB uses the model-threshold
// policy at t* with harm weight t*.
MetricSet compute_metrics(const RiskScorer& scorer, const Cohort& cohort,
                          const SnbSettings& settings);

using Trainer = std::function<std::unique_ptr<RiskScorer>(const Cohort&)>;
using Resampler =
    std::function<std::vector<std::size_t>(const Cohort&, CounterRng&)>;

struct BootstrapOptions {
    int replicates = 500;
    std::uint64_t seed = 0;
    int workers = 1;
    double ci_level = 0.95;
    bool stratified = false;
    Resampler resampler;  // overrides the default row bootstrap when set
    double max_skip_fraction = 0.10;
};

// One bootstrap study of an arbitrary vector statistic: the trainer is refit
// on every resample and the statistic evaluated on the resample and on the
// original data. Failed replicates are recorded and skipped; entries may be
// NaN when a replicate cannot produce them (e.g. a subgroup missing from the
// resample). Replicate b always draws from the RNG stream (seed, b + 1), so
// results do not depend on the worker count.
struct ReplicateStudy {
    std::vector<double> apparent;
    std::vector<std::vector<double>> boot_values;  // [replicate][entry]
    std::vector<std::vector<double>> orig_values;
    std::vector<bool> ok;  // replicate completed
    int skipped = 0;
};

ReplicateStudy replicate_study(
    const Cohort& cohort, const Trainer& trainer,
    const std::function<std::vector<double>(const RiskScorer&, const Cohort&)>&
        evaluate,
    const BootstrapOptions& options);

// Entry-wise optimism correction of an arbitrary vector statistic, with
// percentile intervals of the replicate-wise corrected values.
struct VectorOptimism {
    std::vector<double> apparent;
    std::vector<double> optimism;
    std::vector<double> corrected;
    std::vector<Interval> ci;
    std::vector<int> valid;  // replicates contributing to each entry
    int skipped = 0;
    int replicates = 0;
};

VectorOptimism optimism_corrected_values(
    const Cohort& cohort, const Trainer& trainer,
    const std::function<std::vector<double>(const RiskScorer&, const Cohort&)>&
        evaluate,
    const BootstrapOptions& options);

// Harrell-style optimism correction: corrected = apparent - mean over
// replicates of (metric on the resample - metric on the original data),
// applied per metric including each subgroup's sNB. CIs are percentile
// intervals of the replicate-wise corrected values.
struct OptimismReport {
    MetricSet apparent;
    MetricSet optimism;
    MetricSet corrected;
    std::map<std::string, Interval> ci;          // keyed like metric_keys()
    std::map<std::string, int> valid_replicates;  // per metric
    int replicates = 0;
    int skipped = 0;
};

OptimismReport optimism_corrected(const Cohort& cohort, const Trainer& trainer,
                                  const SnbSettings& settings,
                                  const BootstrapOptions& options);

// Stable metric key order used by flatten/unflatten and report files.
std::vector<std::string> metric_keys(const std::vector<std::string>& groups);
std::vector<double> flatten_metrics(const MetricSet& metrics,
                                    const std::vector<std::string>& groups);
MetricSet unflatten_metrics(const std::vector<double>& values,
                            const std::vector<std::string>& groups);

// Percentile confidence interval of a scalar statistic of the cohort under
// the nonparametric row bootstrap.
Interval bootstrap_ci(const std::function<double(const Cohort&)>& statistic,
                      const Cohort& cohort, const BootstrapOptions& options);

}  // namespace fairdca
