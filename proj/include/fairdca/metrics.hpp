#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairdca/common.hpp"

namespace fairdca {

// Confusion cells of a classification policy at some threshold. Counts are
// real-valued so that expected counts from randomized policies flow through
// the same formulas as integer counts.
struct ConfusionCounts {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double tn = 0.0;

    double n() const { return tp + fp + fn + tn; }
    double positives() const { return tp + fn; }
    double negatives() const { return fp + tn; }
    double prevalence() const;  // (tp + fn) / n, throws when n == 0
};

// Utilities of the four confusion cells: a treated case, b treated non-case,
// c untreated case, d untreated non-case. Requires a > c (treating a case
// beats missing it) and d > b (leaving a non-case alone beats treating it).
struct UtilitySpec {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    double d = 1.0;
};

// Probability of a proxy adverse event for untreated cases (p_fn) and for
// treated cases (p_tp). The treatment-effect weight is the relative risk
// reduction (p_fn - p_tp) / p_fn.
struct ProxyRisk {
    double p_fn = 0.0;
    double p_tp = 0.0;
};

// One subgroup's state under a policy.
struct GroupSummary {
    std::string group_id;
    ConfusionCounts counts;
    double lambda = 1.0;
    double t_star = 0.5;
    std::optional<double> policy_threshold;  // absent for non-threshold policies
    double snb = 0.0;
};

// Net benefit across a threshold grid, with the treat-all and treat-none
// reference series.
struct DecisionCurve {
    std::vector<double> thresholds;
    std::vector<double> nb_model;
    std::vector<double> nb_treat_all;
    std::vector<double> nb_treat_none;
};

// Differences in subgroup net benefit relative to a reference group.
// gap_vs_reference is reference-minus-group, so positive values mean the
// group is less benefitted than the reference.
struct GapReport {
    std::string reference;
    std::map<std::string, double> snb;
    std::map<std::string, double> gap_vs_reference;
    double max_minus_min = 0.0;
    double mean_gap_vs_reference = 0.0;
};

// Per-group parameter (lambda, threshold, ...) with an optional uniform
// fallback. at() throws for groups with no configured value.
class PerGroup {
public:
    PerGroup(double uniform) : fallback_(uniform) {}  // NOLINT: implicit by design
    explicit PerGroup(std::map<std::string, double> values,
                      std::optional<double> fallback = std::nullopt)
        : values_(std::move(values)), fallback_(fallback) {}

    double at(const std::string& group) const;
    const std::map<std::string, double>& overrides() const { return values_; }
    std::optional<double> fallback() const { return fallback_; }

private:
    std::map<std::string, double> values_;
    std::optional<double> fallback_;
};

// Counts with the strict "score > t" rule; ties at the threshold are negative.
ConfusionCounts confusion_at_threshold(std::span<const double> scores,
                                       std::span<const double> labels,
                                       double t);

// (tp - t/(1-t) * fp) / n.
double net_benefit(const ConfusionCounts& counts, double t_weight);

// 1 - prevalence + lambda/n * (tp - t/(1-t) * fp). Unlike net benefit this
// retains the prevalence term, so values are comparable across subgroups.
double subgroup_net_benefit(const ConfusionCounts& counts, double lambda,
                            double t_weight);

// (a - c) / (d - c): benefit of treating a case relative to being outcome-free.
double lambda_from_utilities(const UtilitySpec& u);

// Relative risk reduction of the proxy event: (p_fn - p_tp) / p_fn.
double lambda_from_rrr(const ProxyRisk& proxy);

// Threshold where treating and not treating balance in expected utility:
// t* = (d - b) / ((d - b) + (a - c)). Verifies the balance identity
// a t* + b (1 - t*) = c t* + d (1 - t*) to 1e-12.
double optimal_threshold(const UtilitySpec& u);

// Size-weighted mean of per-group sNB; per-group lambda and t* are allowed
// (the quantity is collapsible).
double aggregate_snb(const std::vector<GroupSummary>& groups);

// Net benefit of the score-based rule over the grid. When lambda is supplied
// the model series is scaled by it; the treat-all reference stays
// pi - t/(1-t) * (1 - pi) and treat-none is identically zero.
DecisionCurve decision_curve(std::span<const double> scores,
                             std::span<const double> labels,
                             const std::vector<double>& grid,
                             std::optional<double> lambda = std::nullopt);

GapReport gap_report(const std::map<std::string, double>& per_group_snb,
                     const std::string& reference);

// Round to the paper-style unit of "per 10,000 patients".
long long per_ten_thousand(double fraction);

// Inclusive arithmetic grid; the default report grid is 0.001..0.30 by 0.001.
std::vector<double> threshold_grid(double from, double to, double step);

// Sorted-score index giving O(log n) confusion counts at any threshold,
// exactly equal to the naive strict-above scan.
class ScoreIndex {
public:
    ScoreIndex(std::span<const double> scores, std::span<const double> labels);

    ConfusionCounts at(double t) const;
    double positives() const { return positives_; }
    double size() const { return static_cast<double>(sorted_scores_.size()); }

private:
    std::vector<double> sorted_scores_;   // ascending
    std::vector<double> positive_suffix_; // positives among elements >= index i
    double positives_ = 0.0;
};

}  // namespace fairdca
