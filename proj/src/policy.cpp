#include "fairdca/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairdca/rng.hpp"

namespace fairdca {

namespace {

void check_inputs(std::span<const double> scores,
                  std::span<const double> labels,
                  const std::vector<std::string>& groups, const char* who) {
    if (scores.empty()) throw Error(std::string(who) + ": empty input");
    if (scores.size() != groups.size() ||
        (!labels.empty() && labels.size() != scores.size())) {
        throw Error(std::string(who) + ": misaligned inputs");
    }
}

std::map<std::string, std::vector<std::size_t>> rows_by_label(
    const std::vector<std::string>& groups) {
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < groups.size(); ++i) rows[groups[i]].push_back(i);
    return rows;
}

// Row flags for a sampled random policy: one Bernoulli draw per row in row
// order, blind to group membership.
std::vector<bool> sampled_flags(const PolicySpec& policy, std::size_t n) {
    CounterRng rng(policy.seed, 0);
    std::vector<bool> flags(n);
    for (std::size_t i = 0; i < n; ++i) flags[i] = rng.bernoulli(policy.p);
    return flags;
}

bool lex_less(const std::map<std::string, double>& a,
              const std::map<std::string, double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::string PolicySpec::name() const {
    switch (kind) {
        case PolicyKind::treat_none: return "treat_none";
        case PolicyKind::treat_all: return "treat_all";
        case PolicyKind::random_fraction:
            return "random_" + format_sig(p, 6) +
                   (random_mode == RandomMode::expected ? "_expected" : "_sampled");
        case PolicyKind::threshold: {
            std::string label = "threshold";
            if (thresholds) {
                if (thresholds->overrides().empty() && thresholds->fallback()) {
                    label += "_" + format_sig(*thresholds->fallback(), 6);
                } else {
                    for (const auto& [g, t] : thresholds->overrides()) {
                        label += "_" + g + "=" + format_sig(t, 6);
                    }
                    if (thresholds->fallback()) {
                        label += "_rest=" + format_sig(*thresholds->fallback(), 6);
                    }
                }
            }
            return label;
        }
    }
    throw Error("PolicySpec::name: unknown kind");
}

PolicySpec PolicySpec::none() {
    return PolicySpec{PolicyKind::treat_none, 0.0, std::nullopt,
                      RandomMode::expected, 0};
}

PolicySpec PolicySpec::all() {
    return PolicySpec{PolicyKind::treat_all, 0.0, std::nullopt,
                      RandomMode::expected, 0};
}

PolicySpec PolicySpec::random(double p, RandomMode mode, std::uint64_t seed) {
    return PolicySpec{PolicyKind::random_fraction, p, std::nullopt, mode, seed};
}

PolicySpec PolicySpec::cutoff(PerGroup thresholds) {
    return PolicySpec{PolicyKind::threshold, 0.0, std::move(thresholds),
                      RandomMode::expected, 0};
}

ConfusionCounts expected_random_counts(double p, double pos, double neg) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error("expected_random_counts: p outside [0,1]");
    }
    if (!(pos >= 0.0 && neg >= 0.0)) {
        throw Error("expected_random_counts: negative class count");
    }
    return ConfusionCounts{p * pos, p * neg, (1.0 - p) * pos, (1.0 - p) * neg};
}

EvaluationReport evaluate_policy(const PolicySpec& policy,
                                 std::span<const double> scores,
                                 std::span<const double> labels,
                                 const std::vector<std::string>& groups,
                                 const PerGroup& lambda, const PerGroup& t_star,
                                 const EvaluateOptions& options) {
    check_inputs(scores, labels, groups, "evaluate_policy");
    if (policy.kind == PolicyKind::random_fraction &&
        !(policy.p >= 0.0 && policy.p <= 1.0)) {
        throw Error("evaluate_policy: random fraction outside [0,1]");
    }
    if (policy.kind == PolicyKind::threshold && !policy.thresholds) {
        throw Error("evaluate_policy: threshold policy without cutoffs");
    }

    std::vector<bool> flags;
    if (policy.kind == PolicyKind::random_fraction &&
        policy.random_mode == RandomMode::sampled) {
        flags = sampled_flags(policy, scores.size());
    }

    EvaluationReport report;
    report.policy = policy.name();
    double flagged = 0.0;
    for (const auto& [label, rows] : rows_by_label(groups)) {
        double pos = 0.0;
        for (const std::size_t i : rows) pos += labels[i];
        const double neg = static_cast<double>(rows.size()) - pos;

        GroupSummary summary;
        summary.group_id = label;
        summary.lambda = lambda.at(label);
        summary.t_star = t_star.at(label);

        switch (policy.kind) {
            case PolicyKind::treat_none:
                summary.counts = ConfusionCounts{0.0, 0.0, pos, neg};
                break;
            case PolicyKind::treat_all:
                summary.counts = ConfusionCounts{pos, neg, 0.0, 0.0};
                break;
            case PolicyKind::random_fraction:
                if (policy.random_mode == RandomMode::expected) {
                    summary.counts = expected_random_counts(policy.p, pos, neg);
                } else {
                    ConfusionCounts c;
                    for (const std::size_t i : rows) {
                        const bool hit = flags[i];
                        const bool positive = labels[i] == 1.0;
                        if (hit && positive) c.tp += 1.0;
                        else if (hit) c.fp += 1.0;
                        else if (positive) c.fn += 1.0;
                        else c.tn += 1.0;
                    }
                    summary.counts = c;
                }
                break;
            case PolicyKind::threshold: {
                const double t = policy.thresholds->at(label);
                if (!(t > 0.0 && t < 1.0)) {
                    throw Error("evaluate_policy: cutoff outside (0,1) for "
                                "group '" + label + "'");
                }
                summary.policy_threshold = t;
                ConfusionCounts c;
                for (const std::size_t i : rows) {
                    const bool hit = scores[i] > t;
                    const bool positive = labels[i] == 1.0;
                    if (hit && positive) c.tp += 1.0;
                    else if (hit) c.fp += 1.0;
                    else if (positive) c.fn += 1.0;
                    else c.tn += 1.0;
                }
                summary.counts = c;
                break;
            }
        }

        const double harm =
            options.harm_weight_from_policy && summary.policy_threshold
                ? *summary.policy_threshold
                : summary.t_star;
        summary.snb = subgroup_net_benefit(summary.counts, summary.lambda, harm);
        flagged += summary.counts.tp + summary.counts.fp;
        report.groups.push_back(std::move(summary));
    }
    report.overall_snb = aggregate_snb(report.groups);
    report.flagged_fraction = flagged / static_cast<double>(scores.size());
    return report;
}

double flagged_fraction(const PolicySpec& policy,
                        std::span<const double> scores,
                        const std::vector<std::string>& groups) {
    check_inputs(scores, {}, groups, "flagged_fraction");
    switch (policy.kind) {
        case PolicyKind::treat_none: return 0.0;
        case PolicyKind::treat_all: return 1.0;
        case PolicyKind::random_fraction: {
            if (!(policy.p >= 0.0 && policy.p <= 1.0)) {
                throw Error("flagged_fraction: random fraction outside [0,1]");
            }
            if (policy.random_mode == RandomMode::expected) return policy.p;
            const std::vector<bool> flags = sampled_flags(policy, scores.size());
            double hit = 0.0;
            for (const bool f : flags) hit += f ? 1.0 : 0.0;
            return hit / static_cast<double>(scores.size());
        }
        case PolicyKind::threshold: {
            if (!policy.thresholds) {
                throw Error("flagged_fraction: threshold policy without cutoffs");
            }
            double hit = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (scores[i] > policy.thresholds->at(groups[i])) hit += 1.0;
            }
            return hit / static_cast<double>(scores.size());
        }
    }
    throw Error("flagged_fraction: unknown policy kind");
}

std::vector<PolicySpec> enumerate_two_tier(
    const std::vector<double>& grid, const std::string& target_group,
    const std::vector<std::string>& group_labels) {
    if (grid.empty()) throw Error("enumerate_two_tier: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] < 1.0)) {
            throw Error("enumerate_two_tier: grid value outside (0,1)");
        }
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw Error("enumerate_two_tier: grid must be strictly increasing");
        }
    }
    if (std::find(group_labels.begin(), group_labels.end(), target_group) ==
        group_labels.end()) {
        throw Error("enumerate_two_tier: target group '" + target_group +
                    "' not among the group labels");
    }
    std::vector<PolicySpec> policies;
    policies.reserve(grid.size() * grid.size());
    for (const double t_target : grid) {
        for (const double t_rest : grid) {
            std::map<std::string, double> cutoffs;
            for (const auto& g : group_labels) {
                cutoffs[g] = (g == target_group) ? t_target : t_rest;
            }
            policies.push_back(PolicySpec::cutoff(PerGroup(std::move(cutoffs))));
        }
    }
    return policies;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& candidates,
                                      const CapacityConstraint& constraint) {
    if (!(constraint.cap > 0.0 && constraint.cap <= 1.0)) {
        throw Error("pareto_front: capacity cap must lie in (0,1]");
    }
    std::vector<ParetoPoint> feasible;
    for (const auto& c : candidates) {
        if (c.flagged_fraction <= constraint.cap) feasible.push_back(c);
    }
    if (feasible.empty()) {
        throw Error("pareto_front: no feasible candidate under cap " +
                    format_sig(constraint.cap, 6));
    }
    std::sort(feasible.begin(), feasible.end(),
              [](const ParetoPoint& a, const ParetoPoint& b) {
                  if (a.overall_snb != b.overall_snb) {
                      return a.overall_snb > b.overall_snb;
                  }
                  if (a.target_snb != b.target_snb) {
                      return a.target_snb > b.target_snb;
                  }
                  return lex_less(a.thresholds, b.thresholds);
              });
    std::vector<ParetoPoint> front;
    double best_target = -std::numeric_limits<double>::infinity();
    for (const auto& c : feasible) {
        if (c.target_snb > best_target) {
            front.push_back(c);
            best_target = c.target_snb;
        }
    }
    return front;
}

std::vector<ParetoPoint> evaluate_two_tier(const TwoTierSearch& search,
                                           std::span<const double> scores,
                                           std::span<const double> labels,
                                           const std::vector<std::string>& groups,
                                           const PerGroup& lambda,
                                           const PerGroup& t_star) {
    check_inputs(scores, labels, groups, "evaluate_two_tier");
    const auto rows = rows_by_label(groups);
    if (search.objective == EquityObjective::designated_group &&
        rows.find(search.target_group) == rows.end()) {
        throw Error("evaluate_two_tier: target group '" + search.target_group +
                    "' not present");
    }

    // per-group sorted indexes, built once
    std::map<std::string, ScoreIndex> indexes;
    for (const auto& [label, idx] : rows) {
        std::vector<double> gs, gy;
        gs.reserve(idx.size());
        gy.reserve(idx.size());
        for (const std::size_t i : idx) {
            gs.push_back(scores[i]);
            gy.push_back(labels[i]);
        }
        indexes.emplace(label, ScoreIndex(gs, gy));
    }

    const std::vector<PolicySpec> policies = enumerate_two_tier(
        search.grid, search.target_group,
        [&] {
            std::vector<std::string> labels_only;
            for (const auto& [label, idx] : rows) labels_only.push_back(label);
            return labels_only;
        }());

    const double n = static_cast<double>(scores.size());
    std::vector<ParetoPoint> points;
    points.reserve(policies.size());
    for (const auto& policy : policies) {
        ParetoPoint point;
        point.thresholds = policy.thresholds->overrides();
        std::vector<GroupSummary> summaries;
        double flagged = 0.0;
        double min_snb = std::numeric_limits<double>::infinity();
        for (const auto& [label, index] : indexes) {
            GroupSummary s;
            s.group_id = label;
            s.lambda = lambda.at(label);
            s.t_star = t_star.at(label);
            s.policy_threshold = policy.thresholds->at(label);
            s.counts = index.at(*s.policy_threshold);
            s.snb = subgroup_net_benefit(s.counts, s.lambda, s.t_star);
            flagged += s.counts.tp + s.counts.fp;
            min_snb = std::min(min_snb, s.snb);
            if (label == search.target_group) point.target_snb = s.snb;
            summaries.push_back(std::move(s));
        }
        point.overall_snb = aggregate_snb(summaries);
        point.flagged_fraction = flagged / n;
        if (search.objective == EquityObjective::maximin) {
            point.target_snb = min_snb;
        }
        points.push_back(std::move(point));
    }
    return points;
}

}  // namespace fairdca
