#include "fairdca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairdca {

namespace {

void check_counts(const ConfusionCounts& c, const char* who) {
    if (!(c.tp >= 0.0 && c.fp >= 0.0 && c.fn >= 0.0 && c.tn >= 0.0)) {
        throw Error(std::string(who) + ": negative confusion count");
    }
    if (!(c.n() > 0.0)) {
        throw Error(std::string(who) + ": empty confusion matrix (n = 0)");
    }
}

void check_harm_weight(double t, const char* who) {
    if (!(t > 0.0 && t < 1.0)) {
        throw Error(std::string(who) +
                    ": harm-weight threshold must lie strictly in (0,1)");
    }
}

void check_scores_labels(std::span<const double> scores,
                         std::span<const double> labels, const char* who) {
    if (scores.empty()) throw Error(std::string(who) + ": empty input");
    if (scores.size() != labels.size()) {
        throw Error(std::string(who) + ": scores and labels differ in length");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
            throw Error(std::string(who) + ": score outside [0,1] at row " +
                        std::to_string(i));
        }
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw Error(std::string(who) + ": non-binary label at row " +
                        std::to_string(i));
        }
    }
}

}  // namespace

double ConfusionCounts::prevalence() const {
    check_counts(*this, "prevalence");
    return (tp + fn) / n();
}

double PerGroup::at(const std::string& group) const {
    auto it = values_.find(group);
    if (it != values_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw Error("no value configured for group '" + group + "'");
}

ConfusionCounts confusion_at_threshold(std::span<const double> scores,
                                       std::span<const double> labels,
                                       double t) {
    check_scores_labels(scores, labels, "confusion_at_threshold");
    check_harm_weight(t, "confusion_at_threshold");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] > t;
        const bool positive = labels[i] == 1.0;
        if (flagged && positive) c.tp += 1.0;
        else if (flagged) c.fp += 1.0;
        else if (positive) c.fn += 1.0;
        else c.tn += 1.0;
    }
    return c;
}

double net_benefit(const ConfusionCounts& counts, double t_weight) {
    check_counts(counts, "net_benefit");
    check_harm_weight(t_weight, "net_benefit");
    const double r = t_weight / (1.0 - t_weight);
    return (counts.tp - r * counts.fp) / counts.n();
}

double subgroup_net_benefit(const ConfusionCounts& counts, double lambda,
                            double t_weight) {
    check_counts(counts, "subgroup_net_benefit");
    check_harm_weight(t_weight, "subgroup_net_benefit");
    if (!(lambda >= 0.0)) {
        throw Error("subgroup_net_benefit: lambda must be nonnegative");
    }
    const double n = counts.n();
    const double pi = (counts.tp + counts.fn) / n;
    const double r = t_weight / (1.0 - t_weight);
    return 1.0 - pi + (lambda / n) * (counts.tp - r * counts.fp);
}

double lambda_from_utilities(const UtilitySpec& u) {
    if (!(u.d > u.c)) {
        throw Error("lambda_from_utilities: requires d > c");
    }
    return (u.a - u.c) / (u.d - u.c);
}

double lambda_from_rrr(const ProxyRisk& proxy) {
    if (!(proxy.p_fn >= 0.0 && proxy.p_fn <= 1.0 && proxy.p_tp >= 0.0 &&
          proxy.p_tp <= 1.0)) {
        throw Error("lambda_from_rrr: probabilities must lie in [0,1]");
    }
    if (!(proxy.p_tp <= proxy.p_fn)) {
        throw Error("lambda_from_rrr: requires p_tp <= p_fn");
    }
    if (proxy.p_fn == 0.0) {
        throw Error("lambda_from_rrr: p_fn = 0 leaves the weight undefined");
    }
    return (proxy.p_fn - proxy.p_tp) / proxy.p_fn;
}

double optimal_threshold(const UtilitySpec& u) {
    if (!(u.a > u.c)) throw Error("optimal_threshold: requires a > c");
    if (!(u.d > u.b)) throw Error("optimal_threshold: requires d > b");
    const double t = (u.d - u.b) / ((u.d - u.b) + (u.a - u.c));
    const double lhs = u.a * t + u.b * (1.0 - t);
    const double rhs = u.c * t + u.d * (1.0 - t);
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    if (std::abs(lhs - rhs) > 1e-12 * scale) {
        throw Error("optimal_threshold: balance identity violated");
    }
    return t;
}

double aggregate_snb(const std::vector<GroupSummary>& groups) {
    if (groups.empty()) throw Error("aggregate_snb: no groups");
    double weight = 0.0;
    double total = 0.0;
    for (const auto& g : groups) {
        const double n = g.counts.n();
        if (!(n > 0.0)) {
            throw Error("aggregate_snb: group '" + g.group_id + "' has n = 0");
        }
        weight += n;
        total += n * g.snb;
    }
    return total / weight;
}

ScoreIndex::ScoreIndex(std::span<const double> scores,
                       std::span<const double> labels) {
    check_scores_labels(scores, labels, "ScoreIndex");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    sorted_scores_.resize(n);
    std::vector<double> sorted_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted_scores_[i] = scores[order[i]];
        sorted_labels[i] = labels[order[i]];
    }
    positive_suffix_.assign(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        positive_suffix_[i] = positive_suffix_[i + 1] + sorted_labels[i];
    }
    positives_ = positive_suffix_[0];
}

ConfusionCounts ScoreIndex::at(double t) const {
    check_harm_weight(t, "ScoreIndex::at");
    // first index with score > t; everything from there on is flagged
    const auto it = std::upper_bound(sorted_scores_.begin(), sorted_scores_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - sorted_scores_.begin());
    const double flagged = static_cast<double>(sorted_scores_.size() - k);
    ConfusionCounts c;
    c.tp = positive_suffix_[k];
    c.fp = flagged - c.tp;
    c.fn = positives_ - c.tp;
    c.tn = static_cast<double>(sorted_scores_.size()) - flagged - c.fn;
    return c;
}

DecisionCurve decision_curve(std::span<const double> scores,
                             std::span<const double> labels,
                             const std::vector<double>& grid,
                             std::optional<double> lambda) {
    if (grid.empty()) throw Error("decision_curve: empty threshold grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] < 1.0)) {
            throw Error("decision_curve: grid value outside (0,1)");
        }
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw Error("decision_curve: grid must be strictly increasing");
        }
    }
    if (lambda && !(*lambda >= 0.0)) {
        throw Error("decision_curve: lambda must be nonnegative");
    }
    const ScoreIndex index(scores, labels);
    const double n = index.size();
    const double pi = index.positives() / n;
    const double scale = lambda.value_or(1.0);

    DecisionCurve curve;
    curve.thresholds = grid;
    curve.nb_model.reserve(grid.size());
    curve.nb_treat_all.reserve(grid.size());
    curve.nb_treat_none.assign(grid.size(), 0.0);
    for (const double t : grid) {
        curve.nb_model.push_back(scale * net_benefit(index.at(t), t));
        curve.nb_treat_all.push_back(pi - t / (1.0 - t) * (1.0 - pi));
    }
    return curve;
}

GapReport gap_report(const std::map<std::string, double>& per_group_snb,
                     const std::string& reference) {
    if (per_group_snb.size() < 2) {
        throw Error("gap_report: needs at least two groups");
    }
    const auto ref_it = per_group_snb.find(reference);
    if (ref_it == per_group_snb.end()) {
        throw Error("gap_report: unknown reference group '" + reference + "'");
    }
    GapReport report;
    report.reference = reference;
    report.snb = per_group_snb;
    double lo = ref_it->second;
    double hi = ref_it->second;
    double gap_sum = 0.0;
    for (const auto& [label, value] : per_group_snb) {
        lo = std::min(lo, value);
        hi = std::max(hi, value);
        const double gap = ref_it->second - value;
        report.gap_vs_reference[label] = gap;
        if (label != reference) gap_sum += gap;
    }
    report.max_minus_min = hi - lo;
    report.mean_gap_vs_reference =
        gap_sum / static_cast<double>(per_group_snb.size() - 1);
    return report;
}

long long per_ten_thousand(double fraction) {
    return std::llround(fraction * 10000.0);
}

std::vector<double> threshold_grid(double from, double to, double step) {
    if (!(step > 0.0)) throw Error("threshold_grid: step must be positive");
    if (!(from > 0.0 && to < 1.0 && from <= to)) {
        throw Error("threshold_grid: range must satisfy 0 < from <= to < 1");
    }
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>((to - from) / step + 1e-9) + 1;
    grid.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        grid.push_back(from + static_cast<double>(k) * step);
    }
    return grid;
}

}  // namespace fairdca
