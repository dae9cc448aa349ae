#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairdca/metrics.hpp"

namespace fairdca {

enum class PolicyKind { treat_none, treat_all, random_fraction, threshold };
enum class RandomMode { expected, sampled };

// How positives are allocated: a fixed rule, a random fraction (expected or
// seeded realization), or per-group score cutoffs.
struct PolicySpec {
    PolicyKind kind = PolicyKind::treat_none;
    double p = 0.0;                            // random_fraction share
    std::optional<PerGroup> thresholds;        // threshold policies
    RandomMode random_mode = RandomMode::expected;
    std::uint64_t seed = 0;

    std::string name() const;

    static PolicySpec none();
    static PolicySpec all();
    static PolicySpec random(double p, RandomMode mode = RandomMode::expected,
                             std::uint64_t seed = 0);
    static PolicySpec cutoff(PerGroup thresholds);
};

// Upper bound on the fraction of the whole population a policy may flag.
struct CapacityConstraint {
    double cap = 1.0;
};

// One candidate policy in objective space.
struct ParetoPoint {
    std::map<std::string, double> thresholds;
    double overall_snb = 0.0;
    double target_snb = 0.0;
    double flagged_fraction = 0.0;
};

struct EvaluationReport {
    std::string policy;
    std::vector<GroupSummary> groups;  // ordered by label
    double overall_snb = 0.0;
    double flagged_fraction = 0.0;
};

struct EvaluateOptions {
    // Sensitivity switch: use the classification cutoff instead of the
    // clinical t* as the false-positive harm weight (threshold policies only).
    bool harm_weight_from_policy = false;
};

// Applies the policy, builds per-group confusion counts, and scores each
// group's sNB with harm weight t*_g; the overall value is the size-weighted
// aggregate.
EvaluationReport evaluate_policy(const PolicySpec& policy,
                                 std::span<const double> scores,
                                 std::span<const double> labels,
                                 const std::vector<std::string>& groups,
                                 const PerGroup& lambda, const PerGroup& t_star,
                                 const EvaluateOptions& options = {});

// Expected counts when a fraction p is flagged uniformly at random:
// (p*pos, p*neg, (1-p)*pos, (1-p)*neg).
ConfusionCounts expected_random_counts(double p, double pos, double neg);

// Fraction of the population flagged positive under the policy (the expected
// fraction for expected-mode random policies).
double flagged_fraction(const PolicySpec& policy,
                        std::span<const double> scores,
                        const std::vector<std::string>& groups);

// All (t_target, t_rest) pairs from the grid, expanded to per-group maps.
std::vector<PolicySpec> enumerate_two_tier(
    const std::vector<double>& grid, const std::string& target_group,
    const std::vector<std::string>& group_labels);

// Keeps candidates within the capacity cap that no other candidate strictly
// Pareto-dominates (>= in both objectives, > in at least one). Sorted by
// overall sNB descending; equal-objective duplicates keep the
// lexicographically smallest threshold vector.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& candidates,
                                      const CapacityConstraint& constraint);

enum class EquityObjective { designated_group, maximin };

struct TwoTierSearch {
    std::vector<double> grid;
    std::string target_group;
    EquityObjective objective = EquityObjective::designated_group;
};

// Evaluates every two-tier candidate via sorted per-group score indexes;
// exactly equal to evaluate_policy on each candidate, just faster.
std::vector<ParetoPoint> evaluate_two_tier(const TwoTierSearch& search,
                                           std::span<const double> scores,
                                           std::span<const double> labels,
                                           const std::vector<std::string>& groups,
                                           const PerGroup& lambda,
                                           const PerGroup& t_star);

}  // namespace fairdca
