#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "fairdca/rng.hpp"

namespace fairdca {

// A complete-case analysis cohort: one row per individual with a feature
// vector, a binary outcome, and a subgroup label (the protected attribute).
struct Cohort {
    std::vector<std::string> ids;
    std::vector<std::string> group;
    std::vector<double> outcome;  // 0.0 or 1.0
    Eigen::MatrixXd features;     // size() rows
    std::vector<std::string> feature_names;

    std::size_t size() const { return outcome.size(); }
    std::vector<std::string> group_labels() const;  // sorted unique
    std::map<std::string, std::vector<std::size_t>> rows_by_group() const;

    // Shape/value checks; throws Error with the offending detail.
    void validate() const;
};

// Row subset (duplicates allowed, so this also materializes resamples).
Cohort subset(const Cohort& cohort, const std::vector<std::size_t>& rows);

// Plain nonparametric row bootstrap: n draws with replacement.
std::vector<std::size_t> bootstrap_indices(std::size_t n, CounterRng& rng);

// Resamples within each subgroup so no replicate loses a group entirely.
std::vector<std::size_t> stratified_bootstrap_indices(const Cohort& cohort,
                                                      CounterRng& rng);

}  // namespace fairdca
