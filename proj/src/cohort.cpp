#include "fairdca/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairdca/common.hpp"

namespace fairdca {

std::vector<std::string> Cohort::group_labels() const {
    std::set<std::string> labels(group.begin(), group.end());
    return {labels.begin(), labels.end()};
}

std::map<std::string, std::vector<std::size_t>> Cohort::rows_by_group() const {
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < group.size(); ++i) {
        rows[group[i]].push_back(i);
    }
    return rows;
}

void Cohort::validate() const {
    const std::size_t n = outcome.size();
    if (n == 0) throw Error("cohort: empty");
    if (ids.size() != n || group.size() != n ||
        static_cast<std::size_t>(features.rows()) != n) {
        throw Error("cohort: inconsistent row counts");
    }
    if (static_cast<std::size_t>(features.cols()) != feature_names.size()) {
        throw Error("cohort: feature name count does not match columns");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (outcome[i] != 0.0 && outcome[i] != 1.0) {
            throw Error("cohort: non-binary outcome at row " + std::to_string(i));
        }
        if (group[i].empty()) {
            throw Error("cohort: empty group label at row " + std::to_string(i));
        }
    }
    if (!features.allFinite()) throw Error("cohort: non-finite feature value");
}

Cohort subset(const Cohort& cohort, const std::vector<std::size_t>& rows) {
    Cohort out;
    out.feature_names = cohort.feature_names;
    out.ids.reserve(rows.size());
    out.group.reserve(rows.size());
    out.outcome.reserve(rows.size());
    out.features.resize(static_cast<Eigen::Index>(rows.size()),
                        cohort.features.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        if (i >= cohort.size()) throw Error("subset: row index out of range");
        out.ids.push_back(cohort.ids[i]);
        out.group.push_back(cohort.group[i]);
        out.outcome.push_back(cohort.outcome[i]);
        out.features.row(static_cast<Eigen::Index>(k)) =
            cohort.features.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, CounterRng& rng) {
    if (n == 0) throw Error("bootstrap_indices: empty cohort");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<std::size_t>(rng.below(n));
    }
    return idx;
}

std::vector<std::size_t> stratified_bootstrap_indices(const Cohort& cohort,
                                                      CounterRng& rng) {
    std::vector<std::size_t> idx;
    idx.reserve(cohort.size());
    for (const auto& [label, rows] : cohort.rows_by_group()) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            idx.push_back(rows[static_cast<std::size_t>(rng.below(rows.size()))]);
        }
    }
    return idx;
}

}  // namespace fairdca
