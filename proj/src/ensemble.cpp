#include "fairdca/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace fairdca {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::no_sa: return "no_sa";
        case Variant::single_sa: return "single_sa";
        case Variant::multi_sa: return "multi_sa";
    }
    throw Error("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "no_sa") return Variant::no_sa;
    if (name == "single_sa") return Variant::single_sa;
    if (name == "multi_sa") return Variant::multi_sa;
    throw Error("unknown model variant '" + name + "'");
}

SaEncoder SaEncoder::from(const Cohort& cohort) {
    std::map<std::string, std::size_t> counts;
    for (const auto& g : cohort.group) ++counts[g];
    if (counts.empty()) throw Error("SaEncoder: empty cohort");
    std::string reference = counts.begin()->first;
    std::size_t best = counts.begin()->second;
    for (const auto& [label, count] : counts) {
        if (count > best) {
            reference = label;
            best = count;
        }
    }
    SaEncoder enc;
    enc.reference = reference;
    for (const auto& [label, count] : counts) {
        if (label != reference) enc.levels.push_back(label);
    }
    return enc;
}

DesignMatrix build_design(const Cohort& cohort, Variant variant) {
    if (variant == Variant::single_sa) {
        return build_design(cohort, variant, SaEncoder::from(cohort));
    }
    return build_design(cohort, variant, SaEncoder{});
}

DesignMatrix build_design(const Cohort& cohort, Variant variant,
                          const SaEncoder& encoder) {
    cohort.validate();
    if (variant == Variant::multi_sa) {
        throw Error("build_design: the ensemble variant has per-group designs");
    }
    if (variant == Variant::no_sa) {
        return make_design(cohort.features, cohort.feature_names);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
    const Eigen::Index base = cohort.features.cols();
    const Eigen::Index extra = static_cast<Eigen::Index>(encoder.levels.size());
    Eigen::MatrixXd block(n, base + extra);
    block.leftCols(base) = cohort.features;
    block.rightCols(extra).setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& g = cohort.group[static_cast<std::size_t>(i)];
        if (g == encoder.reference) continue;
        const auto it =
            std::find(encoder.levels.begin(), encoder.levels.end(), g);
        if (it == encoder.levels.end()) {
            throw Error("build_design: unknown attribute level '" + g + "'");
        }
        block(i, base + (it - encoder.levels.begin())) = 1.0;
    }
    std::vector<std::string> names = cohort.feature_names;
    for (const auto& level : encoder.levels) names.push_back("group=" + level);
    return make_design(block, names);
}

std::vector<double> propensity_weights(std::span<const double> propensity,
                                       const std::vector<bool>& is_target,
                                       double prior_ratio, double forgetting) {
    if (propensity.size() != is_target.size()) {
        throw Error("propensity_weights: length mismatch");
    }
    if (!(prior_ratio > 0.0)) {
        throw Error("propensity_weights: prior ratio must be positive");
    }
    if (!(forgetting > 0.0 && forgetting <= 1.0)) {
        throw Error("propensity_weights: forgetting factor must lie in (0,1]");
    }
    std::vector<double> weights(propensity.size());
    for (std::size_t i = 0; i < propensity.size(); ++i) {
        if (!(propensity[i] >= 0.0 && propensity[i] <= 1.0)) {
            throw Error("propensity_weights: propensity outside [0,1]");
        }
        if (is_target[i]) {
            weights[i] = 1.0;
            continue;
        }
        const double p = std::clamp(propensity[i], 1e-6, 1.0 - 1e-6);
        weights[i] = std::min(forgetting * prior_ratio * p / (1.0 - p), 1.0);
    }
    return weights;
}

namespace {

Eigen::VectorXd outcome_vector(const Cohort& cohort) {
    return Eigen::Map<const Eigen::VectorXd>(
        cohort.outcome.data(), static_cast<Eigen::Index>(cohort.outcome.size()));
}

void check_group_outcomes(const Cohort& cohort) {
    for (const auto& [label, rows] : cohort.rows_by_group()) {
        bool any0 = false, any1 = false;
        for (const std::size_t i : rows) {
            (cohort.outcome[i] == 1.0 ? any1 : any0) = true;
        }
        if (!any0 || !any1) {
            throw Error("fit_multi_sa: subgroup '" + label +
                        "' has a single outcome class");
        }
    }
}

FittedModel member_fit(const Cohort& cohort, const DesignMatrix& design,
                       const Eigen::VectorXd& y,
                       const std::vector<double>& weights,
                       const std::string& label) {
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(
        weights.data(), static_cast<Eigen::Index>(weights.size()));
    FittedModel m = fit_logistic(design, y, w);
    m.variant = "multi_sa";
    m.weight_note = "propensity weights, target group " + label;
    return m;
}

}  // namespace

EnsembleModel fit_multi_sa(const Cohort& cohort, const MultiSaOptions& options) {
    cohort.validate();
    check_group_outcomes(cohort);
    const auto by_group = cohort.rows_by_group();
    if (by_group.empty()) throw Error("fit_multi_sa: no subgroups");

    const DesignMatrix design = build_design(cohort, Variant::no_sa);
    const Eigen::VectorXd y = outcome_vector(cohort);
    const double n = static_cast<double>(cohort.size());

    EnsembleModel ensemble;
    ensemble.forgetting = options.forgetting;
    for (const auto& [label, rows] : by_group) {
        const double ng = static_cast<double>(rows.size());
        std::vector<bool> is_target(cohort.size(), false);
        for (const std::size_t i : rows) is_target[i] = true;

        std::vector<double> weights;
        if (rows.size() == cohort.size()) {
            // the group is the whole cohort: nothing to borrow, weights are 1
            ensemble.prior_ratio[label] = 0.0;
            weights.assign(cohort.size(), 1.0);
        } else {
            Eigen::VectorXd membership(static_cast<Eigen::Index>(cohort.size()));
            for (std::size_t i = 0; i < cohort.size(); ++i) {
                membership[static_cast<Eigen::Index>(i)] = is_target[i] ? 1.0 : 0.0;
            }
            FittedModel prop = fit_lasso_logistic(design, membership,
                                                  options.propensity_penalty);
            prop.variant = "propensity";
            prop.weight_note = "membership model for group " + label;
            const Eigen::VectorXd scores = predict_prob(prop, cohort.features);
            const double prior = (n - ng) / ng;
            weights = propensity_weights(
                std::span<const double>(scores.data(),
                                        static_cast<std::size_t>(scores.size())),
                is_target, prior, options.forgetting);
            ensemble.propensity_models.emplace(label, std::move(prop));
            ensemble.prior_ratio[label] = prior;
        }
        ensemble.members.emplace(label,
                                 member_fit(cohort, design, y, weights, label));
    }
    return ensemble;
}

EnsembleModel refit_multi_sa_members(const Cohort& cohort,
                                     const EnsembleModel& propensity_source,
                                     const MultiSaOptions& options) {
    cohort.validate();
    check_group_outcomes(cohort);
    const auto by_group = cohort.rows_by_group();
    const DesignMatrix design = build_design(cohort, Variant::no_sa);
    const Eigen::VectorXd y = outcome_vector(cohort);
    const double n = static_cast<double>(cohort.size());

    EnsembleModel ensemble;
    ensemble.forgetting = options.forgetting;
    for (const auto& [label, rows] : by_group) {
        const double ng = static_cast<double>(rows.size());
        std::vector<bool> is_target(cohort.size(), false);
        for (const std::size_t i : rows) is_target[i] = true;

        std::vector<double> weights;
        if (rows.size() == cohort.size()) {
            ensemble.prior_ratio[label] = 0.0;
            weights.assign(cohort.size(), 1.0);
        } else {
            const auto it = propensity_source.propensity_models.find(label);
            if (it == propensity_source.propensity_models.end()) {
                throw Error("refit_multi_sa_members: no propensity model for "
                            "group '" + label + "'");
            }
            const Eigen::VectorXd scores = predict_prob(it->second, cohort.features);
            const double prior = (n - ng) / ng;
            weights = propensity_weights(
                std::span<const double>(scores.data(),
                                        static_cast<std::size_t>(scores.size())),
                is_target, prior, options.forgetting);
            ensemble.propensity_models.emplace(label, it->second);
            ensemble.prior_ratio[label] = prior;
        }
        ensemble.members.emplace(label,
                                 member_fit(cohort, design, y, weights, label));
    }
    return ensemble;
}

double predict_ensemble(const EnsembleModel& model,
                        std::span<const double> features,
                        const std::string& group) {
    const auto it = model.members.find(group);
    if (it == model.members.end()) {
        throw Error("predict_ensemble: unknown group '" + group + "'");
    }
    return predict_prob(it->second, features);
}

LinearModelScorer::LinearModelScorer(FittedModel model, Variant variant,
                                     std::optional<SaEncoder> encoder)
    : model_(std::move(model)), variant_(variant), encoder_(std::move(encoder)) {
    if (variant_ == Variant::multi_sa) {
        throw Error("LinearModelScorer: use EnsembleScorer for the ensemble");
    }
    if (variant_ == Variant::single_sa && !encoder_) {
        throw Error("LinearModelScorer: single_sa needs the attribute encoder");
    }
}

std::vector<double> LinearModelScorer::linear(const Cohort& cohort) const {
    const DesignMatrix design =
        variant_ == Variant::single_sa
            ? build_design(cohort, variant_, *encoder_)
            : build_design(cohort, variant_);
    if (design.cols() != model_.coef.size()) {
        throw Error("LinearModelScorer: design dimension mismatch");
    }
    const Eigen::VectorXd eta = design.values * model_.coef;
    return {eta.data(), eta.data() + eta.size()};
}

std::vector<double> LinearModelScorer::score(const Cohort& cohort) const {
    std::vector<double> eta = linear(cohort);
    for (double& v : eta) v = expit(v);
    return eta;
}

std::vector<double> EnsembleScorer::linear(const Cohort& cohort) const {
    cohort.validate();
    const DesignMatrix design = build_design(cohort, Variant::no_sa);
    std::vector<double> eta(cohort.size());
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto it = model_.members.find(cohort.group[i]);
        if (it == model_.members.end()) {
            throw Error("EnsembleScorer: unknown group '" + cohort.group[i] + "'");
        }
        eta[i] = design.values.row(static_cast<Eigen::Index>(i)).dot(it->second.coef);
    }
    return eta;
}

std::vector<double> EnsembleScorer::score(const Cohort& cohort) const {
    std::vector<double> eta = linear(cohort);
    for (double& v : eta) v = expit(v);
    return eta;
}

std::unique_ptr<RiskScorer> fit_variant(const Cohort& cohort, Variant variant,
                                        const MultiSaOptions& options) {
    cohort.validate();
    if (variant == Variant::multi_sa) {
        return std::make_unique<EnsembleScorer>(fit_multi_sa(cohort, options));
    }
    const std::optional<SaEncoder> encoder =
        variant == Variant::single_sa
            ? std::optional<SaEncoder>(SaEncoder::from(cohort))
            : std::nullopt;
    const DesignMatrix design =
        encoder ? build_design(cohort, variant, *encoder)
                : build_design(cohort, variant);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
        cohort.outcome.data(), static_cast<Eigen::Index>(cohort.outcome.size()));
    FittedModel model = fit_logistic(design, y);
    model.variant = variant_name(variant);
    return std::make_unique<LinearModelScorer>(std::move(model), variant, encoder);
}

}  // namespace fairdca
