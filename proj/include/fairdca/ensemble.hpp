#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairdca/cohort.hpp"
#include "fairdca/glm.hpp"

namespace fairdca {

// The three model recipes: exclude the protected attribute, include it as
// one-hot indicators, or fit one propensity-weighted model per subgroup.
enum class Variant { no_sa, single_sa, multi_sa };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// One-hot encoding of the protected attribute. The largest group is the
// reference level (ties break to the lexicographically smallest label);
// remaining levels are sorted.
struct SaEncoder {
    std::string reference;
    std::vector<std::string> levels;

    static SaEncoder from(const Cohort& cohort);
};

// Outcome design for a variant. no_sa uses the feature block only; single_sa
// appends the attribute indicators. The two-argument overload derives the
// encoder from the cohort itself.
DesignMatrix build_design(const Cohort& cohort, Variant variant);
DesignMatrix build_design(const Cohort& cohort, Variant variant,
                          const SaEncoder& encoder);

// Training weights for one target subgroup: members get 1, outsiders get
// min(forgetting * prior_ratio * p/(1-p), 1) where p is their propensity of
// membership. Propensities are clamped to [1e-6, 1-1e-6] before the odds.
std::vector<double> propensity_weights(std::span<const double> propensity,
                                       const std::vector<bool>& is_target,
                                       double prior_ratio, double forgetting);

struct MultiSaOptions {
    double propensity_penalty = 1e-3;  // LASSO penalty of the membership model
    double forgetting = 1.0;           // extra down-weighting of outsiders
};

// Per-subgroup ensemble: a membership propensity model and a weighted outcome
// model per group. Outcome models never see the attribute itself.
struct EnsembleModel {
    std::map<std::string, FittedModel> members;
    std::map<std::string, FittedModel> propensity_models;  // absent if the
                                                           // group is the
                                                           // whole cohort
    std::map<std::string, double> prior_ratio;
    double forgetting = 1.0;
};

// Full training: per group, (1) LASSO membership model on the features,
// (2) propensity weights with prior_ratio = (n - n_g) / n_g, (3) weighted
// maximum-likelihood outcome model on the whole cohort.
EnsembleModel fit_multi_sa(const Cohort& cohort,
                           const MultiSaOptions& options = MultiSaOptions{});

// Refits the member models on `cohort` while reusing already-fitted
// propensity models (the bootstrap shortcut: membership models are trained
// once on the original data). prior ratios are recomputed from `cohort`.
EnsembleModel refit_multi_sa_members(
    const Cohort& cohort, const EnsembleModel& propensity_source,
    const MultiSaOptions& options = MultiSaOptions{});

// Routes to the member model of `group`; unknown labels are an error.
double predict_ensemble(const EnsembleModel& model,
                        std::span<const double> features,
                        const std::string& group);

// Risk scorer over a cohort; every model variant exposes this surface so the
// validation and policy machinery stays model-agnostic.
class RiskScorer {
public:
    virtual ~RiskScorer() = default;
    virtual std::vector<double> score(const Cohort& cohort) const = 0;
    virtual std::vector<double> linear(const Cohort& cohort) const = 0;
    virtual std::string name() const = 0;
};

class LinearModelScorer final : public RiskScorer {
public:
    LinearModelScorer(FittedModel model, Variant variant,
                      std::optional<SaEncoder> encoder);

    std::vector<double> score(const Cohort& cohort) const override;
    std::vector<double> linear(const Cohort& cohort) const override;
    std::string name() const override { return variant_name(variant_); }

    const FittedModel& model() const { return model_; }
    Variant variant() const { return variant_; }
    const std::optional<SaEncoder>& encoder() const { return encoder_; }

private:
    FittedModel model_;
    Variant variant_;
    std::optional<SaEncoder> encoder_;
};

class EnsembleScorer final : public RiskScorer {
public:
    explicit EnsembleScorer(EnsembleModel model) : model_(std::move(model)) {}

    std::vector<double> score(const Cohort& cohort) const override;
    std::vector<double> linear(const Cohort& cohort) const override;
    std::string name() const override { return variant_name(Variant::multi_sa); }

    const EnsembleModel& model() const { return model_; }

private:
    EnsembleModel model_;
};

// Fits the requested variant and wraps it as a scorer.
std::unique_ptr<RiskScorer> fit_variant(
    const Cohort& cohort, Variant variant,
    const MultiSaOptions& options = MultiSaOptions{});

}  // namespace fairdca
