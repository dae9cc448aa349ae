#include "fairdca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairdca/common.hpp"

namespace fairdca {

namespace {

void check_spec(const CohortSpec& spec) {
    if (spec.groups.empty()) throw Error("generate_cohort: no groups");
    std::set<std::string> labels;
    for (const auto& g : spec.groups) {
        if (g.label.empty()) throw Error("generate_cohort: empty group label");
        if (!labels.insert(g.label).second) {
            throw Error("generate_cohort: duplicate group label '" + g.label + "'");
        }
        if (g.size < 1) throw Error("generate_cohort: group size must be >= 1");
        if (!(g.prevalence > 0.0 && g.prevalence < 1.0)) {
            throw Error("generate_cohort: prevalence must lie in (0,1)");
        }
    }
    std::set<std::string> names;
    for (const auto& f : spec.features) {
        if (f.name.empty()) throw Error("generate_cohort: empty feature name");
        if (!names.insert(f.name).second) {
            throw Error("generate_cohort: duplicate feature name '" + f.name + "'");
        }
        if (!std::isfinite(f.coefficient)) {
            throw Error("generate_cohort: non-finite coefficient");
        }
        if (f.family == FeatureSpec::Family::binary &&
            !(f.rate > 0.0 && f.rate < 1.0)) {
            throw Error("generate_cohort: binary rate must lie in (0,1)");
        }
    }
}

// Solves mean(expit(alpha + s_i)) = target for alpha; monotone, so a Newton
// iteration safeguarded by bisection converges fast.
double solve_intercept(const std::vector<double>& shifts, double target) {
    double lo = -60.0, hi = 60.0;
    double alpha = logit(target);
    const auto evaluate = [&](double a, double& deriv) {
        double mean = 0.0;
        deriv = 0.0;
        for (const double s : shifts) {
            const double p = expit(a + s);
            mean += p;
            deriv += p * (1.0 - p);
        }
        mean /= static_cast<double>(shifts.size());
        deriv /= static_cast<double>(shifts.size());
        return mean - target;
    };
    for (int iter = 0; iter < 200; ++iter) {
        double deriv = 0.0;
        const double f = evaluate(alpha, deriv);
        if (std::abs(f) < 1e-12) return alpha;
        if (f > 0.0) hi = alpha; else lo = alpha;
        double next = deriv > 0.0 ? alpha - f / deriv : alpha;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - alpha) < 1e-15 && std::abs(f) < 1e-9) return next;
        alpha = next;
    }
    double deriv = 0.0;
    if (std::abs(evaluate(alpha, deriv)) < 1e-6) return alpha;
    throw Error("generate_cohort: prevalence calibration failed");
}

// Systematic probability-proportional sampling: flags exactly `take` rows,
// each with inclusion probability proportional to its risk. Certainty rows
// (risk above the sampling step) are peeled off first.
void realize_outcomes(const std::vector<double>& risks, long long take,
                      CounterRng& rng, std::vector<double>& outcome) {
    outcome.assign(risks.size(), 0.0);
    if (take <= 0) return;
    std::vector<std::size_t> pool(risks.size());
    for (std::size_t i = 0; i < risks.size(); ++i) pool[i] = i;
    for (;;) {
        double total = 0.0;
        for (const std::size_t i : pool) total += risks[i];
        if (take >= static_cast<long long>(pool.size())) {
            for (const std::size_t i : pool) outcome[i] = 1.0;
            return;
        }
        const double step = total / static_cast<double>(take);
        std::vector<std::size_t> certain, rest;
        for (const std::size_t i : pool) {
            (risks[i] >= step ? certain : rest).push_back(i);
        }
        if (certain.empty()) {
            double next = rng.uniform01() * step;
            double cum = 0.0;
            long long assigned = 0;
            for (const std::size_t i : rest) {
                cum += risks[i];
                if (next < cum && assigned < take) {
                    outcome[i] = 1.0;
                    ++assigned;
                    next += step;
                }
            }
            return;
        }
        for (const std::size_t i : certain) outcome[i] = 1.0;
        take -= static_cast<long long>(certain.size());
        pool = std::move(rest);
        if (take <= 0 || pool.empty()) return;
    }
}

double shift_for(const CohortSpec& spec, const std::string& group,
                 const std::string& feature) {
    const auto git = spec.covariate_shift.find(group);
    if (git == spec.covariate_shift.end()) return 0.0;
    const auto fit = git->second.find(feature);
    return fit == git->second.end() ? 0.0 : fit->second;
}

}  // namespace

Cohort generate_cohort(const CohortSpec& spec) {
    check_spec(spec);
    std::size_t total = 0;
    for (const auto& g : spec.groups) total += g.size;
    const std::size_t p = spec.features.size();

    Cohort cohort;
    cohort.ids.reserve(total);
    cohort.group.reserve(total);
    cohort.outcome.reserve(total);
    cohort.features.resize(static_cast<Eigen::Index>(total),
                           static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        cohort.feature_names.push_back(spec.features[j].name);
    }

    std::size_t row = 0;
    for (std::size_t gi = 0; gi < spec.groups.size(); ++gi) {
        const GroupSpec& g = spec.groups[gi];
        CounterRng feature_rng(spec.seed, 2 * static_cast<std::uint64_t>(gi));
        CounterRng outcome_rng(spec.seed, 2 * static_cast<std::uint64_t>(gi) + 1);

        const auto offset_it = spec.group_offsets.find(g.label);
        const double offset =
            offset_it == spec.group_offsets.end() ? 0.0 : offset_it->second;

        std::vector<double> shifts(g.size, offset);
        for (std::size_t i = 0; i < g.size; ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(row + i);
            for (std::size_t j = 0; j < p; ++j) {
                const FeatureSpec& f = spec.features[j];
                const double delta = shift_for(spec, g.label, f.name);
                double x;
                if (f.family == FeatureSpec::Family::standard_normal) {
                    x = feature_rng.normal() + delta;
                } else {
                    const double rate = std::clamp(f.rate + delta, 0.001, 0.999);
                    x = feature_rng.bernoulli(rate) ? 1.0 : 0.0;
                }
                cohort.features(r, static_cast<Eigen::Index>(j)) = x;
                shifts[i] += f.coefficient * x;
            }
        }

        const double alpha = solve_intercept(shifts, g.prevalence);
        std::vector<double> risks(g.size);
        double risk_sum = 0.0;
        for (std::size_t i = 0; i < g.size; ++i) {
            risks[i] = expit(alpha + shifts[i]);
            risk_sum += risks[i];
        }
        std::vector<double> outcome;
        realize_outcomes(risks, std::llround(risk_sum), outcome_rng, outcome);

        for (std::size_t i = 0; i < g.size; ++i) {
            cohort.ids.push_back(g.label + "-" + std::to_string(i + 1));
            cohort.group.push_back(g.label);
            cohort.outcome.push_back(outcome[i]);
        }
        row += g.size;
    }
    cohort.validate();
    return cohort;
}

CohortSpec preset_diabetes(double scale) {
    if (!(scale > 0.0)) throw Error("preset_diabetes: scale must be positive");
    const auto scaled = [scale](double n) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * scale)));
    };
    CohortSpec spec;
    spec.seed = 1;
    spec.groups = {
        {"Asian", scaled(10303), 0.062},
        {"Black", scaled(7476), 0.043},
        {"Other", scaled(8363), 0.032},
        {"White", scaled(450214), 0.020},
    };
    using Family = FeatureSpec::Family;
    spec.features = {
        {"age_std", Family::standard_normal, 0.0, 0.70},
        {"bmi_std", Family::standard_normal, 0.0, 0.55},
        {"waist_std", Family::standard_normal, 0.0, 0.35},
        {"bodyfat_std", Family::standard_normal, 0.0, 0.25},
        {"sbp_std", Family::standard_normal, 0.0, 0.25},
        {"townsend_std", Family::standard_normal, 0.0, 0.20},
        {"family_diabetes", Family::binary, 0.125, 0.70},
        {"smoker", Family::binary, 0.10, 0.35},
        {"statins", Family::binary, 0.15, 0.40},
        {"hypertension", Family::binary, 0.25, 0.55},
    };
    spec.covariate_shift = {
        {"Asian", {{"age_std", -0.45}, {"bmi_std", -0.15}, {"townsend_std", 0.45},
                   {"family_diabetes", -0.070}, {"statins", 0.05}}},
        {"Black", {{"age_std", -0.60}, {"bmi_std", 0.45}, {"sbp_std", 0.20},
                   {"townsend_std", 0.95}, {"family_diabetes", -0.095},
                   {"hypertension", 0.09}}},
        {"Other", {{"age_std", -0.40}, {"bmi_std", 0.05}, {"townsend_std", 0.50},
                   {"family_diabetes", -0.048}}},
        {"White", {{"age_std", 0.05}, {"townsend_std", -0.05}}},
    };
    return spec;
}

CohortSpec preset_lung(double scale) {
    if (!(scale > 0.0)) throw Error("preset_lung: scale must be positive");
    const auto scaled = [scale](double n) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * scale)));
    };
    CohortSpec spec;
    spec.seed = 1;
    spec.groups = {
        {"Q1", scaled(95394), 236.0 / 95394.0},   // 0.247%
        {"Q2", scaled(96366), 289.0 / 96366.0},   // 0.300%
        {"Q3", scaled(95720), 299.0 / 95720.0},   // 0.312%
        {"Q4", scaled(96411), 393.0 / 96411.0},   // 0.408%
        {"Q5", scaled(95998), 644.0 / 95998.0},   // 0.671%
    };
    using Family = FeatureSpec::Family;
    spec.features = {
        {"age_std", Family::standard_normal, 0.0, 0.85},
        {"pack_years_std", Family::standard_normal, 0.0, 0.60},
        {"bmi_std", Family::standard_normal, 0.0, -0.15},
        {"smoker_current", Family::binary, 0.062, 1.90},
        {"smoker_previous", Family::binary, 0.33, 0.70},
        {"emphysema", Family::binary, 0.011, 0.90},
        {"family_lung_cancer", Family::binary, 0.117, 0.45},
        {"education_university", Family::binary, 0.41, -0.25},
        {"statins", Family::binary, 0.15, 0.25},
        {"previous_cancer", Family::binary, 0.046, 0.35},
    };
    spec.covariate_shift = {
        {"Q2", {{"smoker_current", 0.009}, {"smoker_previous", 0.010},
                {"emphysema", 0.001}, {"family_lung_cancer", 0.007},
                {"education_university", -0.030}}},
        {"Q3", {{"smoker_current", 0.024}, {"smoker_previous", 0.020},
                {"emphysema", 0.005}, {"family_lung_cancer", 0.017},
                {"education_university", -0.050}, {"statins", 0.02}}},
        {"Q4", {{"age_std", -0.05}, {"smoker_current", 0.058},
                {"smoker_previous", 0.020}, {"pack_years_std", 0.10},
                {"emphysema", 0.008}, {"family_lung_cancer", 0.034},
                {"education_university", -0.030}, {"statins", 0.02},
                {"previous_cancer", -0.008}}},
        {"Q5", {{"age_std", -0.15}, {"smoker_current", 0.128},
                {"smoker_previous", 0.010}, {"pack_years_std", 0.30},
                {"emphysema", 0.022}, {"family_lung_cancer", 0.083},
                {"education_university", -0.080}, {"statins", 0.05},
                {"previous_cancer", -0.012}}},
    };
    return spec;
}

}  // namespace fairdca
