#include "fairdca/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "fairdca/io.hpp"
#include "fairdca/svg.hpp"

namespace fairdca {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename F>
void stage(const char* name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        throw Error("stage " + std::string(name) + ": " + e.what());
    }
}

// Reports serialize numbers with 12 significant digits; rounding the value
// itself keeps JSON output consistent with the CSV text.
double sig12(double v) {
    if (!std::isfinite(v)) return v;
    return std::strtod(format_sig(v, 12).c_str(), nullptr);
}

json to_json(const Interval& ci) {
    return json::array({sig12(ci.lower), sig12(ci.upper)});
}

json to_json(const MetricSet& m) {
    json snb = json::object();
    for (const auto& [g, v] : m.snb_by_group) snb[g] = sig12(v);
    return json{{"c_statistic", sig12(m.c_statistic)},
                {"calibration_slope", sig12(m.calibration_slope)},
                {"calibration_intercept", sig12(m.calibration_intercept)},
                {"snb_overall", sig12(m.overall_snb)},
                {"snb_by_group", std::move(snb)}};
}

json to_json(const GapReport& gap) {
    json per_group = json::object();
    for (const auto& [g, v] : gap.gap_vs_reference) per_group[g] = sig12(v);
    return json{{"reference", gap.reference},
                {"max_minus_min", sig12(gap.max_minus_min)},
                {"mean_gap_vs_reference", sig12(gap.mean_gap_vs_reference)},
                {"gap_vs_reference", std::move(per_group)}};
}

std::string sanitize(const std::string& label) {
    std::string out;
    for (const char c : label) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

PerGroup per_group_from_utility_json(const json& doc, const char* t_key,
                                     bool want_t_star) {
    // top-level fallback
    std::optional<double> fallback;
    if (doc.contains(t_key)) fallback = doc.at(t_key).get<double>();
    if (doc.contains("proxy") && !want_t_star) {
        const auto& p = doc.at("proxy");
        fallback = lambda_from_rrr(
            ProxyRisk{p.at("p_fn").get<double>(), p.at("p_tp").get<double>()});
    }
    if (doc.contains("utilities")) {
        const auto& u = doc.at("utilities");
        const UtilitySpec spec{u.at("a").get<double>(), u.at("b").get<double>(),
                               u.at("c").get<double>(), u.at("d").get<double>()};
        fallback = want_t_star ? optimal_threshold(spec)
                               : lambda_from_utilities(spec);
    }
    std::map<std::string, double> overrides;
    if (doc.contains("per_group")) {
        for (const auto& [group, entry] : doc.at("per_group").items()) {
            if (entry.contains(t_key)) {
                overrides[group] = entry.at(t_key).get<double>();
            } else if (entry.contains("proxy") && !want_t_star) {
                const auto& p = entry.at("proxy");
                overrides[group] = lambda_from_rrr(ProxyRisk{
                    p.at("p_fn").get<double>(), p.at("p_tp").get<double>()});
            } else if (entry.contains("utilities")) {
                const auto& u = entry.at("utilities");
                const UtilitySpec spec{u.at("a").get<double>(),
                                       u.at("b").get<double>(),
                                       u.at("c").get<double>(),
                                       u.at("d").get<double>()};
                overrides[group] = want_t_star ? optimal_threshold(spec)
                                               : lambda_from_utilities(spec);
            }
        }
    }
    return PerGroup(std::move(overrides), fallback);
}

void check_allowed_keys(const json& doc, const std::set<std::string>& allowed,
                        const char* where) {
    for (const auto& [key, value] : doc.items()) {
        if (!allowed.count(key)) {
            throw Error(std::string("config: unknown key '") + key + "' in " +
                        where);
        }
    }
}

PolicySpec policy_from_json(const json& doc) {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "treat_none") return PolicySpec::none();
    if (kind == "treat_all") return PolicySpec::all();
    if (kind == "random_fraction") {
        const double p = doc.at("p").get<double>();
        const RandomMode mode =
            doc.value("mode", std::string("expected")) == "sampled"
                ? RandomMode::sampled
                : RandomMode::expected;
        return PolicySpec::random(p, mode, doc.value("seed", 0ULL));
    }
    if (kind == "threshold") {
        if (doc.contains("threshold")) {
            return PolicySpec::cutoff(PerGroup(doc.at("threshold").get<double>()));
        }
        std::map<std::string, double> cutoffs;
        for (const auto& [group, t] : doc.at("thresholds").items()) {
            cutoffs[group] = t.get<double>();
        }
        return PolicySpec::cutoff(PerGroup(std::move(cutoffs)));
    }
    throw Error("config: unknown policy kind '" + kind + "'");
}

GridSpec grid_from_json(const json& doc, const GridSpec& defaults) {
    GridSpec grid = defaults;
    grid.from = doc.value("from", grid.from);
    grid.to = doc.value("to", grid.to);
    grid.step = doc.value("step", grid.step);
    return grid;
}

std::ofstream open_artifact(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}

// treat-no-one sNB per group is 1 - prevalence, exactly
std::map<std::string, double> treat_none_snb(const Cohort& cohort) {
    std::map<std::string, double> snb;
    for (const auto& [label, rows] : cohort.rows_by_group()) {
        double pos = 0.0;
        for (const std::size_t i : rows) pos += cohort.outcome[i];
        snb[label] = 1.0 - pos / static_cast<double>(rows.size());
    }
    return snb;
}

}  // namespace

RunConfig config_from_json(const json& doc) {
    check_allowed_keys(
        doc,
        {"cohort", "preset", "group_column", "variants", "utility", "policies",
         "include_baseline_policies", "bootstrap", "multi_sa", "pareto",
         "curve_grid", "reference_group", "harm_weight_from_policy", "seed",
         "workers", "output_dir"},
        "the top level");
    RunConfig config;
    if (doc.contains("cohort")) {
        config.cohort_path = doc.at("cohort").get<std::string>();
    }
    if (doc.contains("preset")) {
        const auto& p = doc.at("preset");
        check_allowed_keys(p, {"name", "scale", "seed"}, "preset");
        config.preset = p.at("name").get<std::string>();
        config.preset_scale = p.value("scale", config.preset_scale);
        if (p.contains("seed")) config.preset_seed = p.at("seed").get<std::uint64_t>();
    }
    config.group_column = doc.value("group_column", config.group_column);
    if (doc.contains("variants")) {
        config.variants.clear();
        for (const auto& name : doc.at("variants")) {
            config.variants.push_back(variant_from_name(name.get<std::string>()));
        }
    }
    if (doc.contains("utility")) {
        const auto& u = doc.at("utility");
        check_allowed_keys(u, {"t_star", "lambda", "proxy", "utilities", "per_group"},
                           "utility");
        config.t_star = per_group_from_utility_json(u, "t_star", true);
        config.lambda = per_group_from_utility_json(u, "lambda", false);
    }
    if (doc.contains("policies")) {
        for (const auto& p : doc.at("policies")) {
            config.policies.push_back(policy_from_json(p));
        }
    }
    if (doc.contains("include_baseline_policies") &&
        !doc.at("include_baseline_policies").get<bool>()) {
        config.random_baseline_p = -1.0;  // sentinel: baselines disabled
    }
    if (doc.contains("bootstrap")) {
        const auto& b = doc.at("bootstrap");
        check_allowed_keys(b, {"replicates", "ci_level", "stratified"}, "bootstrap");
        config.bootstrap_replicates = b.value("replicates", config.bootstrap_replicates);
        config.ci_level = b.value("ci_level", config.ci_level);
        config.stratified_bootstrap = b.value("stratified", config.stratified_bootstrap);
    }
    if (doc.contains("multi_sa")) {
        const auto& m = doc.at("multi_sa");
        check_allowed_keys(m, {"propensity_penalty", "forgetting", "strict_propensity"},
                           "multi_sa");
        config.multi_sa.propensity_penalty =
            m.value("propensity_penalty", config.multi_sa.propensity_penalty);
        config.multi_sa.forgetting = m.value("forgetting", config.multi_sa.forgetting);
        config.strict_propensity = m.value("strict_propensity", config.strict_propensity);
    }
    if (doc.contains("pareto")) {
        const auto& p = doc.at("pareto");
        check_allowed_keys(p, {"grid", "target_group", "caps", "objective",
                               "correct_optimism"},
                           "pareto");
        ParetoConfig pc;
        if (p.contains("grid")) pc.grid = grid_from_json(p.at("grid"), pc.grid);
        pc.target_group = p.value("target_group", std::string{});
        for (const auto& cap : p.value("caps", std::vector<double>{})) {
            pc.caps.push_back(cap);
        }
        const std::string objective = p.value("objective", std::string("designated_group"));
        if (objective == "maximin") pc.objective = EquityObjective::maximin;
        else if (objective != "designated_group") {
            throw Error("config: unknown pareto objective '" + objective + "'");
        }
        pc.correct_optimism = p.value("correct_optimism", false);
        config.pareto = std::move(pc);
    }
    if (doc.contains("curve_grid")) {
        config.curve_grid = grid_from_json(doc.at("curve_grid"), config.curve_grid);
    }
    config.reference_group = doc.value("reference_group", config.reference_group);
    config.harm_weight_from_policy =
        doc.value("harm_weight_from_policy", config.harm_weight_from_policy);
    config.seed = doc.value("seed", config.seed);
    config.workers = doc.value("workers", config.workers);
    config.output_dir = doc.value("output_dir", config.output_dir);
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw Error("config: invalid JSON in '" + path + "': " + e.what());
    }
    return config_from_json(doc);
}

namespace {

SnbSettings resolve_settings(const RunConfig& config) {
    std::optional<PerGroup> lambda = config.lambda;
    std::optional<PerGroup> t_star = config.t_star;
    if (config.preset == "diabetes") {
        if (!lambda) lambda = PerGroup(0.58);
        if (!t_star) t_star = PerGroup(0.15);
    } else if (config.preset == "lung") {
        if (!lambda) lambda = PerGroup(0.20);
        if (!t_star) t_star = PerGroup(0.015);
    }
    if (!lambda) lambda = PerGroup(1.0);
    if (!t_star) {
        throw Error("config: utility.t_star is required for cohorts without a "
                    "preset default");
    }
    return SnbSettings{*lambda, *t_star};
}

struct VariantBundle {
    std::string name;
    Trainer trainer;
};

std::vector<VariantBundle> make_trainers(const RunConfig& config,
                                         const Cohort& cohort) {
    std::vector<VariantBundle> bundles;
    for (const Variant variant : config.variants) {
        VariantBundle bundle;
        bundle.name = variant_name(variant);
        if (variant == Variant::multi_sa && !config.strict_propensity) {
            // propensity models are fitted once on the original data and
            // reused across bootstrap replicates
            auto original = std::make_shared<EnsembleModel>(
                fit_multi_sa(cohort, config.multi_sa));
            const MultiSaOptions options = config.multi_sa;
            bundle.trainer = [original, options](const Cohort& data) {
                return std::unique_ptr<RiskScorer>(std::make_unique<EnsembleScorer>(
                    refit_multi_sa_members(data, *original, options)));
            };
        } else {
            const MultiSaOptions options = config.multi_sa;
            bundle.trainer = [variant, options](const Cohort& data) {
                return fit_variant(data, variant, options);
            };
        }
        bundles.push_back(std::move(bundle));
    }
    return bundles;
}

void write_metrics_json(const RunConfig& config, const PipelineResult& result,
                        const std::string& path) {
    json doc;
    doc["seed"] = config.seed;
    doc["groups"] = result.groups;
    doc["reference_group"] = result.reference_group;
    doc["bootstrap"] = {
        {"replicates", config.bootstrap_replicates},
        {"ci_level", sig12(config.ci_level)},
        {"stratified", config.stratified_bootstrap},
        {"ci_method", "percentile of replicate-wise optimism-corrected values"},
        {"reliable", result.ci_reliable},
    };
    json lambda = json::object(), t_star = json::object();
    for (const auto& g : result.groups) {
        lambda[g] = sig12(result.settings.lambda.at(g));
        t_star[g] = sig12(result.settings.t_star.at(g));
    }
    doc["utility"] = {{"lambda", std::move(lambda)}, {"t_star", std::move(t_star)}};

    const auto baseline_snb = treat_none_snb(result.cohort);
    json base_snb = json::object(), base_per10k = json::object();
    for (const auto& [g, v] : baseline_snb) {
        base_snb[g] = sig12(v);
        base_per10k[g] = per_ten_thousand(v);
    }
    doc["baseline"] = {{"policy", "treat_none"},
                       {"snb_by_group", std::move(base_snb)},
                       {"snb_tn_per_10k", std::move(base_per10k)}};
    if (result.groups.size() >= 2) {
        doc["baseline"]["gap"] =
            to_json(gap_report(baseline_snb, result.reference_group));
    }

    json variants = json::object();
    for (const auto& [name, report] : result.validation) {
        json entry;
        entry["apparent"] = to_json(report.apparent);
        entry["optimism"] = to_json(report.optimism);
        entry["corrected"] = to_json(report.corrected);
        json ci = json::object();
        for (const auto& [key, interval] : report.ci) ci[key] = to_json(interval);
        entry["ci"] = std::move(ci);
        json valid = json::object();
        for (const auto& [key, count] : report.valid_replicates) valid[key] = count;
        entry["valid_replicates"] = std::move(valid);
        entry["skipped_replicates"] = report.skipped;
        json per10k = json::object();
        for (const auto& [g, v] : report.corrected.snb_by_group) {
            per10k[g] = std::isfinite(v) ? json(per_ten_thousand(v)) : json();
        }
        entry["corrected_snb_tn_per_10k"] = std::move(per10k);
        const auto git = result.gaps.find(name);
        if (git != result.gaps.end()) {
            const GapSummary& gap = git->second;
            entry["gap"] = {
                {"baseline", to_json(gap.baseline)},
                {"corrected", to_json(gap.corrected)},
                {"reduction_vs_treat_none",
                 {{"max_min", sig12(gap.reduction_max_min)},
                  {"max_min_ci", to_json(gap.reduction_max_min_ci)},
                  {"mean_vs_reference", sig12(gap.reduction_mean_vs_ref)},
                  {"mean_vs_reference_ci", to_json(gap.reduction_mean_vs_ref_ci)},
                  {"per_10k_max_min", per_ten_thousand(gap.reduction_max_min)}}},
            };
        }
        variants[name] = std::move(entry);
    }
    doc["variants"] = std::move(variants);

    auto out = open_artifact(path);
    out << doc.dump(2) << "\n";
}

void write_snb_csv(const PipelineResult& result, const std::string& path) {
    auto out = open_artifact(path);
    out << "source,policy,group,n,prevalence,lambda,t_star,policy_threshold,"
           "tp,fp,fn,tn,snb,snb_tn_per_10k,overall_snb,flagged_fraction\n";
    for (const auto& row : result.policies) {
        for (const auto& g : row.report.groups) {
            out << row.source << ',' << row.report.policy << ',' << g.group_id
                << ',' << format_sig(g.counts.n()) << ','
                << format_sig(g.counts.prevalence()) << ','
                << format_sig(g.lambda) << ',' << format_sig(g.t_star) << ','
                << (g.policy_threshold ? format_sig(*g.policy_threshold) : "")
                << ',' << format_sig(g.counts.tp) << ','
                << format_sig(g.counts.fp) << ',' << format_sig(g.counts.fn)
                << ',' << format_sig(g.counts.tn) << ',' << format_sig(g.snb)
                << ',' << per_ten_thousand(g.snb) << ','
                << format_sig(row.report.overall_snb) << ','
                << format_sig(row.report.flagged_fraction) << "\n";
        }
    }
}

void write_curves_csv(const PipelineResult& result, const std::string& path) {
    auto out = open_artifact(path);
    out << "variant,group,threshold,nb_model,nb_treat_all,nb_treat_none,"
           "nb_model_tp_per_10k,nb_treat_all_tp_per_10k\n";
    for (const auto& [variant, by_group] : result.curves) {
        for (const auto& [group, curve] : by_group) {
            for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
                out << variant << ',' << group << ','
                    << format_sig(curve.thresholds[i]) << ','
                    << format_sig(curve.nb_model[i]) << ','
                    << format_sig(curve.nb_treat_all[i]) << ','
                    << format_sig(curve.nb_treat_none[i]) << ','
                    << format_sig(curve.nb_model[i] * 10000.0) << ','
                    << format_sig(curve.nb_treat_all[i] * 10000.0) << "\n";
            }
        }
    }
}

void write_pareto_csv(const RunConfig& config, const PipelineResult& result,
                      const std::string& path) {
    auto out = open_artifact(path);
    out << "variant,cap,objective,target_group,t_target,t_rest,overall_snb,"
           "target_snb,flagged_fraction,overall_snb_tn_per_10k,"
           "target_snb_tn_per_10k\n";
    const std::string target =
        config.pareto ? config.pareto->target_group : std::string{};
    const std::string objective =
        config.pareto && config.pareto->objective == EquityObjective::maximin
            ? "maximin"
            : "designated_group";
    for (const auto& front : result.fronts) {
        for (const auto& point : front.front) {
            double t_target = kNaN, t_rest = kNaN;
            for (const auto& [g, t] : point.thresholds) {
                if (g == target) t_target = t;
                else t_rest = t;
            }
            out << front.variant << ',' << format_sig(front.cap) << ','
                << objective << ',' << target << ',' << format_sig(t_target)
                << ',' << format_sig(t_rest) << ','
                << format_sig(point.overall_snb) << ','
                << format_sig(point.target_snb) << ','
                << format_sig(point.flagged_fraction) << ','
                << per_ten_thousand(point.overall_snb) << ','
                << per_ten_thousand(point.target_snb) << "\n";
        }
    }
}

void plot_decision_curves(const PipelineResult& result, const std::string& dir,
                          std::vector<std::string>& artifacts) {
    // group -> variant -> curve
    std::map<std::string, std::map<std::string, const DecisionCurve*>> by_group;
    for (const auto& [variant, curves] : result.curves) {
        for (const auto& [group, curve] : curves) {
            by_group[group][variant] = &curve;
        }
    }
    for (const auto& [group, variants] : by_group) {
        std::vector<svg::Series> series;
        const DecisionCurve* reference = nullptr;
        for (const auto& [variant, curve] : variants) {
            svg::Series s;
            s.label = variant;
            s.x = curve->thresholds;
            s.y = curve->nb_model;
            for (double& v : s.y) v *= 10000.0;
            series.push_back(std::move(s));
            reference = curve;
        }
        if (reference != nullptr) {
            svg::Series all{"Treat all", reference->thresholds,
                            reference->nb_treat_all, true};
            for (double& v : all.y) v *= 10000.0;
            svg::Series none{"Treat none", reference->thresholds,
                             reference->nb_treat_none, true};
            series.push_back(std::move(all));
            series.push_back(std::move(none));
        }
        std::optional<double> vline;
        if (group != "(overall)") {
            vline = result.settings.t_star.at(group);
        } else {
            // draw the marker only when t* is uniform across groups
            bool uniform = true;
            double value = result.settings.t_star.at(result.groups.front());
            for (const auto& g : result.groups) {
                if (result.settings.t_star.at(g) != value) uniform = false;
            }
            if (uniform) vline = value;
        }
        const std::string name = group == "(overall)" ? "overall" : sanitize(group);
        const std::string path = dir + "/decision_curve_" + name + ".svg";
        svg::write_line_chart(path, "Decision curve - " + group,
                              "threshold", "net benefit (TP per 10,000)",
                              series, vline);
        artifacts.push_back(path);
    }
}

void plot_snb_bars(const PipelineResult& result, const std::string& dir,
                   std::vector<std::string>& artifacts,
                   std::vector<std::string>& notices) {
    if (result.policies.empty()) {
        notices.push_back("policy plot skipped: no policies were evaluated");
        return;
    }
    std::vector<std::string> categories = result.groups;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& row : result.policies) {
        std::vector<double> per_group;
        for (const auto& g : categories) {
            double v = kNaN;
            for (const auto& s : row.report.groups) {
                if (s.group_id == g) v = s.snb * 10000.0;
            }
            per_group.push_back(v);
            if (std::isfinite(v)) lo = std::min(lo, v);
        }
        labels.push_back(row.source == "-" ? row.report.policy
                                           : row.source + " " + row.report.policy);
        values.push_back(std::move(per_group));
    }
    const std::string path = dir + "/snb_by_policy.svg";
    svg::write_bar_chart(path, "Subgroup net benefit by policy",
                         "sNB (TN per 10,000)", categories, labels, values,
                         std::isfinite(lo) ? lo - 20.0 : 0.0);
    artifacts.push_back(path);
}

void plot_pareto(const PipelineResult& result, const std::string& dir,
                 std::vector<std::string>& artifacts) {
    // one plot per cap, one series per variant
    std::map<double, std::vector<const ParetoResult*>> by_cap;
    for (const auto& front : result.fronts) by_cap[front.cap].push_back(&front);
    for (const auto& [cap, fronts] : by_cap) {
        std::vector<svg::Series> series;
        std::vector<svg::Marker> markers;
        for (const ParetoResult* front : fronts) {
            svg::Series s;
            s.label = front->variant;
            for (const auto& point : front->front) {
                s.x.push_back(point.overall_snb * 10000.0);
                s.y.push_back(point.target_snb * 10000.0);
            }
            series.push_back(std::move(s));
        }
        if (!fronts.empty()) {
            markers.push_back(svg::Marker{
                "Treat none", fronts.front()->treat_none.overall_snb * 10000.0,
                fronts.front()->treat_none.target_snb * 10000.0});
        }
        const std::string path =
            dir + "/pareto_cap_" + sanitize(format_sig(cap, 6)) + ".svg";
        svg::write_scatter(path, "Pareto front, cap " + format_sig(cap, 6),
                           "overall sNB (TN per 10,000)",
                           "target-group sNB (TN per 10,000)", series, markers);
        artifacts.push_back(path);
    }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    PipelineResult result;

    stage("load", [&] {
        if (!config.cohort_path.empty()) {
            result.cohort = load_cohort(config.cohort_path, config.group_column);
        } else if (config.preset == "diabetes" || config.preset == "lung") {
            CohortSpec spec = config.preset == "diabetes"
                                  ? preset_diabetes(config.preset_scale)
                                  : preset_lung(config.preset_scale);
            if (config.preset_seed) spec.seed = *config.preset_seed;
            result.cohort = generate_cohort(spec);
        } else if (!config.preset.empty()) {
            throw Error("unknown preset '" + config.preset + "'");
        } else {
            throw Error("a cohort path or preset is required");
        }
        result.groups = result.cohort.group_labels();
    });

    stage("configure", [&] {
        result.settings = resolve_settings(config);
        for (const auto& g : result.groups) {
            // fail fast on missing per-group values
            (void)result.settings.lambda.at(g);
            const double t = result.settings.t_star.at(g);
            if (!(t > 0.0 && t < 1.0)) {
                throw Error("t_star for group '" + g + "' outside (0,1)");
            }
        }
        if (config.reference_group.empty()) {
            const auto baseline = treat_none_snb(result.cohort);
            result.reference_group = baseline.begin()->first;
            for (const auto& [g, v] : baseline) {
                if (v > baseline.at(result.reference_group)) {
                    result.reference_group = g;
                }
            }
        } else {
            if (!std::count(result.groups.begin(), result.groups.end(),
                            config.reference_group)) {
                throw Error("reference group '" + config.reference_group +
                            "' not present in the cohort");
            }
            result.reference_group = config.reference_group;
        }
        result.ci_reliable = config.bootstrap_replicates >= 100;
    });

    std::vector<VariantBundle> bundles;
    stage("fit", [&] {
        bundles = make_trainers(config, result.cohort);
        for (const auto& bundle : bundles) {
            result.scorers[bundle.name] = bundle.trainer(result.cohort);
        }
    });

    if (config.stages.validate) {
        stage("validate", [&] {
            BootstrapOptions options;
            options.replicates = config.bootstrap_replicates;
            options.seed = config.seed;
            options.workers = config.workers;
            options.ci_level = config.ci_level;
            options.stratified = config.stratified_bootstrap;

            const std::vector<std::string> keys = metric_keys(result.groups);
            const std::size_t width = keys.size();
            const std::string reference = result.reference_group;
            const SnbSettings settings = result.settings;
            const std::vector<std::string> groups = result.groups;

            const auto evaluate = [settings, groups, reference](
                                      const RiskScorer& scorer,
                                      const Cohort& data) {
                const MetricSet metrics = compute_metrics(scorer, data, settings);
                std::vector<double> values = flatten_metrics(metrics, groups);
                double reduction_max_min = kNaN;
                double reduction_mean = kNaN;
                const auto baseline = treat_none_snb(data);
                if (baseline.size() >= 2 && baseline.count(reference) &&
                    metrics.snb_by_group.size() == baseline.size()) {
                    const GapReport before = gap_report(baseline, reference);
                    const GapReport after =
                        gap_report(metrics.snb_by_group, reference);
                    reduction_max_min = before.max_minus_min - after.max_minus_min;
                    reduction_mean = before.mean_gap_vs_reference -
                                     after.mean_gap_vs_reference;
                }
                values.push_back(reduction_max_min);
                values.push_back(reduction_mean);
                return values;
            };

            for (const auto& bundle : bundles) {
                const VectorOptimism values = optimism_corrected_values(
                    result.cohort, bundle.trainer, evaluate, options);

                OptimismReport report;
                report.replicates = values.replicates;
                report.skipped = values.skipped;
                const auto slice = [&](const std::vector<double>& v) {
                    return std::vector<double>(v.begin(),
                                               v.begin() + static_cast<long>(width));
                };
                report.apparent = unflatten_metrics(slice(values.apparent), result.groups);
                report.optimism = unflatten_metrics(slice(values.optimism), result.groups);
                report.corrected = unflatten_metrics(slice(values.corrected), result.groups);
                for (std::size_t k = 0; k < width; ++k) {
                    report.valid_replicates[keys[k]] = values.valid[k];
                    if (values.valid[k] > 0) report.ci[keys[k]] = values.ci[k];
                }
                result.validation.emplace(bundle.name, std::move(report));

                if (result.groups.size() >= 2) {
                    GapSummary gap;
                    gap.baseline =
                        gap_report(treat_none_snb(result.cohort), reference);
                    gap.corrected = gap_report(
                        result.validation.at(bundle.name).corrected.snb_by_group,
                        reference);
                    gap.reduction_max_min = values.corrected[width];
                    gap.reduction_mean_vs_ref = values.corrected[width + 1];
                    gap.reduction_max_min_ci = values.ci[width];
                    gap.reduction_mean_vs_ref_ci = values.ci[width + 1];
                    result.gaps.emplace(bundle.name, std::move(gap));
                }
            }
        });
    }

    if (config.stages.evaluate) {
        stage("evaluate", [&] {
            const std::vector<double> neutral(result.cohort.size(), 0.5);
            std::vector<PolicySpec> model_free;
            if (config.random_baseline_p >= 0.0) {
                model_free.push_back(PolicySpec::none());
                model_free.push_back(PolicySpec::random(config.random_baseline_p));
            }
            std::vector<PolicySpec> threshold_policies;
            for (const auto& policy : config.policies) {
                (policy.kind == PolicyKind::threshold ? threshold_policies
                                                      : model_free)
                    .push_back(policy);
            }
            std::set<std::string> seen;
            const EvaluateOptions eval_options{config.harm_weight_from_policy};
            for (const auto& policy : model_free) {
                if (!seen.insert(policy.name()).second) continue;
                PolicyRow row;
                row.source = "-";
                row.report = evaluate_policy(policy, neutral, result.cohort.outcome,
                                             result.cohort.group,
                                             result.settings.lambda,
                                             result.settings.t_star, eval_options);
                result.policies.push_back(std::move(row));
            }
            for (const auto& [name, scorer] : result.scorers) {
                const std::vector<double> scores = scorer->score(result.cohort);
                PolicyRow model_row;
                model_row.source = name;
                model_row.report = evaluate_policy(
                    PolicySpec::cutoff(result.settings.t_star), scores,
                    result.cohort.outcome, result.cohort.group,
                    result.settings.lambda, result.settings.t_star, eval_options);
                model_row.report.policy = "model@t_star";
                result.policies.push_back(std::move(model_row));
                for (const auto& policy : threshold_policies) {
                    PolicyRow row;
                    row.source = name;
                    row.report = evaluate_policy(policy, scores,
                                                 result.cohort.outcome,
                                                 result.cohort.group,
                                                 result.settings.lambda,
                                                 result.settings.t_star,
                                                 eval_options);
                    result.policies.push_back(std::move(row));
                }

                // per-group and overall decision curves (classic net benefit)
                const std::vector<double> grid = config.curve_grid.values();
                std::map<std::string, DecisionCurve> curves;
                curves["(overall)"] = decision_curve(scores, result.cohort.outcome, grid);
                for (const auto& [label, rows] : result.cohort.rows_by_group()) {
                    std::vector<double> gs, gy;
                    gs.reserve(rows.size());
                    gy.reserve(rows.size());
                    for (const std::size_t i : rows) {
                        gs.push_back(scores[i]);
                        gy.push_back(result.cohort.outcome[i]);
                    }
                    curves[label] = decision_curve(gs, gy, grid);
                }
                result.curves.emplace(name, std::move(curves));
            }
        });
    }

    if (config.stages.pareto && config.pareto) {
        stage("pareto", [&] {
            const ParetoConfig& pc = *config.pareto;
            if (pc.target_group.empty()) {
                throw Error("pareto: target_group is required");
            }
            if (pc.caps.empty()) throw Error("pareto: at least one cap required");
            TwoTierSearch search{pc.grid.values(), pc.target_group, pc.objective};

            for (const auto& bundle : bundles) {
                const auto& scorer = result.scorers.at(bundle.name);
                const std::vector<double> scores = scorer->score(result.cohort);
                std::vector<ParetoPoint> candidates = evaluate_two_tier(
                    search, scores, result.cohort.outcome, result.cohort.group,
                    result.settings.lambda, result.settings.t_star);

                if (pc.correct_optimism) {
                    BootstrapOptions options;
                    options.replicates = config.bootstrap_replicates;
                    options.seed = config.seed;
                    options.workers = config.workers;
                    options.ci_level = config.ci_level;
                    options.stratified = config.stratified_bootstrap;
                    const SnbSettings settings = result.settings;
                    const TwoTierSearch search_copy = search;
                    const auto evaluate = [search_copy, settings](
                                              const RiskScorer& s,
                                              const Cohort& data) {
                        const std::vector<double> sc = s.score(data);
                        const std::vector<ParetoPoint> points = evaluate_two_tier(
                            search_copy, sc, data.outcome, data.group,
                            settings.lambda, settings.t_star);
                        std::vector<double> flat;
                        flat.reserve(points.size() * 2);
                        for (const auto& point : points) {
                            flat.push_back(point.overall_snb);
                            flat.push_back(point.target_snb);
                        }
                        return flat;
                    };
                    const VectorOptimism corrected = optimism_corrected_values(
                        result.cohort, bundle.trainer, evaluate, options);
                    for (std::size_t i = 0; i < candidates.size(); ++i) {
                        candidates[i].overall_snb = corrected.corrected[2 * i];
                        candidates[i].target_snb = corrected.corrected[2 * i + 1];
                    }
                }

                const EvaluationReport none_report = evaluate_policy(
                    PolicySpec::none(), scores, result.cohort.outcome,
                    result.cohort.group, result.settings.lambda,
                    result.settings.t_star);
                ParetoPoint none_point;
                none_point.overall_snb = none_report.overall_snb;
                none_point.flagged_fraction = 0.0;
                if (pc.objective == EquityObjective::maximin) {
                    double lo = std::numeric_limits<double>::infinity();
                    for (const auto& g : none_report.groups) lo = std::min(lo, g.snb);
                    none_point.target_snb = lo;
                } else {
                    for (const auto& g : none_report.groups) {
                        if (g.group_id == pc.target_group) none_point.target_snb = g.snb;
                    }
                }

                for (const double cap : pc.caps) {
                    ParetoResult front;
                    front.variant = bundle.name;
                    front.cap = cap;
                    front.front = pareto_front(candidates, CapacityConstraint{cap});
                    front.treat_none = none_point;
                    result.fronts.push_back(std::move(front));
                }
            }
        });
    }

    stage("report", [&] {
        std::filesystem::create_directories(config.output_dir);
        std::vector<std::string> notices;
        if (config.stages.validate) {
            const std::string path = config.output_dir + "/metrics.json";
            write_metrics_json(config, result, path);
            result.artifacts.push_back(path);
        }
        if (config.stages.evaluate) {
            const std::string snb_path = config.output_dir + "/snb_by_group.csv";
            write_snb_csv(result, snb_path);
            result.artifacts.push_back(snb_path);
            const std::string curve_path =
                config.output_dir + "/decision_curves.csv";
            write_curves_csv(result, curve_path);
            result.artifacts.push_back(curve_path);
        }
        if (config.stages.pareto && config.pareto) {
            const std::string path = config.output_dir + "/pareto.csv";
            write_pareto_csv(config, result, path);
            result.artifacts.push_back(path);
        }
        if (config.stages.plots) {
            if (config.stages.evaluate) {
                plot_decision_curves(result, config.output_dir, result.artifacts);
                plot_snb_bars(result, config.output_dir, result.artifacts, notices);
            }
            if (config.stages.pareto && config.pareto) {
                plot_pareto(result, config.output_dir, result.artifacts);
            }
        }
        if (!notices.empty()) {
            const std::string path = config.output_dir + "/notices.txt";
            auto out = open_artifact(path);
            for (const auto& notice : notices) out << notice << "\n";
            result.artifacts.push_back(path);
        }
    });

    return result;
}

std::vector<std::string> render_reports(const std::string& artifact_dir) {
    std::vector<std::string> written;
    const std::string curves_path = artifact_dir + "/decision_curves.csv";
    if (std::filesystem::exists(curves_path)) {
        const CsvTable table = read_csv_table(curves_path);
        const std::size_t variant_col = table.column("variant");
        const std::size_t group_col = table.column("group");
        const std::size_t t_col = table.column("threshold");
        const std::size_t model_col = table.column("nb_model");
        const std::size_t all_col = table.column("nb_treat_all");
        // group -> label -> series
        std::map<std::string, std::map<std::string, svg::Series>> plots;
        for (const auto& row : table.rows) {
            const std::string group = row[group_col];
            const double t = std::strtod(row[t_col].c_str(), nullptr);
            auto& model = plots[group][row[variant_col]];
            model.label = row[variant_col];
            model.x.push_back(t);
            model.y.push_back(std::strtod(row[model_col].c_str(), nullptr) * 10000.0);
            auto& all = plots[group]["Treat all"];
            if (all.x.empty() || all.x.back() != t) {
                all.label = "Treat all";
                all.dashed = true;
                all.x.push_back(t);
                all.y.push_back(std::strtod(row[all_col].c_str(), nullptr) * 10000.0);
            }
        }
        for (auto& [group, by_label] : plots) {
            std::vector<svg::Series> series;
            for (auto& [label, s] : by_label) series.push_back(std::move(s));
            svg::Series none{"Treat none", series.front().x,
                             std::vector<double>(series.front().x.size(), 0.0),
                             true};
            series.push_back(std::move(none));
            const std::string name =
                group == "(overall)" ? "overall" : sanitize(group);
            const std::string path =
                artifact_dir + "/decision_curve_" + name + ".svg";
            svg::write_line_chart(path, "Decision curve - " + group, "threshold",
                                  "net benefit (TP per 10,000)", series);
            written.push_back(path);
        }
    }

    const std::string snb_path = artifact_dir + "/snb_by_group.csv";
    if (std::filesystem::exists(snb_path)) {
        const CsvTable table = read_csv_table(snb_path);
        const std::size_t source_col = table.column("source");
        const std::size_t policy_col = table.column("policy");
        const std::size_t group_col = table.column("group");
        const std::size_t per10k_col = table.column("snb_tn_per_10k");
        std::set<std::string> group_set;
        for (const auto& row : table.rows) group_set.insert(row[group_col]);
        const std::vector<std::string> categories(group_set.begin(), group_set.end());
        std::map<std::string, std::map<std::string, double>> by_policy;
        for (const auto& row : table.rows) {
            const std::string label = row[source_col] == "-"
                                          ? row[policy_col]
                                          : row[source_col] + " " + row[policy_col];
            by_policy[label][row[group_col]] =
                std::strtod(row[per10k_col].c_str(), nullptr);
        }
        std::vector<std::string> labels;
        std::vector<std::vector<double>> values;
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& [label, per_group] : by_policy) {
            labels.push_back(label);
            std::vector<double> row;
            for (const auto& g : categories) {
                const auto it = per_group.find(g);
                row.push_back(it == per_group.end() ? kNaN : it->second);
                if (it != per_group.end()) lo = std::min(lo, it->second);
            }
            values.push_back(std::move(row));
        }
        const std::string path = artifact_dir + "/snb_by_policy.svg";
        svg::write_bar_chart(path, "Subgroup net benefit by policy",
                             "sNB (TN per 10,000)", categories, labels, values,
                             std::isfinite(lo) ? lo - 20.0 : 0.0);
        written.push_back(path);
    }

    const std::string pareto_path = artifact_dir + "/pareto.csv";
    if (std::filesystem::exists(pareto_path)) {
        const CsvTable table = read_csv_table(pareto_path);
        const std::size_t variant_col = table.column("variant");
        const std::size_t cap_col = table.column("cap");
        const std::size_t overall_col = table.column("overall_snb");
        const std::size_t target_col = table.column("target_snb");
        std::map<std::string, std::map<std::string, svg::Series>> by_cap;
        for (const auto& row : table.rows) {
            auto& series = by_cap[row[cap_col]][row[variant_col]];
            series.label = row[variant_col];
            series.x.push_back(std::strtod(row[overall_col].c_str(), nullptr) * 10000.0);
            series.y.push_back(std::strtod(row[target_col].c_str(), nullptr) * 10000.0);
        }
        for (auto& [cap, by_variant] : by_cap) {
            std::vector<svg::Series> series;
            for (auto& [label, s] : by_variant) series.push_back(std::move(s));
            const std::string path =
                artifact_dir + "/pareto_cap_" + sanitize(cap) + ".svg";
            svg::write_scatter(path, "Pareto front, cap " + cap,
                               "overall sNB (TN per 10,000)",
                               "target-group sNB (TN per 10,000)", series);
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace fairdca
