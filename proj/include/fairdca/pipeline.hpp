#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairdca/cohort.hpp"
#include "fairdca/ensemble.hpp"
#include "fairdca/policy.hpp"
#include "fairdca/synth.hpp"
#include "fairdca/validation.hpp"

namespace fairdca {

struct GridSpec {
    double from = 0.001;
    double to = 0.30;
    double step = 0.001;

    std::vector<double> values() const { return threshold_grid(from, to, step); }
};

struct ParetoConfig {
    GridSpec grid{0.015, 0.10, 0.005};
    std::string target_group;
    std::vector<double> caps;
    EquityObjective objective = EquityObjective::designated_group;
    bool correct_optimism = false;
};

// Which pipeline stages run (the subcommands toggle these; `run` does all).
struct StageSelection {
    bool validate = true;
    bool evaluate = true;
    bool pareto = true;
    bool plots = true;
};

struct RunConfig {
    std::string cohort_path;       // either a CSV path ...
    std::string preset;            // ... or a preset name ("diabetes"/"lung")
    double preset_scale = 0.01;
    std::optional<std::uint64_t> preset_seed;

    std::string group_column = "group";
    std::vector<Variant> variants = {Variant::no_sa, Variant::single_sa,
                                     Variant::multi_sa};

    std::optional<PerGroup> lambda;  // resolved against preset defaults
    std::optional<PerGroup> t_star;

    std::vector<PolicySpec> policies;  // treat-none and random 5% always added
    double random_baseline_p = 0.05;

    int bootstrap_replicates = 500;
    double ci_level = 0.95;
    bool stratified_bootstrap = false;

    MultiSaOptions multi_sa;
    bool strict_propensity = false;  // retrain propensity models per replicate

    std::optional<ParetoConfig> pareto;
    GridSpec curve_grid;
    std::string reference_group;  // default: highest treat-none sNB
    bool harm_weight_from_policy = false;

    std::uint64_t seed = 1;
    int workers = 1;
    std::string output_dir = "out";
    StageSelection stages;
};

// Parses the JSON config document (documented in docs/config.md). Values not
// present keep their defaults; command-line flags override afterwards.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

struct GapSummary {
    GapReport baseline;   // treat-no-one gaps
    GapReport corrected;  // gaps of the optimism-corrected per-group sNB
    double reduction_max_min = 0.0;       // corrected estimate
    double reduction_mean_vs_ref = 0.0;   // corrected estimate
    Interval reduction_max_min_ci;
    Interval reduction_mean_vs_ref_ci;
};

struct PolicyRow {
    std::string source;  // model variant, or "-" for model-free policies
    EvaluationReport report;
};

struct ParetoResult {
    std::string variant;
    double cap = 0.0;
    std::vector<ParetoPoint> front;
    ParetoPoint treat_none;  // reference point (thresholds empty)
};

struct PipelineResult {
    Cohort cohort;
    std::vector<std::string> groups;
    SnbSettings settings;
    std::string reference_group;
    bool ci_reliable = true;

    std::map<std::string, std::unique_ptr<RiskScorer>> scorers;
    std::map<std::string, OptimismReport> validation;
    std::map<std::string, GapSummary> gaps;
    std::vector<PolicyRow> policies;
    // variant -> group (or "(overall)") -> curve
    std::map<std::string, std::map<std::string, DecisionCurve>> curves;
    std::vector<ParetoResult> fronts;
    std::vector<std::string> artifacts;  // files written
};

// Runs the configured stages and writes artifacts into config.output_dir:
// metrics.json, snb_by_group.csv, decision_curves.csv, pareto.csv and SVG
// plots. Deterministic given the seed. Errors carry the failing stage name.
PipelineResult run_pipeline(const RunConfig& config);

// Regenerates the SVG plots from previously written table artifacts.
std::vector<std::string> render_reports(const std::string& artifact_dir);

}  // namespace fairdca
