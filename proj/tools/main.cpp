#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "fairdca/io.hpp"
#include "fairdca/pipeline.hpp"
#include "fairdca/synth.hpp"

namespace {

using fairdca::RunConfig;

struct CommonFlags {
    std::string config_path;
    std::string cohort;
    std::string preset;
    double scale = -1.0;
    std::string output_dir;
    std::string group_column;
    long long seed = -1;
    int workers = -1;
    int replicates = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--cohort", flags.cohort, "cohort CSV path");
    cmd->add_option("--preset", flags.preset,
                    "synthetic preset (diabetes or lung)");
    cmd->add_option("--scale", flags.scale, "preset size multiplier");
    cmd->add_option("--output-dir", flags.output_dir, "artifact directory");
    cmd->add_option("--group-column", flags.group_column,
                    "protected attribute column");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--workers", flags.workers, "worker thread bound");
    cmd->add_option("--replicates", flags.replicates, "bootstrap replicates");
}

// precedence: command-line flags > config file > defaults
RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) {
        config = fairdca::load_config(flags.config_path);
    }
    if (!flags.cohort.empty()) {
        config.cohort_path = flags.cohort;
        config.preset.clear();
    }
    if (!flags.preset.empty()) {
        config.preset = flags.preset;
        config.cohort_path.clear();
    }
    if (flags.scale > 0.0) config.preset_scale = flags.scale;
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    if (!flags.group_column.empty()) config.group_column = flags.group_column;
    if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.workers > 0) config.workers = flags.workers;
    if (flags.replicates > 0) config.bootstrap_replicates = flags.replicates;
    return config;
}

int run_with_stages(const CommonFlags& flags, bool validate, bool evaluate,
                    bool pareto, bool plots) {
    RunConfig config = resolve_config(flags);
    config.stages = {validate, evaluate, pareto, plots};
    const fairdca::PipelineResult result = fairdca::run_pipeline(config);
    for (const auto& path : result.artifacts) {
        std::cout << path << "\n";
    }
    return 0;
}

int cmd_synth(const CommonFlags& flags, const std::string& spec_path,
              const std::string& out_path) {
    fairdca::CohortSpec spec;
    if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        if (!in) throw fairdca::Error("synth: cannot open '" + spec_path + "'");
        nlohmann::json doc;
        in >> doc;
        spec.seed = doc.value("seed", spec.seed);
        for (const auto& g : doc.at("groups")) {
            spec.groups.push_back({g.at("label").get<std::string>(),
                                   g.at("size").get<std::size_t>(),
                                   g.at("prevalence").get<double>()});
        }
        for (const auto& f : doc.at("features")) {
            fairdca::FeatureSpec feature;
            feature.name = f.at("name").get<std::string>();
            const std::string family = f.value("family", std::string("normal"));
            feature.family = family == "binary"
                                 ? fairdca::FeatureSpec::Family::binary
                                 : fairdca::FeatureSpec::Family::standard_normal;
            feature.rate = f.value("rate", 0.0);
            feature.coefficient = f.value("coefficient", 0.0);
            spec.features.push_back(std::move(feature));
        }
        if (doc.contains("group_offsets")) {
            for (const auto& [g, v] : doc.at("group_offsets").items()) {
                spec.group_offsets[g] = v.get<double>();
            }
        }
        if (doc.contains("covariate_shift")) {
            for (const auto& [g, shifts] : doc.at("covariate_shift").items()) {
                for (const auto& [f, v] : shifts.items()) {
                    spec.covariate_shift[g][f] = v.get<double>();
                }
            }
        }
    } else if (flags.preset == "diabetes") {
        spec = fairdca::preset_diabetes(flags.scale > 0.0 ? flags.scale : 0.01);
    } else if (flags.preset == "lung") {
        spec = fairdca::preset_lung(flags.scale > 0.0 ? flags.scale : 0.01);
    } else {
        throw fairdca::Error("synth: --preset diabetes|lung or --spec required");
    }
    if (flags.seed >= 0) spec.seed = static_cast<std::uint64_t>(flags.seed);
    const fairdca::Cohort cohort = fairdca::generate_cohort(spec);
    fairdca::write_cohort_csv(cohort, out_path);
    std::cout << out_path << "\n";
    return 0;
}

int cmd_fit(const CommonFlags& flags) {
    RunConfig config = resolve_config(flags);
    config.stages = {false, false, false, false};
    const fairdca::PipelineResult result = fairdca::run_pipeline(config);
    std::filesystem::create_directories(config.output_dir);
    for (const auto& [name, scorer] : result.scorers) {
        const std::string path = config.output_dir + "/model_" + name + ".json";
        fairdca::save_scorer(*scorer, path);
        std::cout << path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-aware decision-curve analysis toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* synth = app.add_subcommand("synth", "write a synthetic cohort CSV");
    std::string spec_path, synth_out = "cohort.csv";
    add_common(synth, flags);
    synth->add_option("--spec", spec_path, "custom cohort spec (JSON)");
    synth->add_option("--out", synth_out, "output CSV path");

    auto* fit = app.add_subcommand("fit", "fit the model variants");
    add_common(fit, flags);

    auto* validate =
        app.add_subcommand("validate", "optimism-corrected validation metrics");
    add_common(validate, flags);

    auto* evaluate =
        app.add_subcommand("evaluate", "policy evaluation and decision curves");
    add_common(evaluate, flags);

    auto* pareto =
        app.add_subcommand("pareto", "capacity-constrained threshold search");
    add_common(pareto, flags);

    auto* report = app.add_subcommand("report", "regenerate plots from tables");
    std::string report_dir = "out";
    report->add_option("--from", report_dir, "artifact directory");

    auto* run = app.add_subcommand("run", "full pipeline");
    add_common(run, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(flags, spec_path, synth_out);
        if (fit->parsed()) return cmd_fit(flags);
        if (validate->parsed()) {
            return run_with_stages(flags, true, false, false, false);
        }
        if (evaluate->parsed()) {
            return run_with_stages(flags, false, true, false, false);
        }
        if (pareto->parsed()) {
            return run_with_stages(flags, false, false, true, false);
        }
        if (report->parsed()) {
            for (const auto& path : fairdca::render_reports(report_dir)) {
                std::cout << path << "\n";
            }
            return 0;
        }
        if (run->parsed()) return run_with_stages(flags, true, true, true, true);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
