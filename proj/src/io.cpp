#include "fairdca/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fairdca/common.hpp"

namespace fairdca {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size();
}

std::string full_precision(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

json model_to_json(const FittedModel& model) {
    json doc;
    doc["names"] = model.names;
    doc["coef"] = std::vector<double>(model.coef.data(),
                                      model.coef.data() + model.coef.size());
    doc["deviance"] = model.deviance;
    doc["iterations"] = model.iterations;
    if (!model.variant.empty()) doc["variant"] = model.variant;
    if (!model.weight_note.empty()) doc["weight_note"] = model.weight_note;
    return doc;
}

FittedModel model_from_json(const json& doc) {
    FittedModel model;
    model.names = doc.at("names").get<std::vector<std::string>>();
    const auto coef = doc.at("coef").get<std::vector<double>>();
    if (coef.size() != model.names.size()) {
        throw Error("model artifact: coefficient/name count mismatch");
    }
    model.coef = Eigen::Map<const Eigen::VectorXd>(
        coef.data(), static_cast<Eigen::Index>(coef.size()));
    model.deviance = doc.value("deviance", 0.0);
    model.iterations = doc.value("iterations", 0);
    model.variant = doc.value("variant", std::string{});
    model.weight_note = doc.value("weight_note", std::string{});
    model.converged = true;
    return model;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw Error("csv table: missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_csv_table: cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("read_csv_table: '" + path + "' is empty");
    }
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != table.header.size()) {
            throw Error("read_csv_table: ragged row in '" + path + "'");
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

Cohort load_cohort(const std::string& path, const std::string& group_column) {
    std::ifstream in(path);
    if (!in) throw Error("load_cohort: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("load_cohort: '" + path + "' is empty");
    }
    const std::vector<std::string> header = split_csv_line(line);
    const auto column_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error("load_cohort: missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = column_of("id");
    const std::size_t group_col = column_of(group_column);
    const std::size_t outcome_col = column_of("outcome");
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == id_col || j == group_col || j == outcome_col) continue;
        if (header[j].empty()) {
            throw Error("load_cohort: empty feature name in header");
        }
        feature_cols.push_back(j);
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t line_number = 1;
    std::vector<std::string> missing_rows;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw Error("load_cohort: row " + std::to_string(line_number) +
                        " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(header.size()));
        }
        for (const auto& f : fields) {
            if (f.empty()) {
                missing_rows.push_back(std::to_string(line_number));
                break;
            }
        }
        rows.push_back(std::move(fields));
    }
    if (!missing_rows.empty()) {
        std::string listed;
        for (std::size_t i = 0; i < missing_rows.size() && i < 10; ++i) {
            listed += (i ? ", " : "") + missing_rows[i];
        }
        if (missing_rows.size() > 10) {
            listed += ", and " + std::to_string(missing_rows.size() - 10) + " more";
        }
        throw Error("load_cohort: missing values in rows " + listed +
                    " (complete rows are required)");
    }
    if (rows.empty()) throw Error("load_cohort: '" + path + "' has no data rows");

    // column typing: numeric when every value parses, categorical otherwise
    std::vector<bool> numeric(feature_cols.size(), true);
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
        for (const auto& row : rows) {
            double v;
            if (!parse_number(row[feature_cols[k]], v)) {
                numeric[k] = false;
                break;
            }
        }
    }

    // expand categorical columns: most frequent level is the reference
    struct Expanded {
        std::string name;
        std::size_t source;
        bool is_level = false;
        std::string level;
    };
    std::vector<Expanded> columns;
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
        const std::size_t j = feature_cols[k];
        if (numeric[k]) {
            columns.push_back({header[j], j, false, {}});
            continue;
        }
        std::map<std::string, std::size_t> counts;
        for (const auto& row : rows) ++counts[row[j]];
        std::string reference = counts.begin()->first;
        std::size_t best = counts.begin()->second;
        for (const auto& [level, count] : counts) {
            if (count > best) {
                reference = level;
                best = count;
            }
        }
        for (const auto& [level, count] : counts) {
            if (level == reference) continue;
            columns.push_back({header[j] + "=" + level, j, true, level});
        }
    }

    Cohort cohort;
    cohort.feature_names.reserve(columns.size());
    for (const auto& c : columns) cohort.feature_names.push_back(c.name);
    cohort.features.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(columns.size()));
    std::map<std::string, std::size_t> seen_ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::size_t source_line = i + 2;  // header is line 1
        const std::string& id = row[id_col];
        if (!seen_ids.emplace(id, i).second) {
            throw Error("load_cohort: duplicate id '" + id + "' at row " +
                        std::to_string(source_line));
        }
        cohort.ids.push_back(id);
        cohort.group.push_back(row[group_col]);
        const std::string& outcome = row[outcome_col];
        if (outcome == "0") {
            cohort.outcome.push_back(0.0);
        } else if (outcome == "1") {
            cohort.outcome.push_back(1.0);
        } else {
            throw Error("load_cohort: outcome '" + outcome + "' at row " +
                        std::to_string(source_line) + " is not 0 or 1");
        }
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto& col = columns[c];
            double value = 0.0;
            if (col.is_level) {
                value = row[col.source] == col.level ? 1.0 : 0.0;
            } else if (!parse_number(row[col.source], value)) {
                throw Error("load_cohort: non-numeric value in column '" +
                            header[col.source] + "' at row " +
                            std::to_string(source_line));
            }
            cohort.features(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(c)) = value;
        }
    }
    cohort.validate();
    return cohort;
}

void write_cohort_csv(const Cohort& cohort, const std::string& path) {
    cohort.validate();
    std::ofstream out(path);
    if (!out) throw Error("write_cohort_csv: cannot open '" + path + "'");
    out << "id,group,outcome";
    for (const auto& name : cohort.feature_names) out << "," << name;
    out << "\n";
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        out << cohort.ids[i] << "," << cohort.group[i] << ","
            << (cohort.outcome[i] == 1.0 ? "1" : "0");
        for (Eigen::Index j = 0; j < cohort.features.cols(); ++j) {
            out << "," << full_precision(cohort.features(static_cast<Eigen::Index>(i), j));
        }
        out << "\n";
    }
    if (!out) throw Error("write_cohort_csv: write failed for '" + path + "'");
}

json scorer_to_json(const RiskScorer& scorer) {
    json doc;
    doc["format"] = "fairdca-model";
    doc["version"] = 1;
    if (const auto* linear = dynamic_cast<const LinearModelScorer*>(&scorer)) {
        doc["variant"] = variant_name(linear->variant());
        doc["model"] = model_to_json(linear->model());
        if (linear->encoder()) {
            doc["encoder"] = {{"reference", linear->encoder()->reference},
                              {"levels", linear->encoder()->levels}};
        }
        return doc;
    }
    if (const auto* ensemble = dynamic_cast<const EnsembleScorer*>(&scorer)) {
        doc["variant"] = variant_name(Variant::multi_sa);
        json groups = json::object();
        for (const auto& [label, member] : ensemble->model().members) {
            json entry;
            entry["member"] = model_to_json(member);
            const auto pit = ensemble->model().propensity_models.find(label);
            if (pit != ensemble->model().propensity_models.end()) {
                entry["propensity"] = model_to_json(pit->second);
            }
            entry["prior_ratio"] = ensemble->model().prior_ratio.at(label);
            groups[label] = std::move(entry);
        }
        doc["ensemble"] = {{"forgetting", ensemble->model().forgetting},
                           {"groups", std::move(groups)}};
        return doc;
    }
    throw Error("scorer_to_json: unknown scorer type");
}

std::unique_ptr<RiskScorer> scorer_from_json(const json& doc) {
    if (doc.value("format", std::string{}) != "fairdca-model") {
        throw Error("model artifact: unexpected format tag");
    }
    const Variant variant = variant_from_name(doc.at("variant").get<std::string>());
    if (variant == Variant::multi_sa) {
        const json& e = doc.at("ensemble");
        EnsembleModel model;
        model.forgetting = e.value("forgetting", 1.0);
        for (const auto& [label, entry] : e.at("groups").items()) {
            model.members.emplace(label, model_from_json(entry.at("member")));
            if (entry.contains("propensity")) {
                model.propensity_models.emplace(
                    label, model_from_json(entry.at("propensity")));
            }
            model.prior_ratio[label] = entry.value("prior_ratio", 0.0);
        }
        return std::make_unique<EnsembleScorer>(std::move(model));
    }
    std::optional<SaEncoder> encoder;
    if (doc.contains("encoder")) {
        SaEncoder enc;
        enc.reference = doc["encoder"].at("reference").get<std::string>();
        enc.levels = doc["encoder"].at("levels").get<std::vector<std::string>>();
        encoder = std::move(enc);
    }
    return std::make_unique<LinearModelScorer>(model_from_json(doc.at("model")),
                                               variant, encoder);
}

void save_scorer(const RiskScorer& scorer, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_scorer: cannot open '" + path + "'");
    out << scorer_to_json(scorer).dump(2) << "\n";
}

std::unique_ptr<RiskScorer> load_scorer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_scorer: cannot open '" + path + "'");
    json doc;
    in >> doc;
    return scorer_from_json(doc);
}

}  // namespace fairdca
