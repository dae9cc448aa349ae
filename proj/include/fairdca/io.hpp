#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fairdca/cohort.hpp"
#include "fairdca/ensemble.hpp"

namespace fairdca {

// Cohort CSV schema: header row with `id` (unique string), the group column
// (string label), `outcome` (0 or 1), then feature columns. Feature columns
// whose values all parse as numbers stay numeric; any other column is treated
// as categorical and one-hot encoded (most frequent level as reference).
// UTF-8, comma separated, '.' decimal point. Rows with missing values are
// rejected with their row numbers.
Cohort load_cohort(const std::string& path,
                   const std::string& group_column = "group");

// Writes a cohort in the same schema; feature values keep full precision so a
// round trip reproduces the in-memory cohort exactly.
void write_cohort_csv(const Cohort& cohort, const std::string& path);

// Plain CSV table readback (used by report regeneration and tests).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};
CsvTable read_csv_table(const std::string& path);

// Model artifacts as JSON; scorers round-trip through these.
nlohmann::json scorer_to_json(const RiskScorer& scorer);
std::unique_ptr<RiskScorer> scorer_from_json(const nlohmann::json& doc);
void save_scorer(const RiskScorer& scorer, const std::string& path);
std::unique_ptr<RiskScorer> load_scorer(const std::string& path);

}  // namespace fairdca
