#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ordinal {

enum class PredictorKind { categorical, continuous, text };

std::string to_string(PredictorKind k);
PredictorKind predictor_kind_from_string(const std::string& s);

// Description of one predictor column.  Names may not contain '_' because
// tokens are written as "Name_Value" and parsed back at the first underscore.
// `group` marks which predictor sets a column belongs to: "concise" columns
// feed every model, "extended" columns additionally feed the extended tabular
// models, and "token-only" columns are visible to token models alone.
struct PredictorSpec {
    std::string name;
    PredictorKind kind = PredictorKind::continuous;
    std::vector<std::string> levels; // declared levels; categorical only
    std::string group = "concise";

    void validate() const;
};

// A patient cohort: id column, outcome column (category indices 0..6) and a
// row-major cell matrix of predictor values as strings.  A missing value is
// the empty string, matching its CSV representation.
struct CohortTable {
    std::vector<PredictorSpec> predictors;
    std::vector<std::string> ids;
    std::vector<int> outcomes;                   // category index per row
    std::vector<std::vector<std::string>> cells; // cells[row][column]

    std::size_t n_rows() const { return ids.size(); }
    std::size_t n_cols() const { return predictors.size(); }

    int column_index(const std::string& name) const; // -1 when absent
    bool is_missing(std::size_t row, std::size_t col) const { return cells[row][col].empty(); }

    // parses a continuous cell; std::nullopt when missing
    std::optional<double> numeric(std::size_t row, std::size_t col) const;

    // checks ids/outcomes/cells have consistent shapes, categorical values are
    // declared levels and continuous values parse as numbers
    void validate() const;

    // row subset by position, preserving order
    CohortTable subset(const std::vector<std::size_t>& rows) const;
    // row subset by patient id
    CohortTable subset_by_id(const std::vector<std::string>& keep_ids) const;
};

// Sidecar schema document: id/outcome column names plus predictor specs.
nlohmann::json schema_to_json(const CohortTable& table, const std::string& id_column = "PatientId",
                              const std::string& outcome_column = "Outcome");

void save_cohort(const CohortTable& table, const std::string& csv_path,
                 const std::string& schema_path);
CohortTable load_cohort(const std::string& csv_path, const std::string& schema_path);

} // namespace ordinal
