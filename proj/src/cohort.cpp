#include "ordinal/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "ordinal/csv.hpp"
#include "ordinal/errors.hpp"
#include "ordinal/outcome.hpp"

namespace ordinal {

std::string to_string(PredictorKind k) {
    switch (k) {
        case PredictorKind::categorical: return "categorical";
        case PredictorKind::continuous: return "continuous";
        case PredictorKind::text: return "text";
    }
    throw ConfigError("unknown predictor kind");
}

PredictorKind predictor_kind_from_string(const std::string& s) {
    if (s == "categorical") return PredictorKind::categorical;
    if (s == "continuous") return PredictorKind::continuous;
    if (s == "text") return PredictorKind::text;
    throw ConfigError("unknown predictor kind: " + s);
}

void PredictorSpec::validate() const {
    if (name.empty()) throw ConfigError("predictor name is empty");
    if (name.find('_') != std::string::npos)
        throw ConfigError("predictor name may not contain '_': " + name);
    if (kind == PredictorKind::categorical && levels.empty())
        throw ConfigError("categorical predictor " + name + " declares no levels");
    if (group != "concise" && group != "extended" && group != "token-only")
        throw ConfigError("predictor " + name + " has unknown group '" + group + "'");
}

int CohortTable::column_index(const std::string& name) const {
    for (std::size_t j = 0; j < predictors.size(); ++j)
        if (predictors[j].name == name) return static_cast<int>(j);
    return -1;
}

std::optional<double> CohortTable::numeric(std::size_t row, std::size_t col) const {
    const std::string& s = cells[row][col];
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw IoError("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw IoError("cannot parse numeric cell '" + s + "' in column " + predictors[col].name);
    }
}

void CohortTable::validate() const {
    if (outcomes.size() != ids.size() || cells.size() != ids.size())
        throw DimensionMismatch("cohort table: ids, outcomes and cells disagree on row count");
    for (const auto& spec : predictors) spec.validate();
    for (std::size_t i = 0; i < n_rows(); ++i) {
        if (cells[i].size() != predictors.size())
            throw DimensionMismatch("cohort table: row " + std::to_string(i) + " has wrong width");
        if (outcomes[i] < 0 || outcomes[i] >= OutcomeScale::n_categories)
            throw UnknownCategory("cohort table: outcome index out of range in row " +
                                  std::to_string(i));
        for (std::size_t j = 0; j < n_cols(); ++j) {
            const std::string& v = cells[i][j];
            if (v.empty()) continue;
            const auto& spec = predictors[j];
            if (spec.kind == PredictorKind::categorical) {
                if (std::find(spec.levels.begin(), spec.levels.end(), v) == spec.levels.end())
                    throw UnknownCategory("value '" + v + "' is not a declared level of " +
                                          spec.name);
            } else if (spec.kind == PredictorKind::continuous) {
                numeric(i, j); // throws when unparseable
            }
        }
    }
}

CohortTable CohortTable::subset(const std::vector<std::size_t>& rows) const {
    CohortTable out;
    out.predictors = predictors;
    out.ids.reserve(rows.size());
    out.outcomes.reserve(rows.size());
    out.cells.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= n_rows()) throw DimensionMismatch("cohort subset: row index out of range");
        out.ids.push_back(ids[r]);
        out.outcomes.push_back(outcomes[r]);
        out.cells.push_back(cells[r]);
    }
    return out;
}

CohortTable CohortTable::subset_by_id(const std::vector<std::string>& keep_ids) const {
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < ids.size(); ++i) where.emplace(ids[i], i);
    std::vector<std::size_t> rows;
    rows.reserve(keep_ids.size());
    for (const auto& id : keep_ids) {
        auto it = where.find(id);
        if (it == where.end()) throw UnknownCategory("cohort subset: unknown patient id " + id);
        rows.push_back(it->second);
    }
    return subset(rows);
}

nlohmann::json schema_to_json(const CohortTable& table, const std::string& id_column,
                              const std::string& outcome_column) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& spec : table.predictors) {
        nlohmann::json p{{"name", spec.name}, {"kind", to_string(spec.kind)}, {"group", spec.group}};
        if (spec.kind == PredictorKind::categorical) p["levels"] = spec.levels;
        preds.push_back(std::move(p));
    }
    return nlohmann::json{{"id_column", id_column},
                          {"outcome_column", outcome_column},
                          {"missing", ""},
                          {"predictors", std::move(preds)}};
}

void save_cohort(const CohortTable& table, const std::string& csv_path,
                 const std::string& schema_path) {
    table.validate();

    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot write csv file: " + csv_path);
    std::vector<std::string> header{"PatientId", "Outcome"};
    for (const auto& spec : table.predictors) header.push_back(spec.name);
    write_csv_row(out, header);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        std::vector<std::string> row{table.ids[i],
                                     OutcomeScale::category_labels()[table.outcomes[i]]};
        row.insert(row.end(), table.cells[i].begin(), table.cells[i].end());
        write_csv_row(out, row);
    }

    std::ofstream schema(schema_path);
    if (!schema) throw IoError("cannot write schema file: " + schema_path);
    schema << schema_to_json(table).dump(2) << '\n';
}

CohortTable load_cohort(const std::string& csv_path, const std::string& schema_path) {
    std::ifstream schema_in(schema_path);
    if (!schema_in) throw IoError("cannot open schema file: " + schema_path);
    nlohmann::json schema;
    try {
        schema_in >> schema;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("schema file " + schema_path + " is not valid json: " + e.what());
    }

    CohortTable table;
    std::string id_column = schema.at("id_column").get<std::string>();
    std::string outcome_column = schema.at("outcome_column").get<std::string>();
    for (const auto& p : schema.at("predictors")) {
        PredictorSpec spec;
        spec.name = p.at("name").get<std::string>();
        spec.kind = predictor_kind_from_string(p.at("kind").get<std::string>());
        if (p.contains("levels")) spec.levels = p.at("levels").get<std::vector<std::string>>();
        spec.group = p.value("group", "concise");
        spec.validate();
        table.predictors.push_back(std::move(spec));
    }

    auto rows = read_csv_file(csv_path);
    if (rows.empty()) throw IoError("csv file " + csv_path + " is empty");
    const auto& header = rows.front();

    auto col_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw IoError("csv is missing column: " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    std::size_t id_col = col_of(id_column);
    std::size_t outcome_col = col_of(outcome_column);
    std::vector<std::size_t> pred_cols;
    for (const auto& spec : table.predictors) pred_cols.push_back(col_of(spec.name));

    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != header.size())
            throw IoError("csv row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                          " fields, expected " + std::to_string(header.size()));
        const std::string& id = row[id_col];
        if (id.empty()) throw IoError("csv row " + std::to_string(i) + " has an empty patient id");
        if (!seen_ids.insert(id).second) throw IoError("duplicate patient id: " + id);
        table.ids.push_back(id);
        table.outcomes.push_back(OutcomeScale::category_index(row[outcome_col]));
        std::vector<std::string> cells;
        cells.reserve(pred_cols.size());
        for (std::size_t c : pred_cols) cells.push_back(row[c]);
        table.cells.push_back(std::move(cells));
    }

    table.validate();
    return table;
}

} // namespace ordinal
