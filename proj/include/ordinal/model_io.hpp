#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ordinal/cohort.hpp"
#include "ordinal/linear.hpp"
#include "ordinal/network.hpp"
#include "ordinal/outcome.hpp"
#include "ordinal/preprocess.hpp"
#include "ordinal/tokenizer.hpp"

namespace ordinal {

enum class ModelKind { mnlr, polr, deep_mn, deep_or, apm_mn, apm_or };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// apm_* kinds score token lists; the others score encoded design rows
bool is_token_kind(ModelKind k);
// kinds trained by minibatch gradient descent (deep_* and apm_*)
bool is_network_kind(ModelKind k);

// A trained model bundled with the preprocessing needed to score raw cohort
// rows.  Tabular kinds carry a design encoder and expect complete (imputed)
// rows; token kinds carry bin edges and the token dictionary and accept
// missing values directly.
struct ModelBundle {
    ModelKind kind = ModelKind::polr;

    MnlrModel mnlr;
    PolrModel polr;
    DeepModel deep;
    ApmModel apm;

    DesignEncoder encoder;                // tabular kinds
    std::map<std::string, BinEdges> bins; // token kinds
    TokenDictionary dictionary;           // token kinds

    nlohmann::json metadata = nlohmann::json::object();

    // token indices for one raw row (token kinds only)
    std::vector<int> encode_tokens(const CohortTable& table, std::size_t row) const;

    ThresholdProfile predict_row(const CohortTable& table, std::size_t row) const;
    std::vector<ThresholdProfile> predict_table(const CohortTable& table) const;
};

// Versioned JSON envelope: {"format_version", "kind", "scale", "config",
// "parameters", "preprocessing", "metadata"}.  "scale" lists the category
// labels; "parameters" holds flat numeric arrays per kind.
nlohmann::json model_to_json(const ModelBundle& m);
ModelBundle model_from_json(const nlohmann::json& j);

void save_model(const ModelBundle& m, const std::string& path);
ModelBundle load_model(const std::string& path);

// Shared JSON file helpers (throw IoError with the offending path).
void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

} // namespace ordinal
