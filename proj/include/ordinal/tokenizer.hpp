#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ordinal/cohort.hpp"

namespace ordinal {

// Lower-cases and strips every character outside [a-z0-9].
std::string normalize_text(std::string_view s);

// Quantile bin edges for one continuous predictor: n_bins - 1 interior cut
// points at quantiles k / n_bins (linear-interpolation quantiles).
struct BinEdges {
    std::string predictor;
    std::vector<double> cuts;

    // 1-based bin index: 1 + number of cut points strictly below v, so a value
    // equal to a cut point falls in the lower bin, values below the first cut
    // map to bin 1 and values above the last cut map to the top bin
    int bin_of(double v) const;
};

// Throws TooFewValues when fewer than n_bins non-missing values are supplied.
BinEdges fit_quantile_bins(const std::string& predictor, std::vector<double> values,
                           int n_bins = 20);

// One token per predictor:
//   missing           -> "Name_NA"
//   categorical       -> "Name_Value"  (all-digit values zero-padded to 2)
//   continuous        -> "Name_BINk"   (k from the predictor's bin edges)
//   free text         -> "Name_normalisedtext"
std::string tokenize_value(const PredictorSpec& spec, const std::string& cell,
                           const BinEdges* bins);

// Tokens for every row of a table, using the supplied bin edges per
// continuous predictor (keyed by predictor name).
std::vector<std::vector<std::string>> tokenize_table(
    const CohortTable& table, const std::map<std::string, BinEdges>& bins);

// Fits bin edges for every continuous predictor from the table's non-missing values.
std::map<std::string, BinEdges> fit_table_bins(const CohortTable& table, int n_bins = 20);

// Token vocabulary.  Index 0 is the out-of-vocabulary sentinel; indices 1..V
// hold the distinct training tokens in lexicographic order.
class TokenDictionary {
public:
    static constexpr const char* unrecognised = "<unrecognised>";

    TokenDictionary();
    // throws EmptyTrainingSet when no patients are supplied
    static TokenDictionary fit(const std::vector<std::vector<std::string>>& patient_tokens);
    static TokenDictionary from_tokens(std::vector<std::string> tokens); // for deserialisation

    // 0 for tokens outside the vocabulary
    int lookup(const std::string& token) const;
    const std::string& token_at(int index) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    void rebuild_index();
};

void to_json(nlohmann::json& j, const TokenDictionary& d);
void from_json(const nlohmann::json& j, TokenDictionary& d);

// A patient as a deduplicated, ascending list of dictionary indices.
struct TokenisedPatient {
    std::string id;
    std::vector<int> indices;
};

TokenisedPatient encode_patient(const std::string& id, const std::vector<std::string>& tokens,
                                const TokenDictionary& dict);

} // namespace ordinal
