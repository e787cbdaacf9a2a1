#include "ordinal/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ordinal/errors.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        unsigned char lc = static_cast<unsigned char>(std::tolower(c));
        if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9')) out += static_cast<char>(lc);
    }
    return out;
}

int BinEdges::bin_of(double v) const {
    // counting cuts strictly below v keeps the degenerate all-equal-cuts case
    // in bin 1 and is monotone in v
    auto it = std::lower_bound(cuts.begin(), cuts.end(), v);
    return 1 + static_cast<int>(it - cuts.begin());
}

BinEdges fit_quantile_bins(const std::string& predictor, std::vector<double> values, int n_bins) {
    if (n_bins < 2) throw ConfigError("fit_quantile_bins: need at least 2 bins");
    if (static_cast<int>(values.size()) < n_bins)
        throw TooFewValues("fit_quantile_bins: predictor " + predictor + " has " +
                           std::to_string(values.size()) + " values but needs at least " +
                           std::to_string(n_bins));
    std::sort(values.begin(), values.end());
    BinEdges edges;
    edges.predictor = predictor;
    edges.cuts.reserve(n_bins - 1);
    const std::size_t n = values.size();
    for (int k = 1; k < n_bins; ++k) {
        double pos = static_cast<double>(n - 1) * k / n_bins;
        std::size_t lo = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        double cut = lo + 1 < n ? values[lo] + frac * (values[lo + 1] - values[lo]) : values[lo];
        edges.cuts.push_back(cut);
    }
    return edges;
}

namespace {

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

std::string tokenize_value(const PredictorSpec& spec, const std::string& cell,
                           const BinEdges* bins) {
    if (cell.empty()) return spec.name + "_NA";
    switch (spec.kind) {
        case PredictorKind::categorical: {
            std::string value = cell;
            if (all_digits(value) && value.size() < 2) value.insert(0, 2 - value.size(), '0');
            return spec.name + "_" + value;
        }
        case PredictorKind::continuous: {
            if (bins == nullptr)
                throw ConfigError("tokenize_value: no bin edges for continuous predictor " +
                                  spec.name);
            double v = std::stod(cell);
            return spec.name + "_BIN" + std::to_string(bins->bin_of(v));
        }
        case PredictorKind::text:
            return spec.name + "_" + normalize_text(cell);
    }
    throw ConfigError("tokenize_value: unknown predictor kind");
}

std::map<std::string, BinEdges> fit_table_bins(const CohortTable& table, int n_bins) {
    std::map<std::string, BinEdges> bins;
    for (std::size_t j = 0; j < table.n_cols(); ++j) {
        const auto& spec = table.predictors[j];
        if (spec.kind != PredictorKind::continuous) continue;
        std::vector<double> values;
        for (std::size_t i = 0; i < table.n_rows(); ++i)
            if (auto v = table.numeric(i, j)) values.push_back(*v);
        bins.emplace(spec.name, fit_quantile_bins(spec.name, std::move(values), n_bins));
    }
    return bins;
}

std::vector<std::vector<std::string>> tokenize_table(const CohortTable& table,
                                                     const std::map<std::string, BinEdges>& bins) {
    std::vector<std::vector<std::string>> out;
    out.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        std::vector<std::string> tokens;
        tokens.reserve(table.n_cols());
        for (std::size_t j = 0; j < table.n_cols(); ++j) {
            const auto& spec = table.predictors[j];
            const BinEdges* edges = nullptr;
            if (spec.kind == PredictorKind::continuous) {
                auto it = bins.find(spec.name);
                if (it == bins.end())
                    throw ConfigError("tokenize_table: missing bin edges for " + spec.name);
                edges = &it->second;
            }
            tokens.push_back(tokenize_value(spec, table.cells[i][j], edges));
        }
        out.push_back(std::move(tokens));
    }
    return out;
}

TokenDictionary::TokenDictionary() {
    tokens_.push_back(unrecognised);
    rebuild_index();
}

void TokenDictionary::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

TokenDictionary TokenDictionary::fit(const std::vector<std::vector<std::string>>& patient_tokens) {
    if (patient_tokens.empty())
        throw EmptyTrainingSet("token dictionary: no training patients supplied");
    std::set<std::string> distinct;
    for (const auto& patient : patient_tokens)
        distinct.insert(patient.begin(), patient.end());
    distinct.erase(std::string(unrecognised));
    TokenDictionary dict;
    dict.tokens_.insert(dict.tokens_.end(), distinct.begin(), distinct.end());
    dict.rebuild_index();
    return dict;
}

TokenDictionary TokenDictionary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.empty() || tokens.front() != unrecognised)
        throw ConfigError("token dictionary: serialised form must start with the sentinel");
    TokenDictionary dict;
    dict.tokens_ = std::move(tokens);
    dict.rebuild_index();
    if (dict.index_.size() != dict.tokens_.size())
        throw ConfigError("token dictionary: duplicate tokens in serialised form");
    return dict;
}

int TokenDictionary::lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
}

const std::string& TokenDictionary::token_at(int index) const {
    if (index < 0 || index >= static_cast<int>(tokens_.size()))
        throw DimensionMismatch("token dictionary: index out of range");
    return tokens_[static_cast<std::size_t>(index)];
}

void to_json(nlohmann::json& j, const TokenDictionary& d) {
    j = nlohmann::json{{"tokens", d.tokens()}};
}

void from_json(const nlohmann::json& j, TokenDictionary& d) {
    d = TokenDictionary::from_tokens(j.at("tokens").get<std::vector<std::string>>());
}

TokenisedPatient encode_patient(const std::string& id, const std::vector<std::string>& tokens,
                                const TokenDictionary& dict) {
    TokenisedPatient out;
    out.id = id;
    std::set<int> seen;
    for (const auto& token : tokens) seen.insert(dict.lookup(token));
    out.indices.assign(seen.begin(), seen.end());
    return out;
}

} // namespace ordinal
