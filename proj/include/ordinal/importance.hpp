#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ordinal/network.hpp"
#include "ordinal/tokenizer.hpp"

namespace ordinal {

// Value of a token coalition at one output node: the model's head output when
// only the coalition's tokens are present.  The coalition average divides by
// the coalition's own size; the empty coalition is the all-zero averaged
// embedding.  Nodes index the 7 category probabilities (multinomial head) or
// the 6 threshold probabilities (ordinal head).
double coalition_value(const ApmModel& model, const std::vector<int>& coalition, int node);

// Exact Shapley attribution of one patient's tokens at one node, by full
// enumeration of the 2^n coalitions.  Throws TooManyTokens above 12 tokens.
std::vector<double> exact_shapley(const ApmModel& model, const std::vector<int>& tokens,
                                  int node);

// Permutation-sampling estimate with n_permutations random orderings.
std::vector<double> sampled_shapley(const ApmModel& model, const std::vector<int>& tokens,
                                    int node, int n_permutations, std::uint64_t seed);

// |Shapley| matrix (tokens x nodes) for one patient in one partition.
struct TokenAttribution {
    std::string patient;
    std::vector<int> tokens;
    Eigen::MatrixXd abs_phi;
};

struct ImportanceRow {
    std::string predictor;
    std::string token;
    std::string node;
    double mean_abs_shap = 0.0;
};

struct ImportanceTable {
    std::vector<ImportanceRow> rows;                // one per (token, node)
    std::map<std::string, double> token_score;     // per token: sum over nodes
    std::map<std::string, double> predictor_score; // per predictor: max over its tokens
};

// Aggregates per-patient attributions: |phi| is averaged over the partitions
// where a patient appears, then over the patients carrying the token.  Tokens
// map to predictors by the name before the first underscore; the
// out-of-vocabulary sentinel forms its own group.  Throws UnmappableToken for
// any other token without an underscore.
ImportanceTable aggregate_importance(const std::vector<std::vector<TokenAttribution>>& partitions,
                                     const TokenDictionary& dict, HeadKind head);

// CSV with columns predictor, token, node, mean_abs_shap.
void save_importance_csv(const std::string& path, const ImportanceTable& table);

} // namespace ordinal
