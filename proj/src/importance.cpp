#include "ordinal/importance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ordinal/csv.hpp"
#include "ordinal/errors.hpp"
#include "ordinal/rng.hpp"

namespace ordinal {

namespace {

constexpr int kMaxExactTokens = 12;

int node_count(const ApmModel& model) {
    return model.config().head == HeadKind::multinomial ? 7 : 6;
}

void check_node(const ApmModel& model, int node) {
    if (node < 0 || node >= node_count(model))
        throw DimensionMismatch("shapley: node index out of range for this head");
}

} // namespace

double coalition_value(const ApmModel& model, const std::vector<int>& coalition, int node) {
    check_node(model, node);
    Eigen::VectorXd avg = coalition.empty()
                              ? Eigen::VectorXd::Zero(model.embedding_dim()).eval()
                              : model.embed_average(coalition);
    return model.outputs_from_average(avg)(node);
}

std::vector<double> exact_shapley(const ApmModel& model, const std::vector<int>& tokens,
                                  int node) {
    check_node(model, node);
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw EmptyTokenSet("exact_shapley: patient has no tokens");
    if (n > kMaxExactTokens)
        throw TooManyTokens("exact_shapley: " + std::to_string(n) + " tokens exceed the exact "
                            "limit of " + std::to_string(kMaxExactTokens) +
                            "; use sampled_shapley");

    // value of every coalition, indexed by bitmask
    const std::size_t n_masks = std::size_t{1} << n;
    std::vector<double> value(n_masks);
    std::vector<int> coalition;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        coalition.clear();
        for (int i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) coalition.push_back(tokens[i]);
        value[mask] = coalition_value(model, coalition, node);
    }

    // weight |S|! (n - |S| - 1)! / n! by coalition size
    std::vector<double> weight(n);
    double nfact = std::lgamma(n + 1.0);
    for (int s = 0; s < n; ++s)
        weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(n - s + 0.0) - nfact);

    std::vector<double> phi(n, 0.0);
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        int size = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) ++size;
        for (int i = 0; i < n; ++i) {
            if (mask & (std::size_t{1} << i)) continue;
            phi[i] += weight[size] * (value[mask | (std::size_t{1} << i)] - value[mask]);
        }
    }
    return phi;
}

std::vector<double> sampled_shapley(const ApmModel& model, const std::vector<int>& tokens,
                                    int node, int n_permutations, std::uint64_t seed) {
    check_node(model, node);
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw EmptyTokenSet("sampled_shapley: patient has no tokens");
    if (n_permutations < 1) throw ConfigError("sampled_shapley: need at least one permutation");

    Rng rng(seed);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(n, 0.0);
    std::vector<int> prefix;
    prefix.reserve(n);
    for (int m = 0; m < n_permutations; ++m) {
        rng.shuffle(order);
        prefix.clear();
        double prev = coalition_value(model, prefix, node);
        for (int pos = 0; pos < n; ++pos) {
            prefix.push_back(tokens[order[pos]]);
            double cur = coalition_value(model, prefix, node);
            phi[order[pos]] += cur - prev;
            prev = cur;
        }
    }
    for (double& v : phi) v /= static_cast<double>(n_permutations);
    return phi;
}

namespace {

std::string predictor_of(const std::string& token) {
    if (token == TokenDictionary::unrecognised) return token; // its own group
    auto pos = token.find('_');
    if (pos == std::string::npos || pos == 0)
        throw UnmappableToken("importance: token '" + token +
                              "' does not parse as name_value");
    return token.substr(0, pos);
}

} // namespace

ImportanceTable aggregate_importance(const std::vector<std::vector<TokenAttribution>>& partitions,
                                     const TokenDictionary& dict, HeadKind head) {
    const int nodes = head == HeadKind::multinomial ? 7 : 6;
    const auto& node_labels = [&]() -> std::vector<std::string> {
        std::vector<std::string> labels;
        if (head == HeadKind::multinomial)
            for (const auto& l : OutcomeScale::category_labels()) labels.push_back(l);
        else
            for (const auto& l : OutcomeScale::threshold_labels()) labels.push_back(l);
        return labels;
    }();

    // patient -> token -> per-node (sum over partitions, partition count)
    struct Accum {
        Eigen::VectorXd sum;
        int count = 0;
    };
    std::map<std::string, std::map<int, Accum>> per_patient;
    for (const auto& partition : partitions) {
        for (const auto& att : partition) {
            if (att.abs_phi.rows() != static_cast<Eigen::Index>(att.tokens.size()) ||
                att.abs_phi.cols() != nodes)
                throw DimensionMismatch("importance: attribution matrix shape mismatch");
            auto& slot = per_patient[att.patient];
            for (std::size_t i = 0; i < att.tokens.size(); ++i) {
                auto& acc = slot[att.tokens[i]];
                if (acc.count == 0) acc.sum = Eigen::VectorXd::Zero(nodes);
                acc.sum += att.abs_phi.row(static_cast<Eigen::Index>(i)).transpose();
                ++acc.count;
            }
        }
    }
    if (per_patient.empty()) throw EmptyTrainingSet("importance: no attributions supplied");

    // token -> mean over patients of the per-patient partition means
    std::map<int, std::pair<Eigen::VectorXd, int>> per_token;
    for (const auto& [patient, token_map] : per_patient) {
        (void)patient;
        for (const auto& [token, acc] : token_map) {
            auto& slot = per_token[token];
            if (slot.second == 0) slot.first = Eigen::VectorXd::Zero(nodes);
            slot.first += acc.sum / static_cast<double>(acc.count);
            ++slot.second;
        }
    }

    ImportanceTable table;
    for (const auto& [token_index, slot] : per_token) {
        const std::string& token = dict.token_at(token_index);
        const std::string predictor = predictor_of(token);
        Eigen::VectorXd mean_abs = slot.first / static_cast<double>(slot.second);
        double token_total = 0.0;
        for (int nd = 0; nd < nodes; ++nd) {
            ImportanceRow row;
            row.predictor = predictor;
            row.token = token;
            row.node = node_labels[nd];
            row.mean_abs_shap = mean_abs(nd);
            table.rows.push_back(std::move(row));
            token_total += mean_abs(nd);
        }
        table.token_score[token] = token_total;
        auto it = table.predictor_score.find(predictor);
        if (it == table.predictor_score.end())
            table.predictor_score[predictor] = token_total;
        else
            it->second = std::max(it->second, token_total);
    }
    return table;
}

void save_importance_csv(const std::string& path, const ImportanceTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write importance table: " + path);
    write_csv_row(out, {"predictor", "token", "node", "mean_abs_shap"});
    for (const auto& row : table.rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", row.mean_abs_shap);
        write_csv_row(out, {row.predictor, row.token, row.node, buf});
    }
}

} // namespace ordinal
