#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "ordinal/errors.hpp"
#include "ordinal/importance.hpp"
#include "ordinal/network.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/tokenizer.hpp"

using namespace ordinal;
namespace fs = std::filesystem;

namespace {

ApmModel make_model(HeadKind head, std::uint64_t seed, std::vector<int> widths = {6, 5}) {
    MlpConfig cfg;
    cfg.widths = std::move(widths);
    cfg.dropout = 0.0;
    cfg.head = head;
    Rng rng(seed);
    return ApmModel(12, cfg, rng);
}

// brute-force Shapley by averaging marginal contributions over all n!
// orderings (independent of the subset-weight formula used in the library)
std::vector<double> permutation_shapley(const ApmModel& model, const std::vector<int>& tokens,
                                        int node) {
    const int n = static_cast<int>(tokens.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(n, 0.0);
    int n_orders = 0;
    do {
        std::vector<int> prefix;
        double prev = coalition_value(model, prefix, node);
        for (int pos = 0; pos < n; ++pos) {
            prefix.push_back(tokens[order[pos]]);
            double cur = coalition_value(model, prefix, node);
            phi[order[pos]] += cur - prev;
            prev = cur;
        }
        ++n_orders;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& v : phi) v /= static_cast<double>(n_orders);
    return phi;
}

} // namespace

TEST_CASE("exact attribution matches brute-force permutation averaging") {
    for (HeadKind head : {HeadKind::multinomial, HeadKind::ordinal}) {
        ApmModel model = make_model(head, 41);
        std::vector<int> tokens{1, 4, 7, 9};
        const int nodes = head == HeadKind::multinomial ? 7 : 6;
        for (int node = 0; node < nodes; ++node) {
            auto fast = exact_shapley(model, tokens, node);
            auto slow = permutation_shapley(model, tokens, node);
            REQUIRE(fast.size() == 4);
            for (int i = 0; i < 4; ++i)
                CHECK(fast[i] == doctest::Approx(slow[i]).scale(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("attributions sum to the full-coalition value minus the empty value") {
    for (HeadKind head : {HeadKind::multinomial, HeadKind::ordinal}) {
        ApmModel model = make_model(head, 5);
        std::vector<int> tokens{0, 2, 3, 6, 8, 11};
        const int nodes = head == HeadKind::multinomial ? 7 : 6;
        for (int node = 0; node < nodes; ++node) {
            double gap = coalition_value(model, tokens, node) -
                         coalition_value(model, {}, node);
            auto phi = exact_shapley(model, tokens, node);
            double total = std::accumulate(phi.begin(), phi.end(), 0.0);
            CHECK(total == doctest::Approx(gap).scale(1.0).epsilon(1e-10));

            // sampled marginals telescope, so efficiency holds there too
            auto sampled = sampled_shapley(model, tokens, node, 50, 77);
            double stotal = std::accumulate(sampled.begin(), sampled.end(), 0.0);
            CHECK(stotal == doctest::Approx(gap).scale(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("interchangeable positions receive equal attribution") {
    ApmModel model = make_model(HeadKind::multinomial, 13);
    std::vector<int> tokens{5, 5, 9}; // positions 0 and 1 are the same token
    auto phi = exact_shapley(model, tokens, 3);
    CHECK(phi[0] == doctest::Approx(phi[1]).scale(1.0).epsilon(1e-12));
}

TEST_CASE("single-token attribution is its lone marginal contribution") {
    ApmModel model = make_model(HeadKind::ordinal, 17);
    auto phi = exact_shapley(model, {7}, 2);
    double expected = coalition_value(model, {7}, 2) - coalition_value(model, {}, 2);
    REQUIRE(phi.size() == 1);
    CHECK(phi[0] == doctest::Approx(expected).scale(1.0).epsilon(1e-12));
}

TEST_CASE("empty coalition scores the all-zero averaged embedding") {
    ApmModel model = make_model(HeadKind::multinomial, 23);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.embedding_dim());
    for (int node = 0; node < 7; ++node)
        CHECK(coalition_value(model, {}, node) ==
              doctest::Approx(model.outputs_from_average(zero)(node)).scale(1.0).epsilon(1e-15));
}

TEST_CASE("sampled attribution converges to the exact values") {
    for (HeadKind head : {HeadKind::multinomial, HeadKind::ordinal}) {
        ApmModel model = make_model(head, 29);
        std::vector<int> tokens{1, 2, 5, 6, 9, 10};
        int node = head == HeadKind::multinomial ? 4 : 3;
        auto exact = exact_shapley(model, tokens, node);
        auto sampled = sampled_shapley(model, tokens, node, 4000, 31);
        for (std::size_t i = 0; i < tokens.size(); ++i)
            CHECK(sampled[i] == doctest::Approx(exact[i]).scale(1.0).epsilon(0.02));
    }

    // the estimator is a deterministic function of its seed
    ApmModel model = make_model(HeadKind::ordinal, 37);
    auto a = sampled_shapley(model, {1, 3, 5}, 0, 50, 7);
    auto b = sampled_shapley(model, {1, 3, 5}, 0, 50, 7);
    CHECK(a == b);
}

TEST_CASE("attribution input guards") {
    ApmModel model = make_model(HeadKind::multinomial, 43);
    std::vector<int> thirteen(13);
    std::iota(thirteen.begin(), thirteen.end(), 0);
    thirteen[12] = 11; // stay inside the vocabulary
    CHECK_THROWS_AS(exact_shapley(model, thirteen, 0), TooManyTokens);
    CHECK_THROWS_AS(exact_shapley(model, {}, 0), EmptyTokenSet);
    CHECK_THROWS_AS(exact_shapley(model, {1}, 7), DimensionMismatch);
    CHECK_THROWS_AS(exact_shapley(model, {1}, -1), DimensionMismatch);
    CHECK_THROWS_AS(sampled_shapley(model, {}, 0, 10, 1), EmptyTokenSet);
    CHECK_THROWS_AS(sampled_shapley(model, {1}, 0, 0, 1), ConfigError);

    ApmModel ord = make_model(HeadKind::ordinal, 43);
    CHECK_THROWS_AS(exact_shapley(ord, {1}, 6), DimensionMismatch);
}

TEST_CASE("importance aggregation averages partitions first, then patients") {
    // vocabulary: 0 <unrecognised>, 1 Age_BIN1, 2 Age_BIN2, 3 Sex_male
    TokenDictionary dict = TokenDictionary::fit({{"Age_BIN1", "Age_BIN2"}, {"Sex_male"}});
    REQUIRE(dict.lookup("Age_BIN1") == 1);
    REQUIRE(dict.lookup("Sex_male") == 3);

    auto flat = [](std::size_t n_tokens, double v) {
        return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_tokens), 6, v);
    };
    TokenAttribution a0{"A", {1, 3}, Eigen::MatrixXd(2, 6)};
    a0.abs_phi.row(0).setConstant(0.4); // Age_BIN1
    a0.abs_phi.row(1).setConstant(0.5); // Sex_male
    TokenAttribution b0{"B", {0, 1}, Eigen::MatrixXd(2, 6)};
    b0.abs_phi.row(0).setConstant(0.1); // sentinel
    b0.abs_phi.row(1).setConstant(0.2); // Age_BIN1
    TokenAttribution a1{"A", {1}, flat(1, 0.8)};

    ImportanceTable table =
        aggregate_importance({{a0, b0}, {a1}}, dict, HeadKind::ordinal);

    // Age_BIN1: patient A sees 0.4 and 0.8 across two partitions -> 0.6,
    // patient B sees 0.2 once; the token mean over patients is 0.4 per node
    CHECK(table.token_score.at("Age_BIN1") == doctest::Approx(6 * 0.4).epsilon(1e-12));
    CHECK(table.token_score.at("Sex_male") == doctest::Approx(6 * 0.5).epsilon(1e-12));
    CHECK(table.token_score.at(TokenDictionary::unrecognised) ==
          doctest::Approx(6 * 0.1).epsilon(1e-12));

    // predictors take the maximum over their tokens; the sentinel is its own group
    CHECK(table.predictor_score.at("Age") == doctest::Approx(2.4).epsilon(1e-12));
    CHECK(table.predictor_score.at("Sex") == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(table.predictor_score.at(TokenDictionary::unrecognised) ==
          doctest::Approx(0.6).epsilon(1e-12));

    // one row per (token, node), nodes labelled with the threshold names
    REQUIRE(table.rows.size() == 18);
    CHECK(table.rows[0].token == TokenDictionary::unrecognised);
    CHECK(table.rows[0].node == ">1");
    CHECK(table.rows[5].node == ">7");
    CHECK(table.rows[6].token == "Age_BIN1");
    CHECK(table.rows[6].predictor == "Age");
    CHECK(table.rows[6].mean_abs_shap == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("multi-token predictors keep their strongest token's score") {
    TokenDictionary dict = TokenDictionary::fit({{"Age_BIN1", "Age_BIN2"}});
    TokenAttribution att{"A", {1, 2}, Eigen::MatrixXd(2, 7)};
    att.abs_phi.row(0).setConstant(0.3);
    att.abs_phi.row(1).setConstant(0.9);
    ImportanceTable table = aggregate_importance({{att}}, dict, HeadKind::multinomial);
    CHECK(table.predictor_score.at("Age") == doctest::Approx(7 * 0.9).epsilon(1e-12));
    CHECK(table.rows.size() == 14);
    CHECK(table.rows[0].node == "1"); // category labels for the multinomial head
    CHECK(table.rows[6].node == "8");
}

TEST_CASE("importance aggregation input guards") {
    TokenDictionary dict = TokenDictionary::fit({{"weird", "Age_BIN1"}});
    TokenAttribution bad_name{"A", {dict.lookup("weird")},
                              Eigen::MatrixXd::Constant(1, 6, 0.2)};
    CHECK_THROWS_AS(aggregate_importance({{bad_name}}, dict, HeadKind::ordinal),
                    UnmappableToken);

    TokenAttribution bad_shape{"A", {dict.lookup("Age_BIN1")},
                               Eigen::MatrixXd::Constant(1, 7, 0.2)};
    CHECK_THROWS_AS(aggregate_importance({{bad_shape}}, dict, HeadKind::ordinal),
                    DimensionMismatch);

    CHECK_THROWS_AS(aggregate_importance({}, dict, HeadKind::ordinal), EmptyTrainingSet);
    CHECK_THROWS_AS(aggregate_importance({{}}, dict, HeadKind::ordinal), EmptyTrainingSet);
}

TEST_CASE("importance table CSV layout") {
    TokenDictionary dict = TokenDictionary::fit({{"Age_BIN1"}});
    TokenAttribution att{"A", {1}, Eigen::MatrixXd::Constant(1, 6, 0.25)};
    ImportanceTable table = aggregate_importance({{att}}, dict, HeadKind::ordinal);

    fs::path dir = fs::temp_directory_path() / "ordinal_importance_tests";
    fs::create_directories(dir);
    std::string path = (dir / "imp.csv").string();
    save_importance_csv(path, table);

    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CHECK(line == "predictor,token,node,mean_abs_shap");
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CHECK(line.rfind("Age,Age_BIN1,>1,0.25", 0) == 0);
    int data_rows = 1;
    while (std::getline(in, line))
        if (!line.empty()) ++data_rows;
    CHECK(data_rows == 6);

    CHECK_THROWS_AS(save_importance_csv((dir / "no_dir" / "x.csv").string(), table), IoError);
}
