#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "ordinal/errors.hpp"
#include "ordinal/outcome.hpp"
#include "ordinal/rng.hpp"

using namespace ordinal;

TEST_CASE("scale labels and index lookup") {
    CHECK(OutcomeScale::n_categories == 7);
    CHECK(OutcomeScale::n_thresholds == 6);

    const auto& cats = OutcomeScale::category_labels();
    CHECK(cats[0] == "1");
    CHECK(cats[1] == "2or3");
    CHECK(cats[6] == "8");
    const auto& thr = OutcomeScale::threshold_labels();
    CHECK(thr[0] == ">1");
    CHECK(thr[1] == ">3");
    CHECK(thr[5] == ">7");

    for (int k = 0; k < 7; ++k) CHECK(OutcomeScale::category_index(cats[k]) == k);
    for (int t = 0; t < 6; ++t) CHECK(OutcomeScale::threshold_index(thr[t]) == t);

    CHECK_THROWS_AS(OutcomeScale::category_index("2"), UnknownCategory);
    CHECK_THROWS_AS(OutcomeScale::category_index("3"), UnknownCategory);
    CHECK_THROWS_AS(OutcomeScale::threshold_index(">2"), UnknownCategory);
    CHECK_THROWS_AS(OutcomeScale::threshold_index(">8"), UnknownCategory);
}

TEST_CASE("category distribution validation") {
    CategoryDistribution d;
    d.p = {0.05, 0.10, 0.15, 0.20, 0.25, 0.15, 0.10};
    CHECK_NOTHROW(d.validate());

    CategoryDistribution neg = d;
    neg.p[3] = -0.01;
    neg.p[4] = 0.46;
    CHECK_THROWS_AS(neg.validate(), DegenerateInput);

    CategoryDistribution off = d;
    off.p[0] = 0.10; // sum 1.05
    CHECK_THROWS_AS(off.validate(), DegenerateInput);
}

TEST_CASE("threshold profile from distribution matches hand suffix sums") {
    CategoryDistribution d;
    d.p = {0.05, 0.10, 0.15, 0.20, 0.25, 0.15, 0.10};
    ThresholdProfile q = to_threshold_profile(d);
    // oracle: q[t] = p[t+1] + ... + p[6], computed by hand
    CHECK(q.q[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(q.q[1] == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(q.q[2] == doctest::Approx(0.70).epsilon(1e-15));
    CHECK(q.q[3] == doctest::Approx(0.50).epsilon(1e-15));
    CHECK(q.q[4] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(q.q[5] == doctest::Approx(0.10).epsilon(1e-15));
    CHECK_NOTHROW(q.validate());
}

TEST_CASE("threshold profile is exactly non-increasing for random distributions") {
    Rng rng(20240811);
    for (int rep = 0; rep < 500; ++rep) {
        CategoryDistribution d;
        double sum = 0.0;
        for (double& v : d.p) {
            v = rng.uniform();
            sum += v;
        }
        for (double& v : d.p) v /= sum;
        ThresholdProfile q = to_threshold_profile(d);
        for (int t = 0; t + 1 < 6; ++t) CHECK(q.q[t] >= q.q[t + 1]); // exact in fp
        CHECK(q.q[0] <= 1.0 + 1e-12);
        CHECK(q.q[5] >= 0.0);
    }
}

TEST_CASE("threshold profile validation rejects bad inputs") {
    ThresholdProfile q;
    q.q = {0.9, 0.7, 0.5, 0.3, 0.2, 0.1};
    CHECK_NOTHROW(q.validate());

    ThresholdProfile rising = q;
    rising.q[3] = 0.8; // breaks monotonicity
    CHECK_THROWS_AS(rising.validate(), DegenerateInput);

    ThresholdProfile big = q;
    big.q[0] = 1.5;
    CHECK_THROWS_AS(big.validate(), DegenerateInput);
}

TEST_CASE("conditional exceedance is a plain ratio with guarded denominator") {
    ThresholdProfile q;
    q.q = {0.9, 0.6, 0.3, 0.2, 0.1, 0.05};
    CHECK(conditional_exceedance(q, 0, 2) == doctest::Approx(0.3 / 0.9).epsilon(1e-15));
    CHECK(conditional_exceedance(q, 1, 4) == doctest::Approx(0.1 / 0.6).epsilon(1e-15));
    CHECK(conditional_exceedance(q, 3, 3) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(conditional_exceedance(q, 2, 1), DimensionMismatch);
    CHECK_THROWS_AS(conditional_exceedance(q, -1, 3), DimensionMismatch);
    CHECK_THROWS_AS(conditional_exceedance(q, 0, 6), DimensionMismatch);

    ThresholdProfile zero = q;
    zero.q[4] = 0.0;
    zero.q[5] = 0.0;
    CHECK_THROWS_AS(conditional_exceedance(zero, 4, 5), ZeroDenominator);
}

TEST_CASE("published severe-cohort profile reproduces the conditional chain") {
    // Independently verified figures for a severe subgroup: the chance of
    // exceeding the lowest threshold is 12.7%, yet conditional on that the
    // next threshold is almost certain (96.5%) and the one after still 52.0%.
    ThresholdProfile q;
    q.q = {0.1273615, 0.1228617, 0.0661974, 0.0261596, 0.0216245, 0.0038411};
    CHECK_NOTHROW(q.validate());

    double c13 = conditional_exceedance(q, 0, 1);
    double c14 = conditional_exceedance(q, 0, 2);
    CHECK(std::round(1000.0 * c13) / 10.0 == doctest::Approx(96.5));
    CHECK(std::round(1000.0 * c14) / 10.0 == doctest::Approx(52.0));
}

TEST_CASE("class weights follow inverse frequency") {
    // counts {1,2,2,2,2,2,3}, N = 14: w_k = 14 / (7 n_k)
    std::vector<int> y{0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 6};
    ClassWeights w = class_weights(y);
    CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-15));
    for (int k = 1; k <= 5; ++k) CHECK(w[k] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w[6] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // a balanced cohort yields unit weights
    std::vector<int> balanced;
    for (int k = 0; k < 7; ++k)
        for (int i = 0; i < 4; ++i) balanced.push_back(k);
    for (double v : class_weights(balanced)) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<int> missing{0, 1, 2, 3, 4, 5}; // category 6 absent
    CHECK_THROWS_AS(class_weights(missing), EmptyCategory);
    CHECK_THROWS_AS(class_weights(std::vector<int>{}), EmptyTrainingSet);
    CHECK_THROWS_AS(class_weights(std::vector<int>{0, 7}), UnknownCategory);
}

TEST_CASE("macro average is the unweighted mean of six values") {
    std::array<double, 6> v{1, 2, 3, 4, 5, 6};
    CHECK(macro_average(v) == doctest::Approx(3.5).epsilon(1e-15));
    std::array<double, 6> c{0.25, 0.25, 0.25, 0.25, 0.25, 0.25};
    CHECK(macro_average(c) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("distribution and profile JSON round trips") {
    CategoryDistribution d;
    d.p = {0.05, 0.10, 0.15, 0.20, 0.25, 0.15, 0.10};
    nlohmann::json jd = d;
    auto d2 = jd.get<CategoryDistribution>();
    for (int k = 0; k < 7; ++k) CHECK(d2.p[k] == d.p[k]);

    ThresholdProfile q = to_threshold_profile(d);
    nlohmann::json jq = q;
    auto q2 = jq.get<ThresholdProfile>();
    for (int t = 0; t < 6; ++t) CHECK(q2.q[t] == q.q[t]);

    nlohmann::json bad = {{"q", std::vector<double>{0.5, 0.4}}};
    CHECK_THROWS_AS(bad.get<ThresholdProfile>(), DimensionMismatch);
}
