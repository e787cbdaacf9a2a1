#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ordinal/errors.hpp"
#include "ordinal/metrics.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/stats.hpp"

using namespace ordinal;

namespace {

// O(n^2) reference concordance with ties counted one half
double brute_c(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (!(labels[i] == 1 && labels[j] == 0)) continue;
            ++pairs;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    return num / static_cast<double>(pairs);
}

// an arbitrary but valid monotone profile driven by one latent score
ThresholdProfile profile_from_latent(double s) {
    const double theta[6] = {-1.2, -0.6, -0.1, 0.4, 0.9, 1.6};
    ThresholdProfile q;
    for (int t = 0; t < 6; ++t) q.q[t] = sigmoid(s - theta[t]);
    return q;
}

PredictionSet random_set(int n, Rng& rng, double signal = 1.0) {
    PredictionSet set;
    for (int i = 0; i < n; ++i) {
        int y = static_cast<int>(rng.index(7));
        double latent = signal * (y - 3.0) / 2.0 + rng.normal();
        set.profiles.push_back(profile_from_latent(latent));
        set.labels.push_back(y);
    }
    return set;
}

// O(n^2) reference for the pairwise category c-index
double brute_pairwise(const PredictionSet& set, int lower, int higher) {
    std::vector<double> scores;
    std::vector<int> binary;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] != lower && set.labels[i] != higher) continue;
        scores.push_back(ranking_score(set.profiles[i]));
        binary.push_back(set.labels[i] == higher ? 1 : 0);
    }
    return brute_c(scores, binary);
}

// O(n^2) reference for the prevalence-weighted concordance: all patient pairs
// with different labels, the higher label is the positive of the pair
double brute_generalized(const PredictionSet& set) {
    double num = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j) {
            if (set.labels[i] == set.labels[j]) continue;
            ++pairs;
            double si = ranking_score(set.profiles[i]);
            double sj = ranking_score(set.profiles[j]);
            bool i_higher = set.labels[i] > set.labels[j];
            double hi = i_higher ? si : sj, lo = i_higher ? sj : si;
            if (hi > lo) num += 1.0;
            else if (hi == lo) num += 0.5;
        }
    return num / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("prediction set shape validation") {
    PredictionSet set;
    set.profiles.push_back(profile_from_latent(0.0));
    set.labels = {0, 1};
    CHECK_THROWS_AS(set.check(), DimensionMismatch);
    set.labels = {7};
    CHECK_THROWS_AS(set.check(), UnknownCategory);
    set.labels = {3};
    CHECK_NOTHROW(set.check());

    Rng rng(1);
    PredictionSet s2 = random_set(50, rng);
    auto counts = s2.category_counts();
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == 50);
}

TEST_CASE("ranking score sums the six exceedance probabilities") {
    ThresholdProfile q;
    q.q = {0.9, 0.6, 0.3, 0.2, 0.1, 0.05};
    CHECK(ranking_score(q) == doctest::Approx(2.15).epsilon(1e-15));
}

TEST_CASE("midrank concordance equals the brute-force pair count") {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        int n = 30 + static_cast<int>(rng.index(120));
        std::vector<double> scores;
        std::vector<int> labels;
        bool tied = rep % 2 == 0;
        for (int i = 0; i < n; ++i) {
            // coarse grid forces plenty of exact ties in half the repeats
            double s = tied ? std::floor(rng.uniform() * 8.0) : rng.normal();
            int y = rng.uniform() < 0.4 ? 1 : 0;
            scores.push_back(s + (y == 1 ? 0.3 : 0.0));
            labels.push_back(y);
        }
        if (std::count(labels.begin(), labels.end(), 1) == 0 ||
            std::count(labels.begin(), labels.end(), 0) == 0)
            continue;
        CHECK(dichotomous_c(scores, labels) ==
              doctest::Approx(brute_c(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("hand-checked tie case") {
    // pairs: (1 vs 1) tie -> 0.5, (2 vs 1) concordant -> 1; c = 0.75
    std::vector<double> scores{1.0, 1.0, 2.0};
    std::vector<int> labels{0, 1, 1};
    CHECK(dichotomous_c(scores, labels) == doctest::Approx(0.75).epsilon(1e-15));

    CHECK_THROWS_AS(dichotomous_c({1.0, 2.0}, {1, 1}), OneClassOnly);
    CHECK_THROWS_AS(dichotomous_c({1.0, 2.0}, {0, 0}), OneClassOnly);
    CHECK_THROWS_AS(dichotomous_c({1.0}, {0, 1}), DimensionMismatch);
}

TEST_CASE("pairwise and ordinal c-indices match brute force") {
    Rng rng(3);
    PredictionSet set = random_set(150, rng);
    // make sure all categories appear; top up any missing ones
    auto counts = set.category_counts();
    for (int k = 0; k < 7; ++k)
        if (counts[k] == 0) {
            set.labels.push_back(k);
            set.profiles.push_back(profile_from_latent((k - 3.0) / 2.0));
        }

    double sum = 0.0;
    for (int lower = 0; lower < 7; ++lower)
        for (int higher = lower + 1; higher < 7; ++higher) {
            double expect = brute_pairwise(set, lower, higher);
            CHECK(pairwise_c(set, lower, higher) == doctest::Approx(expect).epsilon(1e-12));
            sum += expect;
        }
    CHECK(orc(set) == doctest::Approx(sum / 21.0).epsilon(1e-12));
}

TEST_CASE("ordinal c-index with empty categories") {
    Rng rng(4);
    PredictionSet set = random_set(120, rng);
    // drop category 5 entirely
    PredictionSet reduced;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == 5) continue;
        reduced.labels.push_back(set.labels[i]);
        reduced.profiles.push_back(set.profiles[i]);
    }
    CHECK_THROWS_AS(orc(reduced, false), EmptyCategory);

    // skip-empty averages the 15 pairs that exclude category 5
    double sum = 0.0;
    int pairs = 0;
    for (int lower = 0; lower < 7; ++lower)
        for (int higher = lower + 1; higher < 7; ++higher) {
            if (lower == 5 || higher == 5) continue;
            sum += brute_pairwise(reduced, lower, higher);
            ++pairs;
        }
    CHECK(pairs == 15);
    CHECK(orc(reduced, true) == doctest::Approx(sum / 15.0).epsilon(1e-12));
}

TEST_CASE("generalized c and Somers' Dxy") {
    Rng rng(5);
    PredictionSet set = random_set(140, rng);
    double expect = brute_generalized(set);
    CHECK(generalized_c(set) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(somers_dxy(set) == doctest::Approx(2.0 * expect - 1.0).epsilon(1e-12));

    // a perfectly ordered set reaches 1 (Dxy = 1), a reversed one reaches 0
    PredictionSet perfect;
    for (int k = 0; k < 7; ++k)
        for (int i = 0; i < 3; ++i) {
            perfect.labels.push_back(k);
            perfect.profiles.push_back(profile_from_latent(2.0 * k));
        }
    CHECK(generalized_c(perfect) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(orc(perfect) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(somers_dxy(perfect) == doctest::Approx(1.0).epsilon(1e-15));

    PredictionSet reversed = perfect;
    std::reverse(reversed.labels.begin(), reversed.labels.end());
    CHECK(generalized_c(reversed) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("threshold c-index scores one exceedance column") {
    Rng rng(6);
    PredictionSet set = random_set(130, rng);
    for (int t = 0; t < 6; ++t) {
        std::vector<double> scores;
        std::vector<int> binary;
        for (std::size_t i = 0; i < set.size(); ++i) {
            scores.push_back(set.profiles[i].q[t]);
            binary.push_back(set.labels[i] > t ? 1 : 0);
        }
        if (std::count(binary.begin(), binary.end(), 1) == 0 ||
            std::count(binary.begin(), binary.end(), 0) == 0) {
            CHECK_THROWS_AS(threshold_c(set, t), OneClassOnly);
            continue;
        }
        CHECK(threshold_c(set, t) == doctest::Approx(brute_c(scores, binary)).epsilon(1e-12));
    }
}

TEST_CASE("calibration slope recovers a known recalibration line") {
    Rng rng(7);
    const int n = 20000;
    auto build = [&](double a, double b) {
        PredictionSet set;
        for (int i = 0; i < n; ++i) {
            double s = rng.normal() * 1.2;
            ThresholdProfile q = profile_from_latent(s);
            double z = logit(std::clamp(q.q[2], 1e-12, 1.0 - 1e-12));
            double p_true = sigmoid(a + b * z);
            set.profiles.push_back(q);
            set.labels.push_back(rng.uniform() < p_true ? 6 : 0); // fires 1{y > 2}
        }
        return set;
    };

    CalibrationFit ident = calibration_slope(build(0.0, 1.0), 2);
    CHECK(ident.slope == doctest::Approx(1.0).epsilon(0.06));
    CHECK(ident.intercept == doctest::Approx(0.0).scale(1.0).epsilon(0.05));

    CalibrationFit off = calibration_slope(build(0.3, 0.5), 2);
    CHECK(off.slope == doctest::Approx(0.5).epsilon(0.12));
    CHECK(off.intercept == doctest::Approx(0.3).epsilon(0.25));

    PredictionSet oneclass;
    for (int i = 0; i < 30; ++i) {
        oneclass.profiles.push_back(profile_from_latent(0.0));
        oneclass.labels.push_back(0);
    }
    CHECK_THROWS_AS(calibration_slope(oneclass, 2), OneClassOnly);
}

TEST_CASE("lowess reproduces straight lines exactly") {
    std::vector<double> x, y;
    Rng rng(8);
    for (int i = 0; i < 60; ++i) {
        double v = rng.uniform(-3.0, 3.0);
        x.push_back(v);
        y.push_back(2.0 * v + 1.0);
    }
    std::vector<double> fit = lowess(x, y, 0.75, 0);
    REQUIRE(fit.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(fit[i] == doctest::Approx(2.0 * x[i] + 1.0).scale(1.0).epsilon(1e-8));

    // constant response stays constant
    std::vector<double> c(40, 0.7);
    std::vector<double> xs;
    for (int i = 0; i < 40; ++i) xs.push_back(static_cast<double>(i));
    for (double v : lowess(xs, c, 0.5, 0)) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    CHECK_THROWS_AS(lowess({1.0}, {1.0}, 0.75, 0), TooFewPoints);
    CHECK_THROWS_AS(lowess({1.0, 2.0}, {1.0}, 0.75, 0), DimensionMismatch);
    CHECK_THROWS_AS(lowess(x, y, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(lowess(x, y, 0.75, -1), ConfigError);
}

TEST_CASE("lowess robustness iterations damp a gross outlier") {
    // the residual spread must be non-degenerate for the bisquare weights to
    // engage, so the line carries a little noise besides the one bad point
    Rng rng(8);
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(static_cast<double>(i) / 10.0);
        y.push_back(0.5 * x.back() + 0.05 * rng.normal());
    }
    y[25] += 30.0; // corrupt one point
    std::vector<double> plain = lowess(x, y, 0.4, 0);
    std::vector<double> robust = lowess(x, y, 0.4, 2);
    double err_plain = std::fabs(plain[25] - 0.5 * x[25]);
    double err_robust = std::fabs(robust[25] - 0.5 * x[25]);
    CHECK(err_plain > 1.0); // the unweighted fit is dragged off the line
    CHECK(err_robust < 0.2 * err_plain);
    // far away from the outlier the robust fit sits on the line
    CHECK(robust[5] == doctest::Approx(0.5 * x[5]).scale(1.0).epsilon(0.05));
}

TEST_CASE("lowess interpolates between anchors on large inputs") {
    Rng rng(9);
    std::vector<double> x, y;
    for (int i = 0; i < 2500; ++i) {
        double v = rng.uniform(0.0, 10.0);
        x.push_back(v);
        y.push_back(3.0 - 0.4 * v + 0.01 * rng.normal());
    }
    std::vector<double> fit = lowess(x, y, 0.5, 0);
    REQUIRE(fit.size() == x.size());
    for (std::size_t i = 0; i < x.size(); i += 97)
        CHECK(fit[i] == doctest::Approx(3.0 - 0.4 * x[i]).scale(1.0).epsilon(0.02));
}

TEST_CASE("calibration curve basics and the integrated index") {
    // labels drawn from the stated profiles: the smoothed observed rate
    // tracks the predicted rate and the integrated gap stays small; stating
    // overconfident profiles for the same outcomes breaks the agreement
    Rng rng(11);
    PredictionSet calibrated, overconfident;
    for (int i = 0; i < 2000; ++i) {
        double s = 1.2 * rng.normal();
        ThresholdProfile q = profile_from_latent(s);
        double u = rng.uniform();
        int y = 0;
        while (y < 6 && u < q.q[y]) ++y;
        calibrated.profiles.push_back(q);
        calibrated.labels.push_back(y);
        overconfident.profiles.push_back(profile_from_latent(2.0 * s));
        overconfident.labels.push_back(y);
    }
    for (int t : {1, 2, 3}) {
        CalibrationCurve curve = calibration_curve(calibrated, t);
        REQUIRE(curve.predicted.size() == 2000);
        REQUIRE(curve.observed.size() == 2000);
        double gap_cal = ici(curve);
        double gap_over = ici(calibration_curve(overconfident, t));
        CHECK(gap_cal < 0.05);
        CHECK(gap_over > gap_cal + 0.02);
    }

    // points come back sorted by predicted probability and clipped to [0, 1]
    Rng rng2(10);
    PredictionSet rnd = random_set(200, rng2);
    CalibrationCurve c2 = calibration_curve(rnd, 1);
    CHECK(c2.predicted.size() == 200);
    CHECK(std::is_sorted(c2.predicted.begin(), c2.predicted.end()));
    for (double o : c2.observed) {
        CHECK(o >= 0.0);
        CHECK(o <= 1.0);
    }

    PredictionSet small = random_set(19, rng2);
    CHECK_THROWS_AS(calibration_curve(small, 1), TooFewPoints);
}

TEST_CASE("integrated calibration index is the mean absolute gap") {
    CalibrationCurve curve;
    curve.predicted = {0.2, 0.4};
    curve.observed = {0.3, 0.2};
    CHECK(ici(curve) == doctest::Approx(0.15).epsilon(1e-15));

    CalibrationCurve empty;
    CHECK_THROWS_AS(ici(empty), TooFewPoints);
}

TEST_CASE("no-information calibration index formula") {
    CHECK(niv_ici(0.8) == doctest::Approx(0.34).epsilon(1e-12));
    CHECK(niv_ici(0.5) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(niv_ici(0.2) == doctest::Approx(niv_ici(0.8)).epsilon(1e-12)); // symmetric
    // matches a direct large-sample simulation logic: E|Y - pi| with Y ~
    // Bernoulli(pi) is 2 pi (1 - pi); the index subtracts the smoothing limit
    for (double pi : {0.1, 0.33, 0.66, 0.9})
        CHECK(niv_ici(pi) == doctest::Approx(pi * pi - pi + 0.5).epsilon(1e-12));
}
