#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ordinal {

// Fixed seven-category ordinal outcome scale.  Categories are indexed 0..6 in
// ascending order of recovery; thresholds are indexed 0..5, where threshold t
// is the event "outcome is above category t".
struct OutcomeScale {
    static constexpr int n_categories = 7;
    static constexpr int n_thresholds = 6;

    static const std::array<std::string, 7>& category_labels();
    static const std::array<std::string, 6>& threshold_labels();

    // label lookup; throws UnknownCategory on an unrecognised label
    static int category_index(std::string_view label);
    static int threshold_index(std::string_view label);
};

// Probability mass over the seven categories; p must be non-negative and sum to 1.
struct CategoryDistribution {
    std::array<double, 7> p{};

    // throws DegenerateInput if entries are negative/non-finite or do not sum to 1
    void validate(double tol = 1e-9) const;
};

// Exceedance probabilities q[t] = Pr(outcome above threshold t); must be
// non-increasing in t and lie inside [0, 1].
struct ThresholdProfile {
    std::array<double, 6> q{};

    void validate(double tol = 1e-9) const;
};

using ClassWeights = std::array<double, 7>;

// q[t] = sum of p over categories strictly above t.  Computed as a suffix sum
// so the monotonicity invariant holds exactly in floating point.
ThresholdProfile to_threshold_profile(const CategoryDistribution& d);

// Pr(above `higher` | above `lower`) = q[higher] / q[lower], for lower <= higher.
// Throws ZeroDenominator when q[lower] == 0.
double conditional_exceedance(const ThresholdProfile& profile, int lower, int higher);

// Inverse-frequency class weights w_k = N / (7 * n_k) from category labels
// (indices 0..6).  Throws EmptyCategory when any category is absent.
ClassWeights class_weights(const std::vector<int>& labels);

// Unweighted mean over the six per-threshold values.
double macro_average(const std::array<double, 6>& per_threshold);

void to_json(nlohmann::json& j, const CategoryDistribution& d);
void from_json(const nlohmann::json& j, CategoryDistribution& d);
void to_json(nlohmann::json& j, const ThresholdProfile& q);
void from_json(const nlohmann::json& j, ThresholdProfile& q);

} // namespace ordinal
