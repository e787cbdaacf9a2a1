#include "ordinal/outcome.hpp"

#include <cmath>

#include "ordinal/errors.hpp"

namespace ordinal {

const std::array<std::string, 7>& OutcomeScale::category_labels() {
    static const std::array<std::string, 7> labels = {"1", "2or3", "4", "5", "6", "7", "8"};
    return labels;
}

const std::array<std::string, 6>& OutcomeScale::threshold_labels() {
    static const std::array<std::string, 6> labels = {">1", ">3", ">4", ">5", ">6", ">7"};
    return labels;
}

int OutcomeScale::category_index(std::string_view label) {
    const auto& labels = category_labels();
    for (int k = 0; k < n_categories; ++k)
        if (labels[k] == label) return k;
    throw UnknownCategory("unknown outcome category label: " + std::string(label));
}

int OutcomeScale::threshold_index(std::string_view label) {
    const auto& labels = threshold_labels();
    for (int t = 0; t < n_thresholds; ++t)
        if (labels[t] == label) return t;
    throw UnknownCategory("unknown outcome threshold label: " + std::string(label));
}

void CategoryDistribution::validate(double tol) const {
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < -tol)
            throw DegenerateInput("category distribution has a negative or non-finite entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > tol)
        throw DegenerateInput("category distribution does not sum to 1 (sum=" + std::to_string(sum) + ")");
}

void ThresholdProfile::validate(double tol) const {
    double prev = 1.0 + tol;
    for (double v : q) {
        if (!std::isfinite(v) || v < -tol || v > 1.0 + tol)
            throw DegenerateInput("threshold profile entry outside [0, 1]");
        if (v > prev + tol)
            throw DegenerateInput("threshold profile is not non-increasing");
        prev = v;
    }
}

ThresholdProfile to_threshold_profile(const CategoryDistribution& d) {
    ThresholdProfile out;
    // suffix sums: q[5] = p[6], q[t] = q[t+1] + p[t+1]; adding non-negative
    // terms keeps q non-increasing exactly
    out.q[5] = d.p[6];
    for (int t = 4; t >= 0; --t) out.q[t] = out.q[t + 1] + d.p[t + 1];
    return out;
}

double conditional_exceedance(const ThresholdProfile& profile, int lower, int higher) {
    if (lower < 0 || higher >= OutcomeScale::n_thresholds || lower > higher)
        throw DimensionMismatch("conditional_exceedance: need 0 <= lower <= higher <= 5");
    double denom = profile.q[lower];
    if (denom == 0.0)
        throw ZeroDenominator("conditional exceedance undefined: Pr(above " +
                              OutcomeScale::threshold_labels()[lower] + ") is zero");
    return profile.q[higher] / denom;
}

ClassWeights class_weights(const std::vector<int>& labels) {
    if (labels.empty()) throw EmptyTrainingSet("class_weights: no labels given");
    std::array<int, 7> counts{};
    for (int y : labels) {
        if (y < 0 || y >= OutcomeScale::n_categories)
            throw UnknownCategory("class_weights: label index out of range: " + std::to_string(y));
        ++counts[y];
    }
    ClassWeights w{};
    const double n = static_cast<double>(labels.size());
    for (int k = 0; k < 7; ++k) {
        if (counts[k] == 0)
            throw EmptyCategory("class_weights: category " + OutcomeScale::category_labels()[k] +
                                " has no observations");
        w[k] = n / (7.0 * counts[k]);
    }
    return w;
}

double macro_average(const std::array<double, 6>& per_threshold) {
    double s = 0.0;
    for (double v : per_threshold) s += v;
    return s / 6.0;
}

void to_json(nlohmann::json& j, const CategoryDistribution& d) {
    j = nlohmann::json{{"p", d.p}};
}

void from_json(const nlohmann::json& j, CategoryDistribution& d) {
    auto v = j.at("p").get<std::vector<double>>();
    if (v.size() != 7) throw DimensionMismatch("category distribution requires 7 probabilities");
    std::copy(v.begin(), v.end(), d.p.begin());
}

void to_json(nlohmann::json& j, const ThresholdProfile& q) {
    j = nlohmann::json{{"q", q.q}};
}

void from_json(const nlohmann::json& j, ThresholdProfile& q) {
    auto v = j.at("q").get<std::vector<double>>();
    if (v.size() != 6) throw DimensionMismatch("threshold profile requires 6 probabilities");
    std::copy(v.begin(), v.end(), q.q.begin());
}

} // namespace ordinal
