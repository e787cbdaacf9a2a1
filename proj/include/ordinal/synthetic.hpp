#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ordinal/cohort.hpp"
#include "ordinal/outcome.hpp"

namespace ordinal {

// Generating description of one synthetic predictor: marginal distribution,
// contribution to the latent recovery score, and a missingness mechanism.
struct SyntheticPredictor {
    PredictorSpec spec;

    // marginal distribution
    double mean = 0.0;                // continuous: normal mean
    double stddev = 1.0;              // continuous: normal sd
    std::vector<double> level_probs;  // categorical: level probabilities

    // latent effect: slope per standardised unit (continuous) or one additive
    // effect per level (categorical)
    double slope = 0.0;
    std::vector<double> level_effects;

    // missingness: probability of erasure; when mar_driver names another
    // (continuous, fully observed) predictor, the rate tilts with the
    // driver's standardised value on the logit scale
    double missing_rate = 0.0;
    std::string mar_driver;

    void validate() const;
};

// Cohort recipe under an ordered-logit outcome model: a patient's latent
// score s is the sum of predictor effects, and the outcome exceeds threshold
// t with probability sigmoid(s - theta[t]).
struct CohortSpec {
    int n = 1550;
    std::array<double, 6> theta{}; // ascending category cut points
    std::vector<SyntheticPredictor> predictors;

    void validate() const;
};

void to_json(nlohmann::json& j, const CohortSpec& s);
void from_json(const nlohmann::json& j, CohortSpec& s);

struct GeneratedCohort {
    CohortTable observed; // with missingness applied
    CohortTable complete; // pre-missingness values
};

GeneratedCohort generate_cohort(const CohortSpec& spec, std::uint64_t seed);

// True exceedance profile for one complete row of predictor cells.
ThresholdProfile oracle_profile(const CohortSpec& spec, const std::vector<std::string>& cells);

// Latent score of one complete row.
double oracle_latent(const CohortSpec& spec, const std::vector<std::string>& cells);

// Desk-scale default: eight concise clinical predictors, two extended
// markers and two token-only markers, with mixed missingness mechanisms.
CohortSpec default_cohort_spec();

} // namespace ordinal
