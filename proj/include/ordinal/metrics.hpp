#pragma once

#include <array>
#include <vector>

#include "ordinal/outcome.hpp"

namespace ordinal {

// A set of predictions to score: one threshold profile and one true category
// index per patient.
struct PredictionSet {
    std::vector<ThresholdProfile> profiles;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::array<int, 7> category_counts() const;
    void check() const; // shape and label-range validation
};

// Concordance (c-index / AUC) of scores against binary labels, counting ties
// as one half.  Computed from midranks in O(n log n).
// Throws OneClassOnly when either class is absent.
double dichotomous_c(const std::vector<double>& scores, const std::vector<int>& labels);

// Expected-threshold-count ranking score: the sum of the six exceedance
// probabilities.  Orders patients for the pairwise ordinal c-indices.
double ranking_score(const ThresholdProfile& profile);

// c-index between two outcome categories (lower < higher), ranking patients
// by ranking_score; the higher category is the positive class.
double pairwise_c(const PredictionSet& set, int lower, int higher);

// Ordinal c-index: unweighted mean of the 21 pairwise c-indices.  When a
// category is empty, throws EmptyCategory unless skip_empty is set, in which
// case the mean runs over the defined pairs only.
double orc(const PredictionSet& set, bool skip_empty = false);

// Prevalence-weighted generalisation: sum of N_i N_j c_ij over pairs divided
// by the total number of informative pairs.  Empty categories simply carry
// zero weight.
double generalized_c(const PredictionSet& set);

// Somers' Dxy = 2 generalized_c - 1.
double somers_dxy(const PredictionSet& set);

// Dichotomous c at one threshold: scores q[t] against labels 1{y > t}.
double threshold_c(const PredictionSet& set, int threshold);

// Logistic recalibration at one threshold: regress 1{y > t} on
// logit(q[t]) (clipped to [1e-6, 1 - 1e-6]) with an intercept.  slope = 1
// and intercept = 0 indicate perfect weak calibration.
struct CalibrationFit {
    double intercept = 0.0;
    double slope = 0.0;
    int iterations = 0;
};
CalibrationFit calibration_slope(const PredictionSet& set, int threshold);

// Locally weighted linear regression (tricube kernel, nearest-neighbour span,
// optional bisquare robustness iterations).  Returns fitted values in input
// order.  Large inputs are handled by fitting at anchor points no closer than
// delta = 0.01 * range and interpolating between them.
std::vector<double> lowess(const std::vector<double>& x, const std::vector<double>& y,
                           double span = 0.75, int robustness_iters = 0);

// Smoothed observed-event curve against predicted probability at one
// threshold; points are sorted by predicted probability and the smoothed
// values are clipped to [0, 1].
struct CalibrationCurve {
    std::vector<double> predicted;
    std::vector<double> observed;
};
CalibrationCurve calibration_curve(const PredictionSet& set, int threshold, double span = 0.75,
                                   int robustness_iters = 0);

// Integrated calibration index: mean absolute distance between the smoothed
// observed curve and the predicted probabilities.
double ici(const CalibrationCurve& curve);

// ICI of a no-information model that predicts the constant rate pi against
// outcomes with true rate pi: pi^2 - pi + 1/2.
double niv_ici(double pi);

} // namespace ordinal
