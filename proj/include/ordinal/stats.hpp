#pragma once

#include <cmath>
#include <vector>

namespace ordinal {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// stable sigma(b) - sigma(a) for a <= b
inline double sigmoid_diff(double a, double b) {
    return sigmoid(b) * sigmoid(-a) * (-std::expm1(a - b));
}

double normal_cdf(double x);
double normal_quantile(double p);

// upper tail P(X > x) for chi-square with k degrees of freedom
double chi_square_sf(double x, double k);

// type-7 (linear interpolation) quantile of a sample; sorts a copy
double quantile(std::vector<double> values, double p);

double mean(const std::vector<double>& v);
// unbiased sample variance (n-1 denominator); returns 0 for n < 2
double sample_variance(const std::vector<double>& v);

} // namespace ordinal
