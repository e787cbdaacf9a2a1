#include "ordinal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "ordinal/errors.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

std::array<int, 7> PredictionSet::category_counts() const {
    std::array<int, 7> counts{};
    for (int y : labels) {
        if (y < 0 || y >= OutcomeScale::n_categories)
            throw UnknownCategory("prediction set: label out of range");
        ++counts[y];
    }
    return counts;
}

void PredictionSet::check() const {
    if (profiles.size() != labels.size())
        throw DimensionMismatch("prediction set: profiles and labels differ in length");
    category_counts(); // validates label range
}

double dichotomous_c(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DimensionMismatch("dichotomous_c: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw UnknownCategory("dichotomous_c: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw OneClassOnly("dichotomous_c: both classes must be present");

    // midranks make tied scores contribute exactly one half per tied pair
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + j) + 1.0; // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j + 1;
    }
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double ranking_score(const ThresholdProfile& profile) {
    double s = 0.0;
    for (double q : profile.q) s += q;
    return s;
}

double pairwise_c(const PredictionSet& set, int lower, int higher) {
    if (lower < 0 || higher >= OutcomeScale::n_categories || lower >= higher)
        throw DimensionMismatch("pairwise_c: need 0 <= lower < higher <= 6");
    std::vector<double> scores;
    std::vector<int> binary;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == lower || set.labels[i] == higher) {
            scores.push_back(ranking_score(set.profiles[i]));
            binary.push_back(set.labels[i] == higher ? 1 : 0);
        }
    }
    return dichotomous_c(scores, binary); // OneClassOnly when a side is empty
}

double orc(const PredictionSet& set, bool skip_empty) {
    set.check();
    auto counts = set.category_counts();
    double total = 0.0;
    int defined = 0;
    for (int i = 0; i < 7; ++i) {
        for (int j = i + 1; j < 7; ++j) {
            if (counts[i] == 0 || counts[j] == 0) {
                if (!skip_empty)
                    throw EmptyCategory("orc: category " +
                                        OutcomeScale::category_labels()[counts[i] == 0 ? i : j] +
                                        " is empty; use the skip-empty mode to average over "
                                        "defined pairs");
                continue;
            }
            total += pairwise_c(set, i, j);
            ++defined;
        }
    }
    if (defined == 0) throw OneClassOnly("orc: fewer than two categories present");
    return total / static_cast<double>(defined);
}

double generalized_c(const PredictionSet& set) {
    set.check();
    auto counts = set.category_counts();
    double num = 0.0, denom = 0.0;
    for (int i = 0; i < 7; ++i) {
        for (int j = i + 1; j < 7; ++j) {
            if (counts[i] == 0 || counts[j] == 0) continue;
            double w = static_cast<double>(counts[i]) * static_cast<double>(counts[j]);
            num += w * pairwise_c(set, i, j);
            denom += w;
        }
    }
    if (denom == 0.0) throw OneClassOnly("generalized_c: fewer than two categories present");
    return num / denom;
}

double somers_dxy(const PredictionSet& set) { return 2.0 * generalized_c(set) - 1.0; }

double threshold_c(const PredictionSet& set, int threshold) {
    set.check();
    if (threshold < 0 || threshold >= OutcomeScale::n_thresholds)
        throw DimensionMismatch("threshold_c: threshold index out of range");
    std::vector<double> scores(set.size());
    std::vector<int> binary(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        scores[i] = set.profiles[i].q[threshold];
        binary[i] = set.labels[i] > threshold ? 1 : 0;
    }
    return dichotomous_c(scores, binary);
}

CalibrationFit calibration_slope(const PredictionSet& set, int threshold) {
    set.check();
    if (threshold < 0 || threshold >= OutcomeScale::n_thresholds)
        throw DimensionMismatch("calibration_slope: threshold index out of range");
    const std::size_t n = set.size();
    if (n == 0) throw EmptyTrainingSet("calibration_slope: no predictions");

    std::vector<double> x(n);
    std::vector<int> y(n);
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double q = std::clamp(set.profiles[i].q[threshold], 1e-6, 1.0 - 1e-6);
        x[i] = logit(q);
        y[i] = set.labels[i] > threshold ? 1 : 0;
        n_pos += static_cast<std::size_t>(y[i]);
    }
    if (n_pos == 0 || n_pos == n)
        throw OneClassOnly("calibration_slope: outcome is one-sided at this threshold");
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
        throw DegenerateInput("calibration_slope: all predictions identical at this threshold");

    // two-parameter logistic regression by Newton-Raphson
    double b0 = 0.0, b1 = 1.0;
    CalibrationFit fit;
    for (int iter = 0; iter < 100; ++iter) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(b0 + b1 * x[i]);
            double r = static_cast<double>(y[i]) - p;
            double wgt = std::max(p * (1.0 - p), 1e-12);
            g0 += r;
            g1 += r * x[i];
            h00 += wgt;
            h01 += wgt * x[i];
            h11 += wgt * x[i] * x[i];
        }
        double det = h00 * h11 - h01 * h01;
        if (std::fabs(det) < 1e-300)
            throw NonConvergence("calibration_slope: singular information matrix");
        double d0 = (h11 * g0 - h01 * g1) / det;
        double d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        fit.iterations = iter + 1;
        if (std::fabs(b0) > 1e3 || std::fabs(b1) > 1e3)
            throw Separation("calibration_slope: recalibration parameters diverge");
        if (std::max(std::fabs(g0), std::fabs(g1)) < 1e-10 ||
            std::max(std::fabs(d0), std::fabs(d1)) < 1e-12)
            break;
        if (iter == 99)
            throw NonConvergence("calibration_slope: no convergence in 100 iterations");
    }
    fit.intercept = b0;
    fit.slope = b1;
    return fit;
}

namespace {

double tricube(double u) {
    double a = 1.0 - u * u * u;
    return a > 0.0 ? a * a * a : 0.0;
}

// weighted degree-1 fit evaluated at x0; weights are tricube over the window
// scaled by h, multiplied by robustness weights
double local_fit(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& rw, std::size_t lo, std::size_t hi, double x0) {
    double h = std::max(x0 - x[lo], x[hi] - x0);
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        double w = rw[j];
        if (h > 0.0)
            w *= tricube(std::fabs(x[j] - x0) / h);
        // h == 0: every window point sits exactly at x0; plain (robust) mean
        if (w <= 0.0) continue;
        sw += w;
        swx += w * x[j];
        swy += w * y[j];
        swxx += w * x[j] * x[j];
        swxy += w * x[j] * y[j];
    }
    if (sw <= 0.0) {
        // all robustness weights vanished in the window; fall back to the plain mean
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += y[j];
        return s / static_cast<double>(hi - lo + 1);
    }
    double xbar = swx / sw, ybar = swy / sw;
    double sxx = swxx - sw * xbar * xbar;
    double sxy = swxy - sw * xbar * ybar;
    if (sxx <= 1e-12 * std::max(1.0, swxx)) return ybar;
    double slope = sxy / sxx;
    return ybar + slope * (x0 - xbar);
}

} // namespace

std::vector<double> lowess(const std::vector<double>& x, const std::vector<double>& y,
                           double span, int robustness_iters) {
    if (x.size() != y.size()) throw DimensionMismatch("lowess: x and y differ in length");
    const std::size_t n = x.size();
    if (n < 2) throw TooFewPoints("lowess: need at least 2 points");
    if (!(span > 0.0 && span <= 1.0)) throw ConfigError("lowess: span must be in (0, 1]");
    if (robustness_iters < 0) throw ConfigError("lowess: robustness iterations must be >= 0");

    // work on points sorted by x; map fits back to input order at the end
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }

    const std::size_t r = std::min(n, std::max<std::size_t>(
                                          2, static_cast<std::size_t>(std::ceil(span * n))));
    // anchor spacing; only large inputs skip points
    const double delta = n > 1000 ? 0.01 * (xs.back() - xs.front()) : 0.0;

    std::vector<double> rw(n, 1.0), fitted(n, 0.0);

    for (int pass = 0; pass <= robustness_iters; ++pass) {
        std::size_t lo = 0, hi = r - 1;
        std::size_t last = 0;
        std::size_t i = 0;
        bool first = true;
        while (true) {
            // slide the window so it holds the r nearest neighbours of xs[i]
            while (hi + 1 < n && xs[hi + 1] - xs[i] < xs[i] - xs[lo]) {
                ++lo;
                ++hi;
            }
            fitted[i] = local_fit(xs, ys, rw, lo, hi, xs[i]);
            if (!first && last + 1 < i) {
                // interpolate the points skipped between the two anchors
                double denom = xs[i] - xs[last];
                for (std::size_t k = last + 1; k < i; ++k) {
                    double frac = denom > 0.0 ? (xs[k] - xs[last]) / denom : 0.0;
                    fitted[k] = fitted[last] + frac * (fitted[i] - fitted[last]);
                }
            }
            first = false;
            last = i;
            if (last >= n - 1) break;
            double cut = xs[last] + delta;
            std::size_t j = last + 1;
            while (j < n && xs[j] <= cut) {
                if (xs[j] == xs[last]) {
                    fitted[j] = fitted[last]; // exact ties share the fit
                    last = j;
                }
                ++j;
            }
            i = std::max(last + 1, j > 0 ? j - 1 : 0);
            if (i >= n) break;
        }

        if (pass == robustness_iters) break;
        // bisquare robustness weights from the residual median absolute deviation
        std::vector<double> abs_res(n);
        for (std::size_t k = 0; k < n; ++k) abs_res[k] = std::fabs(ys[k] - fitted[k]);
        double s = quantile(abs_res, 0.5);
        if (s <= 1e-12) break; // already an (essentially) exact fit
        for (std::size_t k = 0; k < n; ++k) {
            double u = abs_res[k] / (6.0 * s);
            rw[k] = u < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        }
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[order[i]] = fitted[i];
    return out;
}

CalibrationCurve calibration_curve(const PredictionSet& set, int threshold, double span,
                                   int robustness_iters) {
    set.check();
    if (threshold < 0 || threshold >= OutcomeScale::n_thresholds)
        throw DimensionMismatch("calibration_curve: threshold index out of range");
    const std::size_t n = set.size();
    if (n < 20) throw TooFewPoints("calibration_curve: need at least 20 predictions");

    std::vector<double> pred(n), outcome(n);
    bool any_pos = false, any_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        pred[i] = set.profiles[i].q[threshold];
        outcome[i] = set.labels[i] > threshold ? 1.0 : 0.0;
        (outcome[i] > 0.5 ? any_pos : any_neg) = true;
    }
    if (!any_pos || !any_neg)
        throw OneClassOnly("calibration_curve: outcome is one-sided at this threshold");

    std::vector<double> smooth = lowess(pred, outcome, span, robustness_iters);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });
    CalibrationCurve curve;
    curve.predicted.reserve(n);
    curve.observed.reserve(n);
    for (std::size_t i : order) {
        curve.predicted.push_back(pred[i]);
        curve.observed.push_back(std::clamp(smooth[i], 0.0, 1.0));
    }
    return curve;
}

double ici(const CalibrationCurve& curve) {
    if (curve.predicted.size() != curve.observed.size())
        throw DimensionMismatch("ici: curve arrays differ in length");
    if (curve.predicted.empty()) throw TooFewPoints("ici: empty curve");
    double s = 0.0;
    for (std::size_t i = 0; i < curve.predicted.size(); ++i)
        s += std::fabs(curve.observed[i] - curve.predicted[i]);
    return s / static_cast<double>(curve.predicted.size());
}

double niv_ici(double pi) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw DegenerateInput("niv_ici: rate outside [0, 1]");
    return pi * pi - pi + 0.5;
}

} // namespace ordinal
