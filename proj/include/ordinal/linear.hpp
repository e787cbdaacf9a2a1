#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "ordinal/outcome.hpp"

namespace ordinal {

// Multinomial logistic regression over the seven outcome categories with the
// lowest category as reference.  weights is 6 x (d + 1); row k holds the
// intercept (column 0) and coefficients for the log-odds of category k + 1
// against category 0.
struct MnlrModel {
    Eigen::MatrixXd weights;
    double loglik = 0.0;
    double ridge = 0.0;
    int iterations = 0;
    bool converged = false;

    CategoryDistribution predict_distribution(const Eigen::VectorXd& x) const;
    ThresholdProfile predict(const Eigen::VectorXd& x) const;
};

// Proportional-odds (cumulative logit) regression: Pr(outcome above t) =
// sigmoid(x . beta - theta[t]) with ascending thresholds theta.
struct PolrModel {
    Eigen::VectorXd beta;
    std::array<double, 6> theta{};
    double loglik = 0.0;
    double ridge = 0.0;
    int iterations = 0;
    bool converged = false;

    ThresholdProfile predict(const Eigen::VectorXd& x) const;
    CategoryDistribution predict_distribution(const Eigen::VectorXd& x) const;
};

// Maximum-likelihood training by BFGS (gradient infinity norm < 1e-6, at most
// 500 iterations).  The ridge penalty applies to slopes only, never to
// intercepts or thresholds, so unpenalised fits of nested models stay nested.
// Throws:
//   EmptyCategory  when an outcome category is absent from y
//   Collinearity   when ridge == 0 and [1 X] is column-rank deficient
//   Separation     when ridge == 0 and the likelihood diverges
MnlrModel train_mnlr(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge = 1e-4);
PolrModel train_polr(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge = 1e-4);

// Asymptotic standard errors from the observed information at the fitted
// parameters.  MNLR errors are row-major over the 6 x (d + 1) weight matrix.
Eigen::VectorXd mnlr_standard_errors(const MnlrModel& model, const Eigen::MatrixXd& X,
                                     const std::vector<int>& y);
struct PolrStandardErrors {
    Eigen::VectorXd beta;
    std::array<double, 6> theta;
};
PolrStandardErrors polr_standard_errors(const PolrModel& model, const Eigen::MatrixXd& X,
                                        const std::vector<int>& y);

// Likelihood-ratio test p-value: upper chi-square tail of
// 2 (loglik_full - loglik_reduced) with df degrees of freedom.
// Throws NotNested when the full model fits worse than the reduced one.
double lr_test(double loglik_full, double loglik_reduced, int df);

// Pools p-values across imputed datasets by the z-transformation method:
// each p maps to an upper-tail normal score, the scores are averaged, and the
// average is referred to a normal with total variance inflated by the
// between-imputation variance.
double combine_pvalues_z(const std::vector<double>& p_values);

} // namespace ordinal
