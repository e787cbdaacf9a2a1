#include "ordinal/linear.hpp"

#include <algorithm>
#include <cmath>

#include "ordinal/bfgs.hpp"
#include "ordinal/errors.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

namespace {

constexpr double kGradTol = 1e-6;
constexpr int kMaxIterations = 500;
// an unpenalised logit beyond this is treated as a diverging likelihood
constexpr double kSeparationBound = 30.0;
constexpr double kTinyProb = 1e-300;

void check_labels(const std::vector<int>& y) {
    if (y.empty()) throw EmptyTrainingSet("linear model: no training rows");
    std::array<int, 7> counts{};
    for (int v : y) {
        if (v < 0 || v >= OutcomeScale::n_categories)
            throw UnknownCategory("linear model: label out of range: " + std::to_string(v));
        ++counts[v];
    }
    for (int k = 0; k < 7; ++k)
        if (counts[k] == 0)
            throw EmptyCategory("linear model: category " + OutcomeScale::category_labels()[k] +
                                " absent from training labels");
}

void check_rank(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Xi(X.rows(), X.cols() + 1);
    Xi.col(0).setOnes();
    Xi.rightCols(X.cols()) = X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xi);
    if (qr.rank() < Xi.cols())
        throw Collinearity("linear model: design matrix with intercept is rank deficient (rank " +
                           std::to_string(qr.rank()) + " of " + std::to_string(Xi.cols()) + ")");
}

// negative log-likelihood and gradient for MNLR; w is the 6 x (d+1) weight
// matrix flattened row-major
double mnlr_nll(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge,
                const Eigen::VectorXd& w, Eigen::VectorXd* grad) {
    const Eigen::Index n = X.rows(), d = X.cols();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        w.data(), 6, d + 1);
    if (grad) grad->setZero();

    double nll = 0.0;
    Eigen::VectorXd z(7), p(7);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(0) = 0.0;
        for (int k = 0; k < 6; ++k) z(k + 1) = W(k, 0) + W.row(k).tail(d).dot(X.row(i));
        double zmax = z.maxCoeff();
        p = (z.array() - zmax).exp();
        double sum = p.sum();
        p /= sum;
        nll -= std::log(std::max(p(y[i]), kTinyProb));

        if (grad) {
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> G(
                grad->data(), 6, d + 1);
            for (int k = 0; k < 6; ++k) {
                double coef = p(k + 1) - (y[i] == k + 1 ? 1.0 : 0.0);
                G(k, 0) += coef;
                G.row(k).tail(d) += coef * X.row(i);
            }
        }
    }
    if (ridge > 0.0) {
        // penalise slopes only
        for (int k = 0; k < 6; ++k) nll += 0.5 * ridge * W.row(k).tail(d).squaredNorm();
        if (grad) {
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> G(
                grad->data(), 6, d + 1);
            for (int k = 0; k < 6; ++k) G.row(k).tail(d) += ridge * W.row(k).tail(d);
        }
    }
    return nll;
}

// negative log-likelihood and gradient for POLR in the natural (beta, theta)
// parameter space; grad_theta accumulates d nll / d theta_t
double polr_nll(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge,
                const Eigen::VectorXd& beta, const std::array<double, 6>& theta,
                Eigen::VectorXd* grad_beta, std::array<double, 6>* grad_theta) {
    const Eigen::Index n = X.rows();
    if (grad_beta) grad_beta->setZero();
    if (grad_theta) grad_theta->fill(0.0);

    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double eta = X.row(i).dot(beta);
        int k = y[i];
        // cumulative probabilities gamma_t = Pr(y <= t) = sigmoid(theta_t - eta)
        double p, dlo = 0.0, dhi = 0.0; // d p / d theta_{k-1}, d p / d theta_k
        if (k == 0) {
            double g = sigmoid(theta[0] - eta);
            p = g;
            dhi = g * (1.0 - g);
        } else if (k == 6) {
            double g = sigmoid(theta[5] - eta);
            p = 1.0 - g;
            dlo = -g * (1.0 - g);
        } else {
            double a = theta[k - 1] - eta, b = theta[k] - eta;
            p = sigmoid_diff(a, b);
            double ga = sigmoid(a), gb = sigmoid(b);
            dlo = -ga * (1.0 - ga);
            dhi = gb * (1.0 - gb);
        }
        p = std::max(p, kTinyProb);
        nll -= std::log(p);

        if (grad_beta) {
            double inv = 1.0 / p;
            // d nll / d theta and d nll / d eta (deta = -(dlo + dhi))
            if (k > 0) (*grad_theta)[k - 1] -= inv * dlo;
            if (k < 6) (*grad_theta)[k] -= inv * dhi;
            *grad_beta += inv * (dlo + dhi) * X.row(i).transpose();
        }
    }
    if (ridge > 0.0) {
        nll += 0.5 * ridge * beta.squaredNorm();
        if (grad_beta) *grad_beta += ridge * beta;
    }
    return nll;
}

} // namespace

CategoryDistribution MnlrModel::predict_distribution(const Eigen::VectorXd& x) const {
    const Eigen::Index d = weights.cols() - 1;
    if (x.size() != d) throw DimensionMismatch("mnlr predict: feature vector has wrong length");
    Eigen::VectorXd z(7);
    z(0) = 0.0;
    for (int k = 0; k < 6; ++k) z(k + 1) = weights(k, 0) + weights.row(k).tail(d).dot(x);
    double zmax = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - zmax).exp();
    double sum = e.sum();
    CategoryDistribution out;
    for (int k = 0; k < 7; ++k) out.p[k] = e(k) / sum;
    return out;
}

ThresholdProfile MnlrModel::predict(const Eigen::VectorXd& x) const {
    return to_threshold_profile(predict_distribution(x));
}

ThresholdProfile PolrModel::predict(const Eigen::VectorXd& x) const {
    if (x.size() != beta.size())
        throw DimensionMismatch("polr predict: feature vector has wrong length");
    double eta = beta.dot(x);
    ThresholdProfile out;
    for (int t = 0; t < 6; ++t) out.q[t] = sigmoid(eta - theta[t]);
    return out;
}

CategoryDistribution PolrModel::predict_distribution(const Eigen::VectorXd& x) const {
    ThresholdProfile q = predict(x);
    CategoryDistribution out;
    out.p[0] = 1.0 - q.q[0];
    for (int k = 1; k < 6; ++k) out.p[k] = q.q[k - 1] - q.q[k];
    out.p[6] = q.q[5];
    return out;
}

MnlrModel train_mnlr(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge) {
    check_labels(y);
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw DimensionMismatch("train_mnlr: X rows and y length differ");
    if (ridge < 0.0) throw ConfigError("train_mnlr: ridge must be non-negative");
    if (ridge == 0.0) check_rank(X);

    const Eigen::Index d = X.cols();
    // optimise the per-observation mean so the gradient tolerance is
    // independent of the sample size; the argmin is unchanged
    const double scale = 1.0 / static_cast<double>(X.rows());
    Eigen::VectorXd w0 = Eigen::VectorXd::Zero(6 * (d + 1));
    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
        g.resize(w.size());
        double f = mnlr_nll(X, y, ridge, w, &g);
        g *= scale;
        return f * scale;
    };
    BfgsResult r = bfgs_minimize(objective, w0, kGradTol, kMaxIterations);

    if (ridge == 0.0 && r.x.lpNorm<Eigen::Infinity>() > kSeparationBound)
        throw Separation("train_mnlr: weights diverge; classes are separable without a penalty");

    MnlrModel model;
    model.weights = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(r.x.data(), 6, d + 1);
    model.loglik = -mnlr_nll(X, y, 0.0, r.x, nullptr); // unpenalised log-likelihood
    model.ridge = ridge;
    model.iterations = r.iterations;
    model.converged = r.converged;
    return model;
}

PolrModel train_polr(const Eigen::MatrixXd& X, const std::vector<int>& y, double ridge) {
    check_labels(y);
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw DimensionMismatch("train_polr: X rows and y length differ");
    if (ridge < 0.0) throw ConfigError("train_polr: ridge must be non-negative");
    if (ridge == 0.0) check_rank(X);

    const Eigen::Index d = X.cols();

    // monotone reparameterisation: theta_0 = a_0, theta_t = theta_{t-1} + exp(a_t)
    auto unpack = [&](const Eigen::VectorXd& v, Eigen::VectorXd& beta, std::array<double, 6>& th) {
        beta = v.head(d);
        th[0] = v(d);
        for (int t = 1; t < 6; ++t) th[t] = th[t - 1] + std::exp(v(d + t));
    };

    // optimise the per-observation mean so the gradient tolerance is
    // independent of the sample size; the argmin is unchanged
    const double scale = 1.0 / static_cast<double>(X.rows());
    auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        Eigen::VectorXd beta;
        std::array<double, 6> th;
        unpack(v, beta, th);
        Eigen::VectorXd gb(d);
        std::array<double, 6> gt;
        double f = polr_nll(X, y, ridge, beta, th, &gb, &gt);
        g.resize(v.size());
        g.head(d) = gb;
        // chain rule through the cumulative-sum reparameterisation
        double suffix = 0.0;
        for (int t = 5; t >= 1; --t) {
            suffix += gt[t];
            g(d + t) = std::exp(v(d + t)) * suffix;
        }
        g(d) = suffix + gt[0];
        g *= scale;
        return f * scale;
    };

    // initialise thresholds at the empirical cumulative logits
    std::array<double, 7> counts{};
    for (int v : y) counts[v] += 1.0;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(d + 6);
    double cum = 0.0;
    std::array<double, 6> theta0{};
    for (int t = 0; t < 6; ++t) {
        cum += counts[t];
        theta0[t] = logit(cum / static_cast<double>(y.size()));
    }
    v0(d) = theta0[0];
    for (int t = 1; t < 6; ++t) v0(d + t) = std::log(theta0[t] - theta0[t - 1]);

    BfgsResult r = bfgs_minimize(objective, v0, kGradTol, kMaxIterations);

    PolrModel model;
    unpack(r.x, model.beta, model.theta);
    if (ridge == 0.0 && model.beta.size() > 0 &&
        model.beta.lpNorm<Eigen::Infinity>() > kSeparationBound)
        throw Separation("train_polr: slopes diverge; outcome is separable without a penalty");
    model.loglik = -polr_nll(X, y, 0.0, model.beta, model.theta, nullptr, nullptr);
    model.ridge = ridge;
    model.iterations = r.iterations;
    model.converged = r.converged;
    return model;
}

namespace {

// observed information by central finite differences of the analytic gradient
Eigen::MatrixXd observed_information(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                                     const Eigen::VectorXd& at) {
    const Eigen::Index m = at.size();
    Eigen::MatrixXd info(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double h = 1e-5 * std::max(1.0, std::fabs(at(j)));
        Eigen::VectorXd hi = at, lo = at;
        hi(j) += h;
        lo(j) -= h;
        info.col(j) = (grad(hi) - grad(lo)) / (2.0 * h);
    }
    return 0.5 * (info + info.transpose());
}

Eigen::VectorXd se_from_information(const Eigen::MatrixXd& info) {
    Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    Eigen::VectorXd se(info.rows());
    for (Eigen::Index j = 0; j < info.rows(); ++j)
        se(j) = std::sqrt(std::max(cov(j, j), 0.0));
    return se;
}

} // namespace

Eigen::VectorXd mnlr_standard_errors(const MnlrModel& model, const Eigen::MatrixXd& X,
                                     const std::vector<int>& y) {
    const Eigen::Index d = X.cols();
    Eigen::VectorXd w(6 * (d + 1));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), 6, d + 1) = model.weights;
    auto grad = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd g(v.size());
        mnlr_nll(X, y, model.ridge, v, &g);
        return g;
    };
    return se_from_information(observed_information(grad, w));
}

PolrStandardErrors polr_standard_errors(const PolrModel& model, const Eigen::MatrixXd& X,
                                        const std::vector<int>& y) {
    const Eigen::Index d = X.cols();
    Eigen::VectorXd v(d + 6);
    v.head(d) = model.beta;
    for (int t = 0; t < 6; ++t) v(d + t) = model.theta[t];
    auto grad = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd beta = u.head(d);
        std::array<double, 6> th;
        for (int t = 0; t < 6; ++t) th[t] = u(d + t);
        Eigen::VectorXd gb(d);
        std::array<double, 6> gt;
        polr_nll(X, y, model.ridge, beta, th, &gb, &gt);
        Eigen::VectorXd g(u.size());
        g.head(d) = gb;
        for (int t = 0; t < 6; ++t) g(d + t) = gt[t];
        return g;
    };
    Eigen::VectorXd se = se_from_information(observed_information(grad, v));
    PolrStandardErrors out;
    out.beta = se.head(d);
    for (int t = 0; t < 6; ++t) out.theta[t] = se(d + t);
    return out;
}

double lr_test(double loglik_full, double loglik_reduced, int df) {
    if (df < 1) throw ConfigError("lr_test: degrees of freedom must be >= 1");
    double stat = 2.0 * (loglik_full - loglik_reduced);
    double tol = 1e-8 * std::max(1.0, std::fabs(loglik_full));
    if (stat < -tol)
        throw NotNested("lr_test: full model fits worse than the reduced model (stat=" +
                        std::to_string(stat) + ")");
    return chi_square_sf(std::max(stat, 0.0), df);
}

double combine_pvalues_z(const std::vector<double>& p_values) {
    if (p_values.empty()) throw TooFewValues("combine_pvalues_z: no p-values");
    std::vector<double> z;
    z.reserve(p_values.size());
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0))
            throw DegenerateInput("combine_pvalues_z: p-value outside [0, 1]");
        double clipped = std::clamp(p, 1e-15, 1.0 - 1e-15);
        z.push_back(normal_quantile(1.0 - clipped)); // upper-tail score
    }
    const double m = static_cast<double>(z.size());
    double zbar = mean(z);
    double between = sample_variance(z);
    double total = 1.0 + (1.0 + 1.0 / m) * between;
    return 1.0 - normal_cdf(zbar / std::sqrt(total));
}

} // namespace ordinal
