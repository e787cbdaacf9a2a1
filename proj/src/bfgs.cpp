#include "ordinal/bfgs.hpp"

#include <cmath>
#include <limits>

#include "ordinal/errors.hpp"

namespace ordinal {

namespace {

constexpr double kC1 = 1e-4; // sufficient-decrease constant
constexpr double kC2 = 0.9;  // curvature constant

struct LinePoint {
    double alpha;
    double f;
    double slope;
};

// Strong-Wolfe line search (bracket + zoom with bisection fallback).
// Returns alpha, or 0 when no acceptable step exists numerically.
double wolfe_search(const Objective& objective, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& direction, double f0, double slope0,
                    Eigen::VectorXd& x_out, double& f_out, Eigen::VectorXd& g_out) {
    auto eval = [&](double alpha, LinePoint& pt) {
        x_out = x + alpha * direction;
        double f = objective(x_out, g_out);
        pt.alpha = alpha;
        pt.f = f;
        pt.slope = g_out.dot(direction);
        return std::isfinite(f);
    };

    auto zoom = [&](LinePoint lo, LinePoint hi) -> double {
        for (int iter = 0; iter < 50; ++iter) {
            // quadratic interpolation with bisection safeguard
            double d = hi.alpha - lo.alpha;
            double denom = 2.0 * (hi.f - lo.f - lo.slope * d);
            double alpha = std::fabs(denom) > 1e-300 ? lo.alpha - lo.slope * d * d / denom
                                                     : 0.5 * (lo.alpha + hi.alpha);
            double a = std::min(lo.alpha, hi.alpha), b = std::max(lo.alpha, hi.alpha);
            if (!(alpha > a + 0.1 * (b - a) && alpha < b - 0.1 * (b - a)))
                alpha = 0.5 * (lo.alpha + hi.alpha);

            LinePoint pt{};
            if (!eval(alpha, pt)) {
                hi = LinePoint{alpha, std::numeric_limits<double>::infinity(), 0.0};
                continue;
            }
            if (pt.f > f0 + kC1 * alpha * slope0 || pt.f >= lo.f) {
                hi = pt;
            } else {
                if (std::fabs(pt.slope) <= -kC2 * slope0) {
                    f_out = pt.f;
                    return alpha;
                }
                if (pt.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = pt;
            }
            if (std::fabs(hi.alpha - lo.alpha) < 1e-16) break;
        }
        // best effort: return lo if it at least decreases f
        if (lo.f < f0) {
            LinePoint pt{};
            eval(lo.alpha, pt);
            f_out = pt.f;
            return lo.alpha;
        }
        return 0.0;
    };

    LinePoint prev{0.0, f0, slope0};
    double alpha = 1.0;
    for (int iter = 0; iter < 30; ++iter) {
        LinePoint pt{};
        if (!eval(alpha, pt)) {
            // step overshoots into non-finite territory; shrink hard
            alpha *= 0.25;
            continue;
        }
        if (pt.f > f0 + kC1 * alpha * slope0 || (iter > 0 && pt.f >= prev.f))
            return zoom(prev, pt);
        if (std::fabs(pt.slope) <= -kC2 * slope0) {
            f_out = pt.f;
            return alpha;
        }
        if (pt.slope >= 0.0) return zoom(pt, prev);
        prev = pt;
        alpha *= 2.0;
    }
    return 0.0;
}

} // namespace

BfgsResult bfgs_minimize(const Objective& objective, Eigen::VectorXd x0, double grad_tol,
                         int max_iterations) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(n), x_new(n), g_new(n);
    double f = objective(x, g);
    if (!std::isfinite(f))
        throw DegenerateInput("bfgs: objective is non-finite at the starting point");

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    BfgsResult result;
    bool first = true;

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        double gnorm = g.lpNorm<Eigen::Infinity>();
        if (gnorm < grad_tol) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd direction = -(H * g);
        double slope = g.dot(direction);
        if (!(slope < 0.0)) { // H lost positive definiteness; reset
            H.setIdentity();
            direction = -g;
            slope = g.dot(direction);
        }

        double f_new = f;
        double alpha = wolfe_search(objective, x, direction, f, slope, x_new, f_new, g_new);
        if (alpha == 0.0) break; // line search failed; report best iterate

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        double sy = s.dot(y);
        if (first && sy > 0.0) {
            H *= sy / y.squaredNorm(); // scale identity before the first update
            first = false;
        }
        if (sy > 1e-12 * s.norm() * y.norm()) {
            double rho = 1.0 / sy;
            Eigen::VectorXd Hy = H * y;
            H -= rho * (s * Hy.transpose() + Hy * s.transpose());
            H += rho * rho * (y.dot(Hy)) * (s * s.transpose());
            H += rho * (s * s.transpose());
        }
        x = x_new;
        g = g_new;
        f = f_new;
    }

    result.x = std::move(x);
    result.value = f;
    result.grad_norm = g.lpNorm<Eigen::Infinity>();
    result.iterations = iter;
    if (!result.converged) result.converged = result.grad_norm < grad_tol;
    return result;
}

} // namespace ordinal
