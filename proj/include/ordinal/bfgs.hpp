#pragma once

#include <functional>

#include <Eigen/Dense>

namespace ordinal {

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_norm = 0.0; // infinity norm at the final iterate
    int iterations = 0;
    bool converged = false;
};

// objective: returns f(x) and fills grad with the gradient at x
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Dense BFGS with a strong-Wolfe line search.  Convergence is declared when
// the gradient infinity norm drops below grad_tol.
BfgsResult bfgs_minimize(const Objective& objective, Eigen::VectorXd x0, double grad_tol = 1e-6,
                         int max_iterations = 500);

} // namespace ordinal
