#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fairlens/common.hpp"

namespace fairlens {

struct LogisticFit {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    bool offset_used = false;
    bool converged = false;
    int iterations = 0;

    double decision_value(const Eigen::VectorXd& x, double offset = 0.0) const {
        return weights.dot(x) + intercept + offset;
    }
};

/// Penalized maximum-likelihood logistic regression, second-order iterations
/// with step halving from zero initialization. The optional offset enters the
/// linear predictor with coefficient pinned to 1; ridge penalizes the weights
/// but not the intercept. Convergence: gradient norm <= 1e-8 * n.
LogisticFit logistic_fit(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         const Eigen::VectorXd* offset = nullptr, double ridge = 1e-6);

enum class PValueMethod { Exact, NormalApprox };

struct KendallResult {
    double tau = 0.0;
    double p_value = 1.0;
    std::size_t n_pairs = 0;
    PValueMethod method = PValueMethod::Exact;
};

/// Tie-corrected Kendall tau-b with a two-sided p-value for the null of
/// independence: exact permutation enumeration for n <= 10, tie-corrected
/// normal approximation beyond.
KendallResult kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys);

/// Lower median: the order statistic at 1-based index ceil(n/2).
double median(const std::vector<double>& values);

}  // namespace fairlens
