#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairlens/common.hpp"
#include "fairlens/dataset.hpp"
#include "fairlens/nn.hpp"

namespace fairlens {

struct FairnessReport {
    double accuracy = 0.0;
    double ddp = 0.0;  // positive_rate_s1 - positive_rate_s0, exactly
    double positive_rate_s0 = 0.0;
    double positive_rate_s1 = 0.0;
    Split split = Split::Test;
    std::size_t n_group0 = 0;
    std::size_t n_group1 = 0;
};

/// Coefficients of the combined decision rule 1(f(x) + a1*g(x) + a2 > 0).
struct CombinedClassifier {
    double a1 = 0.0;
    double a2 = 0.0;
    double constraint = 1.0;  // |DDP| bound used during the search
};

/// Per-group decision thresholds 1(f(x) > t_s), using the true attribute s.
struct GroupThresholds {
    double t0 = 0.0;
    double t1 = 0.0;
};

struct MassagingPlan {
    std::size_t M = 0;          // pair count that equalizes positive fractions
    double lambda_frac = 0.0;
    std::size_t requested = 0;  // round(lambda_frac * M)
    std::size_t applied = 0;    // min(requested, feasible)
    bool reduced = false;       // applied < requested
    int advantaged_group = 1;
    std::vector<std::size_t> promote_idx;  // s=disadvantaged, y=0, by descending score
    std::vector<std::size_t> demote_idx;   // s=advantaged, y=1, by ascending score
};

/// Empirical P(h=1 | s=1) - P(h=1 | s=0). Both groups must be present.
double ddp(const std::vector<int>& predictions, const std::vector<int>& protected_attr);

/// Squared difference of group mean sigmoid responses (relaxed DDP).
double reg_squared(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr);

/// Absolute difference of group mean sigmoid responses.
double reg_abs(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr);

/// Value plus gradient with respect to the logits; the reg_abs subgradient at
/// zero is zero.
double reg_squared_grad(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr,
                        Eigen::VectorXd& grad);
double reg_abs_grad(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr,
                    Eigen::VectorXd& grad);

/// Kamiran-Calders style relabeling of the train split, ranked by the scores
/// of an unconstrained classifier: promotes the round(lambda_frac*M)
/// highest-scoring negatives of the disadvantaged group and demotes as many
/// lowest-scoring positives of the advantaged group.
std::pair<Dataset, MassagingPlan> massage(const Dataset& ds, const Scores& train_scores,
                                          double lambda_frac);

/// Recursive grid search for (a1, a2) on [-15,15]^2: 200 points per axis and
/// 4 refinement levels around the incumbent; keeps the most accurate rule
/// with |DDP| <= ddp_bound on the given data. The unmodified rule (0,0) is
/// always a candidate. Ties break toward smaller |DDP|, then smaller |a1|.
CombinedClassifier combine_grid_search(const Scores& scores_val,
                                       const std::vector<int>& protected_val,
                                       const std::vector<int>& targets_val, double ddp_bound);

/// Accuracy-optimal per-group thresholds under |DDP| <= ddp_bound, by exact
/// enumeration over per-group score midpoints plus the always-feasible
/// constant classifiers.
GroupThresholds lipton_thresholds(const std::vector<double>& f_scores,
                                  const std::vector<int>& protected_attr,
                                  const std::vector<int>& targets, double ddp_bound);

FairnessReport evaluate(const std::vector<int>& predictions, const std::vector<int>& targets,
                        const std::vector<int>& protected_attr, Split split);

// Decision-rule helpers (strict inequality throughout).
std::vector<int> predict_combined(const Scores& scores, const CombinedClassifier& clf);
std::vector<int> predict_thresholds(const std::vector<double>& f_scores,
                                    const std::vector<int>& protected_attr,
                                    const GroupThresholds& thresholds);
std::vector<int> predict_sign(const Eigen::VectorXd& f_scores);

}  // namespace fairlens
