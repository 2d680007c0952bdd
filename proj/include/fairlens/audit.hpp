#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "fairlens/dataset.hpp"
#include "fairlens/fairness.hpp"
#include "fairlens/nn.hpp"
#include "fairlens/stats.hpp"

namespace fairlens {

struct LambdaModel {
    double lambda = 0.0;
    const TwoHeadModel* model = nullptr;
};

struct AwarenessCurve {
    std::vector<double> lambdas;
    std::vector<double> probe_accuracies;   // held-out accuracy of the s-probe
    std::vector<double> target_accuracies;  // held-out accuracy of 1(f>0)
    std::vector<bool> kept_mask;
    double constant_accuracy = 0.0;
    double unconstrained_accuracy = 0.0;
    KendallResult kendall;  // over kept (lambda, probe accuracy) pairs
};

/// For each model, fits a logistic probe for the protected attribute on the
/// frozen train-split last layer and reports its test accuracy; models whose
/// target accuracy falls in the lowest quartile between constant-classifier
/// and unconstrained accuracy are dropped before the Kendall test.
AwarenessCurve probe_awareness(const std::vector<LambdaModel>& models, const Dataset& ds);

enum class ReconstructionDirection { FairFromHeads, UnconstrainedFromFair };

struct ReconstructionResult {
    ReconstructionDirection direction = ReconstructionDirection::FairFromHeads;
    double c1 = 0.0;  // a1 or b1
    double c2 = 0.0;  // a2 or b2
    double agreement = 0.0;
    double baseline_agreement = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;     // target predictions were a single class
    bool used_fallback = false;  // free-weight fit normalized by the f-weight
    bool converged = false;
};

/// Fits 1(f + a1*g + a2 > 0) against the fair model's decisions: logistic
/// regression on feature g with the coefficient of f pinned to 1 (offset
/// term), fitted on one split and scored on another.
ReconstructionResult reconstruct_fair(const Scores& fit_scores,
                                      const std::vector<int>& fair_preds_fit,
                                      const Scores& eval_scores,
                                      const std::vector<int>& fair_preds_eval);

/// Fits 1(r - b1*g - b2 > 0) against the unconstrained model's decisions,
/// with the coefficient of the fair score r pinned to 1.
ReconstructionResult recover_unconstrained(const Eigen::VectorXd& fair_scores_fit,
                                           const Eigen::VectorXd& g_fit,
                                           const std::vector<int>& unc_preds_fit,
                                           const Eigen::VectorXd& fair_scores_eval,
                                           const Eigen::VectorXd& g_eval,
                                           const std::vector<int>& unc_preds_eval);

/// Mean pairwise test-decision disagreement among models retrained with the
/// given seeds (all other config fields unchanged).
double reseed_baseline(const Dataset& ds, const TrainConfig& cfg,
                       const std::vector<std::int64_t>& seeds);

double mean_pairwise_disagreement(const std::vector<std::vector<int>>& predictions);

struct CounterfactualReport {
    double flip_fraction_total = 0.0;
    std::array<double, 2> flips_0to1_group{};  // indexed by protected group
    std::array<double, 2> flips_1to0_group{};
    std::array<double, 2> medians{};  // gbar_0, gbar_1
    std::array<std::size_t, 2> group_sizes{};
    std::array<std::size_t, 2> count_0to1{};
    std::array<std::size_t, 2> count_1to0{};
    std::size_t n = 0;
};

/// Replaces each individual's g(x) by the median g of the opposite group and
/// counts decision changes of the combined rule, per group and direction.
CounterfactualReport counterfactual_flips(const Eigen::VectorXd& f_scores,
                                          const Eigen::VectorXd& g_scores,
                                          const std::vector<int>& protected_attr,
                                          const CombinedClassifier& clf);

struct RegionResult {
    std::vector<std::size_t> indices;  // sorted ascending
    double g_near_binary_fraction = 0.0;
};

/// Indices whose decision under the recovered rule 1(f + c1*g + c2 > 0)
/// differs between g=0 and g=1; the near-binary share of g is reported
/// alongside since the interval reading assumes an indicator-like g.
RegionResult disadvantaged_region(const Eigen::VectorXd& f_scores,
                                  const Eigen::VectorXd& g_scores,
                                  const ReconstructionResult& recovery);

}  // namespace fairlens
