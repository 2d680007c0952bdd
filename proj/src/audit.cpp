#include "fairlens/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fairlens {

// ---------------------------------------------------------------------------
// Awareness probe
// ---------------------------------------------------------------------------

namespace {

double accuracy_of(const std::vector<int>& preds, const std::vector<int>& truth) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace

AwarenessCurve probe_awareness(const std::vector<LambdaModel>& models, const Dataset& ds) {
    if (models.size() < 3)
        throw InsufficientDataError("probe_awareness: need at least 3 models");
    ds.validate_for_training();

    const std::vector<int> s_train = ds.protected_of(Split::Train);
    const std::vector<int> s_test = ds.protected_of(Split::Test);
    const std::vector<int> y_test = ds.targets_of(Split::Test);
    const Eigen::MatrixXd x_test = ds.features_of(Split::Test);

    AwarenessCurve curve;
    for (const LambdaModel& lm : models) {
        const Eigen::MatrixXd z_train = last_layer(*lm.model, ds, Split::Train);
        const LogisticFit probe = logistic_fit(z_train, s_train);
        const Eigen::MatrixXd z_test = forward_last_layer(*lm.model, x_test);
        Eigen::VectorXd eta = z_test * probe.weights;
        eta.array() += probe.intercept;
        const std::vector<int> probe_preds = predict_sign(eta);
        const Scores test_scores = forward_scores(*lm.model, x_test, Split::Test);
        curve.lambdas.push_back(lm.lambda);
        curve.probe_accuracies.push_back(accuracy_of(probe_preds, s_test));
        curve.target_accuracies.push_back(accuracy_of(predict_sign(test_scores.f_scores), y_test));
    }

    double base = 0.0;
    for (int v : y_test) base += v;
    base /= static_cast<double>(y_test.size());
    curve.constant_accuracy = std::max(base, 1.0 - base);

    const auto unc = std::find_if(models.begin(), models.end(),
                                  [](const LambdaModel& lm) { return lm.lambda == 0.0; });
    if (unc == models.end())
        throw ArgumentError("probe_awareness: a lambda=0 model is required as the filter anchor");
    curve.unconstrained_accuracy =
        curve.target_accuracies[static_cast<std::size_t>(unc - models.begin())];

    // Drop models whose target accuracy lies in the lowest quartile of
    // [constant accuracy, unconstrained accuracy].
    const double threshold =
        curve.constant_accuracy +
        0.25 * (curve.unconstrained_accuracy - curve.constant_accuracy);
    std::vector<double> kept_lambdas, kept_probe;
    curve.kept_mask.resize(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        curve.kept_mask[i] = curve.target_accuracies[i] >= threshold;
        if (curve.kept_mask[i]) {
            kept_lambdas.push_back(curve.lambdas[i]);
            kept_probe.push_back(curve.probe_accuracies[i]);
        }
    }
    if (kept_lambdas.size() < 3)
        throw InsufficientDataError("probe_awareness: fewer than 3 models survive the quartile filter");
    curve.kendall = kendall_tau(kept_lambdas, kept_probe);
    return curve;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

namespace {

struct ShiftFit {
    double weight = 0.0;     // coefficient on g
    double intercept = 0.0;
    bool degenerate = false;
    bool used_fallback = false;
    bool converged = false;
};

double fit_split_agreement(const Eigen::VectorXd& g, const Eigen::VectorXd& offset,
                           const std::vector<int>& preds, double w, double b) {
    std::size_t same = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        same += (offset(i) + w * g(i) + b > 0.0 ? 1 : 0) == preds[static_cast<std::size_t>(i)];
    return static_cast<double>(same) / static_cast<double>(g.size());
}

// Fits 1(offset + w*g + b > 0) to the given decisions. The offset coefficient
// is pinned to 1; since a pinned logistic cannot rescale its confidence, a
// free-weight fit normalized by a positive offset-weight (same decision rule,
// free temperature) is also fitted, and whichever reproduces more of the
// fitting-split decisions wins.
ShiftFit fit_decision_shift(const Eigen::VectorXd& g, const Eigen::VectorXd& offset,
                            const std::vector<int>& preds) {
    ShiftFit out;
    const bool any0 = std::any_of(preds.begin(), preds.end(), [](int v) { return v == 0; });
    const bool any1 = std::any_of(preds.begin(), preds.end(), [](int v) { return v == 1; });
    if (!any0 || !any1) {
        out.degenerate = true;
        out.weight = 0.0;
        out.intercept = any1 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
        out.converged = true;
        return out;
    }

    Eigen::MatrixXd x(g.size(), 1);
    x.col(0) = g;
    const LogisticFit pinned = logistic_fit(x, preds, &offset);
    out.weight = pinned.weights(0);
    out.intercept = pinned.intercept;
    out.converged = pinned.converged;

    Eigen::MatrixXd x2(g.size(), 2);
    x2.col(0) = offset;
    x2.col(1) = g;
    const LogisticFit free_fit = logistic_fit(x2, preds);
    if (free_fit.weights(0) > 0.0) {
        const double w = free_fit.weights(1) / free_fit.weights(0);
        const double b = free_fit.intercept / free_fit.weights(0);
        const double pinned_agree = pinned.converged
                                        ? fit_split_agreement(g, offset, preds, out.weight, out.intercept)
                                        : -1.0;
        if (fit_split_agreement(g, offset, preds, w, b) > pinned_agree) {
            out.weight = w;
            out.intercept = b;
            out.used_fallback = true;
            out.converged = free_fit.converged;
        }
    }
    return out;
}

double decision_agreement(const Eigen::VectorXd& score, const std::vector<int>& preds) {
    std::size_t same = 0;
    for (Eigen::Index i = 0; i < score.size(); ++i)
        same += (score(i) > 0.0 ? 1 : 0) == preds[static_cast<std::size_t>(i)];
    return static_cast<double>(same) / static_cast<double>(score.size());
}

}  // namespace

ReconstructionResult reconstruct_fair(const Scores& fit_scores,
                                      const std::vector<int>& fair_preds_fit,
                                      const Scores& eval_scores,
                                      const std::vector<int>& fair_preds_eval) {
    if (!fit_scores.has_g() || !eval_scores.has_g())
        throw ArgumentError("reconstruct_fair: two-head scores required");
    if (static_cast<std::size_t>(fit_scores.f_scores.size()) != fair_preds_fit.size() ||
        static_cast<std::size_t>(eval_scores.f_scores.size()) != fair_preds_eval.size())
        throw ArgumentError("reconstruct_fair: length mismatch");

    const ShiftFit fit = fit_decision_shift(fit_scores.g_scores, fit_scores.f_scores, fair_preds_fit);
    ReconstructionResult res;
    res.direction = ReconstructionDirection::FairFromHeads;
    res.c1 = fit.weight;
    res.c2 = fit.intercept;
    res.degenerate = fit.degenerate;
    res.used_fallback = fit.used_fallback;
    res.converged = fit.converged;
    const Eigen::VectorXd combined =
        eval_scores.f_scores + res.c1 * eval_scores.g_scores +
        Eigen::VectorXd::Constant(eval_scores.f_scores.size(), res.c2);
    res.agreement = decision_agreement(combined, fair_preds_eval);
    return res;
}

ReconstructionResult recover_unconstrained(const Eigen::VectorXd& fair_scores_fit,
                                           const Eigen::VectorXd& g_fit,
                                           const std::vector<int>& unc_preds_fit,
                                           const Eigen::VectorXd& fair_scores_eval,
                                           const Eigen::VectorXd& g_eval,
                                           const std::vector<int>& unc_preds_eval) {
    if (static_cast<std::size_t>(fair_scores_fit.size()) != unc_preds_fit.size() ||
        fair_scores_fit.size() != g_fit.size() ||
        static_cast<std::size_t>(fair_scores_eval.size()) != unc_preds_eval.size() ||
        fair_scores_eval.size() != g_eval.size())
        throw ArgumentError("recover_unconstrained: length mismatch");

    // 1(r - b1*g - b2 > 0) with b1 = -w, b2 = -b of the pinned-offset fit.
    const ShiftFit fit = fit_decision_shift(g_fit, fair_scores_fit, unc_preds_fit);
    ReconstructionResult res;
    res.direction = ReconstructionDirection::UnconstrainedFromFair;
    res.c1 = -fit.weight;
    res.c2 = -fit.intercept;
    res.degenerate = fit.degenerate;
    res.used_fallback = fit.used_fallback;
    res.converged = fit.converged;
    const Eigen::VectorXd recovered =
        fair_scores_eval - res.c1 * g_eval -
        Eigen::VectorXd::Constant(fair_scores_eval.size(), res.c2);
    res.agreement = decision_agreement(recovered, unc_preds_eval);
    return res;
}

// ---------------------------------------------------------------------------
// Reseed baseline
// ---------------------------------------------------------------------------

double mean_pairwise_disagreement(const std::vector<std::vector<int>>& predictions) {
    if (predictions.size() < 2)
        throw ArgumentError("mean_pairwise_disagreement: need at least 2 prediction vectors");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        for (std::size_t j = i + 1; j < predictions.size(); ++j) {
            if (predictions[i].size() != predictions[j].size())
                throw ArgumentError("mean_pairwise_disagreement: length mismatch");
            std::size_t diff = 0;
            for (std::size_t k = 0; k < predictions[i].size(); ++k)
                diff += predictions[i][k] != predictions[j][k];
            total += static_cast<double>(diff) / static_cast<double>(predictions[i].size());
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

double reseed_baseline(const Dataset& ds, const TrainConfig& cfg,
                       const std::vector<std::int64_t>& seeds) {
    if (seeds.size() < 2) throw ArgumentError("reseed_baseline: need at least 2 seeds");
    std::vector<std::vector<int>> preds;
    for (std::int64_t seed : seeds) {
        TrainConfig c = cfg;
        c.seed = seed;
        const TwoHeadModel model = train(ds, c);
        preds.push_back(predict_sign(score(model, ds, Split::Test).f_scores));
    }
    return mean_pairwise_disagreement(preds);
}

// ---------------------------------------------------------------------------
// Counterfactual flips
// ---------------------------------------------------------------------------

CounterfactualReport counterfactual_flips(const Eigen::VectorXd& f_scores,
                                          const Eigen::VectorXd& g_scores,
                                          const std::vector<int>& protected_attr,
                                          const CombinedClassifier& clf) {
    const std::size_t n = protected_attr.size();
    if (static_cast<std::size_t>(f_scores.size()) != n ||
        static_cast<std::size_t>(g_scores.size()) != n)
        throw ArgumentError("counterfactual_flips: length mismatch");
    std::vector<double> g_by_group[2];
    for (std::size_t i = 0; i < n; ++i)
        g_by_group[protected_attr[i]].push_back(g_scores(static_cast<Eigen::Index>(i)));
    if (g_by_group[0].empty() || g_by_group[1].empty())
        throw UndefinedMetricError("counterfactual_flips: a protected group is absent");

    CounterfactualReport rep;
    rep.n = n;
    rep.medians = {median(g_by_group[0]), median(g_by_group[1])};
    rep.group_sizes = {g_by_group[0].size(), g_by_group[1].size()};

    for (std::size_t i = 0; i < n; ++i) {
        const int s = protected_attr[i];
        const double f = f_scores(static_cast<Eigen::Index>(i));
        const int base = f + clf.a1 * g_scores(static_cast<Eigen::Index>(i)) + clf.a2 > 0.0;
        const int counter = f + clf.a1 * rep.medians[static_cast<std::size_t>(1 - s)] + clf.a2 > 0.0;
        if (base == 0 && counter == 1) rep.count_0to1[static_cast<std::size_t>(s)] += 1;
        if (base == 1 && counter == 0) rep.count_1to0[static_cast<std::size_t>(s)] += 1;
    }
    std::size_t flips = 0;
    for (int s = 0; s < 2; ++s) {
        const auto si = static_cast<std::size_t>(s);
        flips += rep.count_0to1[si] + rep.count_1to0[si];
        rep.flips_0to1_group[si] =
            static_cast<double>(rep.count_0to1[si]) / static_cast<double>(rep.group_sizes[si]);
        rep.flips_1to0_group[si] =
            static_cast<double>(rep.count_1to0[si]) / static_cast<double>(rep.group_sizes[si]);
    }
    rep.flip_fraction_total = static_cast<double>(flips) / static_cast<double>(n);
    return rep;
}

// ---------------------------------------------------------------------------
// Disadvantaged region
// ---------------------------------------------------------------------------

RegionResult disadvantaged_region(const Eigen::VectorXd& f_scores,
                                  const Eigen::VectorXd& g_scores,
                                  const ReconstructionResult& recovery) {
    if (recovery.direction != ReconstructionDirection::UnconstrainedFromFair)
        throw ArgumentError("disadvantaged_region: recovery must have direction unconstrained_from_fair");
    if (f_scores.size() != g_scores.size())
        throw ArgumentError("disadvantaged_region: length mismatch");

    RegionResult res;
    std::size_t near_binary = 0;
    for (Eigen::Index i = 0; i < g_scores.size(); ++i) {
        const double g = g_scores(i);
        near_binary += std::abs(g) <= 0.1 || std::abs(g - 1.0) <= 0.1;
    }
    res.g_near_binary_fraction =
        g_scores.size() == 0 ? 0.0
                             : static_cast<double>(near_binary) / static_cast<double>(g_scores.size());

    for (Eigen::Index i = 0; i < f_scores.size(); ++i) {
        const int at_g0 = f_scores(i) + recovery.c2 > 0.0;
        const int at_g1 = f_scores(i) + recovery.c1 + recovery.c2 > 0.0;
        if (at_g0 != at_g1) res.indices.push_back(static_cast<std::size_t>(i));
    }
    return res;
}

}  // namespace fairlens
