#include <doctest.h>

#include <cmath>

#include "fairlens/dataset.hpp"
#include "fairlens/fairness.hpp"
#include "oracles.hpp"

using namespace fairlens;

namespace {

Scores make_scores(const std::vector<double>& f, const std::vector<double>& g, Split split) {
    Scores s;
    s.split = split;
    s.f_scores = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    if (!g.empty())
        s.g_scores = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    return s;
}

double accuracy_of(const std::vector<int>& preds, const std::vector<int>& y) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) c += preds[i] == y[i];
    return static_cast<double>(c) / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("ddp on hand cases") {
    CHECK(ddp({1, 1, 1, 1}, {0, 0, 1, 1}) == 0.0);
    CHECK(ddp({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    CHECK(ddp({1, 0, 1, 1}, {0, 0, 1, 1}) == 0.5);
    CHECK_THROWS_AS(ddp({1, 0}, {1, 1}), UndefinedMetricError);
}

TEST_CASE("relaxed regularizers on hand cases") {
    Eigen::VectorXd constant(3);
    constant << 0.7, 0.7, 0.7;
    CHECK(reg_squared(constant, {0, 1, 1}) == 0.0);
    CHECK(reg_abs(constant, {0, 1, 0}) == 0.0);

    Eigen::VectorXd two(2);
    two << 0.0, std::log(3.0);  // sigmoid gives 0.5 and exactly 3/4
    CHECK(reg_squared(two, {0, 1}) == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(reg_abs(two, {0, 1}) == doctest::Approx(0.25).epsilon(1e-15));

    CHECK_THROWS_AS(reg_squared(two, {1, 1}), UndefinedMetricError);
}

TEST_CASE("reg_squared equals reg_abs squared") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(20));
        Eigen::VectorXd logits(n);
        std::vector<int> s(static_cast<std::size_t>(n));
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            logits(i) = rng.normal() * 3;
            s[static_cast<std::size_t>(i)] = rng.uniform() < 0.5;
            (s[static_cast<std::size_t>(i)] ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        const double abs_v = reg_abs(logits, s);
        CHECK(reg_squared(logits, s) == doctest::Approx(abs_v * abs_v).epsilon(1e-12));
    }
}

TEST_CASE("reg_abs approaches the hard DDP as logits saturate") {
    Rng rng(4);
    const int n = 50;
    Eigen::VectorXd logits(n);
    std::vector<int> s(n), preds(n);
    for (int i = 0; i < n; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        logits(i) = sign * (30.0 + rng.uniform() * 10.0);
        preds[static_cast<std::size_t>(i)] = sign > 0;
        s[static_cast<std::size_t>(i)] = rng.uniform() < 0.5;
    }
    CHECK(reg_abs(logits, s) == doctest::Approx(std::abs(ddp(preds, s))).epsilon(1e-9));
}

TEST_CASE("reg_abs subgradient at zero gap is zero") {
    Eigen::VectorXd logits(2);
    logits << 0.4, 0.4;
    Eigen::VectorXd grad;
    const double value = reg_abs_grad(logits, {0, 1}, grad);
    CHECK(value == 0.0);
    CHECK(grad.norm() == 0.0);
}

TEST_CASE("massaging hand instance") {
    // group0 (advantaged): y = 1,1,0,0 scores .9,.8,.4,.3
    // group1 (disadvantaged): y = 1,0,0,0 scores .7,.6,.2,.1
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 1);
    for (int i = 0; i < 8; ++i) x(i, 0) = i;
    const std::vector<int> y = {1, 1, 0, 0, 1, 0, 0, 0};
    const std::vector<int> s = {0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<Split> splits(8, Split::Train);
    const Dataset ds(x, y, s, splits, {"x0"});
    const std::vector<double> f = {0.9, 0.8, 0.4, 0.3, 0.7, 0.6, 0.2, 0.1};
    const Scores scores = make_scores(f, {}, Split::Train);

    auto [massaged, plan] = massage(ds, scores, 1.0);
    CHECK(plan.M == 1);
    CHECK(plan.applied == 1);
    CHECK(plan.advantaged_group == 0);
    REQUIRE(plan.promote_idx.size() == 1);
    REQUIRE(plan.demote_idx.size() == 1);
    CHECK(plan.promote_idx[0] == 5);  // score .6, highest-scoring negative of group 1
    CHECK(plan.demote_idx[0] == 1);   // score .8, lowest-scoring positive of group 0
    CHECK(massaged.targets() == std::vector<int>{1, 0, 0, 0, 1, 1, 0, 0});
    // post-massage positive rates: group0 1/4, group1 2/4 (gap magnitude unchanged
    // at the rounding limit 1/min(n0,n1))
    std::size_t p0 = 0, p1 = 0;
    for (int i = 0; i < 8; ++i) (s[static_cast<std::size_t>(i)] ? p1 : p0) +=
        massaged.targets()[static_cast<std::size_t>(i)];
    CHECK(p0 == 1);
    CHECK(p1 == 2);
}

TEST_CASE("massaging with lambda zero changes nothing") {
    SyntheticSpec spec;
    spec.n_samples = 300;
    spec.n_features = 3;
    spec.seed = 5;
    const Dataset ds = generate(spec);
    Scores scores;
    scores.split = Split::Train;
    scores.f_scores = Eigen::VectorXd::Random(static_cast<Eigen::Index>(ds.split_size(Split::Train)));
    auto [massaged, plan] = massage(ds, scores, 0.0);
    CHECK(plan.applied == 0);
    CHECK(plan.M >= 1);
    CHECK(massaged.targets() == ds.targets());
}

TEST_CASE("massaging rounding contract at lambda one half") {
    // 16 per group; rates 0.75 vs 0.25 give M = 4
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(32, 1);
    std::vector<int> y(32), s(32);
    std::vector<double> f(32);
    for (int i = 0; i < 32; ++i) {
        x(i, 0) = i;
        s[static_cast<std::size_t>(i)] = i >= 16;
        const int r = i % 16;
        y[static_cast<std::size_t>(i)] = i < 16 ? (r < 12) : (r < 4);
        f[static_cast<std::size_t>(i)] = 0.01 * i;
    }
    const Dataset ds(x, y, s, std::vector<Split>(32, Split::Train), {"x0"});
    auto [massaged, plan] = massage(ds, make_scores(f, {}, Split::Train), 0.5);
    CHECK(plan.M == 4);
    CHECK(plan.requested == 2);
    CHECK(plan.applied == 2);
    CHECK(plan.promote_idx.size() == 2);
    CHECK(plan.demote_idx.size() == 2);
    (void)massaged;
}

TEST_CASE("massaging reduces to the feasible maximum and flags it") {
    // disadvantaged group has a single negative to promote
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(12, 1);
    std::vector<int> y = {1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0};
    std::vector<int> s = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<double> f(12, 0.5);
    const Dataset ds(x, y, s, std::vector<Split>(12, Split::Train), {"x0"});
    auto [massaged, plan] = massage(ds, make_scores(f, {}, Split::Train), 1.0);
    CHECK(plan.applied <= 1);
    if (plan.requested > plan.applied) CHECK(plan.reduced);
    (void)massaged;
}

TEST_CASE("massaging monotonicity of the post-massage gap") {
    SyntheticSpec spec;
    spec.n_samples = 600;
    spec.n_features = 3;
    spec.base_rate_gap = 0.4;
    spec.seed = 9;
    const Dataset ds = generate(spec);
    Rng rng(2);
    Eigen::VectorXd f(static_cast<Eigen::Index>(ds.split_size(Split::Train)));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
    Scores scores;
    scores.split = Split::Train;
    scores.f_scores = f;

    double prev_gap = std::numeric_limits<double>::infinity();
    for (double frac : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        auto [massaged, plan] = massage(ds, scores, frac);
        std::size_t n0 = 0, n1 = 0, p0 = 0, p1 = 0;
        const auto idx = massaged.indices(Split::Train);
        for (std::size_t i : idx) {
            if (massaged.protected_attr()[i] == 1) {
                ++n1;
                p1 += massaged.targets()[i];
            } else {
                ++n0;
                p0 += massaged.targets()[i];
            }
        }
        const double gap = std::abs(static_cast<double>(p1) / static_cast<double>(n1) -
                                    static_cast<double>(p0) / static_cast<double>(n0));
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
        (void)plan;
    }
    CHECK_THROWS_AS(massage(ds, scores, 1.5), ArgumentError);
}

TEST_CASE("grid search with a vacuous bound beats the unmodified rule") {
    Rng rng(13);
    const int n = 60;
    std::vector<double> f(n), g(n);
    std::vector<int> s(n), y(n);
    for (int i = 0; i < n; ++i) {
        s[static_cast<std::size_t>(i)] = rng.uniform() < 0.5;
        g[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)];
        f[static_cast<std::size_t>(i)] = rng.normal() * 2;
        y[static_cast<std::size_t>(i)] = rng.uniform() < sigmoid(f[static_cast<std::size_t>(i)]);
    }
    const Scores scores = make_scores(f, g, Split::Val);
    const CombinedClassifier clf = combine_grid_search(scores, s, y, 1.0);
    const double base = accuracy_of(predict_sign(scores.f_scores), y);
    CHECK(accuracy_of(predict_combined(scores, clf), y) >= base);
}

TEST_CASE("grid search matches the threshold oracle on a 12-point instance") {
    const std::vector<double> f = {2.1, 1.3, 0.4, -0.2, -1.1, -2.4, 1.8, 0.9, 0.3, -0.6, -1.4, -2.0};
    const std::vector<int> s = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    const std::vector<double> g = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    const std::vector<int> y = {1, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 0};
    const double bound = 2.0 / 6.0;
    const Scores scores = make_scores(f, g, Split::Val);
    const CombinedClassifier clf = combine_grid_search(scores, s, y, bound);
    const auto oracle = oracles::best_threshold_pair(f, s, y, bound);
    CHECK(accuracy_of(predict_combined(scores, clf), y) ==
          doctest::Approx(oracle.accuracy).epsilon(1e-15));
}

TEST_CASE("grid search saturates cleanly when scores dwarf the grid") {
    std::vector<double> f(10), g(10);
    std::vector<int> s(10), y(10);
    for (int i = 0; i < 10; ++i) {
        f[static_cast<std::size_t>(i)] = 40.0 + i;
        g[static_cast<std::size_t>(i)] = i % 2;
        s[static_cast<std::size_t>(i)] = i % 2;
        y[static_cast<std::size_t>(i)] = 1;
    }
    const Scores scores = make_scores(f, g, Split::Val);
    const CombinedClassifier clf = combine_grid_search(scores, s, y, 0.0);
    const std::vector<int> preds = predict_combined(scores, clf);
    for (int p : preds) CHECK(p == 1);
    CHECK(ddp(preds, s) == 0.0);
}

TEST_CASE("grid search never violates its bound and tracks the oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 10 + rng.below(30);
        std::vector<double> f(n), g(n);
        std::vector<int> s(n), y(n);
        std::size_t c0 = 0, c1 = 0;
        do {
            c0 = c1 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = rng.uniform() < 0.5;
                g[i] = s[i];
                f[i] = (rng.uniform() * 2 - 1) * 5;
                y[i] = rng.uniform() < 0.5;
                (s[i] ? c1 : c0) += 1;
            }
        } while (c0 < 2 || c1 < 2);
        const double floor = 2.0 / static_cast<double>(std::min(c0, c1));
        const double bound = floor + rng.uniform() * (0.5 - floor);
        const Scores scores = make_scores(f, g, Split::Val);
        const CombinedClassifier clf = combine_grid_search(scores, s, y, bound);
        const std::vector<int> preds = predict_combined(scores, clf);
        CHECK(std::abs(ddp(preds, s)) <= bound);
        const auto oracle = oracles::best_threshold_pair(f, s, y, bound);
        CHECK(accuracy_of(preds, y) >=
              oracle.accuracy - 1.0 / static_cast<double>(n) - 1e-12);
    }
}

TEST_CASE("grid search requires two-head scores") {
    const Scores single = make_scores({1.0, -1.0}, {}, Split::Val);
    CHECK_THROWS_AS(combine_grid_search(single, {0, 1}, {0, 1}, 0.5), ArgumentError);
}

TEST_CASE("lipton thresholds coincide under a vacuous bound") {
    // identical group distributions: the unconstrained optimum is shared
    const std::vector<double> f = {0.1, 0.4, 0.6, 0.9, 0.1, 0.4, 0.6, 0.9};
    const std::vector<int> s = {0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<int> y = {0, 0, 1, 1, 0, 0, 1, 1};
    const GroupThresholds t = lipton_thresholds(f, s, y, 1.0);
    CHECK(t.t0 == t.t1);
    const std::vector<int> preds = predict_thresholds(f, s, t);
    CHECK(accuracy_of(preds, y) == 1.0);
}

TEST_CASE("lipton thresholds match the exhaustive oracle at bound zero") {
    const std::vector<double> f = {0.9, 0.6, 0.4, 0.8, 0.5, 0.2};
    const std::vector<int> s = {0, 0, 0, 1, 1, 1};
    const std::vector<int> y = {1, 1, 0, 0, 1, 0};
    const GroupThresholds t = lipton_thresholds(f, s, y, 0.0);
    const std::vector<int> preds = predict_thresholds(f, s, t);
    CHECK(std::abs(ddp(preds, s)) == 0.0);
    const auto oracle = oracles::best_threshold_pair(f, s, y, 0.0);
    CHECK(accuracy_of(preds, y) == doctest::Approx(oracle.accuracy).epsilon(1e-15));
}

TEST_CASE("lipton equals the oracle on random instances") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 8 + rng.below(33);
        std::vector<double> f(n);
        std::vector<int> s(n), y(n);
        std::size_t c0 = 0, c1 = 0;
        do {
            c0 = c1 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                f[i] = rng.normal();
                s[i] = rng.uniform() < 0.5;
                y[i] = rng.uniform() < 0.5;
                (s[i] ? c1 : c0) += 1;
            }
        } while (c0 < 1 || c1 < 1);
        const double bound = rng.uniform() * 0.6;
        const GroupThresholds t = lipton_thresholds(f, s, y, bound);
        const std::vector<int> preds = predict_thresholds(f, s, t);
        CHECK(std::abs(ddp(preds, s)) <= bound + 1e-15);
        const auto oracle = oracles::best_threshold_pair(f, s, y, bound);
        CHECK(accuracy_of(preds, y) == doctest::Approx(oracle.accuracy).epsilon(1e-15));
    }
}

TEST_CASE("evaluate on hand cases") {
    // perfect predictions: accuracy one, ddp equals the label gap
    const std::vector<int> y = {1, 1, 0, 0, 1, 0};
    const std::vector<int> s = {1, 1, 1, 0, 0, 0};
    const FairnessReport perfect = evaluate(y, y, s, Split::Test);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.ddp == doctest::Approx(2.0 / 3.0 - 1.0 / 3.0).epsilon(1e-15));
    CHECK(perfect.ddp == perfect.positive_rate_s1 - perfect.positive_rate_s0);

    const std::vector<int> zeros(6, 0);
    const FairnessReport constant = evaluate(zeros, y, s, Split::Test);
    CHECK(constant.accuracy == doctest::Approx(0.5));
    CHECK(constant.ddp == 0.0);

    // six-point hand case: preds vs labels counted directly (matches at 0,2,4,5)
    const std::vector<int> preds = {1, 0, 0, 1, 1, 0};
    const FairnessReport rep = evaluate(preds, y, s, Split::Val);
    CHECK(rep.accuracy == doctest::Approx(4.0 / 6.0));
    CHECK(rep.positive_rate_s1 == doctest::Approx(1.0 / 3.0));
    CHECK(rep.positive_rate_s0 == doctest::Approx(2.0 / 3.0));
    CHECK(rep.ddp == doctest::Approx(-1.0 / 3.0));
    CHECK(rep.n_group0 == 3);
    CHECK(rep.n_group1 == 3);
    CHECK(rep.split == Split::Val);

    CHECK_THROWS_AS(evaluate({}, {}, {}, Split::Test), ArgumentError);
}

TEST_CASE("decision rules use strict inequality") {
    const std::vector<double> f = {0.0, 0.5};
    const std::vector<int> s = {0, 1};
    GroupThresholds t;
    t.t0 = 0.0;
    t.t1 = 0.5;
    const std::vector<int> preds = predict_thresholds(f, s, t);
    CHECK(preds == std::vector<int>{0, 0});
    Eigen::VectorXd v(2);
    v << 0.0, 0.1;
    CHECK(predict_sign(v) == std::vector<int>{0, 1});
}
