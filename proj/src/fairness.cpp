#include "fairlens/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fairlens {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

struct GroupCounts {
    std::size_t n0 = 0, n1 = 0;
    std::size_t pos0 = 0, pos1 = 0;
};

GroupCounts count_groups(const std::vector<int>& predictions, const std::vector<int>& s) {
    if (predictions.size() != s.size()) throw ArgumentError("prediction/protected length mismatch");
    GroupCounts c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 1) {
            ++c.n1;
            c.pos1 += predictions[i] == 1;
        } else {
            ++c.n0;
            c.pos0 += predictions[i] == 1;
        }
    }
    return c;
}

}  // namespace

double ddp(const std::vector<int>& predictions, const std::vector<int>& protected_attr) {
    const GroupCounts c = count_groups(predictions, protected_attr);
    if (c.n0 == 0 || c.n1 == 0)
        throw UndefinedMetricError("ddp: a protected group is absent");
    return static_cast<double>(c.pos1) / static_cast<double>(c.n1) -
           static_cast<double>(c.pos0) / static_cast<double>(c.n0);
}

namespace {

// Difference of group mean sigmoid responses, shared by both regularizers.
double sigmoid_gap(const Eigen::VectorXd& logits, const std::vector<int>& s, std::size_t* n0_out,
                   std::size_t* n1_out) {
    if (static_cast<std::size_t>(logits.size()) != s.size())
        throw ArgumentError("logit/protected length mismatch");
    double sum0 = 0.0, sum1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = sigmoid(logits(static_cast<Eigen::Index>(i)));
        if (s[i] == 1) {
            sum1 += v;
            ++n1;
        } else {
            sum0 += v;
            ++n0;
        }
    }
    if (n0 == 0 || n1 == 0)
        throw UndefinedMetricError("relaxed regularizer: a protected group is absent");
    if (n0_out) *n0_out = n0;
    if (n1_out) *n1_out = n1;
    return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

}  // namespace

double reg_squared(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr) {
    const double d = sigmoid_gap(logits, protected_attr, nullptr, nullptr);
    return d * d;
}

double reg_abs(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr) {
    return std::abs(sigmoid_gap(logits, protected_attr, nullptr, nullptr));
}

namespace {

double relaxed_grad(const Eigen::VectorXd& logits, const std::vector<int>& s, bool squared,
                    Eigen::VectorXd& grad) {
    std::size_t n0 = 0, n1 = 0;
    const double d = sigmoid_gap(logits, s, &n0, &n1);
    const double outer = squared ? 2.0 * d : (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    grad.resize(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double sig = sigmoid(logits(i));
        const double dsig = sig * (1.0 - sig);
        const double side = s[static_cast<std::size_t>(i)] == 1
                                ? 1.0 / static_cast<double>(n1)
                                : -1.0 / static_cast<double>(n0);
        grad(i) = outer * side * dsig;
    }
    return squared ? d * d : std::abs(d);
}

}  // namespace

double reg_squared_grad(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr,
                        Eigen::VectorXd& grad) {
    return relaxed_grad(logits, protected_attr, true, grad);
}

double reg_abs_grad(const Eigen::VectorXd& logits, const std::vector<int>& protected_attr,
                    Eigen::VectorXd& grad) {
    return relaxed_grad(logits, protected_attr, false, grad);
}

FairnessReport evaluate(const std::vector<int>& predictions, const std::vector<int>& targets,
                        const std::vector<int>& protected_attr, Split split) {
    if (predictions.empty()) throw ArgumentError("evaluate: empty input");
    if (predictions.size() != targets.size() || predictions.size() != protected_attr.size())
        throw ArgumentError("evaluate: length mismatch");
    const GroupCounts c = count_groups(predictions, protected_attr);
    if (c.n0 == 0 || c.n1 == 0)
        throw UndefinedMetricError("evaluate: a protected group is absent");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == targets[i];
    FairnessReport rep;
    rep.split = split;
    rep.n_group0 = c.n0;
    rep.n_group1 = c.n1;
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    rep.positive_rate_s0 = static_cast<double>(c.pos0) / static_cast<double>(c.n0);
    rep.positive_rate_s1 = static_cast<double>(c.pos1) / static_cast<double>(c.n1);
    rep.ddp = rep.positive_rate_s1 - rep.positive_rate_s0;
    return rep;
}

// ---------------------------------------------------------------------------
// Massaging
// ---------------------------------------------------------------------------

std::pair<Dataset, MassagingPlan> massage(const Dataset& ds, const Scores& train_scores,
                                          double lambda_frac) {
    if (!(lambda_frac >= 0.0 && lambda_frac <= 1.0))
        throw ArgumentError("massage: lambda_frac must lie in [0,1]");
    if (train_scores.split != Split::Train)
        throw ArgumentError("massage: scores must be for the train split");
    const auto train_idx = ds.indices(Split::Train);
    if (static_cast<std::size_t>(train_scores.f_scores.size()) != train_idx.size())
        throw ArgumentError("massage: score length disagrees with train split");

    std::size_t n_g[2] = {0, 0}, pos_g[2] = {0, 0};
    for (std::size_t i : train_idx) {
        const int g = ds.protected_attr()[i];
        ++n_g[g];
        pos_g[g] += ds.targets()[i] == 1;
    }
    if (n_g[0] == 0 || n_g[1] == 0)
        throw UndefinedMetricError("massage: a protected group is absent from the train split");

    const double rate0 = static_cast<double>(pos_g[0]) / static_cast<double>(n_g[0]);
    const double rate1 = static_cast<double>(pos_g[1]) / static_cast<double>(n_g[1]);
    const int adv = rate1 >= rate0 ? 1 : 0;  // ties: group 1 advantaged
    const int dis = 1 - adv;

    const double gap = std::abs(rate1 - rate0);
    const double na = static_cast<double>(n_g[adv]);
    const double nd = static_cast<double>(n_g[dis]);
    // Pair count whose application brings the positive fractions as close as
    // the group sizes allow (within 1/min(n0,n1) at lambda_frac = 1).
    const std::size_t M = static_cast<std::size_t>(std::llround(gap * na * nd / (na + nd)));

    MassagingPlan plan;
    plan.M = M;
    plan.lambda_frac = lambda_frac;
    plan.advantaged_group = adv;
    plan.requested = static_cast<std::size_t>(std::llround(lambda_frac * static_cast<double>(M)));

    // Promotion pool: disadvantaged negatives by descending score.
    // Demotion pool: advantaged positives by ascending score.
    std::vector<std::pair<double, std::size_t>> promote_pool, demote_pool;
    for (std::size_t r = 0; r < train_idx.size(); ++r) {
        const std::size_t i = train_idx[r];
        const double sc = train_scores.f_scores(static_cast<Eigen::Index>(r));
        if (ds.protected_attr()[i] == dis && ds.targets()[i] == 0) promote_pool.emplace_back(sc, i);
        if (ds.protected_attr()[i] == adv && ds.targets()[i] == 1) demote_pool.emplace_back(sc, i);
    }
    std::sort(promote_pool.begin(), promote_pool.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::sort(demote_pool.begin(), demote_pool.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second < b.second;
    });

    plan.applied = std::min({plan.requested, promote_pool.size(), demote_pool.size()});
    plan.reduced = plan.applied < plan.requested;
    for (std::size_t k = 0; k < plan.applied; ++k) {
        plan.promote_idx.push_back(promote_pool[k].second);
        plan.demote_idx.push_back(demote_pool[k].second);
    }

    std::vector<int> new_targets = ds.targets();
    for (std::size_t i : plan.promote_idx) new_targets[i] = 1;
    for (std::size_t i : plan.demote_idx) new_targets[i] = 0;
    return {ds.with_labels(new_targets), std::move(plan)};
}

// ---------------------------------------------------------------------------
// Combined-head grid search
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    bool valid = false;
    std::size_t correct = 0;
    double abs_ddp = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

bool better(const Candidate& lhs, const Candidate& rhs) {
    if (!rhs.valid) return lhs.valid;
    if (!lhs.valid) return false;
    if (lhs.correct != rhs.correct) return lhs.correct > rhs.correct;
    if (lhs.abs_ddp != rhs.abs_ddp) return lhs.abs_ddp < rhs.abs_ddp;
    if (std::abs(lhs.a1) != std::abs(rhs.a1)) return std::abs(lhs.a1) < std::abs(rhs.a1);
    if (std::abs(lhs.a2) != std::abs(rhs.a2)) return std::abs(lhs.a2) < std::abs(rhs.a2);
    if (lhs.a1 != rhs.a1) return lhs.a1 < rhs.a1;
    return lhs.a2 < rhs.a2;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) out[k] = lo + step * static_cast<double>(k);
    return out;
}

class CombinedSearchData {
public:
    CombinedSearchData(const Scores& scores, const std::vector<int>& s, const std::vector<int>& y)
        : f_(scores.f_scores), g_(scores.g_scores), s_(s), y_(y) {
        n_ = static_cast<std::size_t>(f_.size());
        for (std::size_t i = 0; i < n_; ++i) {
            n1_ += s_[i] == 1;
            y1_ += y_[i] == 1;
        }
        n0_ = n_ - n1_;
    }

    std::size_t n() const { return n_; }
    std::size_t n0() const { return n0_; }
    std::size_t n1() const { return n1_; }

    /// Evaluates one (a1, a2) pair directly.
    Candidate evaluate_pair(double a1, double a2, double bound) const {
        std::size_t correct = 0, pos0 = 0, pos1 = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const int pred =
                f_(static_cast<Eigen::Index>(i)) + a1 * g_(static_cast<Eigen::Index>(i)) + a2 > 0.0;
            correct += pred == y_[i];
            if (pred) (s_[i] == 1 ? pos1 : pos0) += 1;
        }
        return make_candidate(a1, a2, correct, pos0, pos1, bound);
    }

    /// Evaluates a full (a1-axis x a2-axis) grid, streaming a2 over a sorted
    /// threshold representation so each a1 column costs O(n log n). When
    /// keep_top is given, the best distinct candidates are collected into it
    /// (ordered best-first).
    Candidate evaluate_grid(const std::vector<double>& a1_axis, const std::vector<double>& a2_axis,
                            double bound, std::vector<Candidate>* keep_top = nullptr,
                            std::size_t top_k = 0, double dedup_radius = 0.0) const {
        Candidate best;
        std::vector<double> t(n_);
        std::vector<std::size_t> order(n_);
        std::vector<std::size_t> cum_y1(n_ + 1), cum_s1(n_ + 1);
        for (double a1 : a1_axis) {
            for (std::size_t i = 0; i < n_; ++i) {
                t[i] = -(f_(static_cast<Eigen::Index>(i)) + a1 * g_(static_cast<Eigen::Index>(i)));
                order[i] = i;
            }
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
            for (std::size_t k = 0; k < n_; ++k) {
                cum_y1[k + 1] = cum_y1[k] + (y_[order[k]] == 1);
                cum_s1[k + 1] = cum_s1[k] + (s_[order[k]] == 1);
            }
            for (double a2 : a2_axis) {
                // predicted positive iff t_i < a2
                std::size_t lo = 0, hi = n_;
                while (lo < hi) {
                    const std::size_t mid = (lo + hi) / 2;
                    if (t[order[mid]] < a2)
                        lo = mid + 1;
                    else
                        hi = mid;
                }
                const std::size_t idx = lo;
                const std::size_t correct = cum_y1[idx] + (n_ - y1_) - (idx - cum_y1[idx]);
                const std::size_t pos1 = cum_s1[idx];
                const std::size_t pos0 = idx - cum_s1[idx];
                Candidate cand = make_candidate(a1, a2, correct, pos0, pos1, bound);
                if (better(cand, best)) best = cand;
                if (keep_top && cand.valid) insert_top(*keep_top, cand, top_k, dedup_radius);
            }
        }
        return best;
    }

private:
    // Keeps the best top_k candidates, treating entries within dedup_radius
    // on both axes as the same region (retaining the better one).
    static void insert_top(std::vector<Candidate>& top, const Candidate& cand, std::size_t top_k,
                           double dedup_radius) {
        for (std::size_t k = 0; k < top.size(); ++k) {
            if (std::abs(top[k].a1 - cand.a1) <= dedup_radius &&
                std::abs(top[k].a2 - cand.a2) <= dedup_radius) {
                if (better(cand, top[k])) {
                    top.erase(top.begin() + static_cast<std::ptrdiff_t>(k));
                    break;  // reinsert at the right rank below
                }
                return;
            }
        }
        auto pos = std::find_if(top.begin(), top.end(),
                                [&](const Candidate& c) { return better(cand, c); });
        if (pos == top.end() && top.size() >= top_k) return;
        top.insert(pos, cand);
        if (top.size() > top_k) top.resize(top_k);
    }

public:

private:
    Candidate make_candidate(double a1, double a2, std::size_t correct, std::size_t pos0,
                             std::size_t pos1, double bound) const {
        const double d = static_cast<double>(pos1) / static_cast<double>(n1_) -
                         static_cast<double>(pos0) / static_cast<double>(n0_);
        Candidate c;
        c.abs_ddp = std::abs(d);
        if (c.abs_ddp > bound) return c;  // infeasible, valid stays false
        c.valid = true;
        c.correct = correct;
        c.a1 = a1;
        c.a2 = a2;
        return c;
    }

    const Eigen::VectorXd& f_;
    const Eigen::VectorXd& g_;
    const std::vector<int>& s_;
    const std::vector<int>& y_;
    std::size_t n_ = 0, n0_ = 0, n1_ = 0, y1_ = 0;
};

}  // namespace

CombinedClassifier combine_grid_search(const Scores& scores_val,
                                       const std::vector<int>& protected_val,
                                       const std::vector<int>& targets_val, double ddp_bound) {
    if (!scores_val.has_g())
        throw ArgumentError("combine_grid_search: scores must carry both heads");
    if (static_cast<std::size_t>(scores_val.f_scores.size()) != protected_val.size() ||
        protected_val.size() != targets_val.size())
        throw ArgumentError("combine_grid_search: length mismatch");
    if (ddp_bound < 0.0) throw ArgumentError("combine_grid_search: ddp_bound must be nonnegative");
    CombinedSearchData data(scores_val, protected_val, targets_val);
    if (data.n0() == 0 || data.n1() == 0)
        throw UndefinedMetricError("combine_grid_search: a protected group is absent");

    constexpr double kLo = -15.0, kHi = 15.0;
    constexpr std::size_t kPoints = 200;
    constexpr int kRefinements = 4;
    constexpr std::size_t kStarts = 6;

    const double coarse_spacing = (kHi - kLo) / static_cast<double>(kPoints - 1);
    Candidate best = data.evaluate_pair(0.0, 0.0, ddp_bound);
    std::vector<Candidate> starts;
    {
        const std::vector<double> axis = linspace(kLo, kHi, kPoints);
        Candidate grid_best =
            data.evaluate_grid(axis, axis, ddp_bound, &starts, kStarts, 1.5 * coarse_spacing);
        if (better(grid_best, best)) best = grid_best;
    }
    if (!best.valid)
        throw InfeasibleConstraintError("combine_grid_search: no candidate satisfies |DDP| <= " +
                                        format_double(ddp_bound));

    // Recursive refinement around each of the leading coarse cells; a single
    // greedy path can strand the search one cell away from an optimum whose
    // feasible region is narrower than the coarse spacing.
    if (starts.empty()) starts.push_back(best);
    for (const Candidate& start : starts) {
        Candidate incumbent = start;
        double spacing = coarse_spacing;
        for (int level = 0; level < kRefinements; ++level) {
            const double lo1 = std::max(kLo, incumbent.a1 - spacing);
            const double hi1 = std::min(kHi, incumbent.a1 + spacing);
            const double lo2 = std::max(kLo, incumbent.a2 - spacing);
            const double hi2 = std::min(kHi, incumbent.a2 + spacing);
            Candidate refined = data.evaluate_grid(linspace(lo1, hi1, kPoints),
                                                   linspace(lo2, hi2, kPoints), ddp_bound);
            if (better(refined, incumbent)) incumbent = refined;
            spacing = std::max(hi1 - lo1, hi2 - lo2) / static_cast<double>(kPoints - 1);
        }
        if (better(incumbent, best)) best = incumbent;
    }

    CombinedClassifier clf;
    clf.a1 = best.a1;
    clf.a2 = best.a2;
    clf.constraint = ddp_bound;
    return clf;
}

// ---------------------------------------------------------------------------
// Per-group thresholds
// ---------------------------------------------------------------------------

namespace {

struct ThresholdTable {
    std::vector<double> thresholds;   // candidate threshold values
    std::vector<std::size_t> pred1;   // positives predicted at each candidate
    std::vector<std::size_t> correct; // correct decisions at each candidate
    std::size_t n = 0;
};

ThresholdTable build_threshold_table(std::vector<std::pair<double, int>> scored) {
    std::sort(scored.begin(), scored.end());
    const std::size_t n = scored.size();
    std::vector<std::size_t> cum_y1(n + 1);
    for (std::size_t k = 0; k < n; ++k) cum_y1[k + 1] = cum_y1[k] + (scored[k].second == 1);
    const std::size_t total_y1 = cum_y1[n];

    ThresholdTable table;
    table.n = n;
    auto add_cut = [&](double t, std::size_t c) {
        // predict 1 iff score > t; c = count of scores <= t
        table.thresholds.push_back(t);
        table.pred1.push_back(n - c);
        table.correct.push_back((total_y1 - cum_y1[c]) + (c - cum_y1[c]));
    };
    add_cut(scored.front().first - 1.0, 0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (scored[k].first == scored[k + 1].first) continue;
        add_cut(0.5 * (scored[k].first + scored[k + 1].first), k + 1);
    }
    add_cut(scored.back().first, n);
    return table;
}

}  // namespace

GroupThresholds lipton_thresholds(const std::vector<double>& f_scores,
                                  const std::vector<int>& protected_attr,
                                  const std::vector<int>& targets, double ddp_bound) {
    if (f_scores.size() != protected_attr.size() || f_scores.size() != targets.size())
        throw ArgumentError("lipton_thresholds: length mismatch");
    if (f_scores.empty()) throw ArgumentError("lipton_thresholds: empty input");
    if (ddp_bound < 0.0) throw ArgumentError("lipton_thresholds: ddp_bound must be nonnegative");

    std::vector<std::pair<double, int>> g0, g1;
    for (std::size_t i = 0; i < f_scores.size(); ++i)
        (protected_attr[i] == 1 ? g1 : g0).emplace_back(f_scores[i], targets[i]);
    if (g0.empty() || g1.empty())
        throw UndefinedMetricError("lipton_thresholds: a protected group is absent");

    const ThresholdTable t0 = build_threshold_table(std::move(g0));
    const ThresholdTable t1 = build_threshold_table(std::move(g1));

    const double n0 = static_cast<double>(t0.n);
    const double n1 = static_cast<double>(t1.n);
    bool have = false;
    std::size_t best_correct = 0;
    double best_abs_ddp = 0.0;
    GroupThresholds best;
    for (std::size_t k0 = 0; k0 < t0.thresholds.size(); ++k0) {
        for (std::size_t k1 = 0; k1 < t1.thresholds.size(); ++k1) {
            const double d = static_cast<double>(t1.pred1[k1]) / n1 -
                             static_cast<double>(t0.pred1[k0]) / n0;
            if (std::abs(d) > ddp_bound) continue;
            const std::size_t correct = t0.correct[k0] + t1.correct[k1];
            const bool wins = !have || correct > best_correct ||
                              (correct == best_correct && std::abs(d) < best_abs_ddp);
            if (wins) {
                have = true;
                best_correct = correct;
                best_abs_ddp = std::abs(d);
                best.t0 = t0.thresholds[k0];
                best.t1 = t1.thresholds[k1];
            }
        }
    }
    // Constant classifiers (both all-positive or both all-negative) have
    // DDP exactly zero, so the constraint is always satisfiable.
    if (!have)
        throw InfeasibleConstraintError("lipton_thresholds: internal feasibility violation");
    return best;
}

// ---------------------------------------------------------------------------
// Decision helpers
// ---------------------------------------------------------------------------

std::vector<int> predict_combined(const Scores& scores, const CombinedClassifier& clf) {
    if (!scores.has_g()) throw ArgumentError("predict_combined: scores must carry both heads");
    std::vector<int> preds(static_cast<std::size_t>(scores.f_scores.size()));
    for (Eigen::Index i = 0; i < scores.f_scores.size(); ++i)
        preds[static_cast<std::size_t>(i)] =
            scores.f_scores(i) + clf.a1 * scores.g_scores(i) + clf.a2 > 0.0;
    return preds;
}

std::vector<int> predict_thresholds(const std::vector<double>& f_scores,
                                    const std::vector<int>& protected_attr,
                                    const GroupThresholds& thresholds) {
    if (f_scores.size() != protected_attr.size())
        throw ArgumentError("predict_thresholds: length mismatch");
    std::vector<int> preds(f_scores.size());
    for (std::size_t i = 0; i < f_scores.size(); ++i)
        preds[i] = f_scores[i] > (protected_attr[i] == 1 ? thresholds.t1 : thresholds.t0);
    return preds;
}

std::vector<int> predict_sign(const Eigen::VectorXd& f_scores) {
    std::vector<int> preds(static_cast<std::size_t>(f_scores.size()));
    for (Eigen::Index i = 0; i < f_scores.size(); ++i)
        preds[static_cast<std::size_t>(i)] = f_scores(i) > 0.0;
    return preds;
}

}  // namespace fairlens
