#include "fairlens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fairlens {

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

namespace {

double logistic_nll(const Eigen::VectorXd& eta, const std::vector<int>& y,
                    const Eigen::VectorXd& w, double ridge) {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        // -log sigma(e) if y=1, -log(1-sigma(e)) if y=0, in stable form
        nll += std::max(e, 0.0) - e * static_cast<double>(y[static_cast<std::size_t>(i)]) +
               std::log1p(std::exp(-std::abs(e)));
    }
    return nll + 0.5 * ridge * w.squaredNorm();
}

}  // namespace

LogisticFit logistic_fit(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         const Eigen::VectorXd* offset, double ridge) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (static_cast<std::size_t>(n) != y.size())
        throw ArgumentError("logistic_fit: label length mismatch");
    if (n < k + 1)
        throw ArgumentError("logistic_fit: need at least k+1 samples");
    if (offset && offset->size() != n)
        throw ArgumentError("logistic_fit: offset length mismatch");
    if (ridge < 0.0) throw ArgumentError("logistic_fit: ridge must be nonnegative");
    for (int v : y)
        if (v != 0 && v != 1) throw ArgumentError("logistic_fit: labels must be binary");

    Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
    double b = 0.0;

    const int max_iter = 200;
    const double tol = 1e-8 * static_cast<double>(n);

    auto predictor = [&](const Eigen::VectorXd& wv, double bv) {
        Eigen::VectorXd eta = X * wv;
        eta.array() += bv;
        if (offset) eta += *offset;
        return eta;
    };

    LogisticFit fit;
    fit.offset_used = offset != nullptr;

    Eigen::VectorXd eta = predictor(w, b);
    double nll = logistic_nll(eta, y, w, ridge);
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        Eigen::VectorXd p(n), wdiag(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(eta(i));
            wdiag(i) = p(i) * (1.0 - p(i));
        }
        Eigen::VectorXd resid = p;
        for (Eigen::Index i = 0; i < n; ++i) resid(i) -= static_cast<double>(y[static_cast<std::size_t>(i)]);

        Eigen::VectorXd grad(k + 1);
        grad.head(k) = X.transpose() * resid + ridge * w;
        grad(k) = resid.sum();
        if (grad.norm() <= tol) {
            fit.converged = true;
            break;
        }

        Eigen::MatrixXd H(k + 1, k + 1);
        Eigen::MatrixXd Xw = X.array().colwise() * wdiag.array();
        H.topLeftCorner(k, k) = X.transpose() * Xw;
        H.topLeftCorner(k, k).diagonal().array() += ridge;
        Eigen::VectorXd xw_sum = Xw.colwise().sum();
        H.block(0, k, k, 1) = xw_sum;
        H.block(k, 0, 1, k) = xw_sum.transpose();
        H(k, k) = wdiag.sum() + 1e-12;

        Eigen::VectorXd step = H.ldlt().solve(grad);
        if (!step.allFinite()) break;

        double scale = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            Eigen::VectorXd w_new = w - scale * step.head(k);
            double b_new = b - scale * step(k);
            Eigen::VectorXd eta_new = predictor(w_new, b_new);
            double nll_new = logistic_nll(eta_new, y, w_new, ridge);
            if (nll_new <= nll) {
                w = std::move(w_new);
                b = b_new;
                eta = std::move(eta_new);
                nll = nll_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;  // no descent step found; gradient check above decides
    }

    fit.weights = w;
    fit.intercept = b;
    fit.iterations = iter;
    if (!fit.converged) {
        // final gradient check in case the loop exited by iteration budget
        Eigen::VectorXd p(n);
        for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(eta(i)) - static_cast<double>(y[static_cast<std::size_t>(i)]);
        Eigen::VectorXd grad(k + 1);
        grad.head(k) = X.transpose() * p + ridge * w;
        grad(k) = p.sum();
        fit.converged = grad.norm() <= tol;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Kendall tau
// ---------------------------------------------------------------------------

namespace {

// concordant-minus-discordant pair count
long long kendall_s(const std::vector<double>& xs, const std::vector<double>& ys) {
    long long s = 0;
    const std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = xs[j] - xs[i];
            const double dy = ys[j] - ys[i];
            if (dx == 0.0 || dy == 0.0) continue;
            s += (dx > 0.0) == (dy > 0.0) ? 1 : -1;
        }
    }
    return s;
}

struct TieStats {
    long long pairs = 0;       // sum t(t-1)/2
    double term_v1 = 0.0;      // sum t(t-1)(2t+5)
    double term_v2 = 0.0;      // sum t(t-1)(t-2)
    double term_v3 = 0.0;      // sum t(t-1)
};

TieStats tie_stats(const std::vector<double>& v) {
    std::map<double, long long> counts;
    for (double x : v) counts[x] += 1;
    TieStats ts;
    for (const auto& [_, t] : counts) {
        const double td = static_cast<double>(t);
        ts.pairs += t * (t - 1) / 2;
        ts.term_v1 += td * (td - 1.0) * (2.0 * td + 5.0);
        ts.term_v2 += td * (td - 1.0) * (td - 2.0);
        ts.term_v3 += td * (td - 1.0);
    }
    return ts;
}

}  // namespace

KendallResult kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgumentError("kendall_tau: length mismatch");
    const std::size_t n = xs.size();
    if (n < 3) throw ArgumentError("kendall_tau: need at least 3 observations");

    const TieStats tx = tie_stats(xs);
    const TieStats ty = tie_stats(ys);
    const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    if (tx.pairs == n0 || ty.pairs == n0)
        throw UndefinedCorrelationError("kendall_tau: constant input");

    const long long s_obs = kendall_s(xs, ys);
    const double denom = std::sqrt(static_cast<double>(n0 - tx.pairs)) *
                         std::sqrt(static_cast<double>(n0 - ty.pairs));

    KendallResult res;
    res.tau = static_cast<double>(s_obs) / denom;
    res.n_pairs = static_cast<std::size_t>(n0);

    if (n <= 10) {
        // Exact permutation null: every distinct rearrangement of ys is equally
        // likely, so enumerating distinct permutations with equal weight is the
        // uniform distribution over all n! assignments.
        res.method = PValueMethod::Exact;
        std::vector<double> perm = ys;
        std::sort(perm.begin(), perm.end());
        long long total = 0, as_extreme = 0;
        const long long abs_obs = std::llabs(s_obs);
        do {
            ++total;
            if (std::llabs(kendall_s(xs, perm)) >= abs_obs) ++as_extreme;
        } while (std::next_permutation(perm.begin(), perm.end()));
        res.p_value = static_cast<double>(as_extreme) / static_cast<double>(total);
    } else {
        res.method = PValueMethod::NormalApprox;
        const double nd = static_cast<double>(n);
        double var = (nd * (nd - 1.0) * (2.0 * nd + 5.0) - tx.term_v1 - ty.term_v1) / 18.0 +
                     tx.term_v2 * ty.term_v2 / (9.0 * nd * (nd - 1.0) * (nd - 2.0)) +
                     tx.term_v3 * ty.term_v3 / (2.0 * nd * (nd - 1.0));
        if (var <= 0.0) {
            res.p_value = 1.0;
        } else {
            const double z = static_cast<double>(s_obs) / std::sqrt(var);
            res.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Median
// ---------------------------------------------------------------------------

double median(const std::vector<double>& values) {
    if (values.empty()) throw ArgumentError("median: empty input");
    std::vector<double> v = values;
    const std::size_t idx = (v.size() - 1) / 2;  // lower median
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    return v[idx];
}

}  // namespace fairlens
