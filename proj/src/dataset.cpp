#include "fairlens/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fairlens {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

int parse_binary(const std::string& cell, const std::string& col, std::size_t row) {
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    throw ParseError("non-binary value '" + cell + "' in column '" + col + "' at row " +
                     std::to_string(row));
}

}  // namespace

// ---------------------------------------------------------------------------
// SyntheticSpec
// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
    if (n_samples == 0) throw ValidationError("SyntheticSpec.n_samples must be positive");
    if (n_features == 0) throw ValidationError("SyntheticSpec.n_features must be positive");
    if (!(group_balance > 0.0 && group_balance < 1.0))
        throw ValidationError("SyntheticSpec.group_balance must lie in (0,1)");
    if (!(separability >= 0.0) || !std::isfinite(separability))
        throw ValidationError("SyntheticSpec.separability must be nonnegative");
    if (!(base_rate_gap >= -1.0 && base_rate_gap <= 1.0))
        throw ValidationError("SyntheticSpec.base_rate_gap must lie in [-1,1]");
    if (!(label_noise >= 0.0 && label_noise < 0.5))
        throw ValidationError("SyntheticSpec.label_noise must lie in [0,0.5)");
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset::Dataset(Eigen::MatrixXd raw_features, std::vector<int> targets,
                 std::vector<int> protected_attr, std::vector<Split> splits,
                 std::vector<std::string> feature_names, std::string target_name,
                 std::string protected_name)
    : raw_(std::move(raw_features)),
      targets_(std::move(targets)),
      protected_(std::move(protected_attr)),
      splits_(std::move(splits)),
      feature_names_(std::move(feature_names)),
      target_name_(std::move(target_name)),
      protected_name_(std::move(protected_name)) {
    const std::size_t n_rows = static_cast<std::size_t>(raw_.rows());
    if (targets_.size() != n_rows || protected_.size() != n_rows || splits_.size() != n_rows)
        throw ArgumentError("Dataset: column lengths disagree with feature rows");
    if (feature_names_.size() != static_cast<std::size_t>(raw_.cols()))
        throw ArgumentError("Dataset: feature name count disagrees with feature columns");
    if (!raw_.allFinite()) throw ValidationError("Dataset: non-finite feature value");
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (targets_[i] != 0 && targets_[i] != 1)
            throw ValidationError("Dataset: non-binary target at row " + std::to_string(i + 1));
        if (protected_[i] != 0 && protected_[i] != 1)
            throw ValidationError("Dataset: non-binary protected attribute at row " +
                                  std::to_string(i + 1));
    }

    // Standardize on train-split statistics; degenerate columns stay as-is.
    const auto train_idx = indices(Split::Train);
    const std::size_t d = dim();
    mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std_dev_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
    if (!train_idx.empty()) {
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (std::size_t i : train_idx) m += raw_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            m /= static_cast<double>(train_idx.size());
            double var = 0.0;
            for (std::size_t i : train_idx) {
                double dlt = raw_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - m;
                var += dlt * dlt;
            }
            var /= static_cast<double>(train_idx.size());
            mean_(static_cast<Eigen::Index>(j)) = m;
            std_dev_(static_cast<Eigen::Index>(j)) = var > 0.0 ? std::sqrt(var) : 1.0;
        }
    }
    std_ = raw_;
    for (Eigen::Index j = 0; j < std_.cols(); ++j)
        std_.col(j) = (std_.col(j).array() - mean_(j)) / std_dev_(j);
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits_.size(); ++i)
        if (splits_[i] == split) out.push_back(i);
    return out;
}

std::size_t Dataset::split_size(Split split) const {
    std::size_t c = 0;
    for (Split s : splits_)
        if (s == split) ++c;
    return c;
}

Eigen::MatrixXd Dataset::features_of(Split split) const {
    const auto idx = indices(split);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), std_.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = std_.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

std::vector<int> Dataset::targets_of(Split split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < splits_.size(); ++i)
        if (splits_[i] == split) out.push_back(targets_[i]);
    return out;
}

std::vector<int> Dataset::protected_of(Split split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < splits_.size(); ++i)
        if (splits_[i] == split) out.push_back(protected_[i]);
    return out;
}

Dataset Dataset::with_labels(const std::vector<int>& new_targets) const {
    return Dataset(raw_, new_targets, protected_, splits_, feature_names_, target_name_,
                   protected_name_);
}

void Dataset::validate_for_training() const {
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        std::array<int, 2> labels{0, 0};
        std::array<int, 2> groups{0, 0};
        std::size_t count = 0;
        for (std::size_t i = 0; i < splits_.size(); ++i) {
            if (splits_[i] != split) continue;
            ++count;
            labels[static_cast<std::size_t>(targets_[i])] = 1;
            groups[static_cast<std::size_t>(protected_[i])] = 1;
        }
        if (count == 0) throw ValidationError("split '" + to_string(split) + "' is empty");
        if (!labels[0] || !labels[1])
            throw ValidationError("split '" + to_string(split) + "' lacks a target label");
        if (!groups[0] || !groups[1])
            throw ValidationError("split '" + to_string(split) + "' lacks a protected group");
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

std::vector<Split> stratified_split(const std::vector<int>& targets,
                                    const std::vector<int>& protected_attr, std::uint64_t seed) {
    if (targets.size() != protected_attr.size())
        throw ArgumentError("stratified_split: length mismatch");
    Rng rng(mix_seed(seed, 0x5917ULL));
    std::vector<Split> out(targets.size(), Split::Train);
    // Cells keyed by (y, s); 70/15/15 by largest remainder within each cell.
    for (int y = 0; y <= 1; ++y) {
        for (int s = 0; s <= 1; ++s) {
            std::vector<std::size_t> cell;
            for (std::size_t i = 0; i < targets.size(); ++i)
                if (targets[i] == y && protected_attr[i] == s) cell.push_back(i);
            if (cell.empty()) continue;
            rng.shuffle(cell);
            const double fracs[3] = {0.70, 0.15, 0.15};
            const std::size_t n = cell.size();
            std::size_t counts[3];
            double rema[3];
            std::size_t assigned = 0;
            for (int k = 0; k < 3; ++k) {
                double want = fracs[k] * static_cast<double>(n);
                counts[k] = static_cast<std::size_t>(std::floor(want));
                rema[k] = want - std::floor(want);
                assigned += counts[k];
            }
            while (assigned < n) {
                int best = 0;
                for (int k = 1; k < 3; ++k)
                    if (rema[k] > rema[best]) best = k;
                counts[best] += 1;
                rema[best] = -1.0;
                ++assigned;
            }
            std::size_t pos = 0;
            const Split tags[3] = {Split::Train, Split::Val, Split::Test};
            for (int k = 0; k < 3; ++k)
                for (std::size_t c = 0; c < counts[k]; ++c) out[cell[pos++]] = tags[k];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd seeded_unit_vector(Rng& rng, std::size_t d) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = rng.normal();
    double norm = v.norm();
    if (norm == 0.0) v(0) = norm = 1.0;
    return v / norm;
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(static_cast<std::uint64_t>(spec.seed));
    const std::size_t n = spec.n_samples;
    const std::size_t d = spec.n_features;

    std::vector<int> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = rng.uniform() < spec.group_balance ? 1 : 0;

    Eigen::VectorXd u = seeded_unit_vector(rng, d);  // group mean direction

    // Label direction: fixed overlap with the group direction, so part of the
    // label evidence runs through group-separating features. A classifier can
    // only equalize positive rates by reading the group, not by discarding a
    // coordinate, which mirrors the setting the audit procedures probe.
    constexpr double kLabelGroupOverlap = 0.4;
    Eigen::VectorXd w = seeded_unit_vector(rng, d);
    if (d > 1) {
        Eigen::VectorXd v = w - w.dot(u) * u;
        const double vnorm = v.norm();
        if (vnorm > 1e-12) {
            v /= vnorm;
            w = kLabelGroupOverlap * u +
                std::sqrt(1.0 - kLabelGroupOverlap * kLabelGroupOverlap) * v;
        } else {
            w = u;
        }
    } else {
        w = u;
    }

    // Group-conditional Gaussians: means at +-(separability/sqrt(2)) * u in
    // cloud-sigma units and a mildly wider cloud for group 1, so the group
    // boundary is not a pure hyperplane and a nonlinear model can read the
    // group more accurately than any linear view of the raw features. The
    // width difference fades out with the mean offset so that separability
    // zero leaves the two groups identically distributed. The global feature
    // scale only steepens the logistic label model (the unit ball of w is
    // fixed); every group-geometry quantity is scale-free.
    constexpr double kFeatureScale = 5.0;
    constexpr double kGroup1SigmaExtra = 0.5;
    const double group1_sigma = 1.0 + kGroup1SigmaExtra * std::min(spec.separability, 1.0);
    const double half_offset = kFeatureScale * spec.separability / std::sqrt(2.0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = s[i] == 1 ? 1.0 : -1.0;
        const double sigma = kFeatureScale * (s[i] == 1 ? group1_sigma : 1.0);
        for (std::size_t j = 0; j < d; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                sign * half_offset * u(static_cast<Eigen::Index>(j)) + sigma * rng.normal();
    }

    // Group intercepts c_s = c0 +- delta; bisect delta so the expected
    // positive rates over the realized features hit base_rate_gap. The global
    // intercept keeps the task operating point away from a 50% positive rate.
    constexpr double kBaseIntercept = 4.0;
    Eigen::VectorXd margin = x * w;
    auto gap_at = [&](double delta) {
        double sum1 = 0.0, sum0 = 0.0;
        std::size_t n1 = 0, n0 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] == 1) {
                sum1 += sigmoid(margin(static_cast<Eigen::Index>(i)) + kBaseIntercept + delta);
                ++n1;
            } else {
                sum0 += sigmoid(margin(static_cast<Eigen::Index>(i)) + kBaseIntercept - delta);
                ++n0;
            }
        }
        double m1 = n1 ? sum1 / static_cast<double>(n1) : 0.0;
        double m0 = n0 ? sum0 / static_cast<double>(n0) : 0.0;
        return m1 - m0;
    };
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (gap_at(mid) < spec.base_rate_gap)
            lo = mid;
        else
            hi = mid;
    }
    const double delta = 0.5 * (lo + hi);

    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double c = kBaseIntercept + (s[i] == 1 ? delta : -delta);
        y[i] = rng.uniform() < sigmoid(margin(static_cast<Eigen::Index>(i)) + c) ? 1 : 0;
    }

    // Flip an exact fraction of labels, chosen uniformly without replacement.
    const std::size_t n_flip = static_cast<std::size_t>(std::llround(spec.label_noise * static_cast<double>(n)));
    if (n_flip > 0) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t k = 0; k < n_flip; ++k) {
            std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
            std::swap(order[k], order[j]);
            y[order[k]] = 1 - y[order[k]];
        }
    }

    std::vector<Split> splits = stratified_split(y, s, static_cast<std::uint64_t>(spec.seed));

    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "x" + std::to_string(j);
    Dataset ds(std::move(x), std::move(y), std::move(s), std::move(splits), std::move(names));
    ds.validate_for_training();
    return ds;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

Dataset load_csv(const std::string& path, const std::string& target_col,
                 const std::string& protected_col, const std::optional<std::string>& split_col,
                 std::int64_t split_seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file (header expected)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_line(line);

    auto find_col = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw SchemaError("'" + path + "': missing column '" + name + "'");
    };
    const std::size_t t_col = find_col(target_col);
    const std::size_t p_col = find_col(protected_col);
    std::optional<std::size_t> s_col;
    if (split_col) s_col = find_col(*split_col);

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == t_col || j == p_col || (s_col && j == *s_col)) continue;
        feature_cols.push_back(j);
        feature_names.push_back(header[j]);
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> targets, prot;
    std::vector<Split> splits;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("'" + path + "': wrong field count at row " + std::to_string(row_no));
        targets.push_back(parse_binary(cells[t_col], target_col, row_no));
        prot.push_back(parse_binary(cells[p_col], protected_col, row_no));
        if (s_col) splits.push_back(split_from_string(cells[*s_col]));
        std::vector<double> feat(feature_cols.size());
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            bool ok = false;
            feat[k] = parse_double(cells[feature_cols[k]], &ok);
            if (!ok)
                throw ParseError("'" + path + "': non-numeric value '" + cells[feature_cols[k]] +
                                 "' in column '" + feature_names[k] + "' at row " +
                                 std::to_string(row_no));
        }
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw ParseError("'" + path + "': no data rows");

    if (!s_col) splits = stratified_split(targets, prot, static_cast<std::uint64_t>(split_seed));

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];

    return Dataset(std::move(x), std::move(targets), std::move(prot), std::move(splits),
                   std::move(feature_names), target_col, protected_col);
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ds.feature_names()[j] << ',';
    out << ds.target_name() << ',' << ds.protected_name() << ",split\n";
    const auto& raw = ds.raw_features();
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (Eigen::Index j = 0; j < raw.cols(); ++j)
            out << format_double(raw(static_cast<Eigen::Index>(i), j)) << ',';
        out << ds.targets()[i] << ',' << ds.protected_attr()[i] << ','
            << to_string(ds.splits()[i]) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Stratified batches
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> stratified_batches(const Dataset& ds, Split split,
                                                         std::size_t batch_size,
                                                         std::uint64_t seed) {
    const auto idx = ds.indices(split);
    const std::size_t n = idx.size();
    if (batch_size == 0) throw ArgumentError("stratified_batches: batch_size must be positive");
    if (batch_size > n)
        throw ArgumentError("stratified_batches: batch_size " + std::to_string(batch_size) +
                            " exceeds split size " + std::to_string(n));

    std::vector<std::size_t> ones, zeros;
    for (std::size_t i : idx)
        (ds.protected_attr()[i] == 1 ? ones : zeros).push_back(i);
    Rng rng(seed);
    rng.shuffle(ones);
    rng.shuffle(zeros);

    const std::size_t n_batches = (n + batch_size - 1) / batch_size;
    const double prevalence = static_cast<double>(ones.size()) / static_cast<double>(n);

    // Cumulative rounding keeps each batch's s=1 count within one sample of
    // prevalence * batch size.
    std::vector<std::vector<std::size_t>> batches(n_batches);
    std::size_t taken = 0, taken_ones = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t bsz = std::min(batch_size, n - taken);
        const std::size_t cum = taken + bsz;
        std::size_t cum_ones = static_cast<std::size_t>(
            std::llround(prevalence * static_cast<double>(cum)));
        cum_ones = std::min(cum_ones, ones.size());
        if (cum > zeros.size()) cum_ones = std::max(cum_ones, cum - zeros.size());
        cum_ones = std::max(cum_ones, taken_ones);
        std::size_t want_ones = cum_ones - taken_ones;
        want_ones = std::min(want_ones, bsz);
        const std::size_t want_zeros = bsz - want_ones;
        auto& batch = batches[b];
        batch.reserve(bsz);
        for (std::size_t k = 0; k < want_ones; ++k) batch.push_back(ones[taken_ones + k]);
        const std::size_t taken_zeros = taken - taken_ones;
        for (std::size_t k = 0; k < want_zeros; ++k) batch.push_back(zeros[taken_zeros + k]);
        taken_ones += want_ones;
        taken = cum;
    }
    return batches;
}

}  // namespace fairlens
