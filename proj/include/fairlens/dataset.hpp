#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairlens/common.hpp"

namespace fairlens {

/// Parameters of the synthetic group-structured generator.
///
/// Features are two group-conditional Gaussians N(mu_s, I) whose means sit at
/// +-(separability/sqrt(2)) * u along a seeded unit direction u, so the Bayes
/// accuracy of recovering s from the features is Phi(separability / sqrt(2)).
/// Labels follow y ~ Bernoulli(sigmoid(w.x + c_s)) with a seeded unit-norm w
/// and group intercepts c_s = +-delta, delta found by bisection so that the
/// expected positive-rate difference between the groups equals base_rate_gap.
struct SyntheticSpec {
    std::size_t n_samples = 20000;
    std::size_t n_features = 30;
    double group_balance = 0.5;    // fraction of s=1
    double separability = 3.0;     // controls group mean offset
    double base_rate_gap = 0.3;    // P(y=1|s=1) - P(y=1|s=0)
    double label_noise = 0.0;      // fraction of labels flipped
    std::int64_t seed = 0;

    void validate() const;  // throws ValidationError naming the offending field
};

/// Immutable tabular dataset: standardized features, binary targets and
/// protected attributes, and per-row split tags.
///
/// Standardization (column mean 0, variance 1) is computed on the train split
/// only; the parameters are kept so raw values can be written back exactly.
class Dataset {
public:
    Dataset(Eigen::MatrixXd raw_features, std::vector<int> targets, std::vector<int> protected_attr,
            std::vector<Split> splits, std::vector<std::string> feature_names,
            std::string target_name = "y", std::string protected_name = "s");

    std::size_t n() const { return static_cast<std::size_t>(raw_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(raw_.cols()); }

    /// Standardized feature matrix (what models consume).
    const Eigen::MatrixXd& features() const { return std_; }
    const Eigen::MatrixXd& raw_features() const { return raw_; }
    const std::vector<int>& targets() const { return targets_; }
    const std::vector<int>& protected_attr() const { return protected_; }
    const std::vector<Split>& splits() const { return splits_; }

    const Eigen::VectorXd& feature_means() const { return mean_; }
    const Eigen::VectorXd& feature_stds() const { return std_dev_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::string& target_name() const { return target_name_; }
    const std::string& protected_name() const { return protected_name_; }

    std::vector<std::size_t> indices(Split split) const;
    std::size_t split_size(Split split) const;

    Eigen::MatrixXd features_of(Split split) const;
    std::vector<int> targets_of(Split split) const;
    std::vector<int> protected_of(Split split) const;

    /// Returns a copy with the given train-split rows' labels replaced.
    Dataset with_labels(const std::vector<int>& new_targets) const;

    /// Throws ValidationError unless every split is nonempty and contains
    /// both target labels and both protected groups.
    void validate_for_training() const;

private:
    Eigen::MatrixXd raw_;
    Eigen::MatrixXd std_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_dev_;
    std::vector<int> targets_;
    std::vector<int> protected_;
    std::vector<Split> splits_;
    std::vector<std::string> feature_names_;
    std::string target_name_;
    std::string protected_name_;
};

Dataset generate(const SyntheticSpec& spec);

/// Loads a CSV with a header row. Numeric columns other than the designated
/// target/protected/split columns become features, in header order. When
/// split_col is absent a seeded 70/15/15 split stratified on (y, s) is
/// assigned.
Dataset load_csv(const std::string& path, const std::string& target_col,
                 const std::string& protected_col,
                 const std::optional<std::string>& split_col = std::nullopt,
                 std::int64_t split_seed = 0);

/// Writes raw feature values, target, protected attribute and split tags.
void save_csv(const Dataset& ds, const std::string& path);

/// One epoch of stratified batches over the split: every index exactly once,
/// each batch's s=1 count within one sample of the split-level prevalence.
/// Pass a per-epoch seed (e.g. mix_seed(seed, epoch)) to reshuffle.
std::vector<std::vector<std::size_t>> stratified_batches(const Dataset& ds, Split split,
                                                         std::size_t batch_size,
                                                         std::uint64_t seed);

/// Seeded 70/15/15 assignment stratified jointly on (y, s).
std::vector<Split> stratified_split(const std::vector<int>& targets,
                                    const std::vector<int>& protected_attr, std::uint64_t seed);

}  // namespace fairlens
