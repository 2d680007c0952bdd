#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairlens/common.hpp"
#include "fairlens/dataset.hpp"

namespace fairlens {

enum class TrainMethod { Unconstrained, RegSquared, RegAbs, TwoHead };

std::string to_string(TrainMethod m);
TrainMethod train_method_from_string(const std::string& s);

struct TrainConfig {
    TrainMethod method = TrainMethod::Unconstrained;
    double lambda = 0.0;  // fairness weight; ignored for unconstrained/two_head
    int epochs = 120;
    double learning_rate = 1e-3;
    int batch_size = 64;
    std::int64_t seed = 0;
    std::vector<int> hidden_widths = {64, 4};
    int lr_drop_patience = 16;

    void validate() const;
};

struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
};

/// ReLU MLP backbone with a target head f (logit scale) and a group head g
/// (regression scale). Single-head methods leave the g head untrained.
struct TwoHeadModel {
    std::vector<DenseLayer> backbone;
    Eigen::VectorXd w_f;
    double b_f = 0.0;
    Eigen::VectorXd w_g;
    double b_g = 0.0;
    bool has_g_head = false;
    TrainConfig config;

    std::size_t input_dim() const {
        return backbone.empty() ? 0 : static_cast<std::size_t>(backbone.front().W.cols());
    }
    std::size_t last_width() const {
        return backbone.empty() ? 0 : static_cast<std::size_t>(backbone.back().W.rows());
    }
};

struct Scores {
    Eigen::VectorXd f_scores;  // pre-sigmoid logits
    Eigen::VectorXd g_scores;  // empty for single-head models
    Split split = Split::Test;

    bool has_g() const { return g_scores.size() > 0; }
};

/// Mean binary cross entropy of sigmoid(logits) against labels, evaluated in
/// the standard overflow-free form.
double bce_loss(const Eigen::VectorXd& logits, const std::vector<int>& labels);

/// Which terms enter the training objective. train() maps methods onto this;
/// tests can probe each term in isolation.
struct LossSpec {
    bool bce = true;
    bool mse_head = false;
    double lambda_squared = 0.0;
    double lambda_abs = 0.0;

    static LossSpec for_method(TrainMethod method, double lambda);
};

struct BatchEval {
    double loss = 0.0;
    Eigen::VectorXd f;
    Eigen::VectorXd g;
};

struct ParamGradients {
    std::vector<DenseLayer> backbone;  // same shapes as the model
    Eigen::VectorXd w_f;
    double b_f = 0.0;
    Eigen::VectorXd w_g;
    double b_g = 0.0;
};

BatchEval eval_loss(const TwoHeadModel& model, const Eigen::MatrixXd& X,
                    const std::vector<int>& y, const std::vector<int>& s, const LossSpec& spec);

ParamGradients loss_gradients(const TwoHeadModel& model, const Eigen::MatrixXd& X,
                              const std::vector<int>& y, const std::vector<int>& s,
                              const LossSpec& spec);

/// Seeded Kaiming-uniform initialization; biases zero.
TwoHeadModel init_model(std::size_t input_dim, const TrainConfig& cfg);

/// Adam training over stratified batches with a validation-loss learning-rate
/// schedule; returns the epoch snapshot with the best validation average
/// precision (earlier epoch wins ties). Deterministic for a fixed seed.
TwoHeadModel train(const Dataset& ds, const TrainConfig& cfg);

Scores score(const TwoHeadModel& model, const Dataset& ds, Split split);
Eigen::MatrixXd last_layer(const TwoHeadModel& model, const Dataset& ds, Split split);

/// Forward pass over an arbitrary (already standardized) feature matrix.
Scores forward_scores(const TwoHeadModel& model, const Eigen::MatrixXd& X, Split split);
Eigen::MatrixXd forward_last_layer(const TwoHeadModel& model, const Eigen::MatrixXd& X);

void save_model(const TwoHeadModel& model, const std::string& path);
TwoHeadModel load_model(const std::string& path);

}  // namespace fairlens
