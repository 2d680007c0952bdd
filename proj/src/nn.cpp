#include "fairlens/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "fairlens/fairness.hpp"
#include "fairlens/serialization.hpp"

namespace fairlens {

std::string to_string(TrainMethod m) {
    switch (m) {
        case TrainMethod::Unconstrained: return "unconstrained";
        case TrainMethod::RegSquared: return "reg_squared";
        case TrainMethod::RegAbs: return "reg_abs";
        case TrainMethod::TwoHead: return "two_head";
    }
    return "?";
}

TrainMethod train_method_from_string(const std::string& s) {
    if (s == "unconstrained") return TrainMethod::Unconstrained;
    if (s == "reg_squared") return TrainMethod::RegSquared;
    if (s == "reg_abs") return TrainMethod::RegAbs;
    if (s == "two_head") return TrainMethod::TwoHead;
    throw ParseError("unknown training method '" + s + "'");
}

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ValidationError("TrainConfig.lambda must be nonnegative");
    if (epochs <= 0) throw ValidationError("TrainConfig.epochs must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig.learning_rate must be positive");
    if (batch_size <= 0) throw ValidationError("TrainConfig.batch_size must be positive");
    if (hidden_widths.empty()) throw ValidationError("TrainConfig.hidden_widths must be nonempty");
    for (int w : hidden_widths)
        if (w <= 0) throw ValidationError("TrainConfig.hidden_widths entries must be positive");
    if (lr_drop_patience <= 0)
        throw ValidationError("TrainConfig.lr_drop_patience must be positive");
}

LossSpec LossSpec::for_method(TrainMethod method, double lambda) {
    LossSpec spec;
    switch (method) {
        case TrainMethod::Unconstrained: break;
        case TrainMethod::RegSquared: spec.lambda_squared = lambda; break;
        case TrainMethod::RegAbs: spec.lambda_abs = lambda; break;
        case TrainMethod::TwoHead: spec.mse_head = true; break;
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

double bce_loss(const Eigen::VectorXd& logits, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(logits.size()) != labels.size())
        throw ArgumentError("bce_loss: length mismatch");
    if (logits.size() == 0) throw ArgumentError("bce_loss: empty input");
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double l = logits(i);
        total += std::max(l, 0.0) - l * static_cast<double>(labels[static_cast<std::size_t>(i)]) +
                 std::log1p(std::exp(-std::abs(l)));
    }
    return total / static_cast<double>(logits.size());
}

namespace {

struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = X, acts[l+1] = relu output of layer l
    Eigen::VectorXd f;
    Eigen::VectorXd g;
};

ForwardCache forward(const TwoHeadModel& model, const Eigen::MatrixXd& X) {
    if (static_cast<std::size_t>(X.cols()) != model.input_dim())
        throw ArgumentError("model forward: feature dimension mismatch (" +
                            std::to_string(X.cols()) + " vs " +
                            std::to_string(model.input_dim()) + ")");
    ForwardCache cache;
    cache.acts.reserve(model.backbone.size() + 1);
    cache.acts.push_back(X);
    for (const DenseLayer& layer : model.backbone) {
        Eigen::MatrixXd z = cache.acts.back() * layer.W.transpose();
        z.rowwise() += layer.b.transpose();
        cache.acts.push_back(z.cwiseMax(0.0));
    }
    const Eigen::MatrixXd& last = cache.acts.back();
    cache.f = last * model.w_f;
    cache.f.array() += model.b_f;
    cache.g = last * model.w_g;
    cache.g.array() += model.b_g;
    return cache;
}

struct LossValue {
    double loss = 0.0;
    Eigen::VectorXd df;  // d loss / d f
    Eigen::VectorXd dg;  // d loss / d g
};

LossValue loss_and_head_grads(const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                              const std::vector<int>& y, const std::vector<int>& s,
                              const LossSpec& spec) {
    const Eigen::Index n = f.size();
    LossValue out;
    out.df = Eigen::VectorXd::Zero(n);
    out.dg = Eigen::VectorXd::Zero(n);
    const double inv_n = 1.0 / static_cast<double>(n);

    if (spec.bce) {
        out.loss += bce_loss(f, y);
        for (Eigen::Index i = 0; i < n; ++i)
            out.df(i) += (sigmoid(f(i)) - static_cast<double>(y[static_cast<std::size_t>(i)])) * inv_n;
    }
    if (spec.mse_head) {
        double sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = g(i) - static_cast<double>(s[static_cast<std::size_t>(i)]);
            sq += r * r;
            out.dg(i) += 2.0 * r * inv_n;
        }
        out.loss += sq * inv_n;
    }
    const bool both_groups = [&] {
        bool seen0 = false, seen1 = false;
        for (int v : s) (v == 1 ? seen1 : seen0) = true;
        return seen0 && seen1;
    }();
    // A batch missing a group contributes no regularizer value or gradient.
    if (spec.lambda_squared != 0.0 && both_groups) {
        Eigen::VectorXd grad;
        out.loss += spec.lambda_squared * reg_squared_grad(f, s, grad);
        out.df += spec.lambda_squared * grad;
    }
    if (spec.lambda_abs != 0.0 && both_groups) {
        Eigen::VectorXd grad;
        out.loss += spec.lambda_abs * reg_abs_grad(f, s, grad);
        out.df += spec.lambda_abs * grad;
    }
    return out;
}

ParamGradients backward(const TwoHeadModel& model, const ForwardCache& cache,
                        const Eigen::VectorXd& df, const Eigen::VectorXd& dg, bool need_g) {
    ParamGradients grads;
    grads.w_f = cache.acts.back().transpose() * df;
    grads.b_f = df.sum();
    if (need_g) {
        grads.w_g = cache.acts.back().transpose() * dg;
        grads.b_g = dg.sum();
    } else {
        grads.w_g = Eigen::VectorXd::Zero(model.w_g.size());
        grads.b_g = 0.0;
    }

    Eigen::MatrixXd d_act = df * model.w_f.transpose();
    if (need_g) d_act += dg * model.w_g.transpose();

    grads.backbone.resize(model.backbone.size());
    for (std::size_t l = model.backbone.size(); l-- > 0;) {
        // ReLU mask: activation > 0 iff pre-activation > 0
        Eigen::MatrixXd d_pre =
            d_act.array() * (cache.acts[l + 1].array() > 0.0).cast<double>();
        grads.backbone[l].W = d_pre.transpose() * cache.acts[l];
        grads.backbone[l].b = d_pre.colwise().sum();
        if (l > 0) d_act = d_pre * model.backbone[l].W;
    }
    return grads;
}

}  // namespace

BatchEval eval_loss(const TwoHeadModel& model, const Eigen::MatrixXd& X, const std::vector<int>& y,
                    const std::vector<int>& s, const LossSpec& spec) {
    ForwardCache cache = forward(model, X);
    LossValue lv = loss_and_head_grads(cache.f, cache.g, y, s, spec);
    BatchEval eval;
    eval.loss = lv.loss;
    eval.f = std::move(cache.f);
    eval.g = std::move(cache.g);
    return eval;
}

ParamGradients loss_gradients(const TwoHeadModel& model, const Eigen::MatrixXd& X,
                              const std::vector<int>& y, const std::vector<int>& s,
                              const LossSpec& spec) {
    ForwardCache cache = forward(model, X);
    LossValue lv = loss_and_head_grads(cache.f, cache.g, y, s, spec);
    return backward(model, cache, lv.df, lv.dg, spec.mse_head);
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

TwoHeadModel init_model(std::size_t input_dim, const TrainConfig& cfg) {
    cfg.validate();
    if (input_dim == 0) throw ArgumentError("init_model: input_dim must be positive");
    Rng rng(mix_seed(static_cast<std::uint64_t>(cfg.seed), 0x11ULL));
    TwoHeadModel model;
    model.config = cfg;
    model.has_g_head = cfg.method == TrainMethod::TwoHead;

    auto kaiming = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
        return w;
    };

    std::size_t in = input_dim;
    for (int width : cfg.hidden_widths) {
        DenseLayer layer;
        layer.W = kaiming(width, static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(in));
        layer.b = Eigen::VectorXd::Zero(width);
        model.backbone.push_back(std::move(layer));
        in = static_cast<std::size_t>(width);
    }
    const auto m = static_cast<Eigen::Index>(in);
    model.w_f = kaiming(m, 1, m);
    model.b_f = 0.0;
    model.w_g = kaiming(m, 1, m);
    model.b_g = 0.0;
    return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
    std::vector<DenseLayer> m_backbone, v_backbone;
    Eigen::VectorXd m_wf, v_wf, m_wg, v_wg;
    double m_bf = 0.0, v_bf = 0.0, m_bg = 0.0, v_bg = 0.0;
    long step = 0;

    explicit AdamState(const TwoHeadModel& model) {
        for (const DenseLayer& layer : model.backbone) {
            DenseLayer zero{Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                            Eigen::VectorXd::Zero(layer.b.size())};
            m_backbone.push_back(zero);
            v_backbone.push_back(zero);
        }
        m_wf = Eigen::VectorXd::Zero(model.w_f.size());
        v_wf = m_wf;
        m_wg = Eigen::VectorXd::Zero(model.w_g.size());
        v_wg = m_wg;
    }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void adam_update_matrix(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                        Eigen::MatrixXd& v, double lr, double bc1, double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
}

void adam_update_vector(Eigen::VectorXd& param, const Eigen::VectorXd& grad, Eigen::VectorXd& m,
                        Eigen::VectorXd& v, double lr, double bc1, double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
}

void adam_update_scalar(double& param, double grad, double& m, double& v, double lr, double bc1,
                        double bc2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + kEps);
}

void adam_step(TwoHeadModel& model, const ParamGradients& grads, AdamState& state, double lr,
               bool update_g) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < model.backbone.size(); ++l) {
        adam_update_matrix(model.backbone[l].W, grads.backbone[l].W, state.m_backbone[l].W,
                           state.v_backbone[l].W, lr, bc1, bc2);
        adam_update_vector(model.backbone[l].b, grads.backbone[l].b, state.m_backbone[l].b,
                           state.v_backbone[l].b, lr, bc1, bc2);
    }
    adam_update_vector(model.w_f, grads.w_f, state.m_wf, state.v_wf, lr, bc1, bc2);
    adam_update_scalar(model.b_f, grads.b_f, state.m_bf, state.v_bf, lr, bc1, bc2);
    if (update_g) {
        adam_update_vector(model.w_g, grads.w_g, state.m_wg, state.v_wg, lr, bc1, bc2);
        adam_update_scalar(model.b_g, grads.b_g, state.m_bg, state.v_bg, lr, bc1, bc2);
    }
}

/// Mean precision at the rank of each positive, scores ranked descending
/// (ties broken by row order).
double average_precision(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
    });
    std::size_t n_pos = 0;
    for (int v : labels) n_pos += v == 1;
    if (n_pos == 0) return 0.0;
    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

struct Snapshot {
    std::vector<DenseLayer> backbone;
    Eigen::VectorXd w_f, w_g;
    double b_f = 0.0, b_g = 0.0;
};

Snapshot take_snapshot(const TwoHeadModel& m) {
    return Snapshot{m.backbone, m.w_f, m.w_g, m.b_f, m.b_g};
}

void restore_snapshot(TwoHeadModel& m, const Snapshot& s) {
    m.backbone = s.backbone;
    m.w_f = s.w_f;
    m.w_g = s.w_g;
    m.b_f = s.b_f;
    m.b_g = s.b_g;
}

}  // namespace

TwoHeadModel train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate_for_training();
    const auto train_idx = ds.indices(Split::Train);
    if (static_cast<std::size_t>(cfg.batch_size) > train_idx.size())
        throw ArgumentError("train: batch_size exceeds train split size");

    const LossSpec spec = LossSpec::for_method(cfg.method, cfg.lambda);
    TwoHeadModel model = init_model(ds.dim(), cfg);

    const Eigen::MatrixXd x_val = ds.features_of(Split::Val);
    const std::vector<int> y_val = ds.targets_of(Split::Val);
    const std::vector<int> s_val = ds.protected_of(Split::Val);

    AdamState adam(model);
    double lr = cfg.learning_rate;
    double best_ap = -1.0;
    Snapshot best = take_snapshot(model);
    double best_val_loss = std::numeric_limits<double>::infinity();
    int stall = 0;

    Eigen::MatrixXd xb;
    std::vector<int> yb, sb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = stratified_batches(
            ds, Split::Train, static_cast<std::size_t>(cfg.batch_size),
            mix_seed(static_cast<std::uint64_t>(cfg.seed), 0x1000ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            xb.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(ds.dim()));
            yb.resize(batch.size());
            sb.resize(batch.size());
            for (std::size_t r = 0; r < batch.size(); ++r) {
                xb.row(static_cast<Eigen::Index>(r)) =
                    ds.features().row(static_cast<Eigen::Index>(batch[r]));
                yb[r] = ds.targets()[batch[r]];
                sb[r] = ds.protected_attr()[batch[r]];
            }
            ForwardCache cache = forward(model, xb);
            LossValue lv = loss_and_head_grads(cache.f, cache.g, yb, sb, spec);
            if (!std::isfinite(lv.loss))
                throw TrainingDivergedError(epoch, static_cast<int>(bi));
            ParamGradients grads = backward(model, cache, lv.df, lv.dg, spec.mse_head);
            adam_step(model, grads, adam, lr, spec.mse_head);
        }

        const BatchEval val = eval_loss(model, x_val, y_val, s_val, spec);
        if (!std::isfinite(val.loss)) throw TrainingDivergedError(epoch, -1);
        const double ap = average_precision(val.f, y_val);
        if (ap > best_ap) {
            best_ap = ap;
            best = take_snapshot(model);
        }
        if (val.loss < best_val_loss) {
            best_val_loss = val.loss;
            stall = 0;
        } else {
            ++stall;
            if (stall >= cfg.lr_drop_patience) {
                lr /= 10.0;
                stall = 0;
            }
        }
    }

    restore_snapshot(model, best);
    return model;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

Scores forward_scores(const TwoHeadModel& model, const Eigen::MatrixXd& X, Split split) {
    ForwardCache cache = forward(model, X);
    Scores scores;
    scores.split = split;
    scores.f_scores = std::move(cache.f);
    if (model.has_g_head) scores.g_scores = std::move(cache.g);
    return scores;
}

Eigen::MatrixXd forward_last_layer(const TwoHeadModel& model, const Eigen::MatrixXd& X) {
    return forward(model, X).acts.back();
}

Scores score(const TwoHeadModel& model, const Dataset& ds, Split split) {
    return forward_scores(model, ds.features_of(split), split);
}

Eigen::MatrixXd last_layer(const TwoHeadModel& model, const Dataset& ds, Split split) {
    return forward_last_layer(model, ds.features_of(split));
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols) {
    if (arr.size() != static_cast<std::size_t>(rows * cols))
        throw SchemaError("model weights: element count mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[k++].get<double>();
    return m;
}

}  // namespace

void save_model(const TwoHeadModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "fairlens-model";
    j["version"] = 1;
    j["config"] = train_config_to_json(model.config);
    j["input_dim"] = model.input_dim();
    j["has_g_head"] = model.has_g_head;
    nlohmann::json layers = nlohmann::json::array();
    for (const DenseLayer& layer : model.backbone) {
        nlohmann::json lj;
        lj["rows"] = layer.W.rows();
        lj["cols"] = layer.W.cols();
        lj["weights"] = matrix_to_json(layer.W);
        lj["bias"] = matrix_to_json(layer.b);
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["head_f"] = {{"weights", matrix_to_json(model.w_f)}, {"bias", model.b_f}};
    j["head_g"] = {{"weights", matrix_to_json(model.w_g)}, {"bias", model.b_g}};
    write_json_atomic(j, path);
}

TwoHeadModel load_model(const std::string& path) {
    const nlohmann::json j = read_json(path);
    if (!j.contains("format") || j["format"] != "fairlens-model")
        throw SchemaError("'" + path + "': not a fairlens model file");
    if (j.value("version", 0) != 1)
        throw SchemaError("'" + path + "': unsupported model version");
    TwoHeadModel model;
    model.config = train_config_from_json(j.at("config"));
    model.has_g_head = j.at("has_g_head").get<bool>();
    for (const auto& lj : j.at("layers")) {
        DenseLayer layer;
        const auto rows = lj.at("rows").get<Eigen::Index>();
        const auto cols = lj.at("cols").get<Eigen::Index>();
        layer.W = matrix_from_json(lj.at("weights"), rows, cols);
        layer.b = matrix_from_json(lj.at("bias"), rows, 1);
        model.backbone.push_back(std::move(layer));
    }
    const auto& hf = j.at("head_f");
    const auto& hg = j.at("head_g");
    const Eigen::Index m = model.backbone.empty() ? 0 : model.backbone.back().W.rows();
    model.w_f = matrix_from_json(hf.at("weights"), m, 1);
    model.b_f = hf.at("bias").get<double>();
    model.w_g = matrix_from_json(hg.at("weights"), m, 1);
    model.b_g = hg.at("bias").get<double>();
    return model;
}

}  // namespace fairlens
