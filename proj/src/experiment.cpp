#include "fairlens/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fairlens/serialization.hpp"

namespace fs = std::filesystem;

namespace fairlens {

// ---------------------------------------------------------------------------
// Method names
// ---------------------------------------------------------------------------

std::string to_string(ExpMethod m) {
    switch (m) {
        case ExpMethod::Unconstrained: return "unconstrained";
        case ExpMethod::RegSquared: return "reg_squared";
        case ExpMethod::RegAbs: return "reg_abs";
        case ExpMethod::Massaging: return "massaging";
        case ExpMethod::TwoHead: return "two_head";
        case ExpMethod::Lipton: return "lipton";
    }
    return "?";
}

ExpMethod exp_method_from_string(const std::string& s) {
    if (s == "unconstrained") return ExpMethod::Unconstrained;
    if (s == "reg_squared") return ExpMethod::RegSquared;
    if (s == "reg_abs") return ExpMethod::RegAbs;
    if (s == "massaging") return ExpMethod::Massaging;
    if (s == "two_head") return ExpMethod::TwoHead;
    if (s == "lipton") return ExpMethod::Lipton;
    throw ParseError("unknown method '" + s + "'");
}

namespace {

std::string format_knob(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

std::string run_id(ExpMethod method, double knob, std::int64_t seed) {
    const std::string tail = "_seed" + std::to_string(seed);
    switch (method) {
        case ExpMethod::RegSquared:
        case ExpMethod::RegAbs:
            return to_string(method) + "_lam" + format_knob(knob) + tail;
        case ExpMethod::Massaging:
            return to_string(method) + "_frac" + format_knob(knob) + tail;
        default:
            return to_string(method) + tail;
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (synthetic.has_value() == csv.has_value())
        throw ValidationError("config.dataset must name exactly one of synthetic/csv");
    if (synthetic) synthetic->validate();
    if (csv && csv->path.empty()) throw ValidationError("config.dataset.csv.path is empty");
    if (methods.empty()) throw ValidationError("config.methods is empty");
    std::set<std::string> seen;
    for (ExpMethod m : methods)
        if (!seen.insert(to_string(m)).second)
            throw ValidationError("config.methods lists '" + to_string(m) + "' twice");
    const bool has_reg = seen.count("reg_squared") || seen.count("reg_abs");
    if (has_reg && lambda_grid.empty()) throw ValidationError("config.lambda_grid is empty");
    if (seen.count("massaging") && massaging_grid.empty())
        throw ValidationError("config.massaging_grid is empty");
    for (double v : massaging_grid)
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError("config.massaging_grid entries must lie in [0,1]");
    for (double v : lambda_grid)
        if (!(v >= 0.0)) throw ValidationError("config.lambda_grid entries must be nonnegative");
    for (double v : ddp_bounds)
        if (!(v >= 0.0)) throw ValidationError("config.ddp_bounds entries must be nonnegative");
    if (n_ddp_bounds < 1) throw ValidationError("config.n_ddp_bounds must be positive");
    if (seeds.empty()) throw ValidationError("config.seeds is empty");
    std::set<std::int64_t> sseen(seeds.begin(), seeds.end());
    if (sseen.size() != seeds.size()) throw ValidationError("config.seeds contains duplicates");
    if (output_dir.empty()) throw ValidationError("config.output_dir is empty");
    train.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json dataset;
    if (synthetic) {
        dataset["synthetic"] = {{"n_samples", synthetic->n_samples},
                                {"n_features", synthetic->n_features},
                                {"group_balance", synthetic->group_balance},
                                {"separability", synthetic->separability},
                                {"base_rate_gap", synthetic->base_rate_gap},
                                {"label_noise", synthetic->label_noise},
                                {"seed", synthetic->seed}};
    }
    if (csv) {
        nlohmann::json c = {{"path", csv->path},
                            {"target_col", csv->target_col},
                            {"protected_col", csv->protected_col},
                            {"split_seed", csv->split_seed}};
        if (csv->split_col) c["split_col"] = *csv->split_col;
        dataset["csv"] = std::move(c);
    }
    nlohmann::json method_names = nlohmann::json::array();
    for (ExpMethod m : methods) method_names.push_back(to_string(m));
    return nlohmann::json{{"dataset", std::move(dataset)},
                          {"methods", std::move(method_names)},
                          {"lambda_grid", lambda_grid},
                          {"massaging_grid", massaging_grid},
                          {"ddp_bounds", ddp_bounds},
                          {"n_ddp_bounds", n_ddp_bounds},
                          {"seeds", seeds},
                          {"output_dir", output_dir},
                          {"train",
                           {{"epochs", train.epochs},
                            {"learning_rate", train.learning_rate},
                            {"batch_size", train.batch_size},
                            {"hidden_widths", train.hidden_widths},
                            {"lr_drop_patience", train.lr_drop_patience}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    if (!j.contains("dataset")) throw SchemaError("config: missing 'dataset'");
    const auto& dataset = j["dataset"];
    if (dataset.contains("synthetic")) {
        const auto& sj = dataset["synthetic"];
        SyntheticSpec spec;
        spec.n_samples = sj.value("n_samples", spec.n_samples);
        spec.n_features = sj.value("n_features", spec.n_features);
        spec.group_balance = sj.value("group_balance", spec.group_balance);
        spec.separability = sj.value("separability", spec.separability);
        spec.base_rate_gap = sj.value("base_rate_gap", spec.base_rate_gap);
        spec.label_noise = sj.value("label_noise", spec.label_noise);
        spec.seed = sj.value("seed", spec.seed);
        config.synthetic = spec;
    }
    if (dataset.contains("csv")) {
        const auto& cj = dataset["csv"];
        CsvRef ref;
        ref.path = cj.at("path").get<std::string>();
        ref.target_col = cj.at("target_col").get<std::string>();
        ref.protected_col = cj.at("protected_col").get<std::string>();
        if (cj.contains("split_col")) ref.split_col = cj["split_col"].get<std::string>();
        ref.split_seed = cj.value("split_seed", ref.split_seed);
        config.csv = ref;
    }
    if (j.contains("methods")) {
        config.methods.clear();
        for (const auto& m : j["methods"])
            config.methods.push_back(exp_method_from_string(m.get<std::string>()));
    }
    if (j.contains("lambda_grid")) config.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    if (j.contains("massaging_grid"))
        config.massaging_grid = j["massaging_grid"].get<std::vector<double>>();
    if (j.contains("ddp_bounds")) config.ddp_bounds = j["ddp_bounds"].get<std::vector<double>>();
    config.n_ddp_bounds = j.value("n_ddp_bounds", config.n_ddp_bounds);
    if (j.contains("seeds")) config.seeds = j["seeds"].get<std::vector<std::int64_t>>();
    config.output_dir = j.value("output_dir", config.output_dir);
    if (j.contains("train")) {
        const auto& tj = j["train"];
        config.train.epochs = tj.value("epochs", config.train.epochs);
        config.train.learning_rate = tj.value("learning_rate", config.train.learning_rate);
        config.train.batch_size = tj.value("batch_size", config.train.batch_size);
        if (tj.contains("hidden_widths"))
            config.train.hidden_widths = tj["hidden_widths"].get<std::vector<int>>();
        config.train.lr_drop_patience = tj.value("lr_drop_patience", config.train.lr_drop_patience);
    }
    return config;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    ExperimentConfig config = from_json(read_json(path));
    if (const char* env = std::getenv("FAIRLENS_OUT"); env && *env) config.output_dir = env;
    config.validate();
    return config;
}

std::string ExperimentConfig::config_hash() const {
    nlohmann::json j = to_json();
    j.erase("output_dir");
    const std::string data = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Dataset load_dataset(const ExperimentConfig& config) {
    if (config.synthetic) return generate(*config.synthetic);
    if (config.csv)
        return load_csv(config.csv->path, config.csv->target_col, config.csv->protected_col,
                        config.csv->split_col, config.csv->split_seed);
    throw ValidationError("config.dataset must name exactly one of synthetic/csv");
}

// ---------------------------------------------------------------------------
// Scores / CSV artifacts
// ---------------------------------------------------------------------------

void write_scores_csv(const std::string& path, const std::vector<std::size_t>& row_index,
                      const Scores& scores) {
    if (row_index.size() != static_cast<std::size_t>(scores.f_scores.size()))
        throw ArgumentError("write_scores_csv: index length mismatch");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write '" + tmp + "'");
        out << (scores.has_g() ? "index,f,g\n" : "index,f\n");
        for (std::size_t r = 0; r < row_index.size(); ++r) {
            out << row_index[r] << ',' << format_double(scores.f_scores(static_cast<Eigen::Index>(r)));
            if (scores.has_g())
                out << ',' << format_double(scores.g_scores(static_cast<Eigen::Index>(r)));
            out << '\n';
        }
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    fs::rename(tmp, path);
}

StoredScores read_scores_csv(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty scores file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool has_g = line == "index,f,g";
    if (!has_g && line != "index,f") throw SchemaError("'" + path + "': unexpected scores header");

    StoredScores stored;
    stored.scores.split = split;
    std::vector<double> f, g;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        stored.row_index.push_back(static_cast<std::size_t>(std::stoull(cell)));
        std::getline(ss, cell, ',');
        bool ok = false;
        f.push_back(parse_double(cell, &ok));
        if (!ok) throw ParseError("'" + path + "': bad f value '" + cell + "'");
        if (has_g) {
            std::getline(ss, cell, ',');
            g.push_back(parse_double(cell, &ok));
            if (!ok) throw ParseError("'" + path + "': bad g value '" + cell + "'");
        }
    }
    stored.scores.f_scores = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    if (has_g)
        stored.scores.g_scores =
            Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    return stored;
}

std::vector<TradeoffRow> read_tradeoff_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "method,lambda_or_bound,accuracy,ddp,split")
        throw SchemaError("'" + path + "': unexpected tradeoff header");
    std::vector<TradeoffRow> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        TradeoffRow row;
        std::string cell;
        std::getline(ss, row.method, ',');
        bool ok = false;
        std::getline(ss, cell, ',');
        row.lambda_or_bound = parse_double(cell, &ok);
        std::getline(ss, cell, ',');
        row.accuracy = parse_double(cell, &ok);
        std::getline(ss, cell, ',');
        row.ddp = parse_double(cell, &ok);
        std::getline(ss, row.split, ',');
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Table1Row> read_table1_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "method,seed,accuracy")
        throw SchemaError("'" + path + "': unexpected table header");
    std::vector<Table1Row> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        Table1Row row;
        std::string cell;
        std::getline(ss, row.method, ',');
        std::getline(ss, cell, ',');
        row.seed = std::stoll(cell);
        std::getline(ss, cell, ',');
        if (cell == "X") {
            row.failed = true;
        } else {
            bool ok = false;
            row.accuracy = parse_double(cell, &ok);
            if (!ok) throw ParseError("'" + path + "': bad accuracy '" + cell + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

std::string iso_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Single-writer run ledger; file updates go through a mutex and a
/// write-temp-then-rename.
class Manifest {
public:
    Manifest(fs::path dir, const std::string& config_hash) : dir_(std::move(dir)) {
        path_ = dir_ / "manifest.json";
        if (fs::exists(path_)) {
            json_ = read_json(path_.string());
            const std::string existing = json_.value("config_hash", "");
            if (existing != config_hash)
                throw ValidationError("output_dir holds artifacts for a different config (hash " +
                                      existing + ", expected " + config_hash + ")");
        } else {
            json_["format"] = "fairlens-manifest";
            json_["tool_version"] = kToolVersion;
            json_["config_hash"] = config_hash;
            json_["created"] = iso_now();
            json_["runs"] = nlohmann::json::object();
        }
    }

    bool is_intact(const std::string& id) const {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto& runs = json_.at("runs");
        if (!runs.contains(id)) return false;
        const auto& entry = runs.at(id);
        if (entry.value("status", "") != "done") return false;
        for (const auto& f : entry.at("files"))
            if (!fs::exists(dir_ / f.get<std::string>())) return false;
        return true;
    }

    void record_done(const std::string& id, const std::vector<std::string>& files) {
        std::lock_guard<std::mutex> lock(mutex_);
        json_["runs"][id] = {{"status", "done"}, {"files", files}, {"finished", iso_now()}};
        save_locked();
    }

    void record_failed(const std::string& id, const std::string& error) {
        std::lock_guard<std::mutex> lock(mutex_);
        json_["runs"][id] = {{"status", "failed"},
                             {"files", nlohmann::json::array()},
                             {"error", error},
                             {"finished", iso_now()}};
        save_locked();
    }

    void save() {
        std::lock_guard<std::mutex> lock(mutex_);
        save_locked();
    }

private:
    void save_locked() {
        json_["updated"] = iso_now();
        write_json_atomic(json_, path_.string());
    }

    fs::path dir_;
    fs::path path_;
    nlohmann::json json_;
    mutable std::mutex mutex_;
};

void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
    if (jobs < 1) jobs = 1;
    if (jobs == 1 || tasks.size() <= 1) {
        for (auto& task : tasks) task();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                tasks[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const int n_threads = std::min<int>(jobs, static_cast<int>(tasks.size()));
    threads.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> linspace_inclusive(double lo, double hi, int count) {
    std::vector<double> out;
    if (count == 1) {
        out.push_back(lo);
        return out;
    }
    for (int k = 0; k < count; ++k)
        out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

struct SweepContext {
    const ExperimentConfig* config = nullptr;
    const Dataset* ds = nullptr;
    fs::path out;
    Manifest* manifest = nullptr;
    std::atomic<int>* executed = nullptr;
    std::atomic<int>* skipped = nullptr;
    std::atomic<int>* failed = nullptr;
};

TrainConfig make_train_config(const ExperimentConfig& config, TrainMethod method, double lambda,
                              std::int64_t seed) {
    TrainConfig tc = config.train;
    tc.method = method;
    tc.lambda = lambda;
    tc.seed = seed;
    return tc;
}

/// Saves model, per-split scores, and the plain 1(f>0) test report; returns
/// the relative artifact paths.
std::vector<std::string> write_model_artifacts(const SweepContext& ctx, const std::string& id,
                                               const TwoHeadModel& model, const Dataset& eval_ds) {
    std::vector<std::string> files;
    const std::string model_rel = "models/" + id + ".json";
    save_model(model, (ctx.out / model_rel).string());
    files.push_back(model_rel);
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        const Scores scores = score(model, eval_ds, split);
        const std::string rel = "scores/" + id + "_" + to_string(split) + ".csv";
        write_scores_csv((ctx.out / rel).string(), eval_ds.indices(split), scores);
        files.push_back(rel);
    }
    const FairnessReport report =
        evaluate(predict_sign(score(model, eval_ds, Split::Test).f_scores),
                 eval_ds.targets_of(Split::Test), eval_ds.protected_of(Split::Test), Split::Test);
    const std::string report_rel = "reports/" + id + ".json";
    write_json_atomic(fairness_report_to_json(report), (ctx.out / report_rel).string());
    files.push_back(report_rel);
    return files;
}

std::vector<double> read_bounds_file(const SweepContext& ctx, std::int64_t seed) {
    const fs::path path = ctx.out / ("bounds/bounds_seed" + std::to_string(seed) + ".json");
    if (!fs::exists(path))
        throw DependencyError("missing bounds file for seed " + std::to_string(seed));
    return read_json(path.string()).at("bounds").get<std::vector<double>>();
}

/// One run: skip when intact, record failure on divergence or infeasibility,
/// propagate anything else.
void execute_run(const SweepContext& ctx, const std::string& id,
                 const std::function<std::vector<std::string>()>& body) {
    if (ctx.manifest->is_intact(id)) {
        ctx.skipped->fetch_add(1);
        return;
    }
    try {
        const std::vector<std::string> files = body();
        ctx.manifest->record_done(id, files);
        ctx.executed->fetch_add(1);
    } catch (const TrainingDivergedError& e) {
        ctx.manifest->record_failed(id, e.what());
        ctx.failed->fetch_add(1);
    } catch (const InfeasibleConstraintError& e) {
        ctx.manifest->record_failed(id, e.what());
        ctx.failed->fetch_add(1);
    } catch (const DependencyError& e) {
        ctx.manifest->record_failed(id, e.what());
        ctx.failed->fetch_add(1);
    }
}

void run_plain_training(const SweepContext& ctx, ExpMethod method, TrainMethod train_method,
                        double lambda, double knob, std::int64_t seed) {
    const std::string id = run_id(method, knob, seed);
    execute_run(ctx, id, [&] {
        const TrainConfig tc = make_train_config(*ctx.config, train_method, lambda, seed);
        const TwoHeadModel model = train(*ctx.ds, tc);
        return write_model_artifacts(ctx, id, model, *ctx.ds);
    });
}

void run_massaging(const SweepContext& ctx, double frac, std::int64_t seed) {
    const std::string id = run_id(ExpMethod::Massaging, frac, seed);
    execute_run(ctx, id, [&] {
        const std::string unc_id = run_id(ExpMethod::Unconstrained, 0.0, seed);
        const fs::path scores_path = ctx.out / ("scores/" + unc_id + "_train.csv");
        if (!fs::exists(scores_path))
            throw DependencyError("missing unconstrained train scores for run " + id);
        const StoredScores stored = read_scores_csv(scores_path.string(), Split::Train);
        auto [massaged, plan] = massage(*ctx.ds, stored.scores, frac);

        std::vector<std::string> files;
        const std::string plan_rel = "plans/" + id + ".json";
        write_json_atomic(nlohmann::json{{"M", plan.M},
                                         {"lambda_frac", plan.lambda_frac},
                                         {"requested", plan.requested},
                                         {"applied", plan.applied},
                                         {"reduced", plan.reduced},
                                         {"advantaged_group", plan.advantaged_group},
                                         {"promote_idx", plan.promote_idx},
                                         {"demote_idx", plan.demote_idx}},
                          (ctx.out / plan_rel).string());
        files.push_back(plan_rel);

        const TrainConfig tc = make_train_config(*ctx.config, TrainMethod::Unconstrained, 0.0, seed);
        const TwoHeadModel model = train(massaged, tc);
        // evaluation uses the original labels; only train labels were altered
        const std::vector<std::string> more = write_model_artifacts(ctx, id, model, *ctx.ds);
        files.insert(files.end(), more.begin(), more.end());
        return files;
    });
}

void run_two_head(const SweepContext& ctx, std::int64_t seed) {
    const std::string id = run_id(ExpMethod::TwoHead, 0.0, seed);
    execute_run(ctx, id, [&] {
        const TrainConfig tc = make_train_config(*ctx.config, TrainMethod::TwoHead, 0.0, seed);
        const TwoHeadModel model = train(*ctx.ds, tc);
        std::vector<std::string> files = write_model_artifacts(ctx, id, model, *ctx.ds);

        const std::vector<double> bounds = read_bounds_file(ctx, seed);
        const Scores val_scores = score(model, *ctx.ds, Split::Val);
        const Scores test_scores = score(model, *ctx.ds, Split::Test);
        const std::vector<int> s_val = ctx.ds->protected_of(Split::Val);
        const std::vector<int> y_val = ctx.ds->targets_of(Split::Val);
        const std::vector<int> s_test = ctx.ds->protected_of(Split::Test);
        const std::vector<int> y_test = ctx.ds->targets_of(Split::Test);
        for (std::size_t j = 0; j < bounds.size(); ++j) {
            const CombinedClassifier clf =
                combine_grid_search(val_scores, s_val, y_val, bounds[j]);
            const std::string clf_rel = "combined/" + id + "_bound" + std::to_string(j) + ".json";
            write_json_atomic(combined_classifier_to_json(clf), (ctx.out / clf_rel).string());
            files.push_back(clf_rel);
            const FairnessReport report =
                evaluate(predict_combined(test_scores, clf), y_test, s_test, Split::Test);
            const std::string rep_rel = "reports/" + id + "_bound" + std::to_string(j) + ".json";
            write_json_atomic(fairness_report_to_json(report), (ctx.out / rep_rel).string());
            files.push_back(rep_rel);
        }
        return files;
    });
}

void run_lipton(const SweepContext& ctx, std::int64_t seed) {
    const std::string id = run_id(ExpMethod::Lipton, 0.0, seed);
    execute_run(ctx, id, [&] {
        const std::string unc_id = run_id(ExpMethod::Unconstrained, 0.0, seed);
        const fs::path val_path = ctx.out / ("scores/" + unc_id + "_val.csv");
        const fs::path test_path = ctx.out / ("scores/" + unc_id + "_test.csv");
        if (!fs::exists(val_path) || !fs::exists(test_path))
            throw DependencyError("missing unconstrained scores for run " + id);
        const StoredScores val = read_scores_csv(val_path.string(), Split::Val);
        const StoredScores test = read_scores_csv(test_path.string(), Split::Test);

        const std::vector<int> s_val = ctx.ds->protected_of(Split::Val);
        const std::vector<int> y_val = ctx.ds->targets_of(Split::Val);
        const std::vector<int> s_test = ctx.ds->protected_of(Split::Test);
        const std::vector<int> y_test = ctx.ds->targets_of(Split::Test);
        std::vector<double> f_val(val.scores.f_scores.data(),
                                  val.scores.f_scores.data() + val.scores.f_scores.size());
        std::vector<double> f_test(test.scores.f_scores.data(),
                                   test.scores.f_scores.data() + test.scores.f_scores.size());

        std::vector<std::string> files;
        const std::vector<double> bounds = read_bounds_file(ctx, seed);
        for (std::size_t j = 0; j < bounds.size(); ++j) {
            const GroupThresholds th = lipton_thresholds(f_val, s_val, y_val, bounds[j]);
            const std::string th_rel = "thresholds/" + id + "_bound" + std::to_string(j) + ".json";
            write_json_atomic(group_thresholds_to_json(th), (ctx.out / th_rel).string());
            files.push_back(th_rel);
            const FairnessReport report =
                evaluate(predict_thresholds(f_test, s_test, th), y_test, s_test, Split::Test);
            const std::string rep_rel = "reports/" + id + "_bound" + std::to_string(j) + ".json";
            write_json_atomic(fairness_report_to_json(report), (ctx.out / rep_rel).string());
            files.push_back(rep_rel);
        }
        return files;
    });
}

void write_bounds_files(const SweepContext& ctx) {
    const ExperimentConfig& config = *ctx.config;
    for (std::int64_t seed : config.seeds) {
        std::vector<double> bounds = config.ddp_bounds;
        if (bounds.empty()) {
            // 20 equidistant constraints between perfect fairness and the
            // unconstrained classifier's validation disparity, both endpoints
            // included. "Perfect" is taken at sample granularity: one decision
            // step moves an empirical rate by 1/n_s, so bounds below
            // 2/min(n0,n1) are statistically indistinguishable from zero and
            // admit only constant classifiers.
            const std::string unc_id = run_id(ExpMethod::Unconstrained, 0.0, seed);
            const fs::path val_path = ctx.out / ("scores/" + unc_id + "_val.csv");
            if (!fs::exists(val_path))
                throw DependencyError("missing unconstrained scores for bound derivation, seed " +
                                      std::to_string(seed));
            const StoredScores val = read_scores_csv(val_path.string(), Split::Val);
            const std::vector<int> s_val = ctx.ds->protected_of(Split::Val);
            const double unc_ddp = ddp(predict_sign(val.scores.f_scores), s_val);
            std::size_t n1 = 0;
            for (int v : s_val) n1 += v == 1;
            const double floor = 2.0 / static_cast<double>(std::min(n1, s_val.size() - n1));
            bounds = linspace_inclusive(floor, std::max(std::abs(unc_ddp), floor),
                                        config.n_ddp_bounds);
        }
        write_json_atomic(nlohmann::json{{"bounds", bounds}},
                          (ctx.out / ("bounds/bounds_seed" + std::to_string(seed) + ".json")).string());
    }
}

void write_tradeoff_csv(const SweepContext& ctx) {
    const ExperimentConfig& config = *ctx.config;
    std::ostringstream out;
    out << "method,lambda_or_bound,accuracy,ddp,split\n";
    auto emit = [&](const std::string& method, double knob, const std::string& report_rel) {
        const fs::path path = ctx.out / report_rel;
        if (!fs::exists(path)) return;  // failed runs leave no row
        const FairnessReport rep = fairness_report_from_json(read_json(path.string()));
        out << method << ',' << format_double(knob) << ',' << format_double(rep.accuracy) << ','
            << format_double(rep.ddp) << ',' << to_string(rep.split) << '\n';
    };
    for (ExpMethod method : config.methods) {
        switch (method) {
            case ExpMethod::Unconstrained:
                for (std::int64_t seed : config.seeds)
                    emit("unconstrained", 0.0,
                         "reports/" + run_id(method, 0.0, seed) + ".json");
                break;
            case ExpMethod::RegSquared:
            case ExpMethod::RegAbs:
                for (double lambda : config.lambda_grid)
                    for (std::int64_t seed : config.seeds)
                        emit(to_string(method), lambda,
                             "reports/" + run_id(method, lambda, seed) + ".json");
                break;
            case ExpMethod::Massaging:
                for (double frac : config.massaging_grid)
                    for (std::int64_t seed : config.seeds)
                        emit("massaging", frac, "reports/" + run_id(method, frac, seed) + ".json");
                break;
            case ExpMethod::TwoHead:
            case ExpMethod::Lipton: {
                for (std::int64_t seed : config.seeds) {
                    const fs::path bounds_path =
                        ctx.out / ("bounds/bounds_seed" + std::to_string(seed) + ".json");
                    if (!fs::exists(bounds_path)) continue;
                    const std::vector<double> bounds =
                        read_json(bounds_path.string()).at("bounds").get<std::vector<double>>();
                    for (std::size_t j = 0; j < bounds.size(); ++j)
                        emit(to_string(method), bounds[j],
                             "reports/" + run_id(method, 0.0, seed) + "_bound" +
                                 std::to_string(j) + ".json");
                }
                break;
            }
        }
    }
    const fs::path path = ctx.out / "tradeoff.csv";
    const fs::path tmp = ctx.out / "tradeoff.csv.tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot write '" + tmp.string() + "'");
        f << out.str();
    }
    fs::rename(tmp, path);
}

bool method_listed(const ExperimentConfig& config, ExpMethod m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
}

}  // namespace

CommandSummary cmd_generate(const ExperimentConfig& config) {
    config.validate();
    const fs::path out(config.output_dir);
    fs::create_directories(out);
    const Dataset ds = load_dataset(config);
    save_csv(ds, (out / "dataset.csv").string());
    nlohmann::json meta;
    meta["config_hash"] = config.config_hash();
    meta["tool_version"] = kToolVersion;
    meta["n"] = ds.n();
    meta["dim"] = ds.dim();
    meta["dataset"] = config.to_json().at("dataset");
    write_json_atomic(meta, (out / "dataset_meta.json").string());
    write_json_atomic(config.to_json(), (out / "config_echo.json").string());
    return CommandSummary{};
}

CommandSummary cmd_sweep(const ExperimentConfig& config, int jobs) {
    config.validate();
    const fs::path out(config.output_dir);
    for (const char* sub : {"", "models", "scores", "reports", "combined", "thresholds", "bounds",
                            "plans"})
        fs::create_directories(out / sub);
    write_json_atomic(config.to_json(), (out / "config_echo.json").string());

    const Dataset ds = load_dataset(config);
    ds.validate_for_training();
    Manifest manifest(out, config.config_hash());

    std::atomic<int> executed{0}, skipped{0}, failed{0};
    SweepContext ctx{&config, &ds, out, &manifest, &executed, &skipped, &failed};

    const bool wants_bounds =
        method_listed(config, ExpMethod::TwoHead) || method_listed(config, ExpMethod::Lipton);
    const bool need_unconstrained =
        method_listed(config, ExpMethod::Unconstrained) ||
        method_listed(config, ExpMethod::Massaging) || method_listed(config, ExpMethod::Lipton) ||
        (wants_bounds && config.ddp_bounds.empty());

    if (need_unconstrained) {
        std::vector<std::function<void()>> phase1;
        for (std::int64_t seed : config.seeds)
            phase1.push_back([&ctx, seed] {
                run_plain_training(ctx, ExpMethod::Unconstrained, TrainMethod::Unconstrained, 0.0,
                                   0.0, seed);
            });
        run_parallel(phase1, jobs);
    }
    if (wants_bounds) write_bounds_files(ctx);

    std::vector<std::function<void()>> phase2;
    for (ExpMethod method : config.methods) {
        switch (method) {
            case ExpMethod::Unconstrained:
                break;  // phase 1
            case ExpMethod::RegSquared:
            case ExpMethod::RegAbs:
                for (double lambda : config.lambda_grid)
                    for (std::int64_t seed : config.seeds)
                        phase2.push_back([&ctx, method, lambda, seed] {
                            run_plain_training(ctx, method,
                                               method == ExpMethod::RegSquared
                                                   ? TrainMethod::RegSquared
                                                   : TrainMethod::RegAbs,
                                               lambda, lambda, seed);
                        });
                break;
            case ExpMethod::Massaging:
                for (double frac : config.massaging_grid)
                    for (std::int64_t seed : config.seeds)
                        phase2.push_back([&ctx, frac, seed] { run_massaging(ctx, frac, seed); });
                break;
            case ExpMethod::TwoHead:
                for (std::int64_t seed : config.seeds)
                    phase2.push_back([&ctx, seed] { run_two_head(ctx, seed); });
                break;
            case ExpMethod::Lipton:
                for (std::int64_t seed : config.seeds)
                    phase2.push_back([&ctx, seed] { run_lipton(ctx, seed); });
                break;
        }
    }
    run_parallel(phase2, jobs);

    write_tradeoff_csv(ctx);
    manifest.save();

    CommandSummary summary;
    summary.executed_runs = executed.load();
    summary.skipped_runs = skipped.load();
    summary.failed_runs = failed.load();
    return summary;
}

// ---------------------------------------------------------------------------
// Table 1
// ---------------------------------------------------------------------------

CommandSummary cmd_table1(const ExperimentConfig& config, double reduction) {
    config.validate();
    if (reduction != 0.5 && reduction != 0.8)
        throw ValidationError("table1: reduction must be 0.5 or 0.8");
    const fs::path out(config.output_dir);
    fs::create_directories(out);
    Manifest manifest(out, config.config_hash());

    auto report_at = [&](const std::string& rel) -> std::optional<FairnessReport> {
        const fs::path path = out / rel;
        if (!fs::exists(path)) return std::nullopt;
        return fairness_report_from_json(read_json(path.string()));
    };

    std::ostringstream body;
    body << "method,seed,accuracy\n";
    for (ExpMethod method : config.methods) {
        if (method == ExpMethod::Unconstrained) continue;
        for (std::int64_t seed : config.seeds) {
            const std::string unc_id = run_id(ExpMethod::Unconstrained, 0.0, seed);
            const auto unc = report_at("reports/" + unc_id + ".json");
            if (!unc) throw DependencyError("table1: missing run " + unc_id);
            // A perfectly fair unconstrained classifier makes any reduction
            // vacuous: every candidate qualifies.
            const double threshold = std::abs(unc->ddp) == 0.0
                                         ? std::numeric_limits<double>::infinity()
                                         : (1.0 - reduction) * std::abs(unc->ddp);

            std::vector<std::string> pool;
            switch (method) {
                case ExpMethod::RegSquared:
                case ExpMethod::RegAbs:
                    for (double lambda : config.lambda_grid)
                        pool.push_back("reports/" + run_id(method, lambda, seed) + ".json");
                    break;
                case ExpMethod::Massaging:
                    for (double frac : config.massaging_grid)
                        pool.push_back("reports/" + run_id(method, frac, seed) + ".json");
                    break;
                case ExpMethod::TwoHead:
                case ExpMethod::Lipton: {
                    const fs::path bounds_path =
                        out / ("bounds/bounds_seed" + std::to_string(seed) + ".json");
                    if (!fs::exists(bounds_path))
                        throw DependencyError("table1: missing bounds for seed " +
                                              std::to_string(seed));
                    const auto bounds =
                        read_json(bounds_path.string()).at("bounds").get<std::vector<double>>();
                    for (std::size_t j = 0; j < bounds.size(); ++j)
                        pool.push_back("reports/" + run_id(method, 0.0, seed) + "_bound" +
                                       std::to_string(j) + ".json");
                    break;
                }
                default:
                    break;
            }

            bool any_artifact = false;
            bool found = false;
            double best_acc = 0.0;
            for (const std::string& rel : pool) {
                const auto rep = report_at(rel);
                if (!rep) continue;
                any_artifact = true;
                if (std::abs(rep->ddp) <= threshold && (!found || rep->accuracy > best_acc)) {
                    found = true;
                    best_acc = rep->accuracy;
                }
            }
            if (!any_artifact)
                throw DependencyError("table1: no sweep artifacts for " +
                                      run_id(method, pool.empty() ? 0.0 : 0.0, seed) +
                                      " (run cmd_sweep first)");
            body << to_string(method) << ',' << seed << ','
                 << (found ? format_double(best_acc) : std::string("X")) << '\n';
        }
    }

    const int pct = static_cast<int>(std::lround(reduction * 100.0));
    const fs::path path = out / ("table1_r" + std::to_string(pct) + ".csv");
    const fs::path tmp = out / ("table1_r" + std::to_string(pct) + ".csv.tmp");
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot write '" + tmp.string() + "'");
        f << body.str();
    }
    fs::rename(tmp, path);
    return CommandSummary{};
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

namespace {

nlohmann::json reconstruction_to_json(const ReconstructionResult& r, const char* c1_name,
                                      const char* c2_name) {
    return nlohmann::json{{c1_name, json_double(r.c1)},
                          {c2_name, json_double(r.c2)},
                          {"agreement", r.agreement},
                          {"baseline_agreement", json_double(r.baseline_agreement)},
                          {"degenerate", r.degenerate},
                          {"used_fallback", r.used_fallback},
                          {"converged", r.converged}};
}

struct AuditInputs {
    const ExperimentConfig* config;
    const Dataset* ds;
    fs::path out;
};

Eigen::VectorXd stored_f(const AuditInputs& in, const std::string& id, Split split) {
    const fs::path path = in.out / ("scores/" + id + "_" + to_string(split) + ".csv");
    if (!fs::exists(path)) throw DependencyError("audit: missing run " + id);
    return read_scores_csv(path.string(), split).scores.f_scores;
}

Scores stored_scores(const AuditInputs& in, const std::string& id, Split split) {
    const fs::path path = in.out / ("scores/" + id + "_" + to_string(split) + ".csv");
    if (!fs::exists(path)) throw DependencyError("audit: missing run " + id);
    return read_scores_csv(path.string(), split).scores;
}

void write_embedding_csv(const std::string& path, const Eigen::MatrixXd& z) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot write '" + tmp + "'");
        for (Eigen::Index j = 0; j < z.cols(); ++j) f << (j ? "," : "") << 'z' << j;
        f << '\n';
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            for (Eigen::Index j = 0; j < z.cols(); ++j)
                f << (j ? "," : "") << format_double(z(i, j));
            f << '\n';
        }
    }
    fs::rename(tmp, path);
}

void audit_one(const AuditInputs& in, ExpMethod method, std::int64_t seed) {
    const ExperimentConfig& config = *in.config;
    const Dataset& ds = *in.ds;
    const std::vector<double>& knobs =
        method == ExpMethod::Massaging ? config.massaging_grid : config.lambda_grid;

    nlohmann::json out_json;
    out_json["format"] = "fairlens-audit";
    out_json["version"] = 1;
    out_json["method"] = to_string(method);
    out_json["seed"] = seed;
    out_json["tool_version"] = kToolVersion;

    // Swept models for this (method, seed)
    std::vector<TwoHeadModel> models;
    for (double knob : knobs) {
        const std::string id = run_id(method, knob, seed);
        const fs::path path = in.out / ("models/" + id + ".json");
        if (!fs::exists(path)) throw DependencyError("audit: missing run " + id);
        models.push_back(load_model(path.string()));
    }

    // Awareness probe across the sweep
    try {
        std::vector<LambdaModel> lambda_models;
        for (std::size_t k = 0; k < models.size(); ++k)
            lambda_models.push_back(LambdaModel{knobs[k], &models[k]});
        const AwarenessCurve curve = probe_awareness(lambda_models, ds);
        out_json["awareness"] = {
            {"lambdas", curve.lambdas},
            {"probe_accuracies", curve.probe_accuracies},
            {"target_accuracies", curve.target_accuracies},
            {"kept_mask", curve.kept_mask},
            {"constant_accuracy", curve.constant_accuracy},
            {"unconstrained_accuracy", curve.unconstrained_accuracy},
            {"kendall",
             {{"tau", curve.kendall.tau},
              {"p_value", curve.kendall.p_value},
              {"n_pairs", curve.kendall.n_pairs},
              {"method",
               curve.kendall.method == PValueMethod::Exact ? "exact" : "normal_approx"}}}};
    } catch (const InsufficientDataError& e) {
        out_json["awareness"] = {{"error", {{"type", "insufficient_data"}, {"message", e.what()}}}};
    } catch (const UndefinedCorrelationError& e) {
        out_json["awareness"] = {
            {"error", {{"type", "undefined_correlation"}, {"message", e.what()}}}};
    } catch (const ArgumentError& e) {
        out_json["awareness"] = {{"error", {{"type", "argument"}, {"message", e.what()}}}};
    }

    // Shared inputs for reconstruction and counterfactuals
    const std::string two_head_id = run_id(ExpMethod::TwoHead, 0.0, seed);
    const std::string unc_id = run_id(ExpMethod::Unconstrained, 0.0, seed);
    const Scores th_val = stored_scores(in, two_head_id, Split::Val);
    const Scores th_test = stored_scores(in, two_head_id, Split::Test);
    const std::vector<int> unc_val_preds = predict_sign(stored_f(in, unc_id, Split::Val));
    const std::vector<int> unc_test_preds = predict_sign(stored_f(in, unc_id, Split::Test));

    // Reseed baselines from stored decisions across all configured seeds
    auto preds_across_seeds = [&](ExpMethod m, double knob) {
        std::vector<std::vector<int>> preds;
        for (std::int64_t s : config.seeds)
            preds.push_back(predict_sign(stored_f(in, run_id(m, knob, s), Split::Test)));
        return preds;
    };
    const double unc_baseline_disagreement =
        config.seeds.size() >= 2 ? mean_pairwise_disagreement(preds_across_seeds(
                                       ExpMethod::Unconstrained, 0.0))
                                 : std::numeric_limits<double>::quiet_NaN();

    nlohmann::json reconstruction = nlohmann::json::array();
    nlohmann::json region = nlohmann::json::array();
    for (std::size_t k = 0; k < knobs.size(); ++k) {
        const std::string fair_id = run_id(method, knobs[k], seed);
        const Eigen::VectorXd fair_val_f = stored_f(in, fair_id, Split::Val);
        const Eigen::VectorXd fair_test_f = stored_f(in, fair_id, Split::Test);
        const std::vector<int> fair_val_preds = predict_sign(fair_val_f);
        const std::vector<int> fair_test_preds = predict_sign(fair_test_f);

        ReconstructionResult rec =
            reconstruct_fair(th_val, fair_val_preds, th_test, fair_test_preds);
        if (config.seeds.size() >= 2)
            rec.baseline_agreement =
                1.0 - mean_pairwise_disagreement(preds_across_seeds(method, knobs[k]));

        ReconstructionResult recov =
            recover_unconstrained(fair_val_f, th_val.g_scores, unc_val_preds, fair_test_f,
                                  th_test.g_scores, unc_test_preds);
        if (config.seeds.size() >= 2) recov.baseline_agreement = 1.0 - unc_baseline_disagreement;

        reconstruction.push_back(
            nlohmann::json{{"lambda", knobs[k]},
                           {"fair_from_heads", reconstruction_to_json(rec, "a1", "a2")},
                           {"unconstrained_from_fair", reconstruction_to_json(recov, "b1", "b2")}});

        const RegionResult reg =
            disadvantaged_region(stored_f(in, unc_id, Split::Test), th_test.g_scores, recov);
        region.push_back(nlohmann::json{{"lambda", knobs[k]},
                                        {"b1", json_double(recov.c1)},
                                        {"b2", json_double(recov.c2)},
                                        {"n", th_test.g_scores.size()},
                                        {"count", reg.indices.size()},
                                        {"indices", reg.indices},
                                        {"g_near_binary_fraction", reg.g_near_binary_fraction}});
    }
    out_json["reconstruction"] = std::move(reconstruction);
    out_json["region"] = std::move(region);

    // Counterfactual flips across the bound sweep of the two-head model
    nlohmann::json counterfactual = nlohmann::json::array();
    const fs::path bounds_path = in.out / ("bounds/bounds_seed" + std::to_string(seed) + ".json");
    if (!fs::exists(bounds_path))
        throw DependencyError("audit: missing bounds for seed " + std::to_string(seed));
    const auto bounds = read_json(bounds_path.string()).at("bounds").get<std::vector<double>>();
    const std::vector<int> s_test = ds.protected_of(Split::Test);
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        const fs::path clf_path =
            in.out / ("combined/" + two_head_id + "_bound" + std::to_string(j) + ".json");
        if (!fs::exists(clf_path)) throw DependencyError("audit: missing run " + two_head_id);
        const CombinedClassifier clf = combined_classifier_from_json(read_json(clf_path.string()));
        const CounterfactualReport rep =
            counterfactual_flips(th_test.f_scores, th_test.g_scores, s_test, clf);
        counterfactual.push_back(nlohmann::json{
            {"bound", bounds[j]},
            {"a1", clf.a1},
            {"a2", clf.a2},
            {"flip_fraction_total", rep.flip_fraction_total},
            {"flips_0to1_group", rep.flips_0to1_group},
            {"flips_1to0_group", rep.flips_1to0_group},
            {"medians", rep.medians},
            {"group_sizes", rep.group_sizes}});
    }
    out_json["counterfactual"] = std::move(counterfactual);

    // Frozen last-layer exports for external visualization
    for (std::size_t k = 0; k < knobs.size(); ++k) {
        const std::string id = run_id(method, knobs[k], seed);
        write_embedding_csv((in.out / ("embeddings/" + id + "_test.csv")).string(),
                            last_layer(models[k], ds, Split::Test));
    }

    write_json_atomic(out_json,
                      (in.out / ("audit/" + to_string(method) + "_seed" + std::to_string(seed) +
                                 ".json")).string());
}

}  // namespace

CommandSummary cmd_audit(const ExperimentConfig& config, int jobs) {
    config.validate();
    const fs::path out(config.output_dir);
    Manifest manifest(out, config.config_hash());
    fs::create_directories(out / "audit");
    fs::create_directories(out / "embeddings");

    const Dataset ds = load_dataset(config);
    ds.validate_for_training();
    AuditInputs in{&config, &ds, out};

    std::vector<std::function<void()>> tasks;
    for (ExpMethod method : config.methods) {
        if (method != ExpMethod::RegSquared && method != ExpMethod::RegAbs &&
            method != ExpMethod::Massaging)
            continue;
        for (std::int64_t seed : config.seeds)
            tasks.push_back([&in, method, seed] { audit_one(in, method, seed); });
    }
    run_parallel(tasks, jobs);
    return CommandSummary{};
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

CommandSummary cmd_tradeoff_plot_data(const ExperimentConfig& config) {
    config.validate();
    const fs::path out(config.output_dir);
    const fs::path tradeoff = out / "tradeoff.csv";
    if (!fs::exists(tradeoff))
        throw DependencyError("tradeoff-plot-data: missing tradeoff.csv (run cmd_sweep first)");
    const std::vector<TradeoffRow> rows = read_tradeoff_csv(tradeoff.string());

    struct Agg {
        int n = 0;
        double acc_sum = 0, acc_min = 0, acc_max = 0;
        double ddp_sum = 0, ddp_min = 0, ddp_max = 0;
    };
    std::vector<std::tuple<std::string, double, std::string>> order;
    std::map<std::tuple<std::string, double, std::string>, Agg> aggs;
    for (const TradeoffRow& row : rows) {
        const auto key = std::make_tuple(row.method, row.lambda_or_bound, row.split);
        auto it = aggs.find(key);
        if (it == aggs.end()) {
            order.push_back(key);
            Agg a;
            a.n = 1;
            a.acc_sum = a.acc_min = a.acc_max = row.accuracy;
            a.ddp_sum = a.ddp_min = a.ddp_max = row.ddp;
            aggs.emplace(key, a);
        } else {
            Agg& a = it->second;
            ++a.n;
            a.acc_sum += row.accuracy;
            a.acc_min = std::min(a.acc_min, row.accuracy);
            a.acc_max = std::max(a.acc_max, row.accuracy);
            a.ddp_sum += row.ddp;
            a.ddp_min = std::min(a.ddp_min, row.ddp);
            a.ddp_max = std::max(a.ddp_max, row.ddp);
        }
    }

    fs::create_directories(out / "plots");
    const fs::path path = out / "plots/tradeoff_plot.csv";
    const fs::path tmp = out / "plots/tradeoff_plot.csv.tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot write '" + tmp.string() + "'");
        f << "method,lambda_or_bound,split,n,accuracy_mean,accuracy_min,accuracy_max,"
             "ddp_mean,ddp_min,ddp_max\n";
        for (const auto& key : order) {
            const Agg& a = aggs.at(key);
            f << std::get<0>(key) << ',' << format_double(std::get<1>(key)) << ','
              << std::get<2>(key) << ',' << a.n << ','
              << format_double(a.acc_sum / a.n) << ',' << format_double(a.acc_min) << ','
              << format_double(a.acc_max) << ',' << format_double(a.ddp_sum / a.n) << ','
              << format_double(a.ddp_min) << ',' << format_double(a.ddp_max) << '\n';
        }
    }
    fs::rename(tmp, path);
    return CommandSummary{};
}

}  // namespace fairlens
