#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairlens/audit.hpp"
#include "fairlens/dataset.hpp"
#include "fairlens/fairness.hpp"
#include "fairlens/nn.hpp"

namespace fairlens {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ExpMethod { Unconstrained, RegSquared, RegAbs, Massaging, TwoHead, Lipton };

std::string to_string(ExpMethod m);
ExpMethod exp_method_from_string(const std::string& s);

struct CsvRef {
    std::string path;
    std::string target_col;
    std::string protected_col;
    std::optional<std::string> split_col;
    std::int64_t split_seed = 0;
};

/// Configuration of one experiment: dataset source, method list, sweep grids
/// and training hyperparameters. Defaults mirror the standard sweep.
struct ExperimentConfig {
    std::optional<SyntheticSpec> synthetic;
    std::optional<CsvRef> csv;
    std::vector<ExpMethod> methods = {ExpMethod::Unconstrained, ExpMethod::RegSquared,
                                      ExpMethod::TwoHead, ExpMethod::Lipton};
    std::vector<double> lambda_grid = {0, 0.1, 0.5, 1, 2, 3, 4, 5, 10, 15, 20, 30};
    std::vector<double> massaging_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> ddp_bounds;  // empty: derive n_ddp_bounds equidistant per seed
    int n_ddp_bounds = 20;
    std::vector<std::int64_t> seeds = {0, 1, 2, 3, 4};
    std::string output_dir = "fairlens_out";
    TrainConfig train;

    void validate() const;
    nlohmann::json to_json() const;  // all defaults inlined
    static ExperimentConfig from_json(const nlohmann::json& j);
    /// Reads a config file and applies the FAIRLENS_OUT override.
    static ExperimentConfig load(const std::string& path);
    /// Hash over every semantically meaningful field (output_dir excluded).
    std::string config_hash() const;
};

Dataset load_dataset(const ExperimentConfig& config);

struct CommandSummary {
    int executed_runs = 0;
    int skipped_runs = 0;
    int failed_runs = 0;
};

CommandSummary cmd_generate(const ExperimentConfig& config);
CommandSummary cmd_sweep(const ExperimentConfig& config, int jobs = 1);
CommandSummary cmd_table1(const ExperimentConfig& config, double reduction);
CommandSummary cmd_audit(const ExperimentConfig& config, int jobs = 1);
CommandSummary cmd_tradeoff_plot_data(const ExperimentConfig& config);

// -------------------------------------------------------------------------
// Artifact readers/writers (all emitted files round-trip through these)
// -------------------------------------------------------------------------

struct StoredScores {
    std::vector<std::size_t> row_index;  // dataset row order of the split
    Scores scores;
};

void write_scores_csv(const std::string& path, const std::vector<std::size_t>& row_index,
                      const Scores& scores);
StoredScores read_scores_csv(const std::string& path, Split split);

struct TradeoffRow {
    std::string method;
    double lambda_or_bound = 0.0;
    double accuracy = 0.0;
    double ddp = 0.0;
    std::string split;
};

std::vector<TradeoffRow> read_tradeoff_csv(const std::string& path);

struct Table1Row {
    std::string method;
    std::int64_t seed = 0;
    bool failed = false;     // rendered as the literal "X"
    double accuracy = 0.0;   // valid when !failed
};

std::vector<Table1Row> read_table1_csv(const std::string& path);

std::string run_id(ExpMethod method, double knob, std::int64_t seed);

}  // namespace fairlens
