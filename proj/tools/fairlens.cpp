#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "fairlens/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDependencyError = 3;
constexpr int kExitRunFailures = 4;

void print_summary(const char* command, const fairlens::CommandSummary& summary) {
    std::printf("%s: executed=%d skipped=%d failed=%d\n", command, summary.executed_runs,
                summary.skipped_runs, summary.failed_runs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairlens: train small fair classifiers and audit them for disparate treatment"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 1;
    bool resume = false;  // skipping intact runs is always on; flag kept for explicitness
    double reduction = 0.5;

    app.add_option("--config", config_path, "experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--jobs", jobs, "worker threads for independent runs")->check(CLI::PositiveNumber);
    app.add_flag("--resume", resume, "reuse intact artifacts (default behavior)");

    CLI::App* generate = app.add_subcommand("generate", "materialize the dataset as CSV");
    CLI::App* sweep = app.add_subcommand("sweep", "train the method/lambda/seed grid");
    CLI::App* table1 =
        app.add_subcommand("table1", "per-method accuracy under a disparity-reduction constraint");
    table1->add_option("--reduction", reduction, "required disparity reduction")
        ->check(CLI::IsMember({0.5, 0.8}))
        ->required();
    CLI::App* audit = app.add_subcommand("audit", "probe/reconstruction/counterfactual audit");
    CLI::App* plot = app.add_subcommand("tradeoff-plot-data", "aggregate tradeoff.csv for plotting");
    for (CLI::App* sub : {generate, sweep, table1, audit, plot}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfigError;
    }

    try {
        const fairlens::ExperimentConfig config = fairlens::ExperimentConfig::load(config_path);
        fairlens::CommandSummary summary;
        if (generate->parsed()) {
            summary = fairlens::cmd_generate(config);
            print_summary("generate", summary);
        } else if (sweep->parsed()) {
            summary = fairlens::cmd_sweep(config, jobs);
            print_summary("sweep", summary);
        } else if (table1->parsed()) {
            summary = fairlens::cmd_table1(config, reduction);
            print_summary("table1", summary);
        } else if (audit->parsed()) {
            summary = fairlens::cmd_audit(config, jobs);
            print_summary("audit", summary);
        } else if (plot->parsed()) {
            summary = fairlens::cmd_tradeoff_plot_data(config);
            print_summary("tradeoff-plot-data", summary);
        }
        return summary.failed_runs > 0 ? kExitRunFailures : kExitOk;
    } catch (const fairlens::DependencyError& e) {
        std::fprintf(stderr, "dependency error: %s\n", e.what());
        return kExitDependencyError;
    } catch (const fairlens::ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const fairlens::ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const fairlens::SchemaError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const fairlens::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
