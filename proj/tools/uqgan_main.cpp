// uqgan: experiment runner.  Verbs: train, evaluate, heatmap, samples, table.
//
// Exit codes: 0 success, 2 bad usage or config, 3 invalid argument,
// 4 training divergence, 5 I/O failure, 6 unsupported operation,
// 1 anything else.  Failures print one JSON object to stderr.

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "uqgan/checkpoint.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/experiment.hpp"
#include "uqgan/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace uqgan;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string device = "cpu";
    std::int64_t seed = -1;
    bool has_seed = false;
};

experiment::ExperimentConfig load(const Options& o) {
    if (o.device != "cpu")
        throw UnsupportedModel("only --device cpu is available in this build");
    experiment::ExperimentConfig c = experiment::load_experiment_config(o.config);
    if (!o.out.empty()) c.out_dir = o.out;
    if (o.has_seed) {
        if (o.seed < 0) throw std::invalid_argument("--seed must be >= 0");
        c.seeds = {std::uint64_t(o.seed)};
    }
    c.validate();
    return c;
}

void add_common(CLI::App* cmd, Options& o, bool with_seed = true) {
    cmd->add_option("--config", o.config, "experiment config file")->required();
    cmd->add_option("--out", o.out, "override the configured output directory");
    cmd->add_option("--device", o.device, "compute device (cpu)");
    if (with_seed) {
        CLI::Option* s =
            cmd->add_option("--seed", o.seed, "run only this seed");
        cmd->callback([&o, s] { o.has_seed = s->count() > 0; });
    }
}

void cmd_train(const Options& o) {
    experiment::ExperimentConfig c = load(o);
    fs::create_directories(c.out_dir);
    fs::copy_file(o.config, c.out_dir + "/config_used.cfg",
                  fs::copy_options::overwrite_existing);
    experiment::DatasetBundle b = experiment::build_datasets(c);
    for (std::uint64_t seed : c.seeds) {
        experiment::train_seed(c, b, seed);
        std::cout << "trained seed " << seed << " -> "
                  << experiment::seed_dir(c, seed) << "\n";
    }
}

void cmd_evaluate(const Options& o) {
    experiment::ExperimentConfig c = load(o);
    experiment::DatasetBundle b = experiment::build_datasets(c);
    for (std::uint64_t seed : c.seeds) {
        auto reports = experiment::evaluate_seed(c, b, seed);
        for (const auto& [row, rep] : reports)
            std::cout << "seed " << seed << " " << row << ": accuracy "
                      << rep.accuracy << ", ood auroc " << rep.ood_combined.auroc
                      << "\n";
    }
}

void cmd_heatmap(const Options& o) {
    experiment::ExperimentConfig c = load(o);
    experiment::DatasetBundle b = experiment::build_datasets(c);
    for (std::uint64_t seed : c.seeds) {
        experiment::emit_seed_figures(c, b, seed);
        std::cout << "heatmaps for seed " << seed << " -> "
                  << experiment::seed_dir(c, seed) << "\n";
    }
}

void cmd_samples(const Options& o) {
    experiment::ExperimentConfig c = load(o);
    for (std::uint64_t seed : c.seeds) {
        const std::string dir = experiment::seed_dir(c, seed);
        checkpoint::Checkpoint ck =
            checkpoint::load(dir + "/checkpoint_uqgan.uqck");
        trainer::UqganModels m = trainer::build_models(ck.arch, ck.seed);
        trainer::restore_models(m, ck.groups);
        m.cae->freeze();
        std::vector<int> classes = c.sample_classes;
        if (classes.empty())
            for (int y = 0; y < c.arch.n_classes; ++y) classes.push_back(y);
        experiment::emit_sample_grid(*m.generator, *m.cae, classes,
                                     c.samples_per_class, seed,
                                     dir + "/samples.pnm");
        std::cout << "samples for seed " << seed << " -> " << dir
                  << "/samples.pnm\n";
    }
}

void cmd_table(const Options& o) {
    experiment::ExperimentConfig c = load(o);
    std::cout << experiment::write_table(c);
}

int fail(const std::string& category, int code, const std::string& message) {
    std::cerr << nlohmann::json{{"error", category}, {"message", message}}.dump()
              << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UQGAN experiment runner"};
    app.require_subcommand(1);

    Options train_o, eval_o, heat_o, samples_o, table_o;
    CLI::App* train = app.add_subcommand(
        "train", "train the model and every configured baseline per seed");
    add_common(train, train_o);
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "score checkpoints and write per-seed metrics");
    add_common(evaluate, eval_o);
    CLI::App* heatmap = app.add_subcommand(
        "heatmap", "render uncertainty heatmaps for 2D models");
    add_common(heatmap, heat_o);
    CLI::App* samples = app.add_subcommand(
        "samples", "render generated OoC sample grids for image models");
    add_common(samples, samples_o);
    CLI::App* table = app.add_subcommand(
        "table", "aggregate per-seed metrics into the summary table");
    add_common(table, table_o, /*with_seed=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", 2, e.what());
    }

    try {
        if (train->parsed()) cmd_train(train_o);
        if (evaluate->parsed()) cmd_evaluate(eval_o);
        if (heatmap->parsed()) cmd_heatmap(heat_o);
        if (samples->parsed()) cmd_samples(samples_o);
        if (table->parsed()) cmd_table(table_o);
        return 0;
    } catch (const ConfigError& e) {
        return fail("config", 2, e.what());
    } catch (const TrainingDivergence& e) {
        return fail("training_divergence", 4, e.what());
    } catch (const IoError& e) {
        return fail("io", 5, e.what());
    } catch (const UnsupportedModel& e) {
        return fail("unsupported", 6, e.what());
    } catch (const UndefinedMetric& e) {
        return fail("undefined_metric", 3, e.what());
    } catch (const std::invalid_argument& e) {
        return fail("invalid_argument", 3, e.what());
    } catch (const std::exception& e) {
        return fail("internal", 1, e.what());
    }
}
