// Experiment orchestration: config schema, dataset assembly, seeded training
// runs, score files, metrics JSON, aggregate tables, heatmaps and sample
// grids.  Everything the CLI verbs do lives here so it is callable (and
// testable) as a library.
//
// Per-seed layout under <out_dir>/seed_<s>/:
//   checkpoint_uqgan.uqck, history_uqgan.csv      (likewise per baseline row)
//   scores_<row>.jsonl, metrics_<row>.json
//   heatmap_epistemic.{ppm,txt}, heatmap_aleatoric.{ppm,txt}, ooc_points.txt
//   samples.pnm                                    (image models)
// plus <out_dir>/table.txt and <out_dir>/table.json across seeds.

#pragma once

#include "uqgan/baselines.hpp"
#include "uqgan/config.hpp"
#include "uqgan/data.hpp"
#include "uqgan/image_io.hpp"
#include "uqgan/metrics.hpp"
#include "uqgan/models.hpp"
#include "uqgan/trainer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uqgan::experiment {

using Mat = ova::Mat;

// ---------------------------------------------------------------------------
// Score files: one JSON record per evaluated example.

struct ScoreRecord {
    std::string tag;       // "test" or "ood/<name>"
    int label = -1;        // true label; -1 for OoD examples
    int pred = -1;         // argmax prediction
    double conf = 0.0;     // max posterior probability
    double in_dist = 0.0;  // in-distribution score, higher = in-distribution
    double entropy = 0.0;  // predictive entropy, nats
};

void write_score_file(const std::string& path,
                      const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_file(const std::string& path);

// Accuracy / AUROC S/F / ECE over tag "test"; OoD metrics per "ood/*" tag and
// combined over their union.  The report is a pure function of the records.
metrics::MetricsReport report_from_records(const std::vector<ScoreRecord>& records);

void write_metrics_json(const std::string& path, const metrics::MetricsReport& r);
metrics::MetricsReport read_metrics_json(const std::string& path);

// ---------------------------------------------------------------------------
// Configuration.

struct ExperimentConfig {
    std::string out_dir;
    std::vector<std::uint64_t> seeds{0};
    std::vector<baselines::BaselineKind> baseline_list;
    bool eval_mc_dropout = false;
    int mc_passes = 50;

    // dataset
    std::string dataset_kind;  // two_gaussians | two_moons | gaussian_grid | container
    std::uint64_t data_seed = 0;
    int n_per_class = 1000;
    int n_test_per_class = 0;  // 0 = same as n_per_class
    double separation = 4.0;   // two_gaussians
    double variance = 1.0;
    double moons_noise = 0.1;  // two_moons
    int grid_n_per_blob = 200;  // gaussian_grid
    data::GridLabels grid_labels = data::GridLabels::per_blob_9;
    double grid_spacing = 4.0;
    double grid_sigma = 0.5;
    double ood_ring_radius = 0.0;  // toy OoD ring; 0 = auto
    int ood_n = 0;                 // 0 = match test-set size
    std::string train_path;       // container datasets
    std::string test_path;
    std::vector<int> in_classes;  // container split; empty = all in-dist

    models::ArchitectureSpec arch;
    trainer::TrainingConfig train_cfg;  // seed field overridden per run

    int heatmap_resolution = 200;
    bool has_extent = false;  // explicit heatmap extent given
    image_io::Extent extent;
    int samples_per_class = 8;
    std::vector<int> sample_classes;  // empty = all classes

    // train_cfg with its seed (and h) set for one run.
    trainer::TrainingConfig config_for_seed(std::uint64_t seed) const;
    void validate() const;
};

// Consumes all keys (rejecting unknown ones) and validates.
ExperimentConfig parse_experiment_config(config::Reader& r);
ExperimentConfig load_experiment_config(const std::string& path);

// ---------------------------------------------------------------------------
// Datasets.

struct DatasetBundle {
    data::Dataset train;  // in-distribution training data (split internally)
    data::Dataset test;   // held-out in-distribution test data
    std::map<std::string, data::Dataset> ood;  // named OoD evaluation sets
    data::Dataset ood_train;  // real OoD data for the oracles (may be empty)
};

DatasetBundle build_datasets(const ExperimentConfig& c);

// Priors of the training split exactly as the trainers compute them.
ova::ClassPriors training_priors(const data::Dataset& d, double val_fraction,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scoring trained models.

// Which in-distribution score goes into ScoreRecord::in_dist.
enum class ScoreFlavor { ova_in_dist, max_prob, neg_entropy };

// One-vs-all models: posterior/uncertainty from the balanced-class calculus.
std::vector<ScoreRecord> score_ova_model(models::Classifier& cls,
                                         const ova::ClassPriors& priors,
                                         const Mat& x, const std::vector<int>& labels,
                                         const std::string& tag);

// Softmax models (linear_logits head).
std::vector<ScoreRecord> score_softmax_model(models::Classifier& cls, const Mat& x,
                                             const std::vector<int>& labels,
                                             const std::string& tag,
                                             ScoreFlavor flavor);

// MC-dropout variants: scores from the mean over `passes` stochastic passes.
std::vector<ScoreRecord> score_ova_model_mc(models::Classifier& cls,
                                            const ova::ClassPriors& priors,
                                            const Mat& x,
                                            const std::vector<int>& labels,
                                            const std::string& tag, int passes,
                                            Rng& rng);

// ---------------------------------------------------------------------------
// Per-seed operations (the CLI verbs).

std::string seed_dir(const ExperimentConfig& c, std::uint64_t seed);

// Trains the UQGAN and every configured baseline for one seed; writes
// checkpoints and training histories.  Divergences are rethrown with the seed
// in the message.
void train_seed(const ExperimentConfig& c, const DatasetBundle& b,
                std::uint64_t seed);

// Loads the checkpoints train_seed wrote and produces scores_<row>.jsonl and
// metrics_<row>.json per row; returns the reports keyed by row name.
std::map<std::string, metrics::MetricsReport> evaluate_seed(
    const ExperimentConfig& c, const DatasetBundle& b, std::uint64_t seed);

// Epistemic and aleatoric heatmaps over a grid, ppm + columnar text, with
// training points and generated OoC points overlaid.  2D models only.
void emit_heatmaps(models::Classifier& cls, const ova::ClassPriors& priors,
                   const image_io::Extent& extent, int resolution,
                   const Mat& train_points, const Mat& ooc_points,
                   const std::string& out_prefix);

// Heatmaps + OoC point export for one trained seed (toy models).
void emit_seed_figures(const ExperimentConfig& c, const DatasetBundle& b,
                       std::uint64_t seed);

// rows = classes, columns = samples; deterministic under seed.  Image models
// only.
void emit_sample_grid(models::Generator& gen, models::CAE& cae,
                      const std::vector<int>& classes, int samples_per_class,
                      std::uint64_t seed, const std::string& path);

// ---------------------------------------------------------------------------
// Aggregation.

// "mean (std)" per row and metric over seeds, formatted like the paper's
// tables (two sections: classification, OoD detection; values in percent).
std::string format_table(
    const std::map<std::string, std::vector<metrics::MetricsReport>>& by_row);

// Reads metrics_<row>.json across the seed directories and writes table.txt
// and table.json; returns the formatted text.
std::string write_table(const ExperimentConfig& c);

// Full pipeline: per seed train + evaluate + figures, then the table.
// Returns the output directory.
std::string run_experiment(const ExperimentConfig& c);
std::string run_experiment_file(const std::string& config_path);

}  // namespace uqgan::experiment
