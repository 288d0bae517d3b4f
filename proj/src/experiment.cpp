#include "uqgan/experiment.hpp"

#include "uqgan/checkpoint.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/nn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace uqgan::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

json num_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double num_from(const json& j, const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null()) return kNan;
    return j.at(key).get<double>();
}

json ood_to_json(const metrics::OodMetrics& m) {
    return json{{"auroc", num_or_null(m.auroc)},
                {"aupr_in", num_or_null(m.aupr_in)},
                {"aupr_out", num_or_null(m.aupr_out)},
                {"fpr_at_95_tpr", num_or_null(m.fpr_at_95_tpr)}};
}

metrics::OodMetrics ood_from_json(const json& j) {
    metrics::OodMetrics m;
    m.auroc = num_from(j, "auroc");
    m.aupr_in = num_from(j, "aupr_in");
    m.aupr_out = num_from(j, "aupr_out");
    m.fpr_at_95_tpr = num_from(j, "fpr_at_95_tpr");
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Score files.

void write_score_file(const std::string& path,
                      const std::vector<ScoreRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const ScoreRecord& r : records) {
        json j{{"tag", r.tag},       {"label", r.label},
               {"pred", r.pred},     {"conf", num_or_null(r.conf)},
               {"in_dist", num_or_null(r.in_dist)},
               {"entropy", num_or_null(r.entropy)}};
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<ScoreRecord> read_score_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score file '" + path + "'");
    std::vector<ScoreRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            ScoreRecord r;
            r.tag = j.at("tag").get<std::string>();
            r.label = j.at("label").get<int>();
            r.pred = j.at("pred").get<int>();
            r.conf = num_from(j, "conf");
            r.in_dist = num_from(j, "in_dist");
            r.entropy = num_from(j, "entropy");
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": bad score record: " + e.what());
        }
    }
    return records;
}

metrics::MetricsReport report_from_records(
    const std::vector<ScoreRecord>& records) {
    std::vector<int> preds, labels, correct;
    std::vector<double> conf, neg_entropy, test_scores;
    std::map<std::string, std::vector<double>> ood_scores;
    for (const ScoreRecord& r : records) {
        if (r.tag == "test") {
            preds.push_back(r.pred);
            labels.push_back(r.label);
            correct.push_back(r.pred == r.label ? 1 : 0);
            conf.push_back(r.conf);
            neg_entropy.push_back(-r.entropy);
            test_scores.push_back(r.in_dist);
        } else if (r.tag.rfind("ood/", 0) == 0) {
            ood_scores[r.tag.substr(4)].push_back(r.in_dist);
        } else {
            throw std::invalid_argument("score record with unknown tag '" + r.tag +
                                        "'");
        }
    }
    if (preds.empty())
        throw std::invalid_argument("report_from_records: no 'test' records");

    metrics::MetricsReport rep;
    rep.accuracy = metrics::accuracy(preds, labels);
    rep.ece = metrics::ece_from_confidence(conf, correct);
    try {
        rep.auroc_sf = metrics::auroc({neg_entropy, correct});
    } catch (const UndefinedMetric&) {
        rep.auroc_sf = kNan;  // all predictions correct (or all wrong)
    }

    std::vector<double> all_ood;
    for (const auto& [name, scores] : ood_scores) {
        rep.per_ood_dataset[name] = metrics::ood_metrics(test_scores, scores);
        all_ood.insert(all_ood.end(), scores.begin(), scores.end());
    }
    if (!all_ood.empty()) {
        rep.ood_combined = metrics::ood_metrics(test_scores, all_ood);
    } else {
        rep.ood_combined = {kNan, kNan, kNan, kNan};
    }
    return rep;
}

void write_metrics_json(const std::string& path, const metrics::MetricsReport& r) {
    json per = json::object();
    for (const auto& [name, m] : r.per_ood_dataset) per[name] = ood_to_json(m);
    json j{{"accuracy", num_or_null(r.accuracy)},
           {"auroc_sf", num_or_null(r.auroc_sf)},
           {"ece", num_or_null(r.ece)},
           {"ood_combined", ood_to_json(r.ood_combined)},
           {"per_ood_dataset", per}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to '" + path + "'");
}

metrics::MetricsReport read_metrics_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file '" + path + "'");
    try {
        json j = json::parse(in);
        metrics::MetricsReport r;
        r.accuracy = num_from(j, "accuracy");
        r.auroc_sf = num_from(j, "auroc_sf");
        r.ece = num_from(j, "ece");
        r.ood_combined = ood_from_json(j.at("ood_combined"));
        for (const auto& [name, m] : j.at("per_ood_dataset").items())
            r.per_ood_dataset[name] = ood_from_json(m);
        return r;
    } catch (const json::exception& e) {
        throw IoError(path + ": bad metrics JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Configuration.

trainer::TrainingConfig ExperimentConfig::config_for_seed(std::uint64_t seed) const {
    trainer::TrainingConfig tc = train_cfg;
    tc.seed = seed;
    return tc;
}

void ExperimentConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    static const std::set<std::string> kinds{"two_gaussians", "two_moons",
                                             "gaussian_grid", "container"};
    if (!kinds.count(dataset_kind))
        throw ConfigError("unknown dataset.kind '" + dataset_kind + "'");
    if (dataset_kind == "container") {
        if (train_path.empty() || test_path.empty())
            throw ConfigError("container datasets need dataset.train_path and "
                              "dataset.test_path");
    } else {
        if (n_per_class <= 0 || n_test_per_class < 0)
            throw ConfigError("dataset sizes must be positive");
    }
    if (ood_ring_radius < 0.0) throw ConfigError("dataset.ood_ring_radius < 0");
    if (ood_n < 0) throw ConfigError("dataset.ood_n < 0");
    for (baselines::BaselineKind k : baseline_list) {
        if (baselines::requires_ood(k) && dataset_kind == "container" &&
            in_classes.empty())
            throw ConfigError("oracle baselines need dataset.in_classes so an OoD "
                              "training set exists");
    }
    if (mc_passes <= 0) throw ConfigError("eval.mc_passes must be positive");
    if (heatmap_resolution < 2) throw ConfigError("heatmap.resolution < 2");
    if (has_extent) extent.validate();
    if (samples_per_class <= 0) throw ConfigError("samples.per_class < 1");
    for (int cls : sample_classes)
        if (cls < 0 || cls >= arch.n_classes)
            throw ConfigError("samples.classes entry out of range");
    arch.validate();
    train_cfg.validate();
}

ExperimentConfig parse_experiment_config(config::Reader& r) {
    ExperimentConfig c;
    c.out_dir = r.get_string("out_dir");
    c.seeds = r.get_u64_list("seeds", {0});
    for (const std::string& name : r.get_string_list("baselines", {}))
        c.baseline_list.push_back(baselines::baseline_kind_from_string(name));
    c.eval_mc_dropout = r.get_bool("eval.mc_dropout", false);
    c.mc_passes = r.get_int("eval.mc_passes", 50);

    c.dataset_kind = r.get_string("dataset.kind");
    c.data_seed = r.get_u64("dataset.seed", 0);
    c.n_per_class = r.get_int("dataset.n_per_class", 1000);
    c.n_test_per_class = r.get_int("dataset.n_test_per_class", 0);
    c.separation = r.get_double("dataset.separation", 4.0);
    c.variance = r.get_double("dataset.variance", 1.0);
    c.moons_noise = r.get_double("dataset.noise", 0.1);
    c.grid_n_per_blob = r.get_int("dataset.grid_n_per_blob", 200);
    const std::string scheme = r.get_string("dataset.grid_labels", "per_blob_9");
    if (scheme == "per_blob_9")
        c.grid_labels = data::GridLabels::per_blob_9;
    else if (scheme == "grouped_3")
        c.grid_labels = data::GridLabels::grouped_3;
    else
        throw ConfigError("dataset.grid_labels must be per_blob_9 or grouped_3");
    c.grid_spacing = r.get_double("dataset.grid_spacing", 4.0);
    c.grid_sigma = r.get_double("dataset.grid_sigma", 0.5);
    c.ood_ring_radius = r.get_double("dataset.ood_ring_radius", 0.0);
    c.ood_n = r.get_int("dataset.ood_n", 0);
    c.train_path = r.get_string("dataset.train_path", "");
    c.test_path = r.get_string("dataset.test_path", "");
    c.in_classes = r.get_int_list("dataset.in_classes", {});

    // Architecture; per-kind defaults fill whatever the file leaves out.
    c.arch.kind = models::arch_kind_from_string(r.get_string("model.arch"));
    std::vector<int> default_shape{2};
    int default_latent = 2;
    if (c.arch.kind == models::ArchKind::lenet5) {
        default_shape = {1, 28, 28};
        default_latent = 32;
    } else if (c.arch.kind == models::ArchKind::small_resnet) {
        default_shape = {3, 32, 32};
        default_latent = 128;
    }
    c.arch.input_shape = r.get_int_list("model.input_shape", default_shape);
    c.arch.latent_dim = r.get_int("model.latent_dim", default_latent);
    c.arch.noise_dim = r.get_int("model.noise_dim", 0);
    c.arch.dropout_rate = r.get_double("model.dropout", 0.0);
    c.arch.gen_hidden = r.get_int_list("model.gen_hidden", c.arch.gen_hidden);
    c.arch.critic_hidden = r.get_int_list("model.critic_hidden", c.arch.critic_hidden);

    // Class count: fixed by toy datasets, by the split for containers.
    int n_classes = 0;
    if (c.dataset_kind == "two_gaussians" || c.dataset_kind == "two_moons")
        n_classes = 2;
    else if (c.dataset_kind == "gaussian_grid")
        n_classes = c.grid_labels == data::GridLabels::per_blob_9 ? 9 : 3;
    else if (!c.in_classes.empty())
        n_classes = int(c.in_classes.size());
    if (r.has("model.n_classes")) {
        const int given = r.get_int("model.n_classes");
        if (n_classes != 0 && given != n_classes)
            throw ConfigError("model.n_classes = " + std::to_string(given) +
                              " contradicts the dataset (" +
                              std::to_string(n_classes) + " classes)");
        n_classes = given;
    }
    if (n_classes == 0)
        throw ConfigError("model.n_classes required when the dataset does not "
                          "determine it");
    c.arch.n_classes = n_classes;

    trainer::TrainingConfig& t = c.train_cfg;
    t.batch_size = r.get_int("train.batch_size", t.batch_size);
    t.generator_iters = r.get_int("train.generator_iters", t.generator_iters);
    t.inner_steps = r.get_int("train.inner_steps", t.inner_steps);
    t.lr_classifier = r.get_double("train.lr_classifier", t.lr_classifier);
    t.lr_gan = r.get_double("train.lr_gan", t.lr_gan);
    t.lr_floor = r.get_double("train.lr_floor", t.lr_floor);
    t.cae_epochs = r.get_int("train.cae_epochs", t.cae_epochs);
    t.val_fraction = r.get_double("train.val_fraction", t.val_fraction);
    t.eval_interval = r.get_int("train.eval_interval", t.eval_interval);
    t.use_gan = r.get_bool("train.use_gan", t.use_gan);
    t.h.lambda_gp = r.get_double("train.lambda_gp", t.h.lambda_gp);
    t.h.lambda_cl = r.get_double("train.lambda_cl", t.h.lambda_cl);
    t.h.lambda_real = r.get_double("train.lambda_real", t.h.lambda_real);
    t.h.lambda_r = r.get_double("train.lambda_r", t.h.lambda_r);

    c.heatmap_resolution = r.get_int("heatmap.resolution", 200);
    const bool any_extent = r.has("heatmap.xmin") || r.has("heatmap.xmax") ||
                            r.has("heatmap.ymin") || r.has("heatmap.ymax");
    if (any_extent) {
        c.has_extent = true;
        c.extent.xmin = r.get_double("heatmap.xmin");
        c.extent.xmax = r.get_double("heatmap.xmax");
        c.extent.ymin = r.get_double("heatmap.ymin");
        c.extent.ymax = r.get_double("heatmap.ymax");
    }
    c.samples_per_class = r.get_int("samples.per_class", 8);
    c.sample_classes = r.get_int_list("samples.classes", {});

    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    config::Reader r = config::Reader::from_file(path);
    return parse_experiment_config(r);
}

// ---------------------------------------------------------------------------
// Datasets.

namespace {

data::Dataset ring_as_dataset(int n, double radius, std::uint64_t seed) {
    data::Dataset d;
    d.x = data::make_ring(n, radius, seed);
    d.y.assign(std::size_t(n), 0);
    d.shape = {2};
    d.n_classes = 1;
    return d;
}

void check_bundle_matches(const data::Dataset& d,
                          const models::ArchitectureSpec& arch,
                          const std::string& what) {
    if (int(d.x.cols()) != arch.input_dim())
        throw ConfigError(what + ": input width " + std::to_string(d.x.cols()) +
                          " != model input " + std::to_string(arch.input_dim()));
}

}  // namespace

DatasetBundle build_datasets(const ExperimentConfig& c) {
    DatasetBundle b;
    const int n_test = c.n_test_per_class > 0 ? c.n_test_per_class : c.n_per_class;
    double auto_ring = 0.0;
    if (c.dataset_kind == "two_gaussians") {
        b.train = data::make_two_gaussians(c.n_per_class, c.separation, c.variance,
                                           c.data_seed);
        b.test = data::make_two_gaussians(n_test, c.separation, c.variance,
                                          c.data_seed + 1);
        auto_ring = 6.0 * std::sqrt(c.variance);
    } else if (c.dataset_kind == "two_moons") {
        b.train = data::make_two_moons(c.n_per_class, c.moons_noise, c.data_seed);
        b.test = data::make_two_moons(n_test, c.moons_noise, c.data_seed + 1);
        auto_ring = 6.0;
    } else if (c.dataset_kind == "gaussian_grid") {
        b.train = data::make_gaussian_grid(c.grid_n_per_blob, c.grid_labels,
                                           c.grid_spacing, c.grid_sigma, c.data_seed);
        b.test = data::make_gaussian_grid(
            std::max(1, c.grid_n_per_blob / 4), c.grid_labels, c.grid_spacing,
            c.grid_sigma, c.data_seed + 1);
        auto_ring = 2.5 * c.grid_spacing;
    } else {  // container
        data::Dataset train_all = data::load_image_container(c.train_path);
        data::Dataset test_all = data::load_image_container(c.test_path);
        if (!c.in_classes.empty()) {
            data::ClassSplit ts = data::class_split(train_all, c.in_classes);
            data::ClassSplit es = data::class_split(test_all, c.in_classes);
            b.train = std::move(ts.in_dist);
            b.ood_train = std::move(ts.ood);
            b.test = std::move(es.in_dist);
            if (es.ood.size() > 0) b.ood["holdout"] = std::move(es.ood);
        } else {
            b.train = std::move(train_all);
            b.test = std::move(test_all);
        }
        if (b.train.n_classes != c.arch.n_classes)
            throw ConfigError("container provides " +
                              std::to_string(b.train.n_classes) +
                              " classes, model expects " +
                              std::to_string(c.arch.n_classes));
    }

    if (c.dataset_kind != "container") {
        const double radius =
            c.ood_ring_radius > 0.0 ? c.ood_ring_radius : auto_ring;
        const int n_ood = c.ood_n > 0 ? c.ood_n : int(b.test.size());
        b.ood["ring"] = ring_as_dataset(n_ood, radius, c.data_seed + 2);
        b.ood_train = ring_as_dataset(int(b.train.size()), radius, c.data_seed + 3);
    }

    check_bundle_matches(b.train, c.arch, "training data");
    check_bundle_matches(b.test, c.arch, "test data");
    for (const auto& [name, d] : b.ood)
        check_bundle_matches(d, c.arch, "OoD set '" + name + "'");
    return b;
}

ova::ClassPriors training_priors(const data::Dataset& d, double val_fraction,
                                 std::uint64_t seed) {
    auto [train, val] = data::stratified_split(d, val_fraction, seed);
    return data::estimate_priors(train.y, d.n_classes);
}

// ---------------------------------------------------------------------------
// Scoring.

namespace {

// Records from a matrix of one-vs-all in-class probabilities.
std::vector<ScoreRecord> ova_records(const Mat& probs,
                                     const ova::ClassPriors& priors, int n,
                                     const std::vector<int>& labels,
                                     const std::string& tag) {
    Mat c_tilde = ova::transform_in_class(probs, n);
    std::vector<ScoreRecord> out;
    out.reserve(std::size_t(probs.rows()));
    for (Eigen::Index i = 0; i < c_tilde.rows(); ++i) {
        ova::UncertaintyReport rep =
            ova::uncertainty_report(c_tilde.row(i).transpose(), priors);
        ScoreRecord r;
        r.tag = tag;
        r.label = labels.empty() ? -1 : labels[std::size_t(i)];
        r.pred = rep.predicted;
        r.conf = rep.posterior.maxCoeff();
        r.in_dist = rep.in_dist_prob;
        r.entropy = rep.aleatoric_raw;
        out.push_back(std::move(r));
    }
    return out;
}

void check_labels(const Mat& x, const std::vector<int>& labels,
                  const std::string& tag) {
    if (!labels.empty() && Eigen::Index(labels.size()) != x.rows())
        throw std::invalid_argument("scoring '" + tag + "': label count mismatch");
}

}  // namespace

std::vector<ScoreRecord> score_ova_model(models::Classifier& cls,
                                         const ova::ClassPriors& priors,
                                         const Mat& x, const std::vector<int>& labels,
                                         const std::string& tag) {
    if (cls.head() != models::HeadKind::sigmoid_ova)
        throw std::invalid_argument("score_ova_model needs a one-vs-all head");
    check_labels(x, labels, tag);
    return ova_records(cls.predict(x), priors, cls.spec().n_classes, labels, tag);
}

std::vector<ScoreRecord> score_softmax_model(models::Classifier& cls, const Mat& x,
                                             const std::vector<int>& labels,
                                             const std::string& tag,
                                             ScoreFlavor flavor) {
    if (cls.head() != models::HeadKind::linear_logits)
        throw std::invalid_argument("score_softmax_model needs a logits head");
    if (flavor == ScoreFlavor::ova_in_dist)
        throw std::invalid_argument("softmax models have no one-vs-all score");
    check_labels(x, labels, tag);
    Mat logits = cls.predict(x);
    baselines::SoftmaxScores s = baselines::softmax_scores(logits);
    std::vector<ScoreRecord> out;
    out.reserve(std::size_t(x.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        ScoreRecord r;
        r.tag = tag;
        r.label = labels.empty() ? -1 : labels[std::size_t(i)];
        Eigen::Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        r.pred = int(arg);
        r.conf = s.max_prob[i];
        r.entropy = s.entropy[i];
        r.in_dist =
            flavor == ScoreFlavor::max_prob ? s.max_prob[i] : -s.entropy[i];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ScoreRecord> score_ova_model_mc(models::Classifier& cls,
                                            const ova::ClassPriors& priors,
                                            const Mat& x,
                                            const std::vector<int>& labels,
                                            const std::string& tag, int passes,
                                            Rng& rng) {
    if (cls.head() != models::HeadKind::sigmoid_ova)
        throw std::invalid_argument("score_ova_model_mc needs a one-vs-all head");
    check_labels(x, labels, tag);
    models::McDropoutResult mc =
        models::mc_dropout_predict(cls, x, passes, cls.dropout_rate(), rng);
    return ova_records(mc.mean, priors, cls.spec().n_classes, labels, tag);
}

// ---------------------------------------------------------------------------
// Per-seed operations.

namespace {

// max_softmax and softmax_entropy score the same trained network; oracles and
// the ova baseline each train their own.
std::string training_identity(baselines::BaselineKind k) {
    switch (k) {
        case baselines::BaselineKind::max_softmax:
        case baselines::BaselineKind::softmax_entropy: return "softmax";
        default: return baselines::to_string(k);
    }
}

models::HeadKind head_for_identity(const std::string& ident) {
    return (ident == "softmax" || ident == "entropy_oracle")
               ? models::HeadKind::linear_logits
               : models::HeadKind::sigmoid_ova;
}

ScoreFlavor flavor_for(baselines::BaselineKind k) {
    switch (k) {
        case baselines::BaselineKind::max_softmax: return ScoreFlavor::max_prob;
        case baselines::BaselineKind::softmax_entropy:
        case baselines::BaselineKind::entropy_oracle: return ScoreFlavor::neg_entropy;
        default: return ScoreFlavor::ova_in_dist;
    }
}

void write_history_csv(const std::string& path,
                       const std::vector<trainer::HistoryRecord>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "iteration,loss_d,loss_g,loss_c,val_accuracy\n";
    out.precision(17);
    for (const trainer::HistoryRecord& h : history)
        out << h.iteration << "," << h.loss_D << "," << h.loss_G << ","
            << h.loss_C << "," << h.val_accuracy << "\n";
    if (!out) throw IoError("short write to '" + path + "'");
}

baselines::BaselineResult train_identity(const std::string& ident,
                                         const ExperimentConfig& c,
                                         const DatasetBundle& b,
                                         const trainer::TrainingConfig& tc) {
    if (ident == "softmax")
        return baselines::train_softmax_classifier(b.train, c.arch, tc);
    if (ident == "ova_baseline")
        return baselines::train_ova_baseline(b.train, c.arch, tc);
    if (ident == "entropy_oracle")
        return baselines::train_oracle(b.train, b.ood_train,
                                       baselines::BaselineKind::entropy_oracle,
                                       c.arch, tc);
    if (ident == "ova_oracle")
        return baselines::train_oracle(b.train, b.ood_train,
                                       baselines::BaselineKind::ova_oracle, c.arch,
                                       tc);
    throw std::logic_error("unknown training identity '" + ident + "'");
}

std::set<std::string> baseline_identities(const ExperimentConfig& c) {
    std::set<std::string> idents;
    for (baselines::BaselineKind k : c.baseline_list)
        idents.insert(training_identity(k));
    return idents;
}

// Score a model over the test set and every OoD set.
template <typename ScoreFn>
std::vector<ScoreRecord> collect_records(const DatasetBundle& b, ScoreFn&& fn) {
    std::vector<ScoreRecord> records = fn(b.test.x, b.test.y, "test");
    for (const auto& [name, d] : b.ood) {
        std::vector<ScoreRecord> more = fn(d.x, std::vector<int>{}, "ood/" + name);
        records.insert(records.end(), more.begin(), more.end());
    }
    return records;
}

}  // namespace

std::string seed_dir(const ExperimentConfig& c, std::uint64_t seed) {
    return c.out_dir + "/seed_" + std::to_string(seed);
}

void train_seed(const ExperimentConfig& c, const DatasetBundle& b,
                std::uint64_t seed) {
    const std::string dir = seed_dir(c, seed);
    fs::create_directories(dir);
    const trainer::TrainingConfig tc = c.config_for_seed(seed);
    try {
        trainer::UqganModels m = trainer::build_models(c.arch, seed);
        trainer::pretrain_cae(*m.cae, b.train, tc);
        trainer::TrainResult res =
            trainer::train_uqgan(b.train, m, tc, dir + "/checkpoint_uqgan.uqck");
        write_history_csv(dir + "/history_uqgan.csv", res.history);

        for (const std::string& ident : baseline_identities(c)) {
            baselines::BaselineResult br = train_identity(ident, c, b, tc);
            checkpoint::Checkpoint ck;
            ck.arch = c.arch;
            ck.config = tc;
            ck.seed = seed;
            ck.groups["classifier"] = checkpoint::snapshot(br.classifier->params());
            checkpoint::save(dir + "/checkpoint_" + ident + ".uqck", ck);
            write_history_csv(dir + "/history_" + ident + ".csv", br.history);
        }
    } catch (const TrainingDivergence& e) {
        throw TrainingDivergence("seed " + std::to_string(seed) + ": " + e.what());
    }
}

std::map<std::string, metrics::MetricsReport> evaluate_seed(
    const ExperimentConfig& c, const DatasetBundle& b, std::uint64_t seed) {
    const std::string dir = seed_dir(c, seed);
    const trainer::TrainingConfig tc = c.config_for_seed(seed);
    const ova::ClassPriors priors =
        training_priors(b.train, tc.val_fraction, seed);
    std::map<std::string, metrics::MetricsReport> reports;

    auto emit_row = [&](const std::string& row,
                        const std::vector<ScoreRecord>& records) {
        write_score_file(dir + "/scores_" + row + ".jsonl", records);
        metrics::MetricsReport rep = report_from_records(records);
        write_metrics_json(dir + "/metrics_" + row + ".json", rep);
        reports[row] = rep;
    };

    // UQGAN row (and its MC-dropout variant).
    checkpoint::Checkpoint ck = checkpoint::load(dir + "/checkpoint_uqgan.uqck");
    trainer::UqganModels m = trainer::build_models(ck.arch, ck.seed);
    trainer::restore_models(m, ck.groups);
    m.cae->freeze();
    emit_row("uqgan", collect_records(b, [&](const Mat& x,
                                             const std::vector<int>& labels,
                                             const std::string& tag) {
                 return score_ova_model(*m.classifier, priors, x, labels, tag);
             }));
    if (c.eval_mc_dropout && c.arch.dropout_rate > 0.0) {
        Rng mc_rng(seed, "eval/mc_dropout");
        emit_row("uqgan_mc",
                 collect_records(b, [&](const Mat& x, const std::vector<int>& labels,
                                        const std::string& tag) {
                     return score_ova_model_mc(*m.classifier, priors, x, labels,
                                               tag, c.mc_passes, mc_rng);
                 }));
    }

    // Baseline rows; each training identity is loaded once.
    std::map<std::string, std::shared_ptr<models::Classifier>> loaded;
    for (const std::string& ident : baseline_identities(c)) {
        checkpoint::Checkpoint bck =
            checkpoint::load(dir + "/checkpoint_" + ident + ".uqck");
        auto cls = std::make_shared<models::Classifier>(
            bck.arch, substream_seed(seed, "init/classifier"),
            head_for_identity(ident));
        checkpoint::restore(cls->params(), {}, bck.groups.at("classifier"));
        loaded[ident] = cls;
    }
    for (baselines::BaselineKind k : c.baseline_list) {
        models::Classifier& cls = *loaded.at(training_identity(k));
        const ScoreFlavor flavor = flavor_for(k);
        emit_row(baselines::to_string(k),
                 collect_records(b, [&](const Mat& x, const std::vector<int>& labels,
                                        const std::string& tag) {
                     return flavor == ScoreFlavor::ova_in_dist
                                ? score_ova_model(cls, priors, x, labels, tag)
                                : score_softmax_model(cls, x, labels, tag, flavor);
                 }));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Figures.

void emit_heatmaps(models::Classifier& cls, const ova::ClassPriors& priors,
                   const image_io::Extent& extent, int resolution,
                   const Mat& train_points, const Mat& ooc_points,
                   const std::string& out_prefix) {
    if (cls.spec().input_dim() != 2 || cls.spec().is_image())
        throw UnsupportedModel("heatmaps need a 2D (toy) model");
    if (cls.head() != models::HeadKind::sigmoid_ova)
        throw UnsupportedModel("heatmaps need a one-vs-all head");
    extent.validate();
    if (resolution < 2) throw std::invalid_argument("heatmap resolution < 2");

    std::vector<double> xs(static_cast<std::size_t>(resolution));
    std::vector<double> ys(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
        const double f = double(i) / double(resolution - 1);
        xs[std::size_t(i)] = extent.xmin + f * (extent.xmax - extent.xmin);
        ys[std::size_t(i)] = extent.ymin + f * (extent.ymax - extent.ymin);
    }
    Mat grid(Eigen::Index(resolution) * resolution, 2);
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            grid(Eigen::Index(i) * resolution + j, 0) = xs[std::size_t(j)];
            grid(Eigen::Index(i) * resolution + j, 1) = ys[std::size_t(i)];
        }

    const int n = cls.spec().n_classes;
    Mat c_tilde = ova::transform_in_class(cls.predict(grid), n);
    Mat epistemic(resolution, resolution), aleatoric(resolution, resolution);
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            ova::UncertaintyReport rep = ova::uncertainty_report(
                c_tilde.row(Eigen::Index(i) * resolution + j).transpose(), priors);
            epistemic(i, j) = rep.epistemic;
            aleatoric(i, j) = rep.aleatoric_raw;
        }

    const image_io::Rgb train_color{31, 119, 180};  // blue
    const image_io::Rgb ooc_color{214, 39, 40};     // red
    auto emit = [&](const Mat& values, double hi, const std::string& name) {
        image_io::Image img = image_io::colorize(values, 0.0, hi);
        if (train_points.rows() > 0)
            image_io::draw_points(img, extent, train_points, train_color, 1);
        if (ooc_points.rows() > 0)
            image_io::draw_points(img, extent, ooc_points, ooc_color, 1);
        image_io::write_pnm(out_prefix + "_" + name + ".ppm", img);
        image_io::write_grid_text(out_prefix + "_" + name + ".txt", xs, ys, values,
                                  name);
    };
    emit(epistemic, 1.0, "epistemic");
    emit(aleatoric, std::log(double(n)), "aleatoric");
}

void emit_seed_figures(const ExperimentConfig& c, const DatasetBundle& b,
                       std::uint64_t seed) {
    const std::string dir = seed_dir(c, seed);
    checkpoint::Checkpoint ck = checkpoint::load(dir + "/checkpoint_uqgan.uqck");
    trainer::UqganModels m = trainer::build_models(ck.arch, ck.seed);
    trainer::restore_models(m, ck.groups);
    m.cae->freeze();
    const ova::ClassPriors priors =
        training_priors(b.train, c.train_cfg.val_fraction, seed);

    // Generated OoC points: a modest deterministic batch per class.
    const int per_class = 200;
    Mat ooc(Eigen::Index(per_class) * c.arch.n_classes, 2);
    data::Dataset ooc_set;
    ooc_set.shape = {2};
    ooc_set.n_classes = c.arch.n_classes;
    for (int y = 0; y < c.arch.n_classes; ++y) {
        Mat pts = trainer::generate_ooc_samples(*m.generator, *m.cae, y, per_class,
                                                seed);
        ooc.middleRows(Eigen::Index(y) * per_class, per_class) = pts;
        for (int i = 0; i < per_class; ++i) ooc_set.y.push_back(y);
    }
    ooc_set.x = ooc;
    data::save_toy_text(dir + "/ooc_points.txt", ooc_set);

    image_io::Extent ext;
    if (c.has_extent) {
        ext = c.extent;
    } else {
        Mat all = b.train.x;
        for (const auto& [name, d] : b.ood) {
            Mat merged(all.rows() + d.x.rows(), all.cols());
            merged << all, d.x;
            all = std::move(merged);
        }
        const double margin = 0.1;
        const double dx = all.col(0).maxCoeff() - all.col(0).minCoeff();
        const double dy = all.col(1).maxCoeff() - all.col(1).minCoeff();
        ext.xmin = all.col(0).minCoeff() - margin * dx;
        ext.xmax = all.col(0).maxCoeff() + margin * dx;
        ext.ymin = all.col(1).minCoeff() - margin * dy;
        ext.ymax = all.col(1).maxCoeff() + margin * dy;
    }
    emit_heatmaps(*m.classifier, priors, ext, c.heatmap_resolution, b.train.x, ooc,
                  dir + "/heatmap");
}

void emit_sample_grid(models::Generator& gen, models::CAE& cae,
                      const std::vector<int>& classes, int samples_per_class,
                      std::uint64_t seed, const std::string& path) {
    const models::ArchitectureSpec& arch = gen.spec();
    if (!arch.is_image())
        throw UnsupportedModel("sample grids need an image-domain model");
    if (classes.empty() || samples_per_class <= 0)
        throw std::invalid_argument("emit_sample_grid: empty grid");
    const int c = arch.input_shape[0], h = arch.input_shape[1],
              w = arch.input_shape[2];
    Mat rows(Eigen::Index(classes.size()) * samples_per_class, arch.input_dim());
    for (std::size_t r = 0; r < classes.size(); ++r)
        rows.middleRows(Eigen::Index(r) * samples_per_class, samples_per_class) =
            trainer::generate_ooc_samples(gen, cae, classes[r], samples_per_class,
                                          seed);
    image_io::Image img = image_io::tile_rows(rows, c, h, w, int(classes.size()),
                                              samples_per_class, 2);
    image_io::write_pnm(path, img);
}

// ---------------------------------------------------------------------------
// Aggregation.

namespace {

struct MeanStd {
    double mean = kNan;
    double std = kNan;
};

MeanStd mean_std(const std::vector<double>& v) {
    std::vector<double> finite;
    for (double x : v)
        if (std::isfinite(x)) finite.push_back(x);
    if (finite.empty()) return {};
    double mean = 0.0;
    for (double x : finite) mean += x / double(finite.size());
    double var = 0.0;
    for (double x : finite) var += (x - mean) * (x - mean) / double(finite.size());
    return {mean, std::sqrt(var)};
}

std::string cell(const MeanStd& ms) {
    if (!std::isfinite(ms.mean)) return "      -      ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f (%4.2f)", 100.0 * ms.mean,
                  100.0 * ms.std);
    return buf;
}

int row_rank(const std::string& name) {
    static const std::vector<std::string> order{
        "max_softmax", "softmax_entropy", "ova_baseline", "entropy_oracle",
        "ova_oracle",  "uqgan",           "uqgan_mc"};
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] == name) return int(i);
    return int(order.size());
}

std::vector<std::string> row_names(const ExperimentConfig& c) {
    std::set<std::string> names{"uqgan"};
    for (baselines::BaselineKind k : c.baseline_list)
        names.insert(baselines::to_string(k));
    if (c.eval_mc_dropout && c.arch.dropout_rate > 0.0) names.insert("uqgan_mc");
    std::vector<std::string> out(names.begin(), names.end());
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
        return std::make_pair(row_rank(a), a) < std::make_pair(row_rank(b), b);
    });
    return out;
}

}  // namespace

std::string format_table(
    const std::map<std::string, std::vector<metrics::MetricsReport>>& by_row) {
    // Column extractors in paper order: classification section then OoD.
    using Extract = double (*)(const metrics::MetricsReport&);
    static const std::vector<std::pair<std::string, Extract>> cols{
        {"Acc", [](const metrics::MetricsReport& r) { return r.accuracy; }},
        {"AUROC S/F", [](const metrics::MetricsReport& r) { return r.auroc_sf; }},
        {"ECE", [](const metrics::MetricsReport& r) { return r.ece; }},
        {"AUROC", [](const metrics::MetricsReport& r) { return r.ood_combined.auroc; }},
        {"AUPR-In",
         [](const metrics::MetricsReport& r) { return r.ood_combined.aupr_in; }},
        {"AUPR-Out",
         [](const metrics::MetricsReport& r) { return r.ood_combined.aupr_out; }},
        {"FPR@95%TPR", [](const metrics::MetricsReport& r) {
             return r.ood_combined.fpr_at_95_tpr;
         }}};

    std::vector<std::string> names;
    for (const auto& [name, reps] : by_row) names.push_back(name);
    std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        return std::make_pair(row_rank(a), a) < std::make_pair(row_rank(b), b);
    });

    std::ostringstream out;
    out << "model            | classification: Acc | AUROC S/F | ECE | "
           "ood: AUROC | AUPR-In | AUPR-Out | FPR@95%TPR  (mean (std) in %, "
        << "over seeds)\n";
    for (const std::string& name : names) {
        const std::vector<metrics::MetricsReport>& reps = by_row.at(name);
        out << name;
        for (std::size_t pad = name.size(); pad < 17; ++pad) out << ' ';
        std::size_t i = 0;
        for (const auto& [label, extract] : cols) {
            std::vector<double> vals;
            for (const metrics::MetricsReport& r : reps) vals.push_back(extract(r));
            out << "| " << cell(mean_std(vals)) << ' ';
            if (++i == 3) out << "|";  // section divider
        }
        out << "\n";
    }
    return out.str();
}

std::string write_table(const ExperimentConfig& c) {
    std::map<std::string, std::vector<metrics::MetricsReport>> by_row;
    for (std::uint64_t seed : c.seeds) {
        const std::string dir = seed_dir(c, seed);
        for (const std::string& row : row_names(c)) {
            const std::string path = dir + "/metrics_" + row + ".json";
            if (!fs::exists(path))
                throw IoError("missing metrics file '" + path +
                              "' (run evaluate first)");
            by_row[row].push_back(read_metrics_json(path));
        }
    }
    const std::string text = format_table(by_row);
    {
        std::ofstream out(c.out_dir + "/table.txt");
        if (!out) throw IoError("cannot write table.txt");
        out << text;
    }
    json rows = json::object();
    using Extract = double (*)(const metrics::MetricsReport&);
    static const std::vector<std::pair<std::string, Extract>> cols{
        {"accuracy", [](const metrics::MetricsReport& r) { return r.accuracy; }},
        {"auroc_sf", [](const metrics::MetricsReport& r) { return r.auroc_sf; }},
        {"ece", [](const metrics::MetricsReport& r) { return r.ece; }},
        {"ood_auroc",
         [](const metrics::MetricsReport& r) { return r.ood_combined.auroc; }},
        {"ood_aupr_in",
         [](const metrics::MetricsReport& r) { return r.ood_combined.aupr_in; }},
        {"ood_aupr_out",
         [](const metrics::MetricsReport& r) { return r.ood_combined.aupr_out; }},
        {"ood_fpr_at_95_tpr", [](const metrics::MetricsReport& r) {
             return r.ood_combined.fpr_at_95_tpr;
         }}};
    for (const auto& [name, reps] : by_row) {
        json row = json::object();
        for (const auto& [label, extract] : cols) {
            std::vector<double> vals;
            for (const metrics::MetricsReport& r : reps) vals.push_back(extract(r));
            const MeanStd ms = mean_std(vals);
            row[label] = json{{"mean", num_or_null(ms.mean)},
                              {"std", num_or_null(ms.std)}};
        }
        rows[name] = row;
    }
    {
        std::ofstream out(c.out_dir + "/table.json");
        if (!out) throw IoError("cannot write table.json");
        out << json{{"seeds", c.seeds}, {"rows", rows}}.dump(2) << "\n";
    }
    return text;
}

std::string run_experiment(const ExperimentConfig& c) {
    fs::create_directories(c.out_dir);
    DatasetBundle b = build_datasets(c);
    const bool toy2d = !c.arch.is_image() && c.arch.input_dim() == 2;
    for (std::uint64_t seed : c.seeds) {
        train_seed(c, b, seed);
        evaluate_seed(c, b, seed);
        if (toy2d) {
            emit_seed_figures(c, b, seed);
        } else if (c.arch.is_image()) {
            checkpoint::Checkpoint ck =
                checkpoint::load(seed_dir(c, seed) + "/checkpoint_uqgan.uqck");
            trainer::UqganModels m = trainer::build_models(ck.arch, ck.seed);
            trainer::restore_models(m, ck.groups);
            m.cae->freeze();
            std::vector<int> classes = c.sample_classes;
            if (classes.empty())
                for (int y = 0; y < c.arch.n_classes; ++y) classes.push_back(y);
            emit_sample_grid(*m.generator, *m.cae, classes, c.samples_per_class,
                             seed, seed_dir(c, seed) + "/samples.pnm");
        }
    }
    write_table(c);
    return c.out_dir;
}

std::string run_experiment_file(const std::string& config_path) {
    ExperimentConfig c = load_experiment_config(config_path);
    fs::create_directories(c.out_dir);
    fs::copy_file(config_path, c.out_dir + "/config_used.cfg",
                  fs::copy_options::overwrite_existing);
    return run_experiment(c);
}

}  // namespace uqgan::experiment
