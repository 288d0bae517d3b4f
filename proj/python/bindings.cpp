// Python bindings for the UQGAN core: datasets, the one-vs-all uncertainty
// pipeline, metrics, training, and the experiment runner.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uqgan/baselines.hpp"
#include "uqgan/checkpoint.hpp"
#include "uqgan/data.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/experiment.hpp"
#include "uqgan/losses.hpp"
#include "uqgan/metrics.hpp"
#include "uqgan/models.hpp"
#include "uqgan/ova.hpp"
#include "uqgan/trainer.hpp"

#include <memory>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace uqgan;
using Mat = ad::Mat;
using Vec = ova::Vec;

namespace {

ova::ClassPriors priors_from(const Vec& p) { return ova::ClassPriors(p); }

// A trained UQGAN: the four networks plus the class priors they were
// calibrated with.  Constructed by train() or load().
struct Model {
    trainer::UqganModels m;
    trainer::TrainingConfig cfg;
    ova::ClassPriors priors = ova::ClassPriors::uniform(2);
    std::vector<trainer::HistoryRecord> history;
    double best_val_accuracy = -1.0;
    int best_iteration = 0;

    static Model train(const data::Dataset& dataset,
                       const models::ArchitectureSpec& arch,
                       const trainer::TrainingConfig& cfg) {
        Model out;
        out.cfg = cfg;
        out.m = trainer::build_models(arch, cfg.seed);
        trainer::pretrain_cae(*out.m.cae, dataset, cfg);
        trainer::TrainResult res = trainer::train_uqgan(dataset, out.m, cfg);
        trainer::restore_models(out.m, res.best.groups);  // best val accuracy
        out.m.cae->freeze();
        out.priors = res.priors;
        out.history = std::move(res.history);
        out.best_val_accuracy = res.best_val_accuracy;
        out.best_iteration = res.best_iteration;
        return out;
    }

    void save(const std::string& path) const {
        checkpoint::Checkpoint ck{m.classifier->spec(), cfg, cfg.seed,
                                  trainer::snapshot_models(m)};
        checkpoint::save(path, ck);
    }

    static Model load(const std::string& path) {
        checkpoint::Checkpoint ck = checkpoint::load(path);
        Model out;
        out.cfg = ck.config;
        out.m = trainer::build_models(ck.arch, ck.seed);
        trainer::restore_models(out.m, ck.groups);
        out.m.cae->freeze();
        // Priors are not stored; uniform until estimate_priors() is called.
        out.priors = ova::ClassPriors::uniform(ck.arch.n_classes);
        return out;
    }

    void estimate_priors(const data::Dataset& dataset) {
        priors = experiment::training_priors(dataset, cfg.val_fraction, cfg.seed);
    }

    Mat predict_proba(const Mat& x) { return m.classifier->predict(x); }

    py::dict score(const Mat& x) {
        std::vector<experiment::ScoreRecord> recs =
            experiment::score_ova_model(*m.classifier, priors, x, {}, "test");
        const Eigen::Index n = Eigen::Index(recs.size());
        Eigen::VectorXi pred(n);
        Vec conf(n), in_dist(n), entropy(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const experiment::ScoreRecord& r = recs[std::size_t(i)];
            pred[i] = r.pred;
            conf[i] = r.conf;
            in_dist[i] = r.in_dist;
            entropy[i] = r.entropy;
        }
        py::dict d;
        d["pred"] = pred;
        d["conf"] = conf;
        d["in_dist"] = in_dist;
        d["epistemic"] = Vec(1.0 - in_dist.array());
        d["entropy"] = entropy;
        return d;
    }

    double accuracy(const data::Dataset& dataset) {
        return trainer::evaluate_accuracy(*m.classifier, dataset, priors);
    }

    Mat generate_ooc(int label, int count, std::uint64_t seed) {
        return trainer::generate_ooc_samples(*m.generator, *m.cae, label, count,
                                             seed);
    }
};

py::dict ood_dict(const metrics::OodMetrics& o) {
    py::dict d;
    d["auroc"] = o.auroc;
    d["aupr_in"] = o.aupr_in;
    d["aupr_out"] = o.aupr_out;
    d["fpr_at_95_tpr"] = o.fpr_at_95_tpr;
    return d;
}

}  // namespace

PYBIND11_MODULE(_uqgan, mod) {
    mod.doc() = "UQGAN: one-vs-all classifiers with GAN-generated out-of-class "
                "examples for aleatoric/epistemic uncertainty";
    mod.attr("__version__") = "1.0.0";

    py::register_exception<ConfigError>(mod, "ConfigError");
    py::register_exception<IoError>(mod, "IoError");
    py::register_exception<TrainingDivergence>(mod, "TrainingDivergence");
    py::register_exception<UnsupportedModel>(mod, "UnsupportedModel");
    py::register_exception<UndefinedMetric>(mod, "UndefinedMetric");

    // ---- data ------------------------------------------------------------
    py::class_<data::Dataset>(mod, "Dataset")
        .def(py::init([](const Mat& x, const std::vector<int>& y,
                         std::vector<int> shape, int n_classes) {
                 data::Dataset d;
                 d.x = x;
                 d.y = y;
                 if (shape.empty()) shape = {int(x.cols())};
                 d.shape = std::move(shape);
                 if (n_classes <= 0) {
                     for (int label : y) n_classes = std::max(n_classes, label + 1);
                 }
                 d.n_classes = n_classes;
                 if (Eigen::Index(d.y.size()) != d.x.rows())
                     throw std::invalid_argument("Dataset: len(y) != rows of x");
                 if (d.dim() != int(d.x.cols()))
                     throw std::invalid_argument(
                         "Dataset: shape does not match the width of x");
                 for (int label : d.y)
                     if (label < 0 || label >= d.n_classes)
                         throw std::invalid_argument("Dataset: label out of range");
                 return d;
             }),
             py::arg("x"), py::arg("y"), py::arg("shape") = std::vector<int>{},
             py::arg("n_classes") = 0)
        .def_readonly("x", &data::Dataset::x)
        .def_readonly("y", &data::Dataset::y)
        .def_readonly("shape", &data::Dataset::shape)
        .def_readonly("n_classes", &data::Dataset::n_classes)
        .def("__len__", [](const data::Dataset& d) { return d.size(); });

    mod.def("make_two_gaussians", &data::make_two_gaussians, py::arg("n_per_class"),
            py::arg("separation") = 4.0, py::arg("variance") = 1.0,
            py::arg("seed") = 0);
    mod.def("make_two_moons", &data::make_two_moons, py::arg("n_per_class"),
            py::arg("noise") = 0.1, py::arg("seed") = 0);
    mod.def(
        "make_gaussian_grid",
        [](int n_per_blob, const std::string& labels, double spacing, double sigma,
           std::uint64_t seed) {
            if (labels != "per_blob_9" && labels != "grouped_3")
                throw std::invalid_argument(
                    "labels must be 'per_blob_9' or 'grouped_3'");
            return data::make_gaussian_grid(n_per_blob,
                                            labels == "per_blob_9"
                                                ? data::GridLabels::per_blob_9
                                                : data::GridLabels::grouped_3,
                                            spacing, sigma, seed);
        },
        py::arg("n_per_blob"), py::arg("labels") = "per_blob_9",
        py::arg("spacing") = 4.0, py::arg("sigma") = 0.5, py::arg("seed") = 0);
    mod.def("save_toy_text", &data::save_toy_text, py::arg("path"), py::arg("dataset"));
    mod.def("load_toy_text", &data::load_toy_text, py::arg("path"));
    mod.def("save_image_container", &data::save_image_container, py::arg("path"),
            py::arg("dataset"));
    mod.def("load_image_container", &data::load_image_container, py::arg("path"));

    // ---- one-vs-all pipeline ----------------------------------------------
    mod.def("transform_in_class",
            py::overload_cast<double, int>(&ova::transform_in_class), py::arg("c"),
            py::arg("n_classes"));
    mod.def("transform_in_class_batch",
            py::overload_cast<const Mat&, int>(&ova::transform_in_class),
            py::arg("c"), py::arg("n_classes"));
    mod.def(
        "class_posterior",
        [](const Mat& c_tilde, const Vec& priors) {
            return ova::class_posterior(c_tilde, priors_from(priors));
        },
        py::arg("c_tilde"), py::arg("priors"));
    mod.def(
        "uncertainty",
        [](const Vec& c_tilde, const Vec& priors) {
            ova::UncertaintyReport r =
                ova::uncertainty_report(c_tilde, priors_from(priors));
            py::dict d;
            d["posterior"] = r.posterior;
            d["in_dist_prob"] = r.in_dist_prob;
            d["epistemic"] = r.epistemic;
            d["aleatoric"] = r.aleatoric_raw;
            d["aleatoric_masked"] = r.aleatoric_masked;
            d["predicted"] = r.predicted;
            return d;
        },
        py::arg("c_tilde"), py::arg("priors"),
        "Posterior, in-distribution probability, and uncertainty scores for one "
        "example's transformed one-vs-all outputs.");

    // ---- loss values (for verification; training happens in C++) ----------
    mod.def(
        "ova_loss",
        [](const Mat& in_class_probs, const std::vector<int>& labels,
           const Vec& priors) {
            return losses::ova_loss(ad::constant(in_class_probs), labels,
                                    priors_from(priors))
                .val()(0, 0);
        },
        py::arg("in_class_probs"), py::arg("labels"), py::arg("priors"));
    mod.def(
        "cae_loss",
        [](const Mat& reconstruction, const Mat& target) {
            return losses::cae_loss(ad::constant(reconstruction), target).val()(0, 0);
        },
        py::arg("reconstruction"), py::arg("target"));

    // ---- metrics -----------------------------------------------------------
    mod.def("accuracy", &metrics::accuracy, py::arg("predictions"), py::arg("labels"));
    mod.def(
        "auroc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            return metrics::auroc({scores, labels});
        },
        py::arg("scores"), py::arg("labels"));
    mod.def(
        "aupr",
        [](const std::vector<double>& scores, const std::vector<int>& labels,
           const std::string& positive) {
            if (positive != "in" && positive != "out")
                throw std::invalid_argument("positive must be 'in' or 'out'");
            return metrics::aupr({scores, labels},
                                 positive == "in" ? metrics::PositiveClass::in_dist
                                                  : metrics::PositiveClass::out_dist);
        },
        py::arg("scores"), py::arg("labels"), py::arg("positive") = "in");
    mod.def(
        "fpr_at_95_tpr",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            return metrics::fpr_at_95_tpr({scores, labels});
        },
        py::arg("scores"), py::arg("labels"));
    mod.def("ece", &metrics::ece, py::arg("posteriors"), py::arg("labels"),
            py::arg("bins") = 15);
    mod.def("ece_from_confidence", &metrics::ece_from_confidence,
            py::arg("confidence"), py::arg("correct"), py::arg("bins") = 15);
    mod.def(
        "ood_metrics",
        [](const std::vector<double>& test_scores,
           const std::vector<double>& ood_scores) {
            return ood_dict(metrics::ood_metrics(test_scores, ood_scores));
        },
        py::arg("in_dist_scores_test"), py::arg("in_dist_scores_ood"));

    // ---- model configuration ----------------------------------------------
    py::class_<models::ArchitectureSpec>(mod, "ArchSpec")
        .def(py::init<>())
        .def_property(
            "kind",
            [](const models::ArchitectureSpec& a) {
                return std::string(models::to_string(a.kind));
            },
            [](models::ArchitectureSpec& a, const std::string& k) {
                a.kind = models::arch_kind_from_string(k);
            })
        .def_readwrite("input_shape", &models::ArchitectureSpec::input_shape)
        .def_readwrite("n_classes", &models::ArchitectureSpec::n_classes)
        .def_readwrite("latent_dim", &models::ArchitectureSpec::latent_dim)
        .def_readwrite("noise_dim", &models::ArchitectureSpec::noise_dim)
        .def_readwrite("dropout_rate", &models::ArchitectureSpec::dropout_rate)
        .def_readwrite("gen_hidden", &models::ArchitectureSpec::gen_hidden)
        .def_readwrite("critic_hidden", &models::ArchitectureSpec::critic_hidden)
        .def("validate", &models::ArchitectureSpec::validate);

    py::class_<trainer::TrainingConfig>(mod, "TrainingConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &trainer::TrainingConfig::batch_size)
        .def_readwrite("generator_iters", &trainer::TrainingConfig::generator_iters)
        .def_readwrite("inner_steps", &trainer::TrainingConfig::inner_steps)
        .def_readwrite("lr_classifier", &trainer::TrainingConfig::lr_classifier)
        .def_readwrite("lr_gan", &trainer::TrainingConfig::lr_gan)
        .def_readwrite("lr_floor", &trainer::TrainingConfig::lr_floor)
        .def_readwrite("cae_epochs", &trainer::TrainingConfig::cae_epochs)
        .def_readwrite("seed", &trainer::TrainingConfig::seed)
        .def_readwrite("val_fraction", &trainer::TrainingConfig::val_fraction)
        .def_readwrite("eval_interval", &trainer::TrainingConfig::eval_interval)
        .def_readwrite("use_gan", &trainer::TrainingConfig::use_gan)
        .def_property(
            "lambda_gp",
            [](const trainer::TrainingConfig& c) { return c.h.lambda_gp; },
            [](trainer::TrainingConfig& c, double v) { c.h.lambda_gp = v; })
        .def_property(
            "lambda_cl",
            [](const trainer::TrainingConfig& c) { return c.h.lambda_cl; },
            [](trainer::TrainingConfig& c, double v) { c.h.lambda_cl = v; })
        .def_property(
            "lambda_real",
            [](const trainer::TrainingConfig& c) { return c.h.lambda_real; },
            [](trainer::TrainingConfig& c, double v) { c.h.lambda_real = v; })
        .def_property(
            "lambda_r",
            [](const trainer::TrainingConfig& c) { return c.h.lambda_r; },
            [](trainer::TrainingConfig& c, double v) { c.h.lambda_r = v; })
        .def("validate", &trainer::TrainingConfig::validate);

    py::class_<trainer::HistoryRecord>(mod, "HistoryRecord")
        .def_readonly("iteration", &trainer::HistoryRecord::iteration)
        .def_readonly("loss_d", &trainer::HistoryRecord::loss_D)
        .def_readonly("loss_g", &trainer::HistoryRecord::loss_G)
        .def_readonly("loss_c", &trainer::HistoryRecord::loss_C)
        .def_readonly("val_accuracy", &trainer::HistoryRecord::val_accuracy);

    // ---- training and inference ---------------------------------------------
    py::class_<Model>(mod, "Model")
        .def_static("train", &Model::train, py::arg("dataset"), py::arg("arch"),
                    py::arg("config"), py::call_guard<py::gil_scoped_release>(),
                    "Train a UQGAN (or, with use_gan=False, the plain one-vs-all "
                    "classifier) and keep the best-validation weights.")
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"))
        .def("estimate_priors", &Model::estimate_priors, py::arg("dataset"))
        .def("predict_proba", &Model::predict_proba, py::arg("x"))
        .def("score", &Model::score, py::arg("x"))
        .def("accuracy", &Model::accuracy, py::arg("dataset"),
             py::call_guard<py::gil_scoped_release>())
        .def("generate_ooc", &Model::generate_ooc, py::arg("label"),
             py::arg("count"), py::arg("seed") = 0)
        .def_readonly("history", &Model::history)
        .def_readonly("best_val_accuracy", &Model::best_val_accuracy)
        .def_readonly("best_iteration", &Model::best_iteration)
        .def_property_readonly(
            "priors", [](const Model& m) { return Vec(m.priors.probs); });

    // ---- experiment runner ---------------------------------------------------
    mod.def("run_experiment", &experiment::run_experiment_file,
            py::arg("config_path"), py::call_guard<py::gil_scoped_release>(),
            "Run a full experiment config (training, evaluation, figures, "
            "table); returns the output directory.");
}
