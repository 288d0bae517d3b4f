// Acceptance suite: one self-contained check per criterion, selected with
// --criterion N.  Prints exactly one [PASS]/[FAIL]/[SKIP] line and exits
// 0 / 1 / 77 so the ctest entries can gate a release directly.
//
//   1  one-vs-all posterior recovery against the analytic Bayes posterior
//   2  ranking/calibration metrics against brute-force oracles
//   3  gradient penalty of a linear critic against the closed form
//   4  analytic gradients of every loss against central finite differences
//   5  degenerate trainer configuration reproduces the ova baseline exactly
//   6  toy shielding: epistemic ring, aleatoric midpoint, OoC placement
//   7  MNIST 0-4 desk-scale training (skips when the container is absent)
//   8  CIFAR-profile smoke: one training iteration with finite losses

#include "uqgan/baselines.hpp"
#include "uqgan/data.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/losses.hpp"
#include "uqgan/metrics.hpp"
#include "uqgan/models.hpp"
#include "uqgan/ova.hpp"
#include "uqgan/rng.hpp"
#include "uqgan/trainer.hpp"
#include "uqgan/training_config.hpp"

#include "gradcheck_cases.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace uqgan;
using trainer::TrainingConfig;
using ad::Mat;

struct Outcome {
    enum Status { pass, fail, skip } status = fail;
    std::string detail;
};

Outcome ok(std::string detail) { return {Outcome::pass, std::move(detail)}; }
Outcome bad(std::string detail) { return {Outcome::fail, std::move(detail)}; }

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Lemma 1: the balanced one-vs-all baseline recovers the Bayes posterior.

Outcome criterion1() {
    const data::Dataset d = data::make_two_gaussians(10000, 2.0, 1.0, 1);

    models::ArchitectureSpec arch;
    arch.kind = models::ArchKind::mlp_toy;
    arch.input_shape = {2};
    arch.n_classes = 2;
    arch.latent_dim = 2;
    arch.gen_hidden = {16};
    arch.critic_hidden = {16};
    arch.dropout_rate = 0.0;

    TrainingConfig cfg;
    cfg.batch_size = 256;
    cfg.generator_iters = 300;
    cfg.inner_steps = 5;
    cfg.lr_classifier = 1e-3;
    cfg.eval_interval = 25;
    cfg.seed = 1;
    cfg.use_gan = false;

    baselines::BaselineResult res = baselines::train_ova_baseline(d, arch, cfg);

    // 100x100 grid over the data's 3-sigma box (per-axis mean +- 3 std).
    Eigen::RowVector2d mean = d.x.colwise().mean();
    Eigen::RowVector2d sd =
        ((d.x.rowwise() - mean).array().square().colwise().mean()).sqrt();
    const int res_n = 100;
    Mat grid(res_n * res_n, 2);
    for (int i = 0; i < res_n; ++i)
        for (int j = 0; j < res_n; ++j) {
            const double fy = res_n == 1 ? 0.5 : double(i) / (res_n - 1);
            const double fx = res_n == 1 ? 0.5 : double(j) / (res_n - 1);
            grid(i * res_n + j, 0) = mean(0) - 3 * sd(0) + fx * 6 * sd(0);
            grid(i * res_n + j, 1) = mean(1) - 3 * sd(1) + fy * 6 * sd(1);
        }

    const Mat probs = res.classifier->predict(grid);
    const Mat c_tilde = ova::transform_in_class(probs, 2);
    const Mat posterior = ova::class_posterior(c_tilde, res.priors);
    const Mat bayes = d.posterior_oracle(grid);
    const double mae = (posterior - bayes).array().abs().mean();

    if (!(mae <= 0.05)) return bad(fmt("posterior MAE %.4f > 0.05", mae));
    return ok(fmt("posterior MAE %.4f <= 0.05 on a 100x100 grid (val acc %.3f)",
                  mae, res.best_val_accuracy));
}

// ---------------------------------------------------------------------------
// 2. Metric implementations against brute-force oracles.

Outcome criterion2() {
    Rng rng(20260202);
    double worst = 0.0;
    const double tol = 1e-12;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + int(rng.uniform(0, 48.999));
        metrics::ScoredSet s;
        bool has_pos = false, has_neg = false;
        while (!(has_pos && has_neg)) {
            s.scores.clear();
            s.labels.clear();
            has_pos = has_neg = false;
            for (int i = 0; i < n; ++i) {
                // Scores on a coarse lattice so ties are frequent.
                s.scores.push_back(std::floor(rng.uniform(0, 8)) / 8.0);
                const int lab = rng.uniform() < 0.5 ? 1 : 0;
                s.labels.push_back(lab);
                (lab ? has_pos : has_neg) = true;
            }
        }

        worst = std::max(worst, std::abs(metrics::auroc(s) - oracles::auroc_pair_counting(s)));
        worst = std::max(worst,
                         std::abs(metrics::aupr(s, metrics::PositiveClass::in_dist) -
                                  oracles::aupr_sweep(s, true)));
        worst = std::max(worst,
                         std::abs(metrics::aupr(s, metrics::PositiveClass::out_dist) -
                                  oracles::aupr_sweep(s, false)));
        worst = std::max(worst,
                         std::abs(metrics::fpr_at_95_tpr(s) - oracles::fpr_at_95_tpr_sweep(s)));

        std::vector<double> conf;
        std::vector<int> correct;
        for (int i = 0; i < n; ++i) {
            conf.push_back(std::floor(rng.uniform(8, 16)) / 16.0);  // [0.5, 1)
            correct.push_back(rng.uniform() < 0.7 ? 1 : 0);
        }
        worst = std::max(worst, std::abs(metrics::ece_from_confidence(conf, correct, 15) -
                                         oracles::ece_direct(conf, correct, 15)));
    }
    if (!(worst <= tol)) return bad(fmt("max |metric - oracle| %.3e > 1e-12", worst));
    return ok(fmt("auroc/aupr/fpr@95/ece match oracles on 200 sets (max err %.3e)", worst));
}

// ---------------------------------------------------------------------------
// 3. Gradient penalty of a linear critic: lambda_gp * (||w|| - 1)^2 exactly.

Outcome criterion3() {
    Rng rng(3);
    const int dim = 4, batch = 8;
    const double lambda_gp = 10.0;
    Mat real(batch, dim), gen(batch, dim);
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < dim; ++j) {
            real(i, j) = rng.normal();
            gen(i, j) = rng.normal();
        }
    const std::vector<int> labels(batch, 0);

    double worst = 0.0;
    for (double norm : {0.5, 1.0, 2.0}) {
        Mat w = Mat::Zero(dim, 1);
        // Direction spread over all coordinates; only the norm matters.
        for (int j = 0; j < dim; ++j) w(j, 0) = norm / std::sqrt(double(dim));
        const ad::Var w_param(w, true);  // trainable, so the 2nd-order path exists
        const losses::CriticFn critic = [&w_param](const ad::Var& codes,
                                                   const std::vector<int>&) {
            return ad::matmul(codes, w_param);
        };
        Rng gp_rng(7);
        const double penalty =
            losses::gradient_penalty(critic, real, gen, labels, lambda_gp, gp_rng).scalar();
        const double expect = lambda_gp * (norm - 1.0) * (norm - 1.0);
        worst = std::max(worst, std::abs(penalty - expect));
    }
    if (!(worst <= 1e-6)) return bad(fmt("max |penalty - analytic| %.3e > 1e-6", worst));
    return ok(fmt("linear-critic penalties match lambda_gp(||w||-1)^2 (max err %.3e)", worst));
}

// ---------------------------------------------------------------------------
// 4. Analytic gradients against central finite differences.

Outcome criterion4() {
    Rng rng(4);
    double worst = 0.0;
    const char* worst_name = "";
    struct Case {
        const char* name;
        double (*run)(Rng&);
    };
    const Case cases[] = {
        {"ova_loss", gradcheck::check_ova_loss},
        {"classifier_joint_loss", gradcheck::check_classifier_joint_loss},
        {"cae_loss", gradcheck::check_cae_loss},
        {"angular_reg_single", gradcheck::check_angular_reg_single},
    };
    for (const Case& c : cases)
        for (int rep = 0; rep < 20; ++rep) {
            const double err = c.run(rng);
            if (err > worst) {
                worst = err;
                worst_name = c.name;
            }
        }
    if (!(worst <= 1e-4))
        return bad(fmt("max relative gradient error %.3e > 1e-4", worst) + " (" + worst_name + ")");
    return ok(fmt("4 losses x 20 instances, max relative error %.3e", worst) + " (" + worst_name +
              ")");
}

// ---------------------------------------------------------------------------
// 5. Degenerate configuration == one-vs-all baseline, step for step.

Outcome criterion5() {
    const data::Dataset d = data::make_two_gaussians(200, 4.0, 1.0, 5);

    models::ArchitectureSpec arch;
    arch.kind = models::ArchKind::mlp_toy;
    arch.input_shape = {2};
    arch.n_classes = 2;
    arch.latent_dim = 2;
    arch.noise_dim = 2;
    arch.gen_hidden = {16, 16};
    arch.critic_hidden = {16, 16};
    arch.dropout_rate = 0.25;  // exercises the dropout substream on both paths

    TrainingConfig cfg;
    cfg.batch_size = 64;
    cfg.generator_iters = 40;
    cfg.inner_steps = 2;
    cfg.eval_interval = 10;
    cfg.seed = 7;
    cfg.use_gan = true;  // full GAN machinery stays on
    cfg.h.lambda_real = 1.0;
    cfg.h.lambda_cl = 0.0;
    cfg.h.lambda_r = 0.0;

    trainer::UqganModels m = trainer::build_models(arch, cfg.seed);
    trainer::pretrain_cae(*m.cae, d, cfg);
    const trainer::TrainResult full = trainer::train_uqgan(d, m, cfg);

    TrainingConfig base_cfg = cfg;
    base_cfg.use_gan = false;
    const baselines::BaselineResult base = baselines::train_ova_baseline(d, arch, base_cfg);

    if (full.history.size() != base.history.size())
        return bad("history lengths differ: " + std::to_string(full.history.size()) + " vs " +
                   std::to_string(base.history.size()));
    double worst = 0.0;
    for (std::size_t i = 0; i < full.history.size(); ++i) {
        worst = std::max(worst, std::abs(full.history[i].loss_C - base.history[i].loss_C));
        worst = std::max(worst,
                         std::abs(full.history[i].val_accuracy - base.history[i].val_accuracy));
    }
    if (!(worst <= 1e-9))
        return bad(fmt("max per-step |loss_C or val_acc| gap %.3e > 1e-9", worst));
    return ok(fmt("classifier trajectories identical over %.0f steps (max gap %.3e)",
                  double(full.history.size()), worst));
}

// ---------------------------------------------------------------------------
// 6. Toy shielding after full UQGAN training.

Outcome criterion6() {
    const double sep = 3.0, var = 1.0;
    const data::Dataset d = data::make_two_gaussians(2000, sep, var, 6);

    models::ArchitectureSpec arch;
    arch.kind = models::ArchKind::mlp_toy;
    arch.input_shape = {2};
    arch.n_classes = 2;
    arch.latent_dim = 2;  // identity autoencoder: codes are the points
    arch.noise_dim = 4;
    arch.gen_hidden = {64, 64};
    arch.critic_hidden = {64, 64};
    arch.dropout_rate = 0.0;

    TrainingConfig cfg;
    cfg.batch_size = 256;
    cfg.generator_iters = 1500;
    cfg.inner_steps = 5;
    cfg.lr_classifier = 1e-3;
    cfg.lr_gan = 2e-4;
    cfg.eval_interval = 100;
    cfg.seed = 6;
    cfg.use_gan = true;
    cfg.h.lambda_gp = 10.0;
    cfg.h.lambda_cl = 4.0;
    cfg.h.lambda_real = 0.6;
    cfg.h.lambda_r = 32.0;

    trainer::UqganModels m = trainer::build_models(arch, cfg.seed);
    trainer::pretrain_cae(*m.cae, d, cfg);
    const trainer::TrainResult res = trainer::train_uqgan(d, m, cfg);
    const ova::ClassPriors priors = res.priors;

    // (a) epistemic on a ring of radius 6 sigma around the data centroid.
    Eigen::RowVector2d centroid = d.x.colwise().mean();
    const int ring_n = 720;
    Mat ring(ring_n, 2);
    for (int i = 0; i < ring_n; ++i) {
        const double a = 2.0 * M_PI * i / ring_n;
        ring(i, 0) = centroid(0) + 6.0 * std::sqrt(var) * std::cos(a);
        ring(i, 1) = centroid(1) + 6.0 * std::sqrt(var) * std::sin(a);
    }
    const Mat ring_ct = ova::transform_in_class(m.classifier->predict(ring), 2);
    double epistemic_sum = 0.0;
    for (int i = 0; i < ring_n; ++i) {
        const ova::Vec row = ring_ct.row(i).transpose();
        epistemic_sum += ova::uncertainty_report(row, priors).epistemic;
    }
    const double ring_epistemic = epistemic_sum / ring_n;

    // (b) aleatoric entropy at the inter-class midpoint.
    Mat mid(1, 2);
    mid << 0.0, 0.0;
    const Mat mid_ct = ova::transform_in_class(m.classifier->predict(mid), 2);
    const double mid_entropy =
        ova::uncertainty_report(ova::Vec(mid_ct.row(0).transpose()), priors).aleatoric_raw;
    const double entropy_floor = 0.9 * std::log(2.0);

    // (c) generated class-y OoC points outside class y's 99% contour
    //     (isotropic Gaussian, 2 dof: ||x - mu_y||^2 > 9.21034 * var).
    const double chi2_99 = 9.21034037197618;
    double worst_frac = 1.0;
    for (int y = 0; y < 2; ++y) {
        const Mat ooc = trainer::generate_ooc_samples(*m.generator, *m.cae, y, 500, 60 + y);
        Eigen::RowVector2d mu(y == 0 ? -sep / 2 : sep / 2, 0.0);
        int outside = 0;
        for (Eigen::Index i = 0; i < ooc.rows(); ++i)
            if ((ooc.row(i) - mu).squaredNorm() > chi2_99 * var) ++outside;
        worst_frac = std::min(worst_frac, double(outside) / double(ooc.rows()));
    }

    std::ostringstream detail;
    detail << fmt("ring epistemic %.3f (>=0.9), midpoint entropy %.3f (>=%.3f)", ring_epistemic,
                  mid_entropy, entropy_floor)
           << fmt(", OoC outside 99%% contour %.1f%% (>=80%%)", 100 * worst_frac);
    if (ring_epistemic >= 0.9 && mid_entropy >= entropy_floor && worst_frac >= 0.8)
        return ok(detail.str());
    return bad(detail.str());
}

// ---------------------------------------------------------------------------
// 7. MNIST 0-4 desk-scale run (reduced CPU profile).

std::string find_mnist_file(const std::string& name) {
    std::vector<std::filesystem::path> candidates;
    if (const char* dir = std::getenv("UQGAN_DATA_DIR")) candidates.push_back(dir);
    candidates.push_back("data");
    candidates.push_back("../data");
    candidates.push_back("../../data");
    for (const auto& dir : candidates) {
        const std::filesystem::path p = dir / name;
        std::error_code ec;
        if (std::filesystem::exists(p, ec)) return p.string();
    }
    return {};
}

Outcome criterion7() {
    const std::string train_path = find_mnist_file("mnist_train.uqd");
    const std::string test_path = find_mnist_file("mnist_test.uqd");
    if (train_path.empty() || test_path.empty())
        return {Outcome::skip,
                "MNIST container not found (tools/fetch_mnist.py writes data/mnist_train.uqd "
                "and data/mnist_test.uqd; set UQGAN_DATA_DIR to override)"};

    const data::Dataset train_full = data::load_image_container(train_path);
    const data::Dataset test_full = data::load_image_container(test_path);
    const std::vector<int> in_classes = {0, 1, 2, 3, 4};
    const data::ClassSplit train_split = data::class_split(train_full, in_classes);
    const data::ClassSplit test_split = data::class_split(test_full, in_classes);

    models::ArchitectureSpec arch;
    arch.kind = models::ArchKind::lenet5;
    arch.input_shape = {1, 28, 28};
    arch.n_classes = 5;
    arch.latent_dim = 32;
    arch.noise_dim = 32;
    arch.gen_hidden = {128, 128};
    arch.critic_hidden = {128, 128};
    arch.dropout_rate = 0.0;

    TrainingConfig cfg;
    cfg.batch_size = 256;
    cfg.generator_iters = 500;  // reduced CPU profile; the paper profile uses 2000
    cfg.inner_steps = 5;
    cfg.lr_classifier = 1e-3;
    cfg.lr_gan = 2e-4;
    cfg.cae_epochs = 10;
    cfg.eval_interval = 50;
    cfg.seed = 7;
    cfg.use_gan = true;
    cfg.h.lambda_gp = 10.0;
    cfg.h.lambda_cl = 2.0;
    cfg.h.lambda_real = 0.6;
    cfg.h.lambda_r = 32.0;

    trainer::UqganModels m = trainer::build_models(arch, cfg.seed);
    trainer::pretrain_cae(*m.cae, train_split.in_dist, cfg);
    const trainer::TrainResult res = trainer::train_uqgan(train_split.in_dist, m, cfg);
    trainer::restore_models(m, res.best.groups);
    m.cae->freeze();

    const double acc =
        trainer::evaluate_accuracy(*m.classifier, test_split.in_dist, res.priors);

    auto in_dist_scores = [&](const data::Dataset& ds) {
        const Mat ct = ova::transform_in_class(m.classifier->predict(ds.x), arch.n_classes);
        std::vector<double> out(std::size_t(ct.rows()));
        for (Eigen::Index i = 0; i < ct.rows(); ++i)
            out[std::size_t(i)] =
                ova::uncertainty_report(ova::Vec(ct.row(i).transpose()), res.priors).in_dist_prob;
        return out;
    };
    metrics::ScoredSet s;
    for (double v : in_dist_scores(test_split.in_dist)) {
        s.scores.push_back(v);
        s.labels.push_back(1);
    }
    for (double v : in_dist_scores(test_split.ood)) {
        s.scores.push_back(v);
        s.labels.push_back(0);
    }
    const double ood_auroc = metrics::auroc(s);

    const std::string detail =
        fmt("accuracy %.4f (>=0.98), OoD AUROC vs digits 5-9 %.4f (>=0.80)", acc, ood_auroc) +
        fmt(" [500 iters; paper profile: 2000 iters, acc >=0.990, AUROC >=0.88]", 0.0);
    if (acc >= 0.98 && ood_auroc >= 0.80) return ok(detail);
    return bad(detail);
}

// ---------------------------------------------------------------------------
// 8. CIFAR-profile smoke: one training iteration, finite losses.

Outcome criterion8() {
    Rng rng(8);
    const int n = 128, channels = 3, side = 32;
    Mat x(n, channels * side * side);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = int(rng.uniform(0, 9.999));
        for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
    }
    data::Dataset d;
    d.x = x;
    d.y = y;
    d.shape = {channels, side, side};
    d.n_classes = 10;
    

    models::ArchitectureSpec arch;
    arch.kind = models::ArchKind::small_resnet;
    arch.input_shape = {channels, side, side};
    arch.n_classes = 10;
    arch.latent_dim = 128;
    arch.noise_dim = 128;
    arch.gen_hidden = {256, 256};
    arch.critic_hidden = {256, 256};
    arch.dropout_rate = 0.0;

    TrainingConfig cfg;
    cfg.batch_size = 32;  // smoke-sized batch; profile hyperparameters otherwise
    cfg.generator_iters = 1;
    cfg.inner_steps = 5;
    cfg.lr_classifier = 1e-3;
    cfg.lr_gan = 2e-4;
    cfg.cae_epochs = 1;
    cfg.eval_interval = 1;
    cfg.seed = 8;
    cfg.use_gan = true;
    cfg.h.lambda_gp = 10.0;
    cfg.h.lambda_cl = 4.0;
    cfg.h.lambda_real = 0.6;
    cfg.h.lambda_r = 1.0;

    trainer::UqganModels m = trainer::build_models(arch, cfg.seed);
    const double cae_loss = trainer::pretrain_cae(*m.cae, d, cfg);
    const trainer::TrainResult res = trainer::train_uqgan(d, m, cfg);

    if (res.history.size() != 1) return bad("expected exactly one history record");
    const trainer::HistoryRecord& h = res.history.front();
    const bool finite = std::isfinite(cae_loss) && std::isfinite(h.loss_D) &&
                        std::isfinite(h.loss_G) && std::isfinite(h.loss_C);
    const std::string detail = fmt("cae %.3f, loss_D %.3f", cae_loss, h.loss_D) +
                               fmt(", loss_G %.3f, loss_C %.3f", h.loss_G, h.loss_C);
    if (!finite) return bad("non-finite loss: " + detail);
    return ok("one small_resnet iteration, all losses finite: " + detail);
}

}  // namespace

int main(int argc, char** argv) {
    int criterion = -1;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            criterion = std::atoi(argv[++i]);
        } else if (a.rfind("--criterion=", 0) == 0) {
            criterion = std::atoi(a.c_str() + 12);
        } else {
            std::fprintf(stderr, "usage: uqgan_acceptance --criterion N  (N in 1..8)\n");
            return 2;
        }
    }
    if (criterion < 1 || criterion > 8) {
        std::fprintf(stderr, "usage: uqgan_acceptance --criterion N  (N in 1..8)\n");
        return 2;
    }

    static const char* names[] = {
        "Bayes posterior recovery (one-vs-all baseline)",
        "metric-oracle equivalence",
        "analytic gradient penalty",
        "finite-difference gradient checks",
        "degenerate-configuration equivalence",
        "toy shielding",
        "MNIST 0-4 desk-scale",
        "CIFAR-profile smoke",
    };

    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (criterion) {
            case 1: out = criterion1(); break;
            case 2: out = criterion2(); break;
            case 3: out = criterion3(); break;
            case 4: out = criterion4(); break;
            case 5: out = criterion5(); break;
            case 6: out = criterion6(); break;
            case 7: out = criterion7(); break;
            case 8: out = criterion8(); break;
        }
    } catch (const std::exception& e) {
        out = bad(std::string("unexpected exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const char* tag = out.status == Outcome::pass ? "[PASS]"
                      : out.status == Outcome::skip ? "[SKIP]"
                                                    : "[FAIL]";
    std::printf("%s criterion %d: %s: %s (%.1fs)\n", tag, criterion, names[criterion - 1],
                out.detail.c_str(), secs);
    return out.status == Outcome::pass ? 0 : out.status == Outcome::skip ? 77 : 1;
}
