// Training loop behavior: determinism, freezing, parameter isolation, the
// degenerate GAN-free equivalence, sampling, and checkpoint round trips.

#include "doctest.h"
#include "uqgan/checkpoint.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/trainer.hpp"

#include <cmath>
#include <cstdio>

using namespace uqgan;
using ad::Mat;
using models::ArchitectureSpec;
using models::ArchKind;
using trainer::TrainingConfig;
using trainer::UqganModels;

namespace {

ArchitectureSpec toy_arch(int n_classes = 2) {
    ArchitectureSpec a;
    a.kind = ArchKind::mlp_toy;
    a.input_shape = {2};
    a.n_classes = n_classes;
    a.latent_dim = 2;
    a.noise_dim = 2;
    a.gen_hidden = {32, 32};
    a.critic_hidden = {32, 32};
    return a;
}

TrainingConfig toy_config(int iters) {
    TrainingConfig c;
    c.batch_size = 64;
    c.generator_iters = iters;
    c.inner_steps = 2;
    c.lr_classifier = 1e-3;
    c.lr_gan = 2e-4;
    c.lr_floor = 1e-5;
    c.cae_epochs = 1;
    c.seed = 7;
    c.val_fraction = 0.2;
    c.eval_interval = 5;
    return c;
}

ArchitectureSpec mini_image_arch() {
    ArchitectureSpec a;
    a.kind = ArchKind::lenet5;
    a.input_shape = {1, 28, 28};
    a.n_classes = 2;
    a.latent_dim = 8;
    a.noise_dim = 8;
    a.gen_hidden = {16};
    a.critic_hidden = {16};
    return a;
}

data::Dataset zero_images(int per_class, int n_classes) {
    data::Dataset d;
    d.shape = {1, 28, 28};
    d.n_classes = n_classes;
    d.x = Mat::Zero(Eigen::Index(per_class) * n_classes, 28 * 28);
    d.y.resize(std::size_t(per_class) * std::size_t(n_classes));
    for (std::size_t i = 0; i < d.y.size(); ++i) d.y[i] = int(i) % n_classes;
    return d;
}

bool groups_equal(const checkpoint::GroupMap& a, const checkpoint::GroupMap& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, tensors] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second.size() != tensors.size()) return false;
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            if (tensors[i].first != it->second[i].first) return false;
            if (tensors[i].second.rows() != it->second[i].second.rows() ||
                tensors[i].second.cols() != it->second[i].second.cols())
                return false;
            if ((tensors[i].second - it->second[i].second).cwiseAbs().maxCoeff() != 0.0)
                return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("Training config validation") {
    TrainingConfig c = toy_config(5);
    CHECK_NOTHROW(c.validate());
    c.val_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.val_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = toy_config(5);
    c.inner_steps = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = toy_config(5);
    c.lr_floor = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("Checkpoint files round-trip bit-exactly") {
    auto m = trainer::build_models(toy_arch(3), 11);
    TrainingConfig cfg = toy_config(3);
    cfg.h.lambda_cl = 4.0;
    cfg.lr_gan = 3.3e-4;

    checkpoint::Checkpoint c{toy_arch(3), cfg, 999, trainer::snapshot_models(m)};
    const std::string path = "ckpt_roundtrip.uqck";
    checkpoint::save(path, c);
    checkpoint::Checkpoint back = checkpoint::load(path);

    CHECK(back.seed == 999);
    CHECK(back.arch.kind == ArchKind::mlp_toy);
    CHECK(back.arch.n_classes == 3);
    CHECK(back.arch.gen_hidden == std::vector<int>{32, 32});
    CHECK(back.config.h.lambda_cl == 4.0);
    CHECK(back.config.lr_gan == 3.3e-4);  // exact double round trip
    CHECK(back.config.seed == cfg.seed);
    CHECK(groups_equal(back.groups, c.groups));

    // Restoring into differently initialized models reproduces the weights.
    auto other = trainer::build_models(toy_arch(3), 12);
    CHECK_FALSE(groups_equal(trainer::snapshot_models(other), c.groups));
    trainer::restore_models(other, back.groups);
    CHECK(groups_equal(trainer::snapshot_models(other), c.groups));
    std::remove(path.c_str());
}

TEST_CASE("Checkpoint restore rejects mismatched tensors") {
    auto m = trainer::build_models(toy_arch(), 1);
    auto groups = trainer::snapshot_models(m);

    auto renamed = groups;
    renamed["classifier"][0].first = "cls.unknown";
    CHECK_THROWS_AS(trainer::restore_models(m, renamed), IoError);

    auto reshaped = groups;
    reshaped["classifier"][0].second = Mat::Zero(1, 1);
    CHECK_THROWS_AS(trainer::restore_models(m, reshaped), IoError);

    auto missing = groups;
    missing.erase("critic");
    CHECK_THROWS_AS(trainer::restore_models(m, missing), IoError);

    CHECK_THROWS_AS(checkpoint::load("no_such_checkpoint.uqck"), IoError);
}

TEST_CASE("Identical seed and config give an identical run") {
    data::Dataset d = data::make_two_gaussians(200, 4.0, 1.0, 5);
    TrainingConfig cfg = toy_config(4);

    auto run = [&]() {
        auto m = trainer::build_models(toy_arch(), cfg.seed);
        trainer::pretrain_cae(*m.cae, d, cfg);
        auto r = trainer::train_uqgan(d, m, cfg);
        return std::make_pair(std::move(r), trainer::snapshot_models(m));
    };
    auto [r1, w1] = run();
    auto [r2, w2] = run();

    REQUIRE(r1.history.size() == 4);
    REQUIRE(r2.history.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r1.history[i].iteration == int(i) + 1);
        CHECK(r1.history[i].loss_D == r2.history[i].loss_D);
        CHECK(r1.history[i].loss_G == r2.history[i].loss_G);
        CHECK(r1.history[i].loss_C == r2.history[i].loss_C);
        CHECK(r1.history[i].val_accuracy == r2.history[i].val_accuracy);
        CHECK(std::isfinite(r1.history[i].val_accuracy));
    }
    CHECK(groups_equal(w1, w2));

    // Different seeds must change the run.
    TrainingConfig other = cfg;
    other.seed = 6;
    auto m4 = trainer::build_models(toy_arch(), other.seed);
    trainer::pretrain_cae(*m4.cae, d, other);
    auto r3 = trainer::train_uqgan(d, m4, other);
    CHECK(r3.history[3].loss_C != r1.history[3].loss_C);
}

TEST_CASE("Degenerate configuration equals GAN-free training bit-for-bit") {
    data::Dataset d = data::make_two_gaussians(200, 4.0, 1.0, 8);
    TrainingConfig cfg = toy_config(4);
    cfg.h.lambda_real = 1.0;
    cfg.h.lambda_cl = 0.0;
    cfg.h.lambda_r = 0.0;

    auto m_full = trainer::build_models(toy_arch(), cfg.seed);
    trainer::pretrain_cae(*m_full.cae, d, cfg);
    auto r_full = trainer::train_uqgan(d, m_full, cfg);

    TrainingConfig plain = cfg;
    plain.use_gan = false;
    auto m_plain = trainer::build_models(toy_arch(), plain.seed);
    trainer::pretrain_cae(*m_plain.cae, d, plain);
    auto r_plain = trainer::train_uqgan(d, m_plain, plain);

    REQUIRE(r_full.history.size() == r_plain.history.size());
    for (std::size_t i = 0; i < r_full.history.size(); ++i) {
        CHECK(r_full.history[i].loss_C == r_plain.history[i].loss_C);
        CHECK(r_full.history[i].val_accuracy == r_plain.history[i].val_accuracy);
        CHECK(r_plain.history[i].loss_D == 0.0);
        CHECK(r_plain.history[i].loss_G == 0.0);
    }
    CHECK(groups_equal(
        {{"classifier", trainer::snapshot_models(m_full)["classifier"]}},
        {{"classifier", trainer::snapshot_models(m_plain)["classifier"]}}));
    // The GAN itself did train in the full run.
    CHECK_FALSE(groups_equal(
        {{"critic", trainer::snapshot_models(m_full)["critic"]}},
        {{"critic", trainer::snapshot_models(m_plain)["critic"]}}));
}

TEST_CASE("GAN-free training leaves generator and critic untouched") {
    data::Dataset d = data::make_two_gaussians(100, 4.0, 1.0, 2);
    TrainingConfig cfg = toy_config(2);
    cfg.use_gan = false;
    auto m = trainer::build_models(toy_arch(), cfg.seed);
    auto before = trainer::snapshot_models(m);
    trainer::pretrain_cae(*m.cae, d, cfg);
    trainer::train_uqgan(d, m, cfg);
    auto after = trainer::snapshot_models(m);
    CHECK(groups_equal({{"generator", before["generator"]}},
                       {{"generator", after["generator"]}}));
    CHECK(groups_equal({{"critic", before["critic"]}}, {{"critic", after["critic"]}}));
    CHECK_FALSE(groups_equal({{"classifier", before["classifier"]}},
                             {{"classifier", after["classifier"]}}));
}

TEST_CASE("Classifier loss has exactly zero gradient into the GAN") {
    auto m = trainer::build_models(toy_arch(), 21);
    Rng rng(1);
    Mat xb = rng.normal_mat(16, 2);
    std::vector<int> yb;
    for (int i = 0; i < 16; ++i) yb.push_back(i % 2);
    auto priors = ova::ClassPriors::uniform(2);
    losses::GanHyperparams h;

    // Generated examples enter the classifier loss as detached constants,
    // exactly as in the training loop.
    Mat x_gen;
    {
        ad::NoGradGuard ng;
        Mat e = rng.uniform_mat(16, 2, 0.0, 1.0);
        x_gen = m.cae->decode(m.generator->forward(ad::constant(e), yb, true).val(), yb);
    }
    ad::Var loss = losses::classifier_joint_loss(
        m.classifier->forward(ad::constant(xb)), yb,
        m.classifier->forward(ad::constant(x_gen)), yb, priors, h);
    for (const auto& g : ad::grad(loss, m.generator->params().vars()))
        CHECK(g.val().cwiseAbs().maxCoeff() == 0.0);
    for (const auto& g : ad::grad(loss, m.critic->params().vars()))
        CHECK(g.val().cwiseAbs().maxCoeff() == 0.0);

    // And the critic objective never reaches the classifier.
    Mat z_real = rng.normal_mat(16, 2), z_gen2 = rng.normal_mat(16, 2);
    ad::Var d_real = ad::mean(m.critic->forward(ad::constant(z_real), yb));
    ad::Var d_gen = ad::mean(m.critic->forward(ad::constant(z_gen2), yb));
    ad::Var gp = losses::gradient_penalty(
        [&](const ad::Var& c, const std::vector<int>& ls) {
            return m.critic->forward(c, ls);
        },
        z_real, z_gen2, yb, h.lambda_gp, rng);
    ad::Var closs =
        losses::gan_objectives(d_real, d_gen, gp, ad::constant(Mat::Zero(1, 1)),
                               ad::constant(Mat::Zero(1, 1)), h)
            .critic_loss;
    for (const auto& g : ad::grad(closs, m.classifier->params().vars()))
        CHECK(g.val().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Autoencoder must be frozen before the main loop and stays fixed") {
    data::Dataset d = zero_images(16, 2);
    auto m = trainer::build_models(mini_image_arch(), 3);
    TrainingConfig cfg = toy_config(1);
    cfg.batch_size = 8;
    CHECK_THROWS_AS(trainer::train_uqgan(d, m, cfg), std::logic_error);

    cfg.cae_epochs = 1;
    trainer::pretrain_cae(*m.cae, d, cfg);
    CHECK(m.cae->frozen());
    CHECK_THROWS_AS(trainer::pretrain_cae(*m.cae, d, cfg), std::logic_error);

    auto before = checkpoint::snapshot(m.cae->params());
    trainer::train_uqgan(d, m, cfg);
    auto after = checkpoint::snapshot(m.cae->params());
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK((before[i].second - after[i].second).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Autoencoder pretraining drives constant images below 0.01 nats/pixel") {
    data::Dataset d = zero_images(32, 2);
    auto m = trainer::build_models(mini_image_arch(), 9);
    TrainingConfig cfg = toy_config(1);
    cfg.batch_size = 16;
    cfg.cae_epochs = 25;
    cfg.lr_classifier = 1e-2;
    double loss = trainer::pretrain_cae(*m.cae, d, cfg);
    CHECK(loss < 0.01);

    data::Dataset bad = d;
    bad.x(0, 0) = 1.5;
    auto m2 = trainer::build_models(mini_image_arch(), 9);
    CHECK_THROWS_AS(trainer::pretrain_cae(*m2.cae, bad, cfg), std::invalid_argument);
}

TEST_CASE("Easy toy problem trains to high validation accuracy") {
    data::Dataset d = data::make_two_gaussians(300, 6.0, 1.0, 13);
    TrainingConfig cfg = toy_config(30);
    cfg.inner_steps = 2;
    auto m = trainer::build_models(toy_arch(), cfg.seed);
    trainer::pretrain_cae(*m.cae, d, cfg);
    const std::string path = "best_toy.uqck";
    auto r = trainer::train_uqgan(d, m, cfg, path);

    CHECK(r.history.size() == 30);
    CHECK(r.best_val_accuracy >= 0.95);
    CHECK(r.history.back().val_accuracy >= 0.95);
    CHECK(r.best_val_accuracy >= r.history.back().val_accuracy);
    CHECK(r.priors.probs[0] == doctest::Approx(0.5).epsilon(1e-12));

    // The best checkpoint was written and reproduces the best accuracy.
    checkpoint::Checkpoint best = checkpoint::load(path);
    auto fresh = trainer::build_models(toy_arch(), 999);
    trainer::restore_models(fresh, best.groups);
    double acc = trainer::evaluate_accuracy(*fresh.classifier, d, r.priors);
    CHECK(acc >= 0.95);
    std::remove(path.c_str());
}

TEST_CASE("Out-of-class sampling is deterministic and validated") {
    data::Dataset d = data::make_two_gaussians(150, 4.0, 1.0, 17);
    TrainingConfig cfg = toy_config(10);
    auto m = trainer::build_models(toy_arch(), cfg.seed);
    trainer::pretrain_cae(*m.cae, d, cfg);
    trainer::train_uqgan(d, m, cfg);

    Mat a = trainer::generate_ooc_samples(*m.generator, *m.cae, 1, 32, 55);
    Mat b = trainer::generate_ooc_samples(*m.generator, *m.cae, 1, 32, 55);
    CHECK(a.rows() == 32);
    CHECK(a.cols() == 2);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    Mat c = trainer::generate_ooc_samples(*m.generator, *m.cae, 1, 32, 56);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);

    CHECK(trainer::generate_ooc_samples(*m.generator, *m.cae, 0, 0, 1).rows() == 0);
    CHECK_THROWS_AS(trainer::generate_ooc_samples(*m.generator, *m.cae, 2, 4, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(trainer::generate_ooc_samples(*m.generator, *m.cae, 0, -1, 1),
                    std::invalid_argument);

    auto unfrozen = trainer::build_models(mini_image_arch(), 1);
    CHECK_THROWS_AS(
        trainer::generate_ooc_samples(*unfrozen.generator, *unfrozen.cae, 0, 4, 1),
        std::logic_error);
}

TEST_CASE("Trained critic sits near the unit-gradient manifold") {
    data::Dataset d = data::make_two_gaussians(150, 2.0, 1.0, 19);
    TrainingConfig cfg = toy_config(100);
    cfg.inner_steps = 5;
    auto m = trainer::build_models(toy_arch(), cfg.seed);
    trainer::pretrain_cae(*m.cae, d, cfg);
    trainer::train_uqgan(d, m, cfg);

    // Interpolates between real codes (identity latent space) and generated
    // codes, exactly as the penalty samples them.
    Rng rng(71);
    const int b = 128;
    Mat z_real(b, 2);
    std::vector<int> yb(b);
    for (int i = 0; i < b; ++i) {
        Eigen::Index row = Eigen::Index(rng.uniform_int(0, int(d.size()) - 1));
        z_real.row(i) = d.x.row(row);
        yb[std::size_t(i)] = d.y[std::size_t(row)];
    }
    Mat z_gen(b, 2);
    for (int i = 0; i < b; ++i) {
        Rng one(std::uint64_t(1000 + i));
        z_gen.row(i) = m.generator->sample(1, yb[std::size_t(i)], one).row(0);
    }
    Mat z_hat(b, 2);
    for (int i = 0; i < b; ++i) {
        const double u = rng.uniform();
        z_hat.row(i) = u * z_real.row(i) + (1.0 - u) * z_gen.row(i);
    }
    ad::Var zv(z_hat, true);
    ad::Var out = ad::sum(m.critic->forward(zv, yb));
    Mat g = ad::grad(out, {zv})[0].val();
    double mean_norm = 0.0;
    for (int i = 0; i < b; ++i) mean_norm += g.row(i).norm() / b;
    CHECK(mean_norm >= 0.5);
    CHECK(mean_norm <= 1.5);
}
