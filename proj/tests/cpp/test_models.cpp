// Model constructors: shapes, output ranges, conditioning, determinism,
// freezing and MC-dropout aggregation.

#include "doctest.h"
#include "uqgan/errors.hpp"
#include "uqgan/models.hpp"

#include <stdexcept>

using namespace uqgan;
using ad::Mat;
using models::ArchitectureSpec;
using models::ArchKind;

namespace {
ArchitectureSpec toy_spec(int n_classes = 3) {
    ArchitectureSpec s;
    s.kind = ArchKind::mlp_toy;
    s.input_shape = {2};
    s.n_classes = n_classes;
    s.latent_dim = 2;
    s.gen_hidden = {32, 32};
    s.critic_hidden = {32, 32};
    return s;
}
}  // namespace

TEST_CASE("Architecture validation") {
    ArchitectureSpec s = toy_spec();
    CHECK_NOTHROW(s.validate());
    s.dropout_rate = 1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.dropout_rate = 0.0;
    s.kind = ArchKind::lenet5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // needs 1x28x28
    s.input_shape = {1, 28, 28};
    s.latent_dim = 32;
    CHECK_NOTHROW(s.validate());
    CHECK(models::arch_kind_from_string("small_resnet") == ArchKind::small_resnet);
    CHECK(std::string(models::to_string(ArchKind::lenet5)) == "lenet5");
    CHECK_THROWS_AS(models::arch_kind_from_string("vgg"), ConfigError);
}

TEST_CASE("Classifier outputs independent sigmoids, not a softmax") {
    models::Classifier cls(toy_spec(3), 42);
    Rng rng(1);
    Mat x = rng.normal_mat(16, 2);
    Mat p = cls.predict(x);
    CHECK(p.rows() == 16);
    CHECK(p.cols() == 3);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
    // Rows are not constrained to sum to one.
    double max_dev = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
    CHECK(max_dev > 0.05);
}

TEST_CASE("Classifier initialization is seed-deterministic") {
    Rng rng(2);
    Mat x = rng.normal_mat(4, 2);
    models::Classifier a(toy_spec(), 7), b(toy_spec(), 7), c(toy_spec(), 8);
    CHECK((a.predict(x) - b.predict(x)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.predict(x) - c.predict(x)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("Classifier rejects mismatched input width") {
    models::Classifier cls(toy_spec(), 3);
    CHECK_THROWS_AS(cls.predict(Mat::Zero(2, 5)), std::invalid_argument);
}

TEST_CASE("LeNet-5 classifier shape and range") {
    ArchitectureSpec s;
    s.kind = ArchKind::lenet5;
    s.input_shape = {1, 28, 28};
    s.n_classes = 5;
    s.latent_dim = 32;
    models::Classifier cls(s, 9);
    Rng rng(4);
    Mat x = rng.uniform_mat(2, 28 * 28, 0.0, 1.0);
    Mat p = cls.predict(x);
    CHECK(p.rows() == 2);
    CHECK(p.cols() == 5);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);

    models::Classifier logits(s, 9, models::HeadKind::linear_logits);
    Mat l = logits.predict(x);
    CHECK(l.rows() == 2);
    CHECK(l.cols() == 5);
}

TEST_CASE("Small ResNet classifier shape") {
    ArchitectureSpec s;
    s.kind = ArchKind::small_resnet;
    s.input_shape = {3, 16, 16};
    s.n_classes = 4;
    s.latent_dim = 16;
    models::Classifier cls(s, 10);
    Rng rng(4);
    Mat x = rng.uniform_mat(2, 3 * 16 * 16, 0.0, 1.0);
    Mat p = cls.predict(x);
    CHECK(p.rows() == 2);
    CHECK(p.cols() == 4);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
}

TEST_CASE("Toy autoencoder is the identity and needs no training") {
    models::CAE cae(toy_spec(), 5);
    CHECK(cae.identity());
    CHECK(cae.frozen());
    Rng rng(6);
    Mat x = rng.normal_mat(5, 2);
    std::vector<int> y = {0, 1, 2, 0, 1};
    CHECK((cae.encode(x, y) - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cae.decode(x, y) - x).cwiseAbs().maxCoeff() == 0.0);

    ArchitectureSpec bad = toy_spec();
    bad.latent_dim = 3;  // identity map cannot change dimension
    CHECK_THROWS_AS(models::CAE(bad, 5), std::invalid_argument);
}

TEST_CASE("Image autoencoder shapes, range and label sensitivity") {
    ArchitectureSpec s;
    s.kind = ArchKind::lenet5;
    s.input_shape = {1, 28, 28};
    s.n_classes = 5;
    s.latent_dim = 32;
    models::CAE cae(s, 21);
    CHECK_FALSE(cae.identity());
    CHECK_FALSE(cae.frozen());
    Rng rng(7);
    Mat x = rng.uniform_mat(2, 28 * 28, 0.0, 1.0);
    std::vector<int> y0 = {0, 1}, y1 = {2, 3};
    Mat z0 = cae.encode(x, y0);
    CHECK(z0.rows() == 2);
    CHECK(z0.cols() == 32);
    Mat z1 = cae.encode(x, y1);
    CHECK((z0 - z1).cwiseAbs().maxCoeff() > 0.0);  // conditioning reaches the code
    Mat rec = cae.decode(z0, y0);
    CHECK(rec.rows() == 2);
    CHECK(rec.cols() == 28 * 28);
    CHECK(rec.minCoeff() > 0.0);
    CHECK(rec.maxCoeff() < 1.0);
}

TEST_CASE("Frozen autoencoder rejects optimization") {
    ArchitectureSpec s;
    s.kind = ArchKind::lenet5;
    s.input_shape = {1, 28, 28};
    s.n_classes = 5;
    s.latent_dim = 32;
    models::CAE cae(s, 21);
    cae.freeze();
    CHECK(cae.frozen());
    CHECK_THROWS_AS(nn::Adam(cae.params().vars()), std::logic_error);
}

TEST_CASE("Generator sampling: shape, determinism and conditioning") {
    models::Generator gen(toy_spec(), 33);
    Rng a(50), b(50), c(51);
    Mat s0 = gen.sample(8, 0, a);
    CHECK(s0.rows() == 8);
    CHECK(s0.cols() == 2);
    CHECK((s0 - gen.sample(8, 0, b)).cwiseAbs().maxCoeff() == 0.0);
    Rng b2(50);
    Mat s1 = gen.sample(8, 1, b2);  // same noise, different label
    CHECK((s0 - s1).cwiseAbs().maxCoeff() > 0.0);
    CHECK((s0 - gen.sample(8, 0, c)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("Generator training mode uses batch statistics") {
    models::Generator gen(toy_spec(), 34);
    Rng rng(8);
    Mat e = rng.uniform_mat(16, 2, 0.0, 1.0);
    std::vector<int> y(16, 1);
    Mat out = gen.forward(ad::constant(e), y, true).val();
    CHECK(out.rows() == 16);
    CHECK(out.cols() == 2);
    CHECK(out.allFinite());
    CHECK(gen.buffers().size() == 4);  // two BN layers, mean+var each
    // Running statistics moved away from their initial values.
    CHECK(gen.buffers()[0].second->cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("Critic maps conditioned codes to one scalar per row") {
    models::Critic critic(toy_spec(), 35);
    Rng rng(9);
    Mat z = rng.normal_mat(6, 2);
    std::vector<int> y = {0, 1, 2, 0, 1, 2};
    Mat v = critic.forward(ad::constant(z), y).val();
    CHECK(v.rows() == 6);
    CHECK(v.cols() == 1);
    CHECK(v.allFinite());
    std::vector<int> y2 = {1, 1, 2, 0, 1, 2};
    Mat v2 = critic.forward(ad::constant(z), y2).val();
    CHECK((v - v2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("MC dropout: mean of raw probabilities, zero spread when deterministic") {
    models::Classifier cls(toy_spec(), 77);
    Rng rng(12);
    Mat x = rng.normal_mat(6, 2);

    Rng mc1(100);
    auto one = models::mc_dropout_predict(cls, x, 1, 0.5, mc1);
    CHECK(one.stddev.cwiseAbs().maxCoeff() == 0.0);  // single pass has no spread

    Rng mc2(100);
    auto none = models::mc_dropout_predict(cls, x, 16, 0.0, mc2);
    // Every pass is identical; only the accumulated mean carries rounding.
    CHECK(none.stddev.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((none.mean - cls.predict(x)).cwiseAbs().maxCoeff() < 1e-15);

    Rng mc3(100);
    auto mc = models::mc_dropout_predict(cls, x, 16, 0.5, mc3);
    CHECK(mc.mean.minCoeff() > 0.0);
    CHECK(mc.mean.maxCoeff() < 1.0);
    CHECK(mc.stddev.maxCoeff() > 0.0);
    CHECK(cls.dropout_rate() == 0.0);  // original rate restored

    CHECK_THROWS_AS(models::mc_dropout_predict(cls, x, 0, 0.5, mc3),
                    std::invalid_argument);
    CHECK_THROWS_AS(models::mc_dropout_predict(cls, x, 4, 1.0, mc3),
                    std::invalid_argument);
}
