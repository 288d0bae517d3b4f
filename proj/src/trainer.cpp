#include "uqgan/trainer.hpp"

#include "uqgan/errors.hpp"
#include "uqgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace uqgan::trainer {

using ad::Var;

namespace {

using data::take_labels;
using data::take_rows;

Var zero_scalar() { return ad::constant(Mat::Zero(1, 1)); }

void check_dataset_matches(const data::Dataset& d,
                           const models::ArchitectureSpec& arch) {
    if (d.size() == 0) throw std::invalid_argument("trainer: empty dataset");
    if (d.n_classes != arch.n_classes)
        throw std::invalid_argument("trainer: dataset/model class count mismatch");
    if (int(d.x.cols()) != arch.input_dim())
        throw std::invalid_argument("trainer: dataset/model input width mismatch");
}

}  // namespace

UqganModels build_models(const models::ArchitectureSpec& arch, std::uint64_t seed) {
    arch.validate();
    UqganModels m;
    m.classifier = std::make_shared<models::Classifier>(
        arch, substream_seed(seed, "init/classifier"));
    m.cae = std::make_shared<models::CAE>(arch, substream_seed(seed, "init/cae"));
    m.generator = std::make_shared<models::Generator>(
        arch, substream_seed(seed, "init/generator"));
    m.critic =
        std::make_shared<models::Critic>(arch, substream_seed(seed, "init/critic"));
    return m;
}

double pretrain_cae(models::CAE& cae, const data::Dataset& train,
                    const TrainingConfig& cfg) {
    cfg.validate();
    if (cae.identity()) return 0.0;  // nothing to train
    if (cae.frozen()) throw std::logic_error("pretrain_cae: autoencoder already frozen");
    if (train.size() == 0) throw std::invalid_argument("pretrain_cae: empty dataset");
    if (train.x.minCoeff() < 0.0 || train.x.maxCoeff() > 1.0)
        throw std::invalid_argument("pretrain_cae: pixel values must lie in [0,1]");
    check_dataset_matches(train, cae.spec());

    nn::Adam opt(cae.params().vars());
    data::Batcher batcher(train.size(), cfg.batch_size, Rng(cfg.seed, "cae/batches"));
    const int steps_per_epoch =
        std::max<int>(1, int(train.size()) / std::min<int>(cfg.batch_size,
                                                           int(train.size())));
    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < cfg.cae_epochs; ++epoch) {
        epoch_loss = 0.0;
        for (int s = 0; s < steps_per_epoch; ++s) {
            auto idx = batcher.next();
            Mat x = take_rows(train.x, idx);
            auto y = take_labels(train.y, idx);
            Var recon = cae.decode(cae.encode(ad::constant(x), y), y);
            Var loss = losses::cae_loss(recon, x);
            if (!std::isfinite(loss.scalar()))
                throw TrainingDivergence("cae pretraining diverged at epoch " +
                                         std::to_string(epoch));
            opt.step(ad::grad(loss, cae.params().vars()), cfg.lr_classifier);
            epoch_loss += loss.scalar() / steps_per_epoch;
        }
    }
    cae.freeze();
    return epoch_loss;
}

double evaluate_accuracy(models::Classifier& cls, const data::Dataset& d,
                         const ova::ClassPriors& priors) {
    if (d.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
    const int n = cls.spec().n_classes;
    if (priors.n() != n)
        throw std::invalid_argument("evaluate_accuracy: prior/class count mismatch");
    Eigen::Index correct = 0;
    const Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < d.size(); start += chunk) {
        const Eigen::Index len = std::min(chunk, d.size() - start);
        Mat probs = cls.predict(d.x.middleRows(start, len));
        Mat post = ova::class_posterior(ova::transform_in_class(probs, n), priors);
        for (Eigen::Index i = 0; i < len; ++i) {
            Eigen::Index argmax = 0;
            post.row(i).maxCoeff(&argmax);
            if (int(argmax) == d.y[std::size_t(start + i)]) ++correct;
        }
    }
    return double(correct) / double(d.size());
}

TrainResult train_uqgan(const data::Dataset& dataset, UqganModels& m,
                        const TrainingConfig& cfg,
                        const std::string& checkpoint_path) {
    cfg.validate();
    if (!m.classifier || !m.cae || !m.generator || !m.critic)
        throw std::invalid_argument("train_uqgan: incomplete model bundle");
    if (!m.cae->frozen())
        throw std::logic_error("train_uqgan: autoencoder must be pretrained and frozen");
    const models::ArchitectureSpec& arch = m.classifier->spec();
    check_dataset_matches(dataset, arch);

    auto [train, val] = data::stratified_split(dataset, cfg.val_fraction, cfg.seed);
    if (train.size() < 2) throw std::invalid_argument("train_uqgan: training split too small");

    TrainResult res;
    res.priors = data::estimate_priors(train.y, arch.n_classes);

    data::Batcher batcher(train.size(), cfg.batch_size, Rng(cfg.seed, "train/batches"));
    Rng gan_rng(cfg.seed, "train/gan");
    Rng aug_rng(cfg.seed, "train/augment");
    Rng drop_rng(cfg.seed, "train/dropout");
    const bool flip = arch.kind == models::ArchKind::small_resnet && arch.is_image();
    const bool dropout = m.classifier->dropout_rate() > 0.0;
    const int noise_dim = arch.effective_noise_dim();
    const double gen_w = 1.0 - cfg.h.lambda_real;

    nn::Adam opt_c(m.classifier->params().vars());
    std::optional<nn::Adam> opt_d, opt_g;
    if (cfg.use_gan) {
        opt_d.emplace(m.critic->params().vars());
        opt_g.emplace(m.generator->params().vars());
    }
    auto critic_fn = [&](const Var& codes, const std::vector<int>& labels) {
        return m.critic->forward(codes, labels);
    };

    auto save_best = [&](int iteration, double acc) {
        res.best_val_accuracy = acc;
        res.best_iteration = iteration;
        res.best = checkpoint::Checkpoint{arch, cfg, cfg.seed, snapshot_models(m)};
        if (!checkpoint_path.empty()) checkpoint::save(checkpoint_path, res.best);
    };

    double last_val = evaluate_accuracy(*m.classifier, val, res.priors);
    save_best(0, last_val);

    for (int it = 0; it < cfg.generator_iters; ++it) {
        const double lr_c =
            nn::lr_at(it, cfg.generator_iters, cfg.lr_classifier, cfg.lr_floor);
        const double lr_g = nn::lr_at(it, cfg.generator_iters, cfg.lr_gan, cfg.lr_floor);

        auto idx = batcher.next();
        Mat xb = take_rows(train.x, idx);
        auto yb = take_labels(train.y, idx);
        if (flip) {
            Mat flipped =
                data::hflip_rows(xb, arch.input_shape[0], arch.input_shape[1],
                                 arch.input_shape[2]);
            for (Eigen::Index i = 0; i < xb.rows(); ++i)
                if (aug_rng.uniform() < 0.5) xb.row(i) = flipped.row(i);
        }
        Mat z_real;  // frozen encoder codes, used by critic and generator steps
        if (cfg.use_gan) z_real = m.cae->encode(xb, yb);

        double loss_d = 0.0, loss_c = 0.0, loss_g = 0.0;

        if (cfg.use_gan) {
            for (int s = 0; s < cfg.inner_steps; ++s) {
                Mat z_gen;
                {
                    ad::NoGradGuard ng;
                    Mat e = gan_rng.uniform_mat(xb.rows(), noise_dim, 0.0, 1.0);
                    z_gen = m.generator->forward(ad::constant(e), yb, true).val();
                }
                Var d_real = ad::mean(m.critic->forward(ad::constant(z_real), yb));
                Var d_gen = ad::mean(m.critic->forward(ad::constant(z_gen), yb));
                Var gp = losses::gradient_penalty(critic_fn, z_real, z_gen, yb,
                                                  cfg.h.lambda_gp, gan_rng);
                Var loss = losses::gan_objectives(d_real, d_gen, gp, zero_scalar(),
                                                  zero_scalar(), cfg.h)
                               .critic_loss;
                opt_d->step(ad::grad(loss, m.critic->params().vars()), lr_g);
                loss_d += loss.scalar() / cfg.inner_steps;
            }
        }

        for (int s = 0; s < cfg.inner_steps; ++s) {
            Var real_probs = m.classifier->forward(ad::constant(xb), dropout,
                                                   dropout ? &drop_rng : nullptr);
            Var loss;
            if (cfg.use_gan && gen_w != 0.0) {
                Mat x_gen;
                {
                    ad::NoGradGuard ng;
                    Mat e = gan_rng.uniform_mat(xb.rows(), noise_dim, 0.0, 1.0);
                    Mat z_gen = m.generator->forward(ad::constant(e), yb, true).val();
                    x_gen = m.cae->decode(z_gen, yb);
                }
                Var gen_probs = m.classifier->forward(ad::constant(x_gen), dropout,
                                                      dropout ? &drop_rng : nullptr);
                loss = losses::classifier_joint_loss(real_probs, yb, gen_probs, yb,
                                                     res.priors, cfg.h);
            } else {
                // Degenerate path: a 0-row generated batch yields exactly the
                // plain one-vs-all loss graph.
                loss = losses::classifier_joint_loss(
                    real_probs, yb, ad::constant(Mat::Zero(0, arch.n_classes)), {},
                    res.priors, cfg.h);
            }
            opt_c.step(ad::grad(loss, m.classifier->params().vars()), lr_c);
            loss_c += loss.scalar() / cfg.inner_steps;
        }

        if (cfg.use_gan) {
            Mat e = gan_rng.uniform_mat(xb.rows(), noise_dim, 0.0, 1.0);
            Var z_gen = m.generator->forward(ad::constant(e), yb, true);
            Var d_gen = ad::mean(m.critic->forward(z_gen, yb));
            Var x_gen = m.cae->decode(z_gen, yb);
            // The classifier only scores here (no update): no dropout noise.
            Var gen_probs = m.classifier->forward(x_gen);
            Var cls_term = losses::generator_cls_term(gen_probs, yb);
            losses::LatentBatch enc{ad::constant(z_real), yb,
                                    losses::LatentBatch::Source::encoded};
            losses::LatentBatch gen{z_gen, yb, losses::LatentBatch::Source::generated};
            Var reg = losses::angular_reg_total(enc, gen);
            Var loss = losses::gan_objectives(zero_scalar(), d_gen, zero_scalar(),
                                              cls_term, reg, cfg.h)
                           .generator_loss;
            opt_g->step(ad::grad(loss, m.generator->params().vars()), lr_g);
            loss_g = loss.scalar();
        }

        if (!std::isfinite(loss_d) || !std::isfinite(loss_c) || !std::isfinite(loss_g))
            throw TrainingDivergence(
                "non-finite loss at generator iteration " + std::to_string(it + 1) +
                " (D=" + std::to_string(loss_d) + ", G=" + std::to_string(loss_g) +
                ", C=" + std::to_string(loss_c) + ")");

        if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.generator_iters) {
            last_val = evaluate_accuracy(*m.classifier, val, res.priors);
            if (last_val > res.best_val_accuracy) save_best(it + 1, last_val);
        }
        res.history.push_back({it + 1, loss_d, loss_g, loss_c, last_val});
    }
    return res;
}

Mat generate_ooc_samples(models::Generator& gen, models::CAE& cae, int label,
                         int count, std::uint64_t seed) {
    if (label < 0 || label >= gen.spec().n_classes)
        throw std::invalid_argument("generate_ooc_samples: label out of range");
    if (count < 0) throw std::invalid_argument("generate_ooc_samples: negative count");
    if (!cae.frozen())
        throw std::logic_error("generate_ooc_samples: autoencoder is not frozen");
    if (count == 0) return Mat(0, cae.spec().input_dim());
    Rng rng(seed, "ooc_samples");
    Mat z = gen.sample(count, label, rng);
    std::vector<int> labels(std::size_t(count), label);
    return cae.decode(z, labels);
}

checkpoint::GroupMap snapshot_models(const UqganModels& m) {
    checkpoint::GroupMap g;
    g["classifier"] = checkpoint::snapshot(m.classifier->params());
    g["cae"] = checkpoint::snapshot(m.cae->params());
    g["generator"] = checkpoint::snapshot(m.generator->params(), m.generator->buffers());
    g["critic"] = checkpoint::snapshot(m.critic->params());
    return g;
}

void restore_models(UqganModels& m, const checkpoint::GroupMap& groups) {
    auto need = [&](const char* name) -> const checkpoint::TensorList& {
        auto it = groups.find(name);
        if (it == groups.end())
            throw IoError(std::string("checkpoint lacks model group '") + name + "'");
        return it->second;
    };
    checkpoint::restore(m.classifier->params(), {}, need("classifier"));
    checkpoint::restore(m.cae->params(), {}, need("cae"));
    checkpoint::restore(m.generator->params(), m.generator->buffers(), need("generator"));
    checkpoint::restore(m.critic->params(), {}, need("critic"));
}

}  // namespace uqgan::trainer
