#include "uqgan/baselines.hpp"

#include "uqgan/checkpoint.hpp"
#include "uqgan/errors.hpp"
#include "uqgan/losses.hpp"
#include "uqgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

namespace uqgan::baselines {

using ad::Var;

std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::max_softmax: return "max_softmax";
        case BaselineKind::softmax_entropy: return "softmax_entropy";
        case BaselineKind::ova_baseline: return "ova_baseline";
        case BaselineKind::entropy_oracle: return "entropy_oracle";
        case BaselineKind::ova_oracle: return "ova_oracle";
    }
    throw std::logic_error("unreachable baseline kind");
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "max_softmax") return BaselineKind::max_softmax;
    if (s == "softmax_entropy") return BaselineKind::softmax_entropy;
    if (s == "ova_baseline") return BaselineKind::ova_baseline;
    if (s == "entropy_oracle") return BaselineKind::entropy_oracle;
    if (s == "ova_oracle") return BaselineKind::ova_oracle;
    throw ConfigError("unknown baseline kind: '" + s + "'");
}

bool requires_ood(BaselineKind k) {
    return k == BaselineKind::entropy_oracle || k == BaselineKind::ova_oracle;
}

SoftmaxScores softmax_scores(const Mat& logits) {
    if (logits.rows() == 0 || logits.cols() < 2)
        throw std::invalid_argument("softmax_scores: need a batch with >= 2 classes");
    SoftmaxScores out;
    out.max_prob.resize(logits.rows());
    out.entropy.resize(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Vec row = logits.row(i).transpose();
        Vec p = (row.array() - row.maxCoeff()).exp();
        p /= p.sum();
        out.max_prob[i] = p.maxCoeff();
        double h = 0.0;
        for (Eigen::Index j = 0; j < p.size(); ++j)
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        out.entropy[i] = h;
    }
    return out;
}

namespace {

void check_dataset_matches(const data::Dataset& d,
                           const models::ArchitectureSpec& arch) {
    if (d.size() == 0) throw std::invalid_argument("baselines: empty dataset");
    if (d.n_classes != arch.n_classes)
        throw std::invalid_argument("baselines: dataset/model class count mismatch");
    if (int(d.x.cols()) != arch.input_dim())
        throw std::invalid_argument("baselines: dataset/model input width mismatch");
}

// log(sum_j exp(logits_ij)) per row, shifted by the detached row max so the
// exponentials cannot overflow.
Var logsumexp_rows(const Var& logits) {
    Mat shift = logits.val().rowwise().maxCoeff();
    Var shifted = ad::sub(logits, ad::broadcast_col(ad::constant(shift), logits.val().cols()));
    return ad::add(ad::log(ad::rowsum(ad::exp(shifted))), ad::constant(shift));
}

// Mean cross-entropy of softmax(logits) against the label classes.
Var cross_entropy(const Var& logits, const std::vector<int>& labels, int n) {
    Mat onehot = nn::one_hot(labels, n);
    Var picked = ad::rowsum(ad::mul(logits, ad::constant(onehot)));
    return ad::mean(ad::sub(logsumexp_rows(logits), picked));
}

// Mean cross-entropy of softmax(logits) against the uniform distribution:
// lse - (1/n) sum_j logits_j per row.
Var uniform_cross_entropy(const Var& logits) {
    return ad::mean(ad::sub(logsumexp_rows(logits), ad::rowmean(logits)));
}

// Per-batch loss. real_out/ood_out are classifier outputs (head-dependent);
// ood_out has zero rows when no OoD stream is configured.
struct LossCtx {
    const Var& real_out;
    const std::vector<int>& labels;
    const Var& ood_out;
    const ova::ClassPriors& priors;
};
using LossFn = std::function<Var(const LossCtx&)>;

// Mini-batch loop shared by the softmax and oracle trainers.  Mirrors the main
// trainer's classifier handling: identical split, batch stream, inner-step
// count, dropout stream, learning-rate decay and evaluation cadence.
BaselineResult classifier_loop(const data::Dataset& dataset,
                               const data::Dataset* ood,
                               const models::ArchitectureSpec& arch,
                               const trainer::TrainingConfig& cfg,
                               models::HeadKind head, const LossFn& batch_loss) {
    cfg.validate();
    arch.validate();
    check_dataset_matches(dataset, arch);
    if (ood) {
        if (ood->size() == 0)
            throw std::invalid_argument("baselines: oracle needs a non-empty OoD set");
        if (ood->x.cols() != dataset.x.cols())
            throw std::invalid_argument("baselines: OoD input width mismatch");
    }

    auto [train, val] = data::stratified_split(dataset, cfg.val_fraction, cfg.seed);
    if (train.size() < 2)
        throw std::invalid_argument("baselines: training split too small");

    BaselineResult res;
    res.priors = data::estimate_priors(train.y, arch.n_classes);
    res.classifier = std::make_shared<models::Classifier>(
        arch, substream_seed(cfg.seed, "init/classifier"), head);

    data::Batcher batcher(train.size(), cfg.batch_size, Rng(cfg.seed, "train/batches"));
    std::optional<data::Batcher> ood_batcher;
    if (ood)
        ood_batcher.emplace(ood->size(), cfg.batch_size,
                            Rng(cfg.seed, "train/ood_batches"));
    Rng aug_rng(cfg.seed, "train/augment");
    Rng drop_rng(cfg.seed, "train/dropout");
    const bool flip = arch.kind == models::ArchKind::small_resnet && arch.is_image();
    const bool dropout = res.classifier->dropout_rate() > 0.0;
    const Var empty_out = ad::constant(Mat::Zero(0, arch.n_classes));

    nn::Adam opt(res.classifier->params().vars());

    auto evaluate = [&]() {
        if (head == models::HeadKind::sigmoid_ova)
            return trainer::evaluate_accuracy(*res.classifier, val, res.priors);
        // Logits head: softmax is monotone per row, argmax directly.
        Eigen::Index correct = 0;
        const Eigen::Index chunk = 512;
        for (Eigen::Index start = 0; start < val.size(); start += chunk) {
            const Eigen::Index len = std::min(chunk, val.size() - start);
            Mat out = res.classifier->predict(val.x.middleRows(start, len));
            for (Eigen::Index i = 0; i < len; ++i) {
                Eigen::Index argmax = 0;
                out.row(i).maxCoeff(&argmax);
                if (int(argmax) == val.y[std::size_t(start + i)]) ++correct;
            }
        }
        return double(correct) / double(val.size());
    };

    checkpoint::TensorList best;
    auto save_best = [&](int iteration, double acc) {
        res.best_val_accuracy = acc;
        res.best_iteration = iteration;
        best = checkpoint::snapshot(res.classifier->params());
    };
    double last_val = evaluate();
    save_best(0, last_val);

    for (int it = 0; it < cfg.generator_iters; ++it) {
        const double lr =
            nn::lr_at(it, cfg.generator_iters, cfg.lr_classifier, cfg.lr_floor);
        auto idx = batcher.next();
        Mat xb = data::take_rows(train.x, idx);
        auto yb = data::take_labels(train.y, idx);
        if (flip) {
            Mat flipped =
                data::hflip_rows(xb, arch.input_shape[0], arch.input_shape[1],
                                 arch.input_shape[2]);
            for (Eigen::Index i = 0; i < xb.rows(); ++i)
                if (aug_rng.uniform() < 0.5) xb.row(i) = flipped.row(i);
        }
        Mat xo(0, dataset.x.cols());
        if (ood_batcher) xo = data::take_rows(ood->x, ood_batcher->next());

        double loss_value = 0.0;
        for (int s = 0; s < cfg.inner_steps; ++s) {
            Var real_out = res.classifier->forward(ad::constant(xb), dropout,
                                                   dropout ? &drop_rng : nullptr);
            Var ood_out =
                xo.rows() > 0
                    ? res.classifier->forward(ad::constant(xo), dropout,
                                              dropout ? &drop_rng : nullptr)
                    : empty_out;
            Var loss = batch_loss(LossCtx{real_out, yb, ood_out, res.priors});
            opt.step(ad::grad(loss, res.classifier->params().vars()), lr);
            loss_value += loss.scalar() / cfg.inner_steps;
        }
        if (!std::isfinite(loss_value))
            throw TrainingDivergence("baseline loss diverged at iteration " +
                                     std::to_string(it + 1));

        if ((it + 1) % cfg.eval_interval == 0 || it + 1 == cfg.generator_iters) {
            last_val = evaluate();
            if (last_val > res.best_val_accuracy) save_best(it + 1, last_val);
        }
        res.history.push_back({it + 1, 0.0, 0.0, loss_value, last_val});
    }
    checkpoint::restore(res.classifier->params(), {}, best);
    return res;
}

}  // namespace

BaselineResult train_ova_baseline(const data::Dataset& dataset,
                                  const models::ArchitectureSpec& arch,
                                  trainer::TrainingConfig cfg) {
    // Degenerate configuration of the full trainer: all out-of-class terms
    // vanish and the GAN never runs.
    cfg.use_gan = false;
    cfg.h.lambda_real = 1.0;
    cfg.h.lambda_cl = 0.0;
    cfg.h.lambda_r = 0.0;
    trainer::UqganModels m = trainer::build_models(arch, cfg.seed);
    if (!m.cae->frozen()) m.cae->freeze();  // encoder unused without the GAN
    trainer::TrainResult r = trainer::train_uqgan(dataset, m, cfg);

    BaselineResult res;
    res.classifier = m.classifier;
    res.priors = r.priors;
    res.history = std::move(r.history);
    res.best_val_accuracy = r.best_val_accuracy;
    res.best_iteration = r.best_iteration;
    checkpoint::restore(res.classifier->params(), {}, r.best.groups.at("classifier"));
    return res;
}

BaselineResult train_softmax_classifier(const data::Dataset& dataset,
                                        const models::ArchitectureSpec& arch,
                                        const trainer::TrainingConfig& cfg) {
    const int n = arch.n_classes;
    return classifier_loop(dataset, nullptr, arch, cfg, models::HeadKind::linear_logits,
                           [n](const LossCtx& c) {
                               return cross_entropy(c.real_out, c.labels, n);
                           });
}

BaselineResult train_oracle(const data::Dataset& dataset,
                            const data::Dataset& ood_train, BaselineKind kind,
                            const models::ArchitectureSpec& arch,
                            const trainer::TrainingConfig& cfg) {
    if (!requires_ood(kind))
        throw std::invalid_argument("train_oracle: kind '" + to_string(kind) +
                                    "' is not an oracle");
    const int n = arch.n_classes;
    if (kind == BaselineKind::entropy_oracle) {
        // Cross-entropy on in-dist batches + cross-entropy against the uniform
        // distribution on OoD batches, 1:1 weight.
        return classifier_loop(
            dataset, &ood_train, arch, cfg, models::HeadKind::linear_logits,
            [n](const LossCtx& c) {
                Var loss = cross_entropy(c.real_out, c.labels, n);
                if (c.ood_out.val().rows() > 0)
                    loss = ad::add(loss, uniform_cross_entropy(c.ood_out));
                return loss;
            });
    }
    // ova_oracle: the joint one-vs-all loss with real OoD examples in the
    // generated slot.  They carry no class label, so each example counts as
    // out-of-class for every head with weight 1/n — the mean over all entries
    // of -log(1 - p).
    const losses::GanHyperparams h = cfg.h;
    return classifier_loop(
        dataset, &ood_train, arch, cfg, models::HeadKind::sigmoid_ova,
        [n, h](const LossCtx& c) {
            Var loss = losses::classifier_joint_loss(
                c.real_out, c.labels, ad::constant(Mat::Zero(0, n)), {}, c.priors, h);
            if (c.ood_out.val().rows() > 0 && 1.0 - h.lambda_real != 0.0) {
                Var one_minus =
                    ad::clamp(ad::adds(ad::neg(c.ood_out), 1.0), losses::kEps, 1.0);
                Var ooc = ad::mean(ad::neg(ad::log(one_minus)));
                loss = ad::add(loss, ad::muls(ooc, 1.0 - h.lambda_real));
            }
            return loss;
        });
}

}  // namespace uqgan::baselines
