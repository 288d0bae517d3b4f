#include "uqgan/losses.hpp"

#include "uqgan/errors.hpp"
#include "uqgan/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace uqgan::losses {

void GanHyperparams::validate() const {
    if (lambda_gp < 0.0 || lambda_cl < 0.0 || lambda_r < 0.0)
        throw std::invalid_argument("GanHyperparams: lambdas must be nonnegative");
    if (lambda_real < 0.0 || lambda_real > 1.0)
        throw std::invalid_argument("GanHyperparams: lambda_real must be in [0,1]");
}

namespace {

Var neg_log_clamped(const Var& p) { return ad::neg(ad::log(ad::clamp(p, kEps, 1.0))); }

void check_labels(const std::vector<int>& labels, Eigen::Index rows, int n,
                  const char* op) {
    if (Eigen::Index(labels.size()) != rows)
        throw std::invalid_argument(std::string(op) + ": label count != batch rows");
    for (int l : labels)
        if (l < 0 || l >= n)
            throw std::invalid_argument(std::string(op) + ": label out of range");
}

// Sum over the batch of the one-vs-all bracket with the out-of-class part scaled
// by lambda_real.  Shared by ova_loss (lambda_real = 1) and the joint loss so
// the degenerate configuration evaluates through identical arithmetic.
Var weighted_ova_sum(const Var& probs, const std::vector<int>& labels,
                     const ova::ClassPriors& priors, double lambda_real) {
    const Eigen::Index b = probs.rows();
    const int n = int(probs.cols());
    if (n < 2) throw std::invalid_argument("ova loss: need n >= 2 classes");
    if (priors.n() != n) throw std::invalid_argument("ova loss: priors length != n");
    check_labels(labels, b, n, "ova loss");

    Mat in_mask = Mat::Zero(b, n);
    Mat ooc_w = Mat::Zero(b, n);
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = labels[std::size_t(i)];
        in_mask(i, y) = 1.0;
        const double py = priors.probs(y);
        for (int j = 0; j < n; ++j) {
            if (j == y) continue;
            ooc_w(i, j) = lambda_real / double(n - 1) * py / priors.probs(j);
        }
    }

    Var in_term = ad::sum(ad::mul(ad::constant(std::move(in_mask)), neg_log_clamped(probs)));
    Var ooc_term = ad::sum(ad::mul(ad::constant(std::move(ooc_w)),
                                   neg_log_clamped(ad::adds(ad::neg(probs), 1.0))));
    return ad::add(in_term, ooc_term);
}

}  // namespace

Var ova_loss(const Var& in_class_probs, const std::vector<int>& labels,
             const ova::ClassPriors& priors) {
    const Eigen::Index b = in_class_probs.rows();
    if (b == 0) throw std::invalid_argument("ova_loss: empty batch");
    return ad::muls(weighted_ova_sum(in_class_probs, labels, priors, 1.0), 1.0 / double(b));
}

Var classifier_joint_loss(const Var& real_probs, const std::vector<int>& real_labels,
                          const Var& gen_probs, const std::vector<int>& gen_labels,
                          const ova::ClassPriors& priors, const GanHyperparams& h) {
    h.validate();
    const Eigen::Index b = real_probs.rows();
    if (b == 0) throw std::invalid_argument("classifier_joint_loss: empty real batch");
    Var total = weighted_ova_sum(real_probs, real_labels, priors, h.lambda_real);

    const double gen_w = 1.0 - h.lambda_real;
    const Eigen::Index bg = gen_probs.defined() ? gen_probs.rows() : 0;
    if (bg > 0 && gen_w != 0.0) {
        // The joint loss pairs one generated example with each real one.
        if (bg != b)
            throw std::invalid_argument(
                "classifier_joint_loss: generated batch size must match real batch");
        const int n = int(real_probs.cols());
        check_labels(gen_labels, bg, n, "classifier_joint_loss(gen)");
        Mat gen_mask = Mat::Zero(bg, n);
        for (Eigen::Index i = 0; i < bg; ++i) gen_mask(i, gen_labels[std::size_t(i)]) = 1.0;
        Var gen_term = ad::sum(ad::mul(ad::constant(std::move(gen_mask)),
                                       neg_log_clamped(ad::adds(ad::neg(gen_probs), 1.0))));
        total = ad::add(total, ad::muls(gen_term, gen_w));
    }
    return ad::muls(total, 1.0 / double(b));
}

Var generator_cls_term(const Var& gen_probs, const std::vector<int>& gen_labels) {
    const Eigen::Index b = gen_probs.rows();
    const int n = int(gen_probs.cols());
    if (b == 0) throw std::invalid_argument("generator_cls_term: empty batch");
    check_labels(gen_labels, b, n, "generator_cls_term");
    Mat mask = Mat::Zero(b, n);
    for (Eigen::Index i = 0; i < b; ++i) mask(i, gen_labels[std::size_t(i)]) = 1.0;
    Var term = ad::sum(ad::mul(ad::constant(std::move(mask)),
                               neg_log_clamped(ad::adds(ad::neg(gen_probs), 1.0))));
    return ad::muls(term, 1.0 / double(b));
}

Var cae_loss(const Var& reconstruction, const Mat& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols())
        throw std::invalid_argument("cae_loss: shape mismatch");
    if (reconstruction.rows() == 0) throw std::invalid_argument("cae_loss: empty batch");
    if ((target.array() < 0.0).any() || (target.array() > 1.0).any())
        throw std::invalid_argument("cae_loss: target values outside [0,1]");
    Var x = ad::constant(target);
    Var one_minus_x = ad::constant(Mat(1.0 - target.array()));
    // 0*log 0 := 0 holds exactly: the clamp bounds the log while the factor
    // x (or 1-x) is exactly zero at the binary endpoints.
    Var term = ad::add(ad::mul(x, neg_log_clamped(reconstruction)),
                       ad::mul(one_minus_x,
                               neg_log_clamped(ad::adds(ad::neg(reconstruction), 1.0))));
    return ad::mean(term);
}

Var gradient_penalty(const CriticFn& critic, const Mat& real_codes, const Mat& gen_codes,
                     const std::vector<int>& labels, double lambda_gp, Rng& rng) {
    if (real_codes.rows() != gen_codes.rows() || real_codes.cols() != gen_codes.cols())
        throw std::invalid_argument("gradient_penalty: code batches must match in shape");
    const Eigen::Index b = real_codes.rows();
    if (b == 0) throw std::invalid_argument("gradient_penalty: empty batch");
    if (Eigen::Index(labels.size()) != b)
        throw std::invalid_argument("gradient_penalty: label count mismatch");

    Mat zhat(b, real_codes.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
        const double u = rng.uniform();
        zhat.row(i) = u * real_codes.row(i) + (1.0 - u) * gen_codes.row(i);
    }

    Var z(std::move(zhat), /*requires_grad=*/true);
    Var d = critic(z, labels);
    if (d.rows() != b || d.cols() != 1)
        throw std::invalid_argument("gradient_penalty: critic must return batch x 1");

    // Row i of the sum's gradient is the input gradient of D at example i.
    Var g = ad::grad(ad::sum(d), {z}, /*create_graph=*/true)[0];
    if (!g.requires_grad())
        throw UnsupportedModel(
            "gradient_penalty: critic is not twice differentiable (its input "
            "gradient carries no dependence on the critic parameters)");

    Var norm = ad::sqrt(ad::adds(ad::rowsum(ad::square(g)), 1e-12));
    return ad::muls(ad::mean(ad::square(ad::adds(norm, -1.0))), lambda_gp);
}

GanObjectives gan_objectives(const Var& critic_real_mean, const Var& critic_gen_mean,
                             const Var& gp, const Var& cls_term, const Var& reg_term,
                             const GanHyperparams& h) {
    h.validate();
    GanObjectives o;
    o.critic_loss = ad::add(ad::sub(critic_gen_mean, critic_real_mean), gp);
    o.generator_loss = ad::add(ad::add(ad::neg(critic_gen_mean),
                                       ad::muls(cls_term, h.lambda_cl)),
                               ad::muls(reg_term, h.lambda_r));
    return o;
}

AngularReg angular_reg_single(const Var& anchor, const Var& gen_codes) {
    if (anchor.rows() != 1)
        throw std::invalid_argument("angular_reg_single: anchor must be 1 x d");
    if (gen_codes.cols() != anchor.cols())
        throw std::invalid_argument("angular_reg_single: dimension mismatch");
    const Eigen::Index m = gen_codes.rows();
    if (m < 2) return {ad::constant(0.0), /*degenerate=*/true};

    constexpr double kDelta = 1e-6;  // arccos argument clamp

    Var diff = ad::sub(gen_codes, ad::broadcast_row(anchor, m));
    // Tiny additive guard keeps the norm differentiable if a generated code
    // collides with the anchor; far below the gradcheck tolerance otherwise.
    Var norm = ad::sqrt(ad::adds(ad::rowsum(ad::square(diff)), 1e-24));
    Var unit = ad::div(diff, ad::broadcast_col(norm, diff.cols()));
    Var cos = ad::matmul(unit, ad::transpose(unit));
    Var angle = ad::arccos(ad::clamp(cos, -1.0 + kDelta, 1.0 - kDelta));
    Var pair_loss = ad::neg(ad::log(ad::muls(angle, 1.0 / M_PI)));

    Mat upper = Mat::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) upper(i, j) = 1.0;
    const double n_pairs = double(m) * double(m - 1) / 2.0;
    Var value = ad::muls(ad::sum(ad::mul(pair_loss, ad::constant(std::move(upper)))),
                         1.0 / n_pairs);
    return {value, false};
}

Var angular_reg_total(const LatentBatch& encoded, const LatentBatch& generated) {
    if (Eigen::Index(encoded.labels.size()) != encoded.codes.rows() ||
        Eigen::Index(generated.labels.size()) != generated.codes.rows())
        throw std::invalid_argument("angular_reg_total: labels/codes mismatch");

    // Classes present among the anchors, in first-appearance order.
    std::vector<int> classes;
    for (int y : encoded.labels)
        if (std::find(classes.begin(), classes.end(), y) == classes.end())
            classes.push_back(y);
    if (classes.empty()) return ad::constant(0.0);

    auto gather = [](const Var& codes, const std::vector<int>& labels, int y) {
        std::vector<Eigen::Index> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == y) idx.push_back(Eigen::Index(i));
        Mat sel = Mat::Zero(Eigen::Index(idx.size()), codes.rows());
        for (std::size_t k = 0; k < idx.size(); ++k) sel(Eigen::Index(k), idx[k]) = 1.0;
        return ad::matmul(ad::constant(std::move(sel)), codes);
    };

    Var total = ad::constant(0.0);
    for (int y : classes) {
        Var anchors = gather(encoded.codes, encoded.labels, y);
        Var gen_y = gather(generated.codes, generated.labels, y);
        if (gen_y.rows() < 2) continue;  // contributes 0
        Var class_sum = ad::constant(0.0);
        for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
            auto single = angular_reg_single(ad::slice_rows(anchors, k, 1), gen_y);
            class_sum = ad::add(class_sum, single.value);
        }
        total = ad::add(total, ad::muls(class_sum, 1.0 / double(anchors.rows())));
    }
    return ad::muls(total, 1.0 / double(classes.size()));
}

}  // namespace uqgan::losses
