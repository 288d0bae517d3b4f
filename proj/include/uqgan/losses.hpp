// Differentiable training objectives: the one-vs-all classifier loss, the
// joint loss with generated out-of-class examples, cAE reconstruction,
// WGAN-GP critic/generator objectives, and the angular spread regularizer.
//
// All functions build autodiff graphs over ad::Var; evaluate .scalar() for
// the value, ad::grad() for gradients.  Logs are eps-clamped so every loss is
// finite on the closed unit interval.

#pragma once

#include "uqgan/autodiff.hpp"
#include "uqgan/ova.hpp"
#include "uqgan/rng.hpp"

#include <functional>
#include <vector>

namespace uqgan::losses {

using ad::Mat;
using ad::Var;

inline constexpr double kEps = 1e-7;

struct GanHyperparams {
    double lambda_gp = 10.0;
    double lambda_cl = 2.0;
    double lambda_real = 0.6;
    double lambda_r = 32.0;
    void validate() const;
};

// Latent code batch, either encoder outputs (z) or generator outputs (z~).
struct LatentBatch {
    enum class Source { encoded, generated };
    Var codes;  // batch x latent_dim
    std::vector<int> labels;
    Source source = Source::encoded;
};

// One-vs-all classification loss: mean over the batch of
//   -log C(i|x,y) - (1/(n-1)) sum_{y' != y} (p(y)/p(y')) log C(o|x,y').
Var ova_loss(const Var& in_class_probs, const std::vector<int>& labels,
             const ova::ClassPriors& priors);

// Joint variant with generated out-of-class examples: the real out-of-class
// term is scaled by lambda_real, and a
// generated-example term -(1-lambda_real) log C(o|x~,y) is added, one
// generated example per real one (pass a 0-row gen batch to drop it; it is
// also skipped exactly when 1-lambda_real == 0, keeping the degenerate
// configuration bit-identical to ova_loss).
Var classifier_joint_loss(const Var& real_probs, const std::vector<int>& real_labels,
                          const Var& gen_probs, const std::vector<int>& gen_labels,
                          const ova::ClassPriors& priors, const GanHyperparams& h);

// Mean of -log C(o|x~,y) over a generated batch; the generator's classifier
// term of the generator objective.
Var generator_cls_term(const Var& gen_probs, const std::vector<int>& gen_labels);

// Autoencoder reconstruction loss: mean over examples and pixels of the
// binary cross entropy
//   -[x log x^ + (1-x) log(1-x^)], with 0*log 0 := 0.
Var cae_loss(const Var& reconstruction, const Mat& target);

// Gradient penalty lambda_gp * mean[(||grad_z D(z^|y)||_2 - 1)^2] at
// z^ = u z + (1-u) z~,
// one u ~ U(0,1) per example.  Differentiates through the critic's input
// gradient; throws UnsupportedModel if the critic admits no second-order path.
using CriticFn = std::function<Var(const Var& codes, const std::vector<int>& labels)>;
Var gradient_penalty(const CriticFn& critic, const Mat& real_codes, const Mat& gen_codes,
                     const std::vector<int>& labels, double lambda_gp, Rng& rng);

// WGAN-GP objectives assembled from precomputed pieces.  cls_term is the (nonnegative)
// mean of -log C(o|x~,y); reg_term is L_R.
struct GanObjectives {
    Var critic_loss;     // minimized by the critic:  D(z~) - D(z) + gp
    Var generator_loss;  // minimized by the generator: -D(z~) + l_cl*cls + l_R*reg
};
GanObjectives gan_objectives(const Var& critic_real_mean, const Var& critic_gen_mean,
                             const Var& gp, const Var& cls_term, const Var& reg_term,
                             const GanHyperparams& h);

// Angular spread regularizer for one anchor z and the generated codes
// sharing its label:
// mean over unique pairs (i<j) of -log(arccos(cos(z_i - z, z_j - z)) / pi).
struct AngularReg {
    Var value;
    bool degenerate = false;  // fewer than 2 generated codes: value is 0
};
AngularReg angular_reg_single(const Var& anchor, const Var& gen_codes);

// Full regularizer: per class, average the single-anchor value over the
// encoded anchors
// of that class (using generated codes of the same class), then average over
// the classes present among the anchors.  Classes with fewer than 2 generated
// codes contribute 0.
Var angular_reg_total(const LatentBatch& encoded, const LatentBatch& generated);

}  // namespace uqgan::losses
