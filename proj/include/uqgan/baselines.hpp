// Reference scorers trained without the conditional GAN: plain softmax
// classifiers (maximum-probability / entropy scoring), the GAN-free
// one-vs-all baseline, and two oracle variants that are handed the real
// out-of-distribution training data.
//
// All trainers share the main trainer's split, batching, learning-rate decay
// and evaluation cadence so that rows produced from the same TrainingConfig
// are comparable.

#pragma once

#include "uqgan/data.hpp"
#include "uqgan/models.hpp"
#include "uqgan/ova.hpp"
#include "uqgan/trainer.hpp"

#include <memory>
#include <string>
#include <vector>

namespace uqgan::baselines {

using Mat = ova::Mat;
using Vec = ova::Vec;

enum class BaselineKind {
    max_softmax,      // softmax classifier scored by its maximum probability
    softmax_entropy,  // softmax classifier scored by predictive entropy
    ova_baseline,     // one-vs-all classifier, no out-of-class examples
    entropy_oracle,   // softmax classifier + uniform-target loss on real OoD
    ova_oracle,       // one-vs-all classifier + real OoD as out-of-class data
};

std::string to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

// True for the kinds that must be given a real OoD training set.
bool requires_ood(BaselineKind k);

struct SoftmaxScores {
    Vec max_prob;  // higher = more in-distribution
    Vec entropy;   // natural-log predictive entropy; higher = more uncertain
};

// Row-wise softmax over logits, reduced to the two standard scores.
SoftmaxScores softmax_scores(const Mat& logits);

struct BaselineResult {
    std::shared_ptr<models::Classifier> classifier;  // best-validation weights
    ova::ClassPriors priors{ova::ClassPriors::uniform(2)};
    std::vector<trainer::HistoryRecord> history;
    double best_val_accuracy = -1.0;
    int best_iteration = 0;
};

// One-vs-all classifier trained on in-distribution data only: the degenerate
// configuration of the full trainer (lambda_real pinned to 1, GAN disabled),
// run through the very same loop.
BaselineResult train_ova_baseline(const data::Dataset& dataset,
                                  const models::ArchitectureSpec& arch,
                                  trainer::TrainingConfig cfg);

// Plain softmax classifier (cross-entropy); the model behind the max_softmax
// and softmax_entropy rows and the MC-Dropout variants.
BaselineResult train_softmax_classifier(const data::Dataset& dataset,
                                        const models::ArchitectureSpec& arch,
                                        const trainer::TrainingConfig& cfg);

// Oracle classifiers: same architectures, but real OoD examples join the
// training set.
//   entropy_oracle: cross-entropy on in-dist batches plus cross-entropy
//                   against the uniform distribution on OoD batches (1:1).
//   ova_oracle:     one-vs-all joint loss with real OoD examples substituted
//                   for generated ones; lacking a conditioning label, each
//                   OoD example is out-of-class for every head, weight 1/n.
BaselineResult train_oracle(const data::Dataset& dataset,
                            const data::Dataset& ood_train, BaselineKind kind,
                            const models::ArchitectureSpec& arch,
                            const trainer::TrainingConfig& cfg);

}  // namespace uqgan::baselines
