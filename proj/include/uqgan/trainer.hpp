// Training orchestration: cAE pretraining + freezing, then the alternating
// critic / classifier / generator loop with linearly decaying learning rates.

#pragma once

#include "uqgan/checkpoint.hpp"
#include "uqgan/data.hpp"
#include "uqgan/models.hpp"
#include "uqgan/training_config.hpp"

#include <memory>
#include <string>
#include <vector>

namespace uqgan::trainer {

using ad::Mat;

struct UqganModels {
    std::shared_ptr<models::Classifier> classifier;
    std::shared_ptr<models::CAE> cae;
    std::shared_ptr<models::Generator> generator;
    std::shared_ptr<models::Critic> critic;
};

// Every component initializes from its own named substream of the run seed,
// so e.g. disabling the GAN cannot shift the classifier's initial weights.
UqganModels build_models(const models::ArchitectureSpec& arch, std::uint64_t seed);

struct HistoryRecord {
    int iteration;        // 1-based generator iteration
    double loss_D;        // critic loss, averaged over the inner steps
    double loss_G;        // generator loss (0 while the GAN is disabled)
    double loss_C;        // classifier loss, averaged over the inner steps
    double val_accuracy;  // most recent validation accuracy
};

struct TrainResult {
    std::vector<HistoryRecord> history;
    double best_val_accuracy = -1.0;
    int best_iteration = 0;
    checkpoint::Checkpoint best;  // weights at the best validation accuracy
    ova::ClassPriors priors = ova::ClassPriors::uniform(2);  // from the training split
};

// Reconstruction pretraining; freezes the autoencoder afterwards and returns
// the last epoch's mean loss in nats/pixel.  Identity (toy) autoencoders skip
// straight to 0.  Pixel values outside [0,1] are rejected.
double pretrain_cae(models::CAE& cae, const data::Dataset& train,
                    const TrainingConfig& cfg);

// The main loop.  Requires a frozen autoencoder.  Per generator iteration:
// one real batch; inner_steps critic updates then inner_steps classifier
// updates on that batch (fresh generated examples each step); one generator
// update.  Writes a checkpoint to checkpoint_path (if nonempty) whenever
// validation accuracy improves.  Throws TrainingDivergence on non-finite loss.
TrainResult train_uqgan(const data::Dataset& dataset, UqganModels& m,
                        const TrainingConfig& cfg,
                        const std::string& checkpoint_path = "");

// Decoded out-of-class examples x~ = decode(G(e,y), y); bit-identical for a
// fixed seed.  Requires the frozen autoencoder; runs the generator in eval
// mode.
Mat generate_ooc_samples(models::Generator& gen, models::CAE& cae, int label,
                         int count, std::uint64_t seed);

// Posterior-argmax accuracy of the one-vs-all classifier.
double evaluate_accuracy(models::Classifier& cls, const data::Dataset& d,
                         const ova::ClassPriors& priors);

// Checkpoint group layout used for UQGAN runs.
checkpoint::GroupMap snapshot_models(const UqganModels& m);
void restore_models(UqganModels& m, const checkpoint::GroupMap& groups);

}  // namespace uqgan::trainer
