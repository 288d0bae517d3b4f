// Training schedule and hyperparameters, shared by the trainer and the
// checkpoint format.

#pragma once

#include "uqgan/losses.hpp"

#include <cstdint>
#include <stdexcept>

namespace uqgan::trainer {

struct TrainingConfig {
    losses::GanHyperparams h;
    int batch_size = 256;
    int generator_iters = 2000;
    int inner_steps = 5;       // critic and classifier updates per generator step
    double lr_classifier = 1e-3;
    double lr_gan = 2e-4;
    double lr_floor = 1e-5;
    int cae_epochs = 10;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;
    // Validation passes are costly; run one every eval_interval generator
    // iterations (and always on the last).
    int eval_interval = 25;
    // false trains the plain one-vs-all classifier on the identical data and
    // initialization streams, skipping every GAN update.
    bool use_gan = true;

    void validate() const {
        if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
        if (generator_iters < 1)
            throw std::invalid_argument("config: generator_iters must be >= 1");
        if (inner_steps < 1) throw std::invalid_argument("config: inner_steps must be >= 1");
        if (lr_classifier <= 0.0 || lr_gan <= 0.0 || lr_floor <= 0.0)
            throw std::invalid_argument("config: learning rates must be positive");
        if (cae_epochs < 0) throw std::invalid_argument("config: negative cae_epochs");
        if (val_fraction <= 0.0 || val_fraction >= 1.0)
            throw std::invalid_argument("config: val_fraction must lie in (0,1)");
        if (eval_interval < 1)
            throw std::invalid_argument("config: eval_interval must be >= 1");
        h.validate();
    }
};

}  // namespace uqgan::trainer
