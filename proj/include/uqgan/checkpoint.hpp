// Bit-exact binary checkpoints: named weight tensors grouped per model, plus
// the architecture, training configuration and seed needed to rebuild the run.

#pragma once

#include "uqgan/models.hpp"
#include "uqgan/nn.hpp"
#include "uqgan/training_config.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace uqgan::checkpoint {

using ad::Mat;

using TensorList = std::vector<std::pair<std::string, Mat>>;
using GroupMap = std::map<std::string, TensorList>;

struct Checkpoint {
    models::ArchitectureSpec arch;
    trainer::TrainingConfig config;
    std::uint64_t seed = 0;
    GroupMap groups;  // e.g. "classifier" -> [(name, tensor), ...]
};

// Copy out parameters (and optional non-trainable buffers) of one model.
TensorList snapshot(const nn::ParamRegistry& reg,
                    const std::vector<std::pair<std::string, Mat*>>& buffers = {});

// Write saved tensors back by name.  Every registry parameter and buffer must
// be covered exactly once with matching dimensions.
void restore(nn::ParamRegistry& reg,
             const std::vector<std::pair<std::string, Mat*>>& buffers,
             const TensorList& saved);

void save(const std::string& path, const Checkpoint& c);
Checkpoint load(const std::string& path);

}  // namespace uqgan::checkpoint
