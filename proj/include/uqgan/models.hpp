// Network constructors: one-vs-all classifier backbones, the conditional
// autoencoder, the conditional WGAN generator/critic pair, and the MC-Dropout
// wrapper.  Conditioning is one-hot label concatenation everywhere (appended
// feature columns for dense inputs, constant label planes for conv inputs).
// Batch normalization appears only in the generator.

#pragma once

#include "uqgan/nn.hpp"
#include "uqgan/rng.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace uqgan::models {

using ad::Mat;
using ad::Var;

enum class ArchKind { mlp_toy, lenet5, small_resnet };

const char* to_string(ArchKind k);
ArchKind arch_kind_from_string(const std::string& s);

struct ArchitectureSpec {
    ArchKind kind = ArchKind::mlp_toy;
    std::vector<int> input_shape = {2};  // {d} for vectors, {c,h,w} for images
    int n_classes = 2;
    int latent_dim = 2;
    int noise_dim = 0;  // 0 means "same as latent_dim"
    double dropout_rate = 0.0;
    // GAN net widths, sized for the image profiles by default; toy configs
    // shrink these.
    std::vector<int> gen_hidden = {1024, 512, 256};
    std::vector<int> critic_hidden = {512, 512, 512};

    bool is_image() const { return input_shape.size() == 3; }
    int input_dim() const;
    int effective_noise_dim() const { return noise_dim > 0 ? noise_dim : latent_dim; }
    void validate() const;
};

// ---- classifier -----------------------------------------------------------------

enum class HeadKind { sigmoid_ova, linear_logits };

// n independent sigmoid outputs (one-vs-all), or raw logits for the softmax
// baselines.  No softmax anywhere in the one-vs-all path.
class Classifier {
  public:
    Classifier(const ArchitectureSpec& spec, std::uint64_t init_seed,
               HeadKind head = HeadKind::sigmoid_ova);

    // dropout_active draws masks from rng (training and MC-dropout inference);
    // with rate 0 or dropout_active=false no randomness is consumed.
    Var forward(const Var& x, bool dropout_active = false, Rng* rng = nullptr);
    Mat predict(const Mat& x);  // no-grad eval forward

    const ArchitectureSpec& spec() const { return spec_; }
    HeadKind head() const { return head_; }
    nn::ParamRegistry& params() { return reg_; }
    void set_dropout_rate(double r);
    double dropout_rate() const { return dropout_.rate; }

  private:
    Var backbone(const Var& x, bool dropout_active, Rng* rng);

    ArchitectureSpec spec_;
    HeadKind head_;
    nn::ParamRegistry reg_;
    nn::Dropout dropout_;
    // mlp path
    std::vector<nn::Linear> fc_;
    // lenet path
    nn::Conv2d conv1_, conv2_;
    // resnet path
    nn::Conv2d stem_;
    struct Block {
        nn::Conv2d c1, c2;
        nn::Conv2d down;  // 1x1 stride-2 skip when entering the block changes shape
        bool has_down = false;
        int in_c, out_c, in_h, in_w;
    };
    std::vector<Block> blocks_;
    std::vector<nn::Linear> head_fc_;
};

// ---- conditional autoencoder -------------------------------------------------------

// For toy 2D data the latent space is the feature space itself: encode/decode
// are identities with no parameters and need no pretraining.
class CAE {
  public:
    CAE(const ArchitectureSpec& spec, std::uint64_t init_seed);

    Var encode(const Var& x, const std::vector<int>& labels);
    Var decode(const Var& z, const std::vector<int>& labels);
    Mat encode(const Mat& x, const std::vector<int>& labels);  // no-grad
    Mat decode(const Mat& z, const std::vector<int>& labels);  // no-grad

    bool identity() const { return identity_; }
    void freeze();
    bool frozen() const;
    const ArchitectureSpec& spec() const { return spec_; }
    nn::ParamRegistry& params() { return reg_; }

  private:
    ArchitectureSpec spec_;
    bool identity_ = false;
    bool frozen_flag_ = false;
    nn::ParamRegistry reg_;
    nn::Conv2d enc1_, enc2_;
    nn::Linear enc_fc_;
    nn::Linear dec_fc_;
    nn::Conv2d dec1_, dec2_;
};

// ---- conditional GAN -----------------------------------------------------------------

class Generator {
  public:
    Generator(const ArchitectureSpec& spec, std::uint64_t init_seed);

    // e: batch x noise_dim in [0,1); training toggles batch-norm statistics.
    Var forward(const Var& e, const std::vector<int>& labels, bool training);
    // Deterministic convenience sampler (eval mode, noise from rng).
    Mat sample(int count, int label, Rng& rng);

    const ArchitectureSpec& spec() const { return spec_; }
    nn::ParamRegistry& params() { return reg_; }

  private:
    ArchitectureSpec spec_;
    nn::ParamRegistry reg_;
    std::vector<nn::Linear> fc_;
    std::vector<nn::BatchNorm1d> bn_;
    nn::Linear out_;

  public:
    // Running batch-norm statistics, exposed for checkpointing.
    std::vector<std::pair<std::string, Mat*>> buffers();
};

class Critic {
  public:
    Critic(const ArchitectureSpec& spec, std::uint64_t init_seed);
    Var forward(const Var& codes, const std::vector<int>& labels);
    const ArchitectureSpec& spec() const { return spec_; }
    nn::ParamRegistry& params() { return reg_; }

  private:
    ArchitectureSpec spec_;
    nn::ParamRegistry reg_;
    std::vector<nn::Linear> fc_;
    nn::Linear out_;
};

// ---- MC dropout -------------------------------------------------------------------------

// Averages `passes` stochastic forward passes with dropout forced on.
// Returns per-class mean probabilities and per-class standard deviations.
struct McDropoutResult {
    Mat mean;
    Mat stddev;
};
McDropoutResult mc_dropout_predict(Classifier& model, const Mat& x, int passes,
                                   double rate, Rng& rng);

}  // namespace uqgan::models
