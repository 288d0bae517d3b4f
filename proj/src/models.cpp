#include "uqgan/models.hpp"

#include "uqgan/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace uqgan::models {

namespace {
constexpr double kLeakySlope = 0.2;

Mat label_planes(const std::vector<int>& labels, int n_classes, int hw) {
    // One constant h*w plane per class, 1 on the labelled plane, 0 elsewhere.
    Mat m = Mat::Zero(Eigen::Index(labels.size()), Eigen::Index(n_classes) * hw);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw std::invalid_argument("label_planes: label out of range");
        m.block(Eigen::Index(i), Eigen::Index(labels[i]) * hw, 1, hw).setOnes();
    }
    return m;
}

Var append_one_hot(const Var& x, const std::vector<int>& labels, int n_classes) {
    if (Eigen::Index(labels.size()) != x.rows())
        throw std::invalid_argument("conditioning: label count does not match batch");
    return ad::concat_cols(x, ad::constant(nn::one_hot(labels, n_classes)));
}
}  // namespace

const char* to_string(ArchKind k) {
    switch (k) {
        case ArchKind::mlp_toy: return "mlp_toy";
        case ArchKind::lenet5: return "lenet5";
        case ArchKind::small_resnet: return "small_resnet";
    }
    return "?";
}

ArchKind arch_kind_from_string(const std::string& s) {
    if (s == "mlp_toy") return ArchKind::mlp_toy;
    if (s == "lenet5") return ArchKind::lenet5;
    if (s == "small_resnet") return ArchKind::small_resnet;
    throw ConfigError("unknown architecture kind: " + s);
}

int ArchitectureSpec::input_dim() const {
    int d = 1;
    for (int v : input_shape) d *= v;
    return d;
}

void ArchitectureSpec::validate() const {
    if (input_shape.empty()) throw std::invalid_argument("arch: empty input_shape");
    for (int v : input_shape)
        if (v <= 0) throw std::invalid_argument("arch: non-positive input dimension");
    if (n_classes < 2) throw std::invalid_argument("arch: need at least two classes");
    if (latent_dim < 1) throw std::invalid_argument("arch: latent_dim must be positive");
    if (noise_dim < 0) throw std::invalid_argument("arch: negative noise_dim");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("arch: dropout_rate must lie in [0,1)");
    if (gen_hidden.empty() || critic_hidden.empty())
        throw std::invalid_argument("arch: GAN nets need at least one hidden layer");
    switch (kind) {
        case ArchKind::mlp_toy:
            if (input_shape.size() != 1)
                throw std::invalid_argument("arch: mlp_toy expects a flat input_shape");
            break;
        case ArchKind::lenet5:
            if (input_shape != std::vector<int>{1, 28, 28})
                throw std::invalid_argument("arch: lenet5 expects input_shape 1x28x28");
            break;
        case ArchKind::small_resnet:
            if (input_shape.size() != 3 || input_shape[1] % 4 != 0 ||
                input_shape[2] % 4 != 0)
                throw std::invalid_argument(
                    "arch: small_resnet expects cxhxw input with h,w divisible by 4");
            break;
    }
}

// ---- classifier -----------------------------------------------------------------

Classifier::Classifier(const ArchitectureSpec& spec, std::uint64_t init_seed,
                       HeadKind head)
    : spec_(spec), head_(head) {
    spec_.validate();
    dropout_.rate = spec_.dropout_rate;
    Rng rng(init_seed);
    const int n = spec_.n_classes;
    switch (spec_.kind) {
        case ArchKind::mlp_toy: {
            const int w = 128;
            fc_.emplace_back(reg_, "cls.fc0", spec_.input_dim(), w, rng);
            fc_.emplace_back(reg_, "cls.fc1", w, w, rng);
            fc_.emplace_back(reg_, "cls.fc2", w, w, rng);
            head_fc_.emplace_back(reg_, "cls.head", w, n, rng);
            break;
        }
        case ArchKind::lenet5: {
            conv1_ = nn::Conv2d(reg_, "cls.conv1", {1, 28, 28, 6, 5, 5, 1, 2}, rng);
            conv2_ = nn::Conv2d(reg_, "cls.conv2", {6, 14, 14, 16, 5, 5, 1, 0}, rng);
            head_fc_.emplace_back(reg_, "cls.fc1", 16 * 5 * 5, 120, rng);
            head_fc_.emplace_back(reg_, "cls.fc2", 120, 84, rng);
            head_fc_.emplace_back(reg_, "cls.head", 84, n, rng);
            break;
        }
        case ArchKind::small_resnet: {
            const int c = spec_.input_shape[0];
            const int h = spec_.input_shape[1];
            const int w = spec_.input_shape[2];
            stem_ = nn::Conv2d(reg_, "cls.stem", {c, h, w, 16, 3, 3, 1, 1}, rng);
            auto make_block = [&](const std::string& name, int in_c, int out_c,
                                  int in_h, int in_w) {
                Block b;
                b.in_c = in_c;
                b.out_c = out_c;
                b.in_h = in_h;
                b.in_w = in_w;
                const int stride = out_c == in_c ? 1 : 2;
                b.c1 = nn::Conv2d(reg_, name + ".c1",
                                  {in_c, in_h, in_w, out_c, 3, 3, stride, 1}, rng);
                const int oh = b.c1.shape.out_h();
                const int ow = b.c1.shape.out_w();
                b.c2 = nn::Conv2d(reg_, name + ".c2",
                                  {out_c, oh, ow, out_c, 3, 3, 1, 1}, rng);
                b.has_down = stride != 1;
                if (b.has_down)
                    b.down = nn::Conv2d(reg_, name + ".down",
                                        {in_c, in_h, in_w, out_c, 1, 1, 2, 0}, rng);
                return b;
            };
            blocks_.push_back(make_block("cls.block0", 16, 16, h, w));
            blocks_.push_back(make_block("cls.block1", 16, 32, h, w));
            blocks_.push_back(make_block("cls.block2", 32, 64, h / 2, w / 2));
            head_fc_.emplace_back(reg_, "cls.head", 64, n, rng);
            break;
        }
    }
}

void Classifier::set_dropout_rate(double r) {
    if (r < 0.0 || r >= 1.0)
        throw std::invalid_argument("dropout rate must lie in [0,1)");
    dropout_.rate = r;
}

Var Classifier::backbone(const Var& x, bool dropout_active, Rng* rng) {
    if (dropout_active && dropout_.rate > 0.0 && rng == nullptr)
        throw std::logic_error("Classifier: active dropout needs an RNG");
    auto drop = [&](const Var& v) {
        return dropout_active && dropout_.rate > 0.0 ? dropout_.forward(v, true, *rng)
                                                     : v;
    };
    switch (spec_.kind) {
        case ArchKind::mlp_toy: {
            Var h = x;
            for (std::size_t i = 0; i < fc_.size(); ++i) {
                h = ad::leaky_relu(fc_[i].forward(h), kLeakySlope);
                h = drop(h);
            }
            return head_fc_.back().forward(h);
        }
        case ArchKind::lenet5: {
            Var h = ad::relu(conv1_.forward(x));
            h = ad::maxpool2x2(h, 6, 28, 28);
            h = ad::relu(conv2_.forward(h));
            h = ad::maxpool2x2(h, 16, 10, 10);
            h = drop(h);
            h = drop(ad::relu(head_fc_[0].forward(h)));
            h = drop(ad::relu(head_fc_[1].forward(h)));
            return head_fc_[2].forward(h);
        }
        case ArchKind::small_resnet: {
            Var h = ad::relu(stem_.forward(x));
            for (auto& b : blocks_) {
                Var a = ad::relu(b.c1.forward(h));
                Var out = b.c2.forward(a);
                Var skip = b.has_down ? b.down.forward(h) : h;
                h = ad::relu(ad::add(out, skip));
            }
            const auto& last = blocks_.back().c2.shape;
            h = ad::avgpool_global(h, last.out_c, last.out_h(), last.out_w());
            h = drop(h);
            return head_fc_.back().forward(h);
        }
    }
    throw std::logic_error("unreachable");
}

Var Classifier::forward(const Var& x, bool dropout_active, Rng* rng) {
    if (x.cols() != spec_.input_dim())
        throw std::invalid_argument("Classifier: input width does not match spec");
    Var logits = backbone(x, dropout_active, rng);
    return head_ == HeadKind::sigmoid_ova ? ad::sigmoid(logits) : logits;
}

Mat Classifier::predict(const Mat& x) {
    ad::NoGradGuard ng;
    return forward(ad::constant(x)).val();
}

// ---- conditional autoencoder -------------------------------------------------------

CAE::CAE(const ArchitectureSpec& spec, std::uint64_t init_seed) : spec_(spec) {
    spec_.validate();
    if (!spec_.is_image()) {
        // Toy data lives in a low-dimensional space already; the GAN operates
        // on the features directly and no autoencoder is trained.
        if (spec_.latent_dim != spec_.input_dim())
            throw std::invalid_argument(
                "CAE: toy identity autoencoder needs latent_dim == input dim");
        identity_ = true;
        return;
    }
    const int c = spec_.input_shape[0];
    const int h = spec_.input_shape[1];
    const int w = spec_.input_shape[2];
    if (h % 4 != 0 || w % 4 != 0)
        throw std::invalid_argument("CAE: image sides must be divisible by 4");
    const int n = spec_.n_classes;
    Rng rng(init_seed);
    enc1_ = nn::Conv2d(reg_, "cae.enc1", {c + n, h, w, 16, 3, 3, 2, 1}, rng);
    enc2_ = nn::Conv2d(reg_, "cae.enc2", {16, h / 2, w / 2, 32, 3, 3, 2, 1}, rng);
    enc_fc_ = nn::Linear(reg_, "cae.enc_fc", 32 * (h / 4) * (w / 4), spec_.latent_dim,
                         rng);
    dec_fc_ = nn::Linear(reg_, "cae.dec_fc", spec_.latent_dim + n,
                         32 * (h / 4) * (w / 4), rng);
    dec1_ = nn::Conv2d(reg_, "cae.dec1", {32, h / 2, w / 2, 16, 3, 3, 1, 1}, rng);
    dec2_ = nn::Conv2d(reg_, "cae.dec2", {16, h, w, c, 3, 3, 1, 1}, rng);
}

Var CAE::encode(const Var& x, const std::vector<int>& labels) {
    if (identity_) return x;
    const int h = spec_.input_shape[1];
    const int w = spec_.input_shape[2];
    Var cond = ad::concat_cols(
        x, ad::constant(label_planes(labels, spec_.n_classes, h * w)));
    Var e = ad::relu(enc1_.forward(cond));
    e = ad::relu(enc2_.forward(e));
    return enc_fc_.forward(e);
}

Var CAE::decode(const Var& z, const std::vector<int>& labels) {
    if (identity_) return z;
    const int h = spec_.input_shape[1];
    const int w = spec_.input_shape[2];
    Var d = ad::relu(dec_fc_.forward(append_one_hot(z, labels, spec_.n_classes)));
    d = ad::upsample2x_nearest(d, 32, h / 4, w / 4);
    d = ad::relu(dec1_.forward(d));
    d = ad::upsample2x_nearest(d, 16, h / 2, w / 2);
    return ad::sigmoid(dec2_.forward(d));
}

Mat CAE::encode(const Mat& x, const std::vector<int>& labels) {
    ad::NoGradGuard ng;
    return encode(ad::constant(x), labels).val();
}

Mat CAE::decode(const Mat& z, const std::vector<int>& labels) {
    ad::NoGradGuard ng;
    return decode(ad::constant(z), labels).val();
}

void CAE::freeze() {
    frozen_flag_ = true;
    if (!identity_) reg_.freeze();
}

bool CAE::frozen() const { return identity_ || frozen_flag_; }

// ---- conditional GAN -----------------------------------------------------------------

Generator::Generator(const ArchitectureSpec& spec, std::uint64_t init_seed)
    : spec_(spec) {
    spec_.validate();
    Rng rng(init_seed);
    int in = spec_.effective_noise_dim() + spec_.n_classes;
    for (std::size_t i = 0; i < spec_.gen_hidden.size(); ++i) {
        const int out = spec_.gen_hidden[i];
        fc_.emplace_back(reg_, "gen.fc" + std::to_string(i), in, out, rng);
        bn_.emplace_back(reg_, "gen.bn" + std::to_string(i), out);
        in = out;
    }
    out_ = nn::Linear(reg_, "gen.out", in, spec_.latent_dim, rng);
}

Var Generator::forward(const Var& e, const std::vector<int>& labels, bool training) {
    if (e.cols() != spec_.effective_noise_dim())
        throw std::invalid_argument("Generator: noise width does not match spec");
    Var h = append_one_hot(e, labels, spec_.n_classes);
    for (std::size_t i = 0; i < fc_.size(); ++i)
        h = ad::leaky_relu(bn_[i].forward(fc_[i].forward(h), training), kLeakySlope);
    return out_.forward(h);
}

Mat Generator::sample(int count, int label, Rng& rng) {
    ad::NoGradGuard ng;
    Mat e = rng.uniform_mat(count, spec_.effective_noise_dim(), 0.0, 1.0);
    std::vector<int> labels(std::size_t(count), label);
    return forward(ad::constant(std::move(e)), labels, false).val();
}

std::vector<std::pair<std::string, Mat*>> Generator::buffers() {
    std::vector<std::pair<std::string, Mat*>> out;
    for (std::size_t i = 0; i < bn_.size(); ++i) {
        out.emplace_back("gen.bn" + std::to_string(i) + ".running_mean",
                         &bn_[i].running_mean);
        out.emplace_back("gen.bn" + std::to_string(i) + ".running_var",
                         &bn_[i].running_var);
    }
    return out;
}

Critic::Critic(const ArchitectureSpec& spec, std::uint64_t init_seed) : spec_(spec) {
    spec_.validate();
    Rng rng(init_seed);
    int in = spec_.latent_dim + spec_.n_classes;
    for (std::size_t i = 0; i < spec_.critic_hidden.size(); ++i) {
        fc_.emplace_back(reg_, "critic.fc" + std::to_string(i), in,
                         spec_.critic_hidden[i], rng);
        in = spec_.critic_hidden[i];
    }
    out_ = nn::Linear(reg_, "critic.out", in, 1, rng);
}

Var Critic::forward(const Var& codes, const std::vector<int>& labels) {
    if (codes.cols() != spec_.latent_dim)
        throw std::invalid_argument("Critic: code width does not match spec");
    Var h = append_one_hot(codes, labels, spec_.n_classes);
    for (auto& fc : fc_) h = ad::leaky_relu(fc.forward(h), kLeakySlope);
    return out_.forward(h);
}

// ---- MC dropout -------------------------------------------------------------------------

McDropoutResult mc_dropout_predict(Classifier& model, const Mat& x, int passes,
                                   double rate, Rng& rng) {
    if (passes < 1) throw std::invalid_argument("mc_dropout: passes must be >= 1");
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("mc_dropout: rate must lie in [0,1)");
    const double saved = model.dropout_rate();
    model.set_dropout_rate(rate);
    ad::NoGradGuard ng;
    std::vector<Mat> runs;
    runs.reserve(std::size_t(passes));
    Mat sum = Mat::Zero(x.rows(), model.spec().n_classes);
    for (int p = 0; p < passes; ++p) {
        runs.push_back(model.forward(ad::constant(x), true, &rng).val());
        sum += runs.back();
    }
    model.set_dropout_rate(saved);
    Mat mean = sum / double(passes);
    // Centered accumulation: exactly zero spread when every pass agrees.
    Mat var = Mat::Zero(mean.rows(), mean.cols());
    for (const Mat& r : runs) {
        Mat dev = r - mean;
        var += dev.cwiseProduct(dev);
    }
    var /= double(passes);
    return {mean, Mat(var.cwiseSqrt())};
}

}  // namespace uqgan::models
