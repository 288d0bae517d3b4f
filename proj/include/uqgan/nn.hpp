// Layer primitives, parameter bookkeeping and the Adam optimizer.

#pragma once

#include "uqgan/autodiff.hpp"
#include "uqgan/rng.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uqgan::nn {

using ad::Conv2dShape;
using ad::Mat;
using ad::Var;

// Named trainable parameters of a model, in declaration order.  Checkpoint
// serialization and the optimizer both walk this list.
class ParamRegistry {
  public:
    Var add(std::string name, Mat init) {
        Var v(std::move(init), true);
        items_.emplace_back(std::move(name), v);
        return v;
    }
    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
    std::vector<Var> vars() const {
        std::vector<Var> out;
        out.reserve(items_.size());
        for (const auto& [n, v] : items_) out.push_back(v);
        return out;
    }
    void freeze() {
        for (auto& [n, v] : items_) v.set_requires_grad(false);
    }
    bool frozen() const {
        for (const auto& [n, v] : items_)
            if (v.requires_grad()) return false;
        return !items_.empty();
    }

  private:
    std::vector<std::pair<std::string, Var>> items_;
};

// ---- initializers ------------------------------------------------------------

inline Mat glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Eigen::Index r,
                          Eigen::Index c, Rng& rng) {
    double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    return rng.uniform_mat(r, c, -limit, limit);
}

// ---- layers --------------------------------------------------------------------

struct Linear {
    Var W;  // in x out
    Var b;  // 1 x out
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, int in, int out, Rng& rng)
        : W(reg.add(name + ".W", glorot_uniform(in, out, in, out, rng))),
          b(reg.add(name + ".b", Mat::Zero(1, out))) {}
    Var forward(const Var& x) const { return ad::add_rowvec(ad::matmul(x, W), b); }
};

struct Conv2d {
    Conv2dShape shape;
    Var W;  // out_c x (in_c*kh*kw)
    Var b;  // 1 x out_c
    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, Conv2dShape s, Rng& rng)
        : shape(s),
          W(reg.add(name + ".W",
                    glorot_uniform(Eigen::Index(s.in_c) * s.kh * s.kw,
                                   Eigen::Index(s.out_c) * s.kh * s.kw, s.out_c,
                                   Eigen::Index(s.in_c) * s.kh * s.kw, rng))),
          b(reg.add(name + ".b", Mat::Zero(1, s.out_c))) {}
    Var forward(const Var& x) const { return ad::conv2d(x, W, b, shape); }
};

// Per-feature batch normalization.  Built from differentiable primitives, so
// first-order training gradients flow through the batch statistics; running
// statistics are plain buffers used in eval mode.
struct BatchNorm1d {
    Var gamma, beta;
    Mat running_mean, running_var;  // 1 x c buffers
    double momentum = 0.1;
    double eps = 1e-5;
    BatchNorm1d() = default;
    BatchNorm1d(ParamRegistry& reg, const std::string& name, int c)
        : gamma(reg.add(name + ".gamma", Mat::Ones(1, c))),
          beta(reg.add(name + ".beta", Mat::Zero(1, c))),
          running_mean(Mat::Zero(1, c)),
          running_var(Mat::Ones(1, c)) {}

    Var forward(const Var& x, bool training) {
        const Eigen::Index r = x.rows();
        if (training) {
            Var mu = ad::colmean(x);
            Var xc = ad::sub(x, ad::broadcast_row(mu, r));
            Var var_b = ad::colmean(ad::square(xc));
            Var xhat = ad::div(xc, ad::broadcast_row(ad::sqrt(ad::adds(var_b, eps)), r));
            double unbias = r > 1 ? double(r) / double(r - 1) : 1.0;
            running_mean = (1.0 - momentum) * running_mean + momentum * mu.val();
            running_var = (1.0 - momentum) * running_var + momentum * unbias * var_b.val();
            return ad::add_rowvec(ad::mul_rowvec(xhat, gamma), beta);
        }
        Mat denom = (running_var.array() + eps).sqrt();
        Var xc = ad::add_rowvec(x, ad::constant(Mat(-running_mean)));
        Var xhat = ad::mul_rowvec(xc, ad::constant(Mat(denom.cwiseInverse())));
        return ad::add_rowvec(ad::mul_rowvec(xhat, gamma), beta);
    }
};

// Inverted dropout; identity when inactive or rate == 0.
struct Dropout {
    double rate = 0.0;
    Var forward(const Var& x, bool active, Rng& rng) const {
        if (!active || rate <= 0.0) return x;
        Mat mask(x.rows(), x.cols());
        const double keep = 1.0 - rate;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
        return ad::mul(x, ad::constant(std::move(mask)));
    }
};

// ---- optimizer ---------------------------------------------------------------

// Adam with default moment coefficients.  Throws if bound to (or stepped over)
// frozen parameters: freezing a model is a promise that its weights no longer
// change.
class Adam {
  public:
    explicit Adam(std::vector<Var> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_)
            if (!p.requires_grad())
                throw std::logic_error("Adam: parameter is frozen, refusing to optimize");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.push_back(Mat::Zero(p.rows(), p.cols()));
            v_.push_back(Mat::Zero(p.rows(), p.cols()));
        }
    }

    void step(const std::vector<Var>& grads, double lr) {
        if (grads.size() != params_.size())
            throw std::invalid_argument("Adam::step: gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (!params_[i].requires_grad())
                throw std::logic_error("Adam::step: parameter was frozen after binding");
            const Mat& g = grads[i].val();
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            Mat mhat = m_[i] / bc1;
            Mat vhat = v_[i] / bc2;
            Mat upd = params_[i].val().array() -
                      lr * mhat.array() / (vhat.array().sqrt() + eps_);
            params_[i].update_value(upd);
        }
    }

    std::int64_t steps_taken() const { return t_; }

  private:
    std::vector<Var> params_;
    std::vector<Mat> m_, v_;
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

// Linear decay from lr0 at iteration 0 to lr_floor at the final iteration.
inline double lr_at(std::int64_t iter, std::int64_t total_iters, double lr0,
                    double lr_floor) {
    if (total_iters <= 1) return lr_floor;
    double frac = double(iter) / double(total_iters - 1);
    if (frac > 1.0) frac = 1.0;
    return lr0 + (lr_floor - lr0) * frac;
}

// One-hot label encoding, batch rows.
inline Mat one_hot(const std::vector<int>& labels, int n_classes) {
    Mat m = Mat::Zero(Eigen::Index(labels.size()), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw std::invalid_argument("one_hot: label out of range");
        m(Eigen::Index(i), labels[i]) = 1.0;
    }
    return m;
}

}  // namespace uqgan::nn
