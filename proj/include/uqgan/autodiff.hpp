// Reverse-mode automatic differentiation over Eigen matrices.
//
// Every value is a dense double matrix (scalars are 1x1).  Operations build a
// DAG of shared nodes; grad() walks it in reverse topological order.  Backward
// functions are themselves written in terms of these operations, so calling
// grad() with create_graph=true yields gradients that are again differentiable
// (needed for the WGAN-GP gradient penalty, which optimizes a gradient norm).
//
// Convolution/pooling style ops only support first-order gradients; their
// backward results are detached constants.  That is fine here because nothing
// ever needs second derivatives through an image pipeline -- only the latent
// critic is differentiated twice, and it is a plain MLP.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace uqgan::ad {

using Mat = Eigen::MatrixXd;

class Var;

// Thread-local flag: while off, ops still compute values but record no graph.
bool grad_mode();
void set_grad_mode(bool on);

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { set_grad_mode(false); }
    ~NoGradGuard() { set_grad_mode(prev); }
};

struct GradModeGuard {
    bool prev;
    explicit GradModeGuard(bool on) : prev(grad_mode()) { set_grad_mode(on); }
    ~GradModeGuard() { set_grad_mode(prev); }
};

namespace detail {
// Backward: given the gradient flowing into this node, produce gradients for
// each parent (same order as the parents vector).
using BackwardFn = std::function<std::vector<Var>(const Var&)>;

struct Node {
    Mat value;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "leaf";
};
}  // namespace detail

class Var {
  public:
    Var() = default;
    explicit Var(Mat value, bool requires_grad = false);
    Var(double scalar, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Mat& val() const { return node_->value; }
    double scalar() const;  // requires a 1x1 value
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    const char* op() const { return node_->op; }

    // Same value, no history.
    Var detach() const;

    // In-place value update for optimizer steps; graph-free by design.
    void update_value(const Mat& v) { node_->value = v; }

    detail::Node* node() const { return node_.get(); }

    static Var make_op(Mat value, std::vector<Var> parents,
                       detail::BackwardFn backward, const char* op);

  private:
    std::shared_ptr<detail::Node> node_;
};

// ---- graph construction helpers -------------------------------------------

Var constant(Mat v);
Var constant(double v);
Var zeros(Eigen::Index r, Eigen::Index c);
Var ones(Eigen::Index r, Eigen::Index c);

// ---- elementwise / broadcast arithmetic ------------------------------------

Var add(const Var& a, const Var& b);         // same shape
Var sub(const Var& a, const Var& b);         // same shape
Var mul(const Var& a, const Var& b);         // same shape, elementwise
Var div(const Var& a, const Var& b);         // same shape, elementwise
Var neg(const Var& a);
Var adds(const Var& a, double s);
Var muls(const Var& a, double s);
Var add_rowvec(const Var& a, const Var& row);  // row is 1 x c, broadcast down
Var mul_rowvec(const Var& a, const Var& row);
Var add_colvec(const Var& a, const Var& col);  // col is r x 1, broadcast right
Var mul_colvec(const Var& a, const Var& col);

// ---- matrix ops -------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n);

// ---- reductions and broadcasts ---------------------------------------------

Var sum(const Var& a);                       // -> 1x1
Var mean(const Var& a);                      // -> 1x1
Var rowsum(const Var& a);                    // -> r x 1
Var colsum(const Var& a);                    // -> 1 x c
Var rowmean(const Var& a);                   // -> r x 1
Var colmean(const Var& a);                   // -> 1 x c
Var broadcast_scalar(const Var& s, Eigen::Index r, Eigen::Index c);
Var broadcast_col(const Var& col, Eigen::Index c);   // r x 1 -> r x c
Var broadcast_row(const Var& row, Eigen::Index r);   // 1 x c -> r x c

// ---- nonlinearities ----------------------------------------------------------

Var square(const Var& a);
Var sqrt(const Var& a);                      // assumes a >= 0
Var log(const Var& a);                       // assumes a > 0
Var exp(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var clamp(const Var& a, double lo, double hi);  // gradient passes inside (lo,hi)
Var arccos(const Var& a);                    // assumes |a| < 1
Var abs(const Var& a);

// ---- image ops (first-order gradients only) ---------------------------------
// Rows are batch examples; each row stores a CHW volume flattened
// channel-major: index = c*H*W + y*W + x.

struct Conv2dShape {
    int in_c, in_h, in_w;
    int out_c, kh, kw;
    int stride = 1, pad = 0;
    int out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
};

// weight: out_c x (in_c*kh*kw); bias: 1 x out_c.
Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dShape& s);
Var maxpool2x2(const Var& x, int c, int h, int w);
Var upsample2x_nearest(const Var& x, int c, int h, int w);
Var avgpool_global(const Var& x, int c, int h, int w);  // -> b x c

// ---- gradients ---------------------------------------------------------------

// d(output)/d(inputs) with the chain seeded by ones (output need not be
// scalar, though losses always are).  When create_graph is true the returned
// gradients carry their own history and can be differentiated again.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph = false);

}  // namespace uqgan::ad
