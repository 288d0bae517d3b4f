#include "uqgan/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace uqgan::ad {

namespace {
thread_local bool g_grad_mode = true;

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
}
}  // namespace

bool grad_mode() { return g_grad_mode; }
void set_grad_mode(bool on) { g_grad_mode = on; }

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var::Var(double scalar, bool requires_grad) : Var(Mat::Constant(1, 1, scalar), requires_grad) {}

double Var::scalar() const {
    if (rows() != 1 || cols() != 1)
        throw std::logic_error("Var::scalar on non-scalar value");
    return node_->value(0, 0);
}

Var Var::detach() const { return Var(node_->value, false); }

Var Var::make_op(Mat value, std::vector<Var> parents, detail::BackwardFn backward,
                 const char* op) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    Var out(std::move(value), false);
    if (g_grad_mode && rg) {
        out.node_->requires_grad = true;
        out.node_->parents = std::move(parents);
        out.node_->backward = std::move(backward);
    }
    out.node_->op = op;
    return out;
}

Var constant(Mat v) { return Var(std::move(v), false); }
Var constant(double v) { return Var(v, false); }
Var zeros(Eigen::Index r, Eigen::Index c) { return Var(Mat::Zero(r, c), false); }
Var ones(Eigen::Index r, Eigen::Index c) { return Var(Mat::Ones(r, c), false); }

// ---- elementwise / broadcast ------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    return Var::make_op(a.val() + b.val(), {a, b},
                        [](const Var& g) { return std::vector<Var>{g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    return Var::make_op(a.val() - b.val(), {a, b},
                        [](const Var& g) { return std::vector<Var>{g, neg(g)}; }, "sub");
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    return Var::make_op(a.val().cwiseProduct(b.val()), {a, b},
                        [a, b](const Var& g) {
                            return std::vector<Var>{mul(g, b), mul(g, a)};
                        },
                        "mul");
}

Var div(const Var& a, const Var& b) {
    check_same_shape(a, b, "div");
    return Var::make_op(a.val().cwiseQuotient(b.val()), {a, b},
                        [a, b](const Var& g) {
                            return std::vector<Var>{div(g, b),
                                                    neg(div(mul(g, a), square(b)))};
                        },
                        "div");
}

Var neg(const Var& a) {
    return Var::make_op(-a.val(), {a},
                        [](const Var& g) { return std::vector<Var>{neg(g)}; }, "neg");
}

Var adds(const Var& a, double s) {
    return Var::make_op(a.val().array() + s, {a},
                        [](const Var& g) { return std::vector<Var>{g}; }, "adds");
}

Var muls(const Var& a, double s) {
    return Var::make_op(a.val() * s, {a},
                        [s](const Var& g) { return std::vector<Var>{muls(g, s)}; }, "muls");
}

Var add_rowvec(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
    return Var::make_op(a.val().rowwise() + row.val().row(0), {a, row},
                        [](const Var& g) { return std::vector<Var>{g, colsum(g)}; },
                        "add_rowvec");
}

Var mul_rowvec(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw std::invalid_argument("mul_rowvec: row must be 1 x cols(a)");
    Mat v = a.val().array().rowwise() * row.val().row(0).array();
    return Var::make_op(std::move(v), {a, row},
                        [a, row](const Var& g) {
                            return std::vector<Var>{mul_rowvec(g, row), colsum(mul(g, a))};
                        },
                        "mul_rowvec");
}

Var add_colvec(const Var& a, const Var& col) {
    if (col.cols() != 1 || col.rows() != a.rows())
        throw std::invalid_argument("add_colvec: col must be rows(a) x 1");
    return Var::make_op(a.val().colwise() + col.val().col(0), {a, col},
                        [](const Var& g) { return std::vector<Var>{g, rowsum(g)}; },
                        "add_colvec");
}

Var mul_colvec(const Var& a, const Var& col) {
    if (col.cols() != 1 || col.rows() != a.rows())
        throw std::invalid_argument("mul_colvec: col must be rows(a) x 1");
    Mat v = a.val().array().colwise() * col.val().col(0).array();
    return Var::make_op(std::move(v), {a, col},
                        [a, col](const Var& g) {
                            return std::vector<Var>{mul_colvec(g, col), rowsum(mul(g, a))};
                        },
                        "mul_colvec");
}

// ---- matrix ops ---------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
    return Var::make_op(a.val() * b.val(), {a, b},
                        [a, b](const Var& g) {
                            return std::vector<Var>{matmul(g, transpose(b)),
                                                    matmul(transpose(a), g)};
                        },
                        "matmul");
}

Var transpose(const Var& a) {
    return Var::make_op(a.val().transpose(), {a},
                        [](const Var& g) { return std::vector<Var>{transpose(g)}; },
                        "transpose");
}

Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row count differs");
    Mat v(a.rows(), a.cols() + b.cols());
    v << a.val(), b.val();
    Eigen::Index ac = a.cols(), bc = b.cols();
    return Var::make_op(std::move(v), {a, b},
                        [ac, bc](const Var& g) {
                            return std::vector<Var>{slice_cols(g, 0, ac), slice_cols(g, ac, bc)};
                        },
                        "concat_cols");
}

Var concat_rows(const Var& a, const Var& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("concat_rows: col count differs");
    Mat v(a.rows() + b.rows(), a.cols());
    v << a.val(), b.val();
    Eigen::Index ar = a.rows(), br = b.rows();
    return Var::make_op(std::move(v), {a, b},
                        [ar, br](const Var& g) {
                            return std::vector<Var>{slice_rows(g, 0, ar), slice_rows(g, ar, br)};
                        },
                        "concat_rows");
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n) {
    if (start < 0 || n < 0 || start + n > a.cols())
        throw std::invalid_argument("slice_cols: out of range");
    Eigen::Index total = a.cols(), r = a.rows();
    return Var::make_op(a.val().middleCols(start, n), {a},
                        [start, n, total, r](const Var& g) {
                            Var out = g;
                            if (start > 0) out = concat_cols(zeros(r, start), out);
                            if (start + n < total)
                                out = concat_cols(out, zeros(r, total - start - n));
                            return std::vector<Var>{out};
                        },
                        "slice_cols");
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n) {
    if (start < 0 || n < 0 || start + n > a.rows())
        throw std::invalid_argument("slice_rows: out of range");
    Eigen::Index total = a.rows(), c = a.cols();
    return Var::make_op(a.val().middleRows(start, n), {a},
                        [start, n, total, c](const Var& g) {
                            Var out = g;
                            if (start > 0) out = concat_rows(zeros(start, c), out);
                            if (start + n < total)
                                out = concat_rows(out, zeros(total - start - n, c));
                            return std::vector<Var>{out};
                        },
                        "slice_rows");
}

// ---- reductions / broadcasts ----------------------------------------------------

Var sum(const Var& a) {
    Eigen::Index r = a.rows(), c = a.cols();
    return Var::make_op(Mat::Constant(1, 1, a.val().sum()), {a},
                        [r, c](const Var& g) {
                            return std::vector<Var>{broadcast_scalar(g, r, c)};
                        },
                        "sum");
}

Var mean(const Var& a) { return muls(sum(a), 1.0 / double(a.rows() * a.cols())); }

Var rowsum(const Var& a) {
    Eigen::Index c = a.cols();
    return Var::make_op(a.val().rowwise().sum(), {a},
                        [c](const Var& g) { return std::vector<Var>{broadcast_col(g, c)}; },
                        "rowsum");
}

Var colsum(const Var& a) {
    Eigen::Index r = a.rows();
    return Var::make_op(a.val().colwise().sum(), {a},
                        [r](const Var& g) { return std::vector<Var>{broadcast_row(g, r)}; },
                        "colsum");
}

Var rowmean(const Var& a) { return muls(rowsum(a), 1.0 / double(a.cols())); }
Var colmean(const Var& a) { return muls(colsum(a), 1.0 / double(a.rows())); }

Var broadcast_scalar(const Var& s, Eigen::Index r, Eigen::Index c) {
    if (s.rows() != 1 || s.cols() != 1)
        throw std::invalid_argument("broadcast_scalar: input must be 1x1");
    return Var::make_op(Mat::Constant(r, c, s.val()(0, 0)), {s},
                        [](const Var& g) { return std::vector<Var>{sum(g)}; },
                        "broadcast_scalar");
}

Var broadcast_col(const Var& col, Eigen::Index c) {
    if (col.cols() != 1) throw std::invalid_argument("broadcast_col: input must be r x 1");
    return Var::make_op(col.val().replicate(1, c), {col},
                        [](const Var& g) { return std::vector<Var>{rowsum(g)}; },
                        "broadcast_col");
}

Var broadcast_row(const Var& row, Eigen::Index r) {
    if (row.rows() != 1) throw std::invalid_argument("broadcast_row: input must be 1 x c");
    return Var::make_op(row.val().replicate(r, 1), {row},
                        [](const Var& g) { return std::vector<Var>{colsum(g)}; },
                        "broadcast_row");
}

// ---- nonlinearities --------------------------------------------------------------

Var square(const Var& a) {
    return Var::make_op(a.val().array().square(), {a},
                        [a](const Var& g) { return std::vector<Var>{muls(mul(g, a), 2.0)}; },
                        "square");
}

Var sqrt(const Var& a) {
    return Var::make_op(a.val().array().sqrt(), {a},
                        [a](const Var& g) {
                            return std::vector<Var>{div(muls(g, 0.5), sqrt(a))};
                        },
                        "sqrt");
}

Var log(const Var& a) {
    return Var::make_op(a.val().array().log(), {a},
                        [a](const Var& g) { return std::vector<Var>{div(g, a)}; }, "log");
}

Var exp(const Var& a) {
    return Var::make_op(a.val().array().exp(), {a},
                        [a](const Var& g) { return std::vector<Var>{mul(g, exp(a))}; },
                        "exp");
}

Var sigmoid(const Var& a) {
    Mat v = (1.0 / (1.0 + (-a.val().array()).exp()));
    return Var::make_op(std::move(v), {a},
                        [a](const Var& g) {
                            Var s = sigmoid(a);
                            return std::vector<Var>{mul(g, mul(s, adds(neg(s), 1.0)))};
                        },
                        "sigmoid");
}

Var tanh(const Var& a) {
    return Var::make_op(a.val().array().tanh(), {a},
                        [a](const Var& g) {
                            Var t = tanh(a);
                            return std::vector<Var>{mul(g, adds(neg(square(t)), 1.0))};
                        },
                        "tanh");
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
    Mat mask = (a.val().array() > 0.0).select(Mat::Ones(a.rows(), a.cols()),
                                              Mat::Constant(a.rows(), a.cols(), slope));
    Mat v = a.val().cwiseProduct(mask);
    return Var::make_op(std::move(v), {a},
                        [mask](const Var& g) {
                            return std::vector<Var>{mul(g, constant(mask))};
                        },
                        "leaky_relu");
}

Var clamp(const Var& a, double lo, double hi) {
    Mat v = a.val().array().max(lo).min(hi);
    Mat mask = ((a.val().array() > lo) && (a.val().array() < hi))
                   .select(Mat::Ones(a.rows(), a.cols()), Mat::Zero(a.rows(), a.cols()));
    return Var::make_op(std::move(v), {a},
                        [mask](const Var& g) {
                            return std::vector<Var>{mul(g, constant(mask))};
                        },
                        "clamp");
}

Var arccos(const Var& a) {
    return Var::make_op(a.val().array().acos(), {a},
                        [a](const Var& g) {
                            Var denom = sqrt(adds(neg(square(a)), 1.0));
                            return std::vector<Var>{neg(div(g, denom))};
                        },
                        "arccos");
}

Var abs(const Var& a) {
    Mat mask = (a.val().array() >= 0.0).select(Mat::Ones(a.rows(), a.cols()),
                                               Mat::Constant(a.rows(), a.cols(), -1.0));
    return Var::make_op(a.val().cwiseAbs(), {a},
                        [mask](const Var& g) {
                            return std::vector<Var>{mul(g, constant(mask))};
                        },
                        "abs");
}

// ---- image ops -------------------------------------------------------------------

namespace {
// Unfold the whole batch into a K x (B*P) column matrix, K = in_c*kh*kw,
// P = out_h*out_w; column index = b*P + p.
Mat im2col(const Mat& x, const Conv2dShape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const int K = s.in_c * s.kh * s.kw;
    const Eigen::Index B = x.rows();
    Mat col = Mat::Zero(K, B * oh * ow);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int c = 0; c < s.in_c; ++c) {
            for (int ky = 0; ky < s.kh; ++ky) {
                for (int kx = 0; kx < s.kw; ++kx) {
                    const int krow = (c * s.kh + ky) * s.kw + kx;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * s.stride + ky - s.pad;
                        if (iy < 0 || iy >= s.in_h) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * s.stride + kx - s.pad;
                            if (ix < 0 || ix >= s.in_w) continue;
                            col(krow, b * oh * ow + oy * ow + ox) =
                                x(b, (c * s.in_h + iy) * s.in_w + ix);
                        }
                    }
                }
            }
        }
    }
    return col;
}

Mat col2im(const Mat& dcol, const Conv2dShape& s, Eigen::Index B) {
    const int oh = s.out_h(), ow = s.out_w();
    Mat dx = Mat::Zero(B, s.in_c * s.in_h * s.in_w);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int c = 0; c < s.in_c; ++c) {
            for (int ky = 0; ky < s.kh; ++ky) {
                for (int kx = 0; kx < s.kw; ++kx) {
                    const int krow = (c * s.kh + ky) * s.kw + kx;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * s.stride + ky - s.pad;
                        if (iy < 0 || iy >= s.in_h) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * s.stride + kx - s.pad;
                            if (ix < 0 || ix >= s.in_w) continue;
                            dx(b, (c * s.in_h + iy) * s.in_w + ix) +=
                                dcol(krow, b * oh * ow + oy * ow + ox);
                        }
                    }
                }
            }
        }
    }
    return dx;
}
}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dShape& s) {
    const int K = s.in_c * s.kh * s.kw;
    if (x.cols() != Eigen::Index(s.in_c) * s.in_h * s.in_w)
        throw std::invalid_argument("conv2d: input width does not match shape");
    if (weight.rows() != s.out_c || weight.cols() != K)
        throw std::invalid_argument("conv2d: weight must be out_c x (in_c*kh*kw)");
    if (bias.rows() != 1 || bias.cols() != s.out_c)
        throw std::invalid_argument("conv2d: bias must be 1 x out_c");

    const int oh = s.out_h(), ow = s.out_w(), P = oh * ow;
    const Eigen::Index B = x.rows();
    auto col = std::make_shared<Mat>(im2col(x.val(), s));
    Mat y = weight.val() * (*col);  // out_c x (B*P)
    Mat out(B, Eigen::Index(s.out_c) * P);
    for (Eigen::Index b = 0; b < B; ++b)
        for (int c = 0; c < s.out_c; ++c)
            for (int p = 0; p < P; ++p)
                out(b, c * P + p) = y(c, b * P + p) + bias.val()(0, c);

    // First-order only: gradient results are detached constants, so a second
    // differentiation through a convolution has no path to follow.
    return Var::make_op(std::move(out), {x, weight, bias},
                        [col, weight, s, B, P](const Var& g) {
                            NoGradGuard ng;
                            Mat dy(s.out_c, B * P);
                            for (Eigen::Index b = 0; b < B; ++b)
                                for (int c = 0; c < s.out_c; ++c)
                                    for (int p = 0; p < P; ++p)
                                        dy(c, b * P + p) = g.val()(b, c * P + p);
                            Mat dw = dy * col->transpose();
                            Mat db = dy.rowwise().sum().transpose();
                            Mat dx = col2im(weight.val().transpose() * dy, s, B);
                            return std::vector<Var>{constant(std::move(dx)),
                                                    constant(std::move(dw)),
                                                    constant(std::move(db))};
                        },
                        "conv2d");
}

Var maxpool2x2(const Var& x, int c, int h, int w) {
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("maxpool2x2: spatial dims must be even");
    if (x.cols() != Eigen::Index(c) * h * w)
        throw std::invalid_argument("maxpool2x2: input width does not match shape");
    const int oh = h / 2, ow = w / 2;
    const Eigen::Index B = x.rows();
    Mat out(B, Eigen::Index(c) * oh * ow);
    auto argmax = std::make_shared<std::vector<int>>(B * c * oh * ow);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    int best_idx = -1;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            int idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                            double v = x.val()(b, idx);
                            if (v > best) { best = v; best_idx = idx; }
                        }
                    out(b, (ch * oh + oy) * ow + ox) = best;
                    (*argmax)[((b * c + ch) * oh + oy) * ow + ox] = best_idx;
                }
            }
        }
    }
    Eigen::Index in_cols = x.cols();
    return Var::make_op(std::move(out), {x},
                        [argmax, c, oh, ow, in_cols, B](const Var& g) {
                            NoGradGuard ng;
                            Mat dx = Mat::Zero(B, in_cols);
                            for (Eigen::Index b = 0; b < B; ++b)
                                for (int ch = 0; ch < c; ++ch)
                                    for (int oy = 0; oy < oh; ++oy)
                                        for (int ox = 0; ox < ow; ++ox)
                                            dx(b, (*argmax)[((b * c + ch) * oh + oy) * ow + ox]) +=
                                                g.val()(b, (ch * oh + oy) * ow + ox);
                            return std::vector<Var>{constant(std::move(dx))};
                        },
                        "maxpool2x2");
}

Var upsample2x_nearest(const Var& x, int c, int h, int w) {
    if (x.cols() != Eigen::Index(c) * h * w)
        throw std::invalid_argument("upsample2x_nearest: input width does not match shape");
    const int oh = 2 * h, ow = 2 * w;
    const Eigen::Index B = x.rows();
    Mat out(B, Eigen::Index(c) * oh * ow);
    for (Eigen::Index b = 0; b < B; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    out(b, (ch * oh + oy) * ow + ox) =
                        x.val()(b, (ch * h + oy / 2) * w + ox / 2);
    Eigen::Index in_cols = x.cols();
    return Var::make_op(std::move(out), {x},
                        [c, h, w, oh, ow, in_cols, B](const Var& g) {
                            NoGradGuard ng;
                            Mat dx = Mat::Zero(B, in_cols);
                            for (Eigen::Index b = 0; b < B; ++b)
                                for (int ch = 0; ch < c; ++ch)
                                    for (int oy = 0; oy < oh; ++oy)
                                        for (int ox = 0; ox < ow; ++ox)
                                            dx(b, (ch * h + oy / 2) * w + ox / 2) +=
                                                g.val()(b, (ch * oh + oy) * ow + ox);
                            return std::vector<Var>{constant(std::move(dx))};
                        },
                        "upsample2x_nearest");
}

Var avgpool_global(const Var& x, int c, int h, int w) {
    if (x.cols() != Eigen::Index(c) * h * w)
        throw std::invalid_argument("avgpool_global: input width does not match shape");
    const Eigen::Index B = x.rows();
    const int P = h * w;
    Mat out(B, c);
    for (Eigen::Index b = 0; b < B; ++b)
        for (int ch = 0; ch < c; ++ch)
            out(b, ch) = x.val().row(b).segment(Eigen::Index(ch) * P, P).mean();
    Eigen::Index in_cols = x.cols();
    return Var::make_op(std::move(out), {x},
                        [c, P, in_cols, B](const Var& g) {
                            NoGradGuard ng;
                            Mat dx(B, in_cols);
                            for (Eigen::Index b = 0; b < B; ++b)
                                for (int ch = 0; ch < c; ++ch)
                                    dx.row(b).segment(Eigen::Index(ch) * P, P)
                                        .setConstant(g.val()(b, ch) / double(P));
                            return std::vector<Var>{constant(std::move(dx))};
                        },
                        "avgpool_global");
}

// ---- grad ---------------------------------------------------------------------

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph) {
    using detail::Node;

    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    if (output.requires_grad()) {
        // Iterative post-order DFS over the requires_grad subgraph.
        struct Frame {
            Var var;
            size_t next = 0;
        };
        std::vector<Frame> stack;
        stack.push_back({output});
        visited.insert(output.node());
        while (!stack.empty()) {
            Frame& f = stack.back();
            Node* n = f.var.node();
            if (f.next < n->parents.size()) {
                Var p = n->parents[f.next++];
                if (p.requires_grad() && !visited.count(p.node())) {
                    visited.insert(p.node());
                    stack.push_back({p});
                }
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::unordered_map<Node*, Var> grads;
    grads.emplace(output.node(), ones(output.rows(), output.cols()));

    GradModeGuard guard(create_graph);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        auto git = grads.find(n);
        if (git == grads.end() || !n->backward) continue;
        std::vector<Var> pgrads = n->backward(git->second);
        if (pgrads.size() != n->parents.size())
            throw std::logic_error(std::string("backward of ") + n->op +
                                   " returned wrong arity");
        for (size_t i = 0; i < n->parents.size(); ++i) {
            const Var& p = n->parents[i];
            if (!p.requires_grad()) continue;
            auto pit = grads.find(p.node());
            if (pit == grads.end())
                grads.emplace(p.node(), pgrads[i]);
            else
                pit->second = add(pit->second, pgrads[i]);
        }
    }

    std::vector<Var> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto it = grads.find(in.node());
        if (it != grads.end() && visited.count(in.node()))
            out.push_back(it->second);
        else
            out.push_back(zeros(in.rows(), in.cols()));
    }
    return out;
}

}  // namespace uqgan::ad
