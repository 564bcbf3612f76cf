#define EIGEN_DONT_PARALLELIZE
#include "cosmo/tg/ops.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace tg {

namespace {

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;

NodePtr make_result(std::vector<int> shape, bool tracked) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data.resize(static_cast<size_t>(n->numel()));
    n->requires_grad = tracked;
    return n;
}

bool tracked_any(std::initializer_list<const Tensor*> parents) {
    if (!grad_enabled()) return false;
    for (const Tensor* p : parents)
        if (p->node()->requires_grad) return true;
    return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// im2col for a single image [C,H,W] with square kernel K, stride s, pad p.
// Produces col[C*K*K, OH*OW], zero padded out of bounds.
void im2col(const Scalar* img, int C, int H, int W, int K, int s, int p, int OH, int OW,
            Scalar* col) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                Scalar* row = col + ((static_cast<int64_t>(c) * K + ky) * K + kx) *
                                        static_cast<int64_t>(OH) * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) row[oy * OW + ox] = Scalar(0);
                        continue;
                    }
                    const Scalar* src = img + (static_cast<int64_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * s - p + kx;
                        row[oy * OW + ox] = (ix >= 0 && ix < W) ? src[ix] : Scalar(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds col back into the image.
void col2im_add(const Scalar* col, int C, int H, int W, int K, int s, int p, int OH, int OW,
                Scalar* img) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                const Scalar* row = col + ((static_cast<int64_t>(c) * K + ky) * K + kx) *
                                              static_cast<int64_t>(OH) * OW;
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    Scalar* dst = img + (static_cast<int64_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < W) dst[ix] += row[oy * OW + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    bool tr = tracked_any({&a, &b});
    auto out = make_result(a.shape(), tr);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] + bv[i];
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            for (int k = 0; k < 2; ++k) {
                Node* p = self.parents[static_cast<size_t>(k)].get();
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
            }
        };
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    bool tr = tracked_any({&a, &b});
    auto out = make_result(a.shape(), tr);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] - bv[i];
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            Node* pa = self.parents[0].get();
            Node* pb = self.parents[1].get();
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
            }
        };
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    bool tr = tracked_any({&a, &b});
    auto out = make_result(a.shape(), tr);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] * bv[i];
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [](Node& self) {
            Node* pa = self.parents[0].get();
            Node* pb = self.parents[1].get();
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pa->grad[i] += self.grad[i] * pb->data[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pb->grad[i] += self.grad[i] * pa->data[i];
            }
        };
    }
    return Tensor(out);
}

Tensor scale(const Tensor& a, Scalar s) {
    bool tr = tracked_any({&a});
    auto out = make_result(a.shape(), tr);
    const auto& av = a.data();
    for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] * s;
    if (tr) {
        out->parents = {a.node()};
        out->backward = [s](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * s;
        };
    }
    return Tensor(out);
}

Tensor add_const(const Tensor& a, Scalar c) {
    bool tr = tracked_any({&a});
    auto out = make_result(a.shape(), tr);
    const auto& av = a.data();
    for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] + c;
    if (tr) {
        out->parents = {a.node()};
        out->backward = [](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        };
    }
    return Tensor(out);
}

Tensor relu(const Tensor& x, Scalar negative_slope) {
    bool tr = tracked_any({&x});
    auto out = make_result(x.shape(), tr);
    const auto& xv = x.data();
    for (size_t i = 0; i < xv.size(); ++i)
        out->data[i] = xv[i] > Scalar(0) ? xv[i] : negative_slope * xv[i];
    if (tr) {
        out->parents = {x.node()};
        out->backward = [negative_slope](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                p->grad[i] += self.grad[i] * (p->data[i] > Scalar(0) ? Scalar(1) : negative_slope);
        };
    }
    return Tensor(out);
}

Tensor tanh_op(const Tensor& x) {
    bool tr = tracked_any({&x});
    auto out = make_result(x.shape(), tr);
    const auto& xv = x.data();
    for (size_t i = 0; i < xv.size(); ++i) out->data[i] = std::tanh(xv[i]);
    if (tr) {
        out->parents = {x.node()};
        out->backward = [](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                Scalar y = self.data[i];
                p->grad[i] += self.grad[i] * (Scalar(1) - y * y);
            }
        };
    }
    return Tensor(out);
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
    bool tr = tracked_any({&x});
    auto out = make_result({1}, tr);
    Scalar acc = 0;
    for (Scalar v : x.data()) acc += v;
    out->data[0] = acc;
    if (tr) {
        out->parents = {x.node()};
        out->backward = [](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            Scalar g = self.grad[0];
            for (auto& gv : p->grad) gv += g;
        };
    }
    return Tensor(out);
}

Tensor mean(const Tensor& x) {
    bool tr = tracked_any({&x});
    auto out = make_result({1}, tr);
    Scalar acc = 0;
    for (Scalar v : x.data()) acc += v;
    Scalar inv_n = Scalar(1) / static_cast<Scalar>(x.numel());
    out->data[0] = acc * inv_n;
    if (tr) {
        out->parents = {x.node()};
        out->backward = [inv_n](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            Scalar g = self.grad[0] * inv_n;
            for (auto& gv : p->grad) gv += g;
        };
    }
    return Tensor(out);
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "l1_loss");
    bool tr = tracked_any({&a, &b});
    auto out = make_result({1}, tr);
    const auto& av = a.data();
    const auto& bv = b.data();
    Scalar acc = 0;
    for (size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
    Scalar inv_n = Scalar(1) / static_cast<Scalar>(a.numel());
    out->data[0] = acc * inv_n;
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [inv_n](Node& self) {
            Node* pa = self.parents[0].get();
            Node* pb = self.parents[1].get();
            Scalar g = self.grad[0] * inv_n;
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (size_t i = 0; i < pa->data.size(); ++i) {
                Scalar d = pa->data[i] - pb->data[i];
                Scalar s = d > Scalar(0) ? Scalar(1) : (d < Scalar(0) ? Scalar(-1) : Scalar(0));
                if (pa->requires_grad) pa->grad[i] += g * s;
                if (pb->requires_grad) pb->grad[i] -= g * s;
            }
        };
    }
    return Tensor(out);
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse_loss");
    bool tr = tracked_any({&a, &b});
    auto out = make_result({1}, tr);
    const auto& av = a.data();
    const auto& bv = b.data();
    Scalar acc = 0;
    for (size_t i = 0; i < av.size(); ++i) {
        Scalar d = av[i] - bv[i];
        acc += d * d;
    }
    Scalar inv_n = Scalar(1) / static_cast<Scalar>(a.numel());
    out->data[0] = acc * inv_n;
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [inv_n](Node& self) {
            Node* pa = self.parents[0].get();
            Node* pb = self.parents[1].get();
            Scalar g = self.grad[0] * inv_n * Scalar(2);
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (size_t i = 0; i < pa->data.size(); ++i) {
                Scalar d = pa->data[i] - pb->data[i];
                if (pa->requires_grad) pa->grad[i] += g * d;
                if (pb->requires_grad) pb->grad[i] -= g * d;
            }
        };
    }
    return Tensor(out);
}

Tensor mse_to_const(const Tensor& x, Scalar target) {
    bool tr = tracked_any({&x});
    auto out = make_result({1}, tr);
    Scalar acc = 0;
    for (Scalar v : x.data()) {
        Scalar d = v - target;
        acc += d * d;
    }
    Scalar inv_n = Scalar(1) / static_cast<Scalar>(x.numel());
    out->data[0] = acc * inv_n;
    if (tr) {
        out->parents = {x.node()};
        out->backward = [inv_n, target](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            Scalar g = self.grad[0] * inv_n * Scalar(2);
            for (size_t i = 0; i < p->data.size(); ++i)
                p->grad[i] += g * (p->data[i] - target);
        };
    }
    return Tensor(out);
}

// --------------------------------------------------------------------- shape

Tensor reshape(const Tensor& x, const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != x.numel()) throw std::invalid_argument("reshape: element count mismatch");
    bool tr = tracked_any({&x});
    auto out = make_result(shape, tr);
    out->data = x.data();
    if (tr) {
        out->parents = {x.node()};
        out->backward = [](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        };
    }
    return Tensor(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4)
        throw std::invalid_argument("concat_channels: expects NCHW");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: shape mismatch");
    int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    bool tr = tracked_any({&a, &b});
    auto out = make_result({N, Ca + Cb, H, W}, tr);
    int64_t hw = static_cast<int64_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.data().begin() + n * Ca * hw, Ca * hw,
                    out->data.begin() + n * (Ca + Cb) * hw);
        std::copy_n(b.data().begin() + n * Cb * hw, Cb * hw,
                    out->data.begin() + n * (Ca + Cb) * hw + Ca * hw);
    }
    if (tr) {
        out->parents = {a.node(), b.node()};
        out->backward = [N, Ca, Cb, hw](Node& self) {
            Node* pa = self.parents[0].get();
            Node* pb = self.parents[1].get();
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (int n = 0; n < N; ++n) {
                const Scalar* g = self.grad.data() + n * (Ca + Cb) * hw;
                if (pa->requires_grad)
                    for (int64_t i = 0; i < Ca * hw; ++i) pa->grad[n * Ca * hw + i] += g[i];
                if (pb->requires_grad)
                    for (int64_t i = 0; i < Cb * hw; ++i)
                        pb->grad[n * Cb * hw + i] += g[Ca * hw + i];
            }
        };
    }
    return Tensor(out);
}

Tensor narrow_cols(const Tensor& x, int start, int len) {
    if (x.ndim() != 2) throw std::invalid_argument("narrow_cols: expects [N,F]");
    int N = x.dim(0), F = x.dim(1);
    if (start < 0 || start + len > F) throw std::invalid_argument("narrow_cols: out of range");
    bool tr = tracked_any({&x});
    auto out = make_result({N, len}, tr);
    for (int n = 0; n < N; ++n)
        std::copy_n(x.data().begin() + n * F + start, len, out->data.begin() + n * len);
    if (tr) {
        out->parents = {x.node()};
        out->backward = [N, F, start, len](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int j = 0; j < len; ++j)
                    p->grad[n * F + start + j] += self.grad[n * len + j];
        };
    }
    return Tensor(out);
}

// -------------------------------------------------------------------- conv2d

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.ndim() != 4 || w.ndim() != 4) throw std::invalid_argument("conv2d: expects 4D x, w");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int O = w.dim(0), K = w.dim(2);
    if (w.dim(1) != C) throw std::invalid_argument("conv2d: channel mismatch");
    if (w.dim(3) != K) throw std::invalid_argument("conv2d: kernel must be square");
    if (H + 2 * pad < K || W + 2 * pad < K)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    if ((H + 2 * pad - K) % stride != 0 || (W + 2 * pad - K) % stride != 0)
        throw std::invalid_argument("conv2d: spatial dims not divisible by stride");
    int OH = (H + 2 * pad - K) / stride + 1;
    int OW = (W + 2 * pad - K) / stride + 1;
    bool has_bias = b.defined();
    if (has_bias && (b.ndim() != 1 || b.dim(0) != O))
        throw std::invalid_argument("conv2d: bias shape mismatch");

    bool tr = has_bias ? tracked_any({&x, &w, &b}) : tracked_any({&x, &w});
    auto out = make_result({N, O, OH, OW}, tr);

    int64_t ckk = static_cast<int64_t>(C) * K * K;
    int64_t ohw = static_cast<int64_t>(OH) * OW;
    auto cols = std::make_shared<std::vector<Scalar>>(static_cast<size_t>(N) * ckk * ohw);
    CMatMap wm(w.data().data(), O, ckk);
    for (int n = 0; n < N; ++n) {
        Scalar* col = cols->data() + n * ckk * ohw;
        im2col(x.data().data() + static_cast<int64_t>(n) * C * H * W, C, H, W, K, stride, pad,
               OH, OW, col);
        MatMap om(out->data.data() + static_cast<int64_t>(n) * O * ohw, O, ohw);
        om.noalias() = wm * CMatMap(col, ckk, ohw);
        if (has_bias)
            for (int o = 0; o < O; ++o) om.row(o).array() += b.data()[static_cast<size_t>(o)];
    }
    if (tr) {
        out->parents = {x.node(), w.node()};
        if (has_bias) out->parents.push_back(b.node());
        auto dims = std::array<int, 8>{N, C, H, W, O, K, stride, pad};
        out->backward = [cols, dims, OH, OW, has_bias](Node& self) {
            auto [N, C, H, W, O, K, stride, pad] = dims;
            Node* px = self.parents[0].get();
            Node* pw = self.parents[1].get();
            int64_t ckk = static_cast<int64_t>(C) * K * K;
            int64_t ohw = static_cast<int64_t>(OH) * OW;
            CMatMap wm(pw->data.data(), O, ckk);
            if (pw->requires_grad) pw->ensure_grad();
            if (px->requires_grad) px->ensure_grad();
            std::vector<Scalar> dcol(static_cast<size_t>(ckk * ohw));
            for (int n = 0; n < N; ++n) {
                CMatMap gm(self.grad.data() + static_cast<int64_t>(n) * O * ohw, O, ohw);
                const Scalar* col = cols->data() + n * ckk * ohw;
                if (pw->requires_grad) {
                    MatMap gw(pw->grad.data(), O, ckk);
                    gw.noalias() += gm * CMatMap(col, ckk, ohw).transpose();
                }
                if (px->requires_grad) {
                    MatMap dc(dcol.data(), ckk, ohw);
                    dc.noalias() = wm.transpose() * gm;
                    col2im_add(dcol.data(), C, H, W, K, stride, pad, OH, OW,
                               px->grad.data() + static_cast<int64_t>(n) * C * H * W);
                }
            }
            if (has_bias) {
                Node* pb = self.parents[2].get();
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    for (int n = 0; n < N; ++n) {
                        CMatMap gm(self.grad.data() + static_cast<int64_t>(n) * O * ohw, O, ohw);
                        for (int o = 0; o < O; ++o) pb->grad[static_cast<size_t>(o)] += gm.row(o).sum();
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw std::invalid_argument("conv_transpose2d: expects 4D x, w");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (w.dim(0) != C) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    int O = w.dim(1), K = w.dim(2);
    int OH = (H - 1) * stride - 2 * pad + K;
    int OW = (W - 1) * stride - 2 * pad + K;
    if (OH <= 0 || OW <= 0) throw std::invalid_argument("conv_transpose2d: empty output");
    bool has_bias = b.defined();
    if (has_bias && (b.ndim() != 1 || b.dim(0) != O))
        throw std::invalid_argument("conv_transpose2d: bias shape mismatch");

    bool tr = has_bias ? tracked_any({&x, &w, &b}) : tracked_any({&x, &w});
    auto out = make_result({N, O, OH, OW}, tr);
    std::fill(out->data.begin(), out->data.end(), Scalar(0));

    int64_t okk = static_cast<int64_t>(O) * K * K;
    int64_t hw = static_cast<int64_t>(H) * W;
    std::vector<Scalar> tmp(static_cast<size_t>(okk * hw));
    CMatMap wm(w.data().data(), C, okk);
    for (int n = 0; n < N; ++n) {
        CMatMap xm(x.data().data() + static_cast<int64_t>(n) * C * hw, C, hw);
        MatMap tm(tmp.data(), okk, hw);
        tm.noalias() = wm.transpose() * xm;
        Scalar* img = out->data.data() + static_cast<int64_t>(n) * O * OH * OW;
        col2im_add(tmp.data(), O, OH, OW, K, stride, pad, H, W, img);
        if (has_bias) {
            for (int o = 0; o < O; ++o) {
                Scalar bo = b.data()[static_cast<size_t>(o)];
                Scalar* ch = img + static_cast<int64_t>(o) * OH * OW;
                for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i) ch[i] += bo;
            }
        }
    }
    if (tr) {
        out->parents = {x.node(), w.node()};
        if (has_bias) out->parents.push_back(b.node());
        auto dims = std::array<int, 8>{N, C, H, W, O, K, stride, pad};
        out->backward = [dims, OH, OW, has_bias](Node& self) {
            auto [N, C, H, W, O, K, stride, pad] = dims;
            Node* px = self.parents[0].get();
            Node* pw = self.parents[1].get();
            int64_t okk = static_cast<int64_t>(O) * K * K;
            int64_t hw = static_cast<int64_t>(H) * W;
            if (px->requires_grad) px->ensure_grad();
            if (pw->requires_grad) pw->ensure_grad();
            std::vector<Scalar> gcol(static_cast<size_t>(okk * hw));
            CMatMap wm(pw->data.data(), C, okk);
            for (int n = 0; n < N; ++n) {
                im2col(self.grad.data() + static_cast<int64_t>(n) * O * OH * OW, O, OH, OW, K,
                       stride, pad, H, W, gcol.data());
                CMatMap gc(gcol.data(), okk, hw);
                if (px->requires_grad) {
                    MatMap gx(px->grad.data() + static_cast<int64_t>(n) * C * hw, C, hw);
                    gx.noalias() += wm * gc;
                }
                if (pw->requires_grad) {
                    CMatMap xm(px->data.data() + static_cast<int64_t>(n) * C * hw, C, hw);
                    MatMap gw(pw->grad.data(), C, okk);
                    gw.noalias() += xm * gc.transpose();
                }
            }
            if (has_bias) {
                Node* pb = self.parents[2].get();
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    int64_t ohw = static_cast<int64_t>(OH) * OW;
                    for (int n = 0; n < N; ++n)
                        for (int o = 0; o < O; ++o) {
                            const Scalar* g =
                                self.grad.data() + (static_cast<int64_t>(n) * O + o) * ohw;
                            Scalar acc = 0;
                            for (int64_t i = 0; i < ohw; ++i) acc += g[i];
                            pb->grad[static_cast<size_t>(o)] += acc;
                        }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor upsample_nearest2d(const Tensor& x, int factor) {
    if (x.ndim() != 4) throw std::invalid_argument("upsample_nearest2d: expects NCHW");
    if (factor < 1) throw std::invalid_argument("upsample_nearest2d: factor must be >= 1");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int OH = H * factor, OW = W * factor;
    bool tr = tracked_any({&x});
    auto out = make_result({N, C, OH, OW}, tr);
    for (int nc = 0; nc < N * C; ++nc) {
        const Scalar* src = x.data().data() + static_cast<int64_t>(nc) * H * W;
        Scalar* dst = out->data.data() + static_cast<int64_t>(nc) * OH * OW;
        for (int y = 0; y < OH; ++y)
            for (int xx = 0; xx < OW; ++xx)
                dst[y * OW + xx] = src[(y / factor) * W + (xx / factor)];
    }
    if (tr) {
        out->parents = {x.node()};
        out->backward = [N, C, H, W, factor, OW](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            int OH = H * factor;
            for (int nc = 0; nc < N * C; ++nc) {
                const Scalar* g = self.grad.data() + static_cast<int64_t>(nc) * OH * OW;
                Scalar* d = p->grad.data() + static_cast<int64_t>(nc) * H * W;
                for (int y = 0; y < OH; ++y)
                    for (int xx = 0; xx < OW; ++xx)
                        d[(y / factor) * W + (xx / factor)] += g[y * OW + xx];
            }
        };
    }
    return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2) throw std::invalid_argument("linear: expects 2D x, w");
    int N = x.dim(0), I = x.dim(1), O = w.dim(0);
    if (w.dim(1) != I) throw std::invalid_argument("linear: feature mismatch");
    bool has_bias = b.defined();
    if (has_bias && (b.ndim() != 1 || b.dim(0) != O))
        throw std::invalid_argument("linear: bias shape mismatch");
    bool tr = has_bias ? tracked_any({&x, &w, &b}) : tracked_any({&x, &w});
    auto out = make_result({N, O}, tr);
    CMatMap xm(x.data().data(), N, I);
    CMatMap wm(w.data().data(), O, I);
    MatMap om(out->data.data(), N, O);
    om.noalias() = xm * wm.transpose();
    if (has_bias)
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) om(n, o) += b.data()[static_cast<size_t>(o)];
    if (tr) {
        out->parents = {x.node(), w.node()};
        if (has_bias) out->parents.push_back(b.node());
        out->backward = [N, I, O, has_bias](Node& self) {
            Node* px = self.parents[0].get();
            Node* pw = self.parents[1].get();
            CMatMap gm(self.grad.data(), N, O);
            if (px->requires_grad) {
                px->ensure_grad();
                MatMap gx(px->grad.data(), N, I);
                gx.noalias() += gm * CMatMap(pw->data.data(), O, I);
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                MatMap gw(pw->grad.data(), O, I);
                gw.noalias() += gm.transpose() * CMatMap(px->data.data(), N, I);
            }
            if (has_bias) {
                Node* pb = self.parents[2].get();
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    for (int o = 0; o < O; ++o) pb->grad[static_cast<size_t>(o)] += gm.col(o).sum();
                }
            }
        };
    }
    return Tensor(out);
}

Tensor adaptive_avg_pool2d(const Tensor& x, int out_h, int out_w) {
    if (x.ndim() != 4) throw std::invalid_argument("adaptive_avg_pool2d: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (out_h < 1 || out_h > H || out_w < 1 || out_w > W)
        throw std::invalid_argument("adaptive_avg_pool2d: invalid output size");
    bool tr = tracked_any({&x});
    auto out = make_result({N, C, out_h, out_w}, tr);
    auto ybounds = [H, out_h](int oy) {
        return std::pair<int, int>{oy * H / out_h, ((oy + 1) * H + out_h - 1) / out_h};
    };
    auto xbounds = [W, out_w](int ox) {
        return std::pair<int, int>{ox * W / out_w, ((ox + 1) * W + out_w - 1) / out_w};
    };
    for (int nc = 0; nc < N * C; ++nc) {
        const Scalar* src = x.data().data() + static_cast<int64_t>(nc) * H * W;
        Scalar* dst = out->data.data() + static_cast<int64_t>(nc) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            auto [y0, y1] = ybounds(oy);
            for (int ox = 0; ox < out_w; ++ox) {
                auto [x0, x1] = xbounds(ox);
                Scalar acc = 0;
                for (int y = y0; y < y1; ++y)
                    for (int xx = x0; xx < x1; ++xx) acc += src[y * W + xx];
                dst[oy * out_w + ox] = acc / static_cast<Scalar>((y1 - y0) * (x1 - x0));
            }
        }
    }
    if (tr) {
        out->parents = {x.node()};
        out->backward = [N, C, H, W, out_h, out_w, ybounds, xbounds](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int nc = 0; nc < N * C; ++nc) {
                const Scalar* g = self.grad.data() + static_cast<int64_t>(nc) * out_h * out_w;
                Scalar* d = p->grad.data() + static_cast<int64_t>(nc) * H * W;
                for (int oy = 0; oy < out_h; ++oy) {
                    auto [y0, y1] = ybounds(oy);
                    for (int ox = 0; ox < out_w; ++ox) {
                        auto [x0, x1] = xbounds(ox);
                        Scalar gv = g[oy * out_w + ox] / static_cast<Scalar>((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y)
                            for (int xx = x0; xx < x1; ++xx) d[y * W + xx] += gv;
                    }
                }
            }
        };
    }
    return Tensor(out);
}

Tensor instance_norm(const Tensor& x, Scalar eps) {
    if (x.ndim() != 4) throw std::invalid_argument("instance_norm: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int64_t hw = static_cast<int64_t>(H) * W;
    bool tr = tracked_any({&x});
    auto out = make_result(x.shape(), tr);
    auto istd = std::make_shared<std::vector<Scalar>>(static_cast<size_t>(N) * C);
    auto mu = std::make_shared<std::vector<Scalar>>(static_cast<size_t>(N) * C);
    for (int nc = 0; nc < N * C; ++nc) {
        const Scalar* src = x.data().data() + nc * hw;
        Scalar m = 0;
        for (int64_t i = 0; i < hw; ++i) m += src[i];
        m /= static_cast<Scalar>(hw);
        Scalar var = 0;
        for (int64_t i = 0; i < hw; ++i) {
            Scalar d = src[i] - m;
            var += d * d;
        }
        var /= static_cast<Scalar>(hw);  // population variance
        Scalar is = Scalar(1) / std::sqrt(var + eps);
        (*mu)[static_cast<size_t>(nc)] = m;
        (*istd)[static_cast<size_t>(nc)] = is;
        Scalar* dst = out->data.data() + nc * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - m) * is;
    }
    if (tr) {
        out->parents = {x.node()};
        out->backward = [N, C, hw, istd, mu](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            for (int nc = 0; nc < N * C; ++nc) {
                const Scalar* g = self.grad.data() + nc * hw;
                const Scalar* xh = self.data.data() + nc * hw;  // normalized values
                Scalar is = (*istd)[static_cast<size_t>(nc)];
                Scalar gmean = 0, gxmean = 0;
                for (int64_t i = 0; i < hw; ++i) {
                    gmean += g[i];
                    gxmean += g[i] * xh[i];
                }
                gmean /= static_cast<Scalar>(hw);
                gxmean /= static_cast<Scalar>(hw);
                Scalar* d = p->grad.data() + nc * hw;
                for (int64_t i = 0; i < hw; ++i)
                    d[i] += is * (g[i] - gmean - xh[i] * gxmean);
            }
        };
    }
    return Tensor(out);
}

Tensor channel_affine(const Tensor& x, const Tensor& g, const Tensor& b) {
    if (x.ndim() != 4) throw std::invalid_argument("channel_affine: expects NCHW");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (g.ndim() != 2 || g.dim(0) != N || g.dim(1) != C || b.shape() != g.shape())
        throw std::invalid_argument("channel_affine: scale/shift must be [N,C]");
    int64_t hw = static_cast<int64_t>(H) * W;
    bool tr = tracked_any({&x, &g, &b});
    auto out = make_result(x.shape(), tr);
    for (int nc = 0; nc < N * C; ++nc) {
        Scalar gv = g.data()[static_cast<size_t>(nc)];
        Scalar bv = b.data()[static_cast<size_t>(nc)];
        const Scalar* src = x.data().data() + nc * hw;
        Scalar* dst = out->data.data() + nc * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] * gv + bv;
    }
    if (tr) {
        out->parents = {x.node(), g.node(), b.node()};
        out->backward = [N, C, hw](Node& self) {
            Node* px = self.parents[0].get();
            Node* pg = self.parents[1].get();
            Node* pb = self.parents[2].get();
            if (px->requires_grad) px->ensure_grad();
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (int nc = 0; nc < N * C; ++nc) {
                const Scalar* gr = self.grad.data() + nc * hw;
                if (px->requires_grad) {
                    Scalar gv = pg->data[static_cast<size_t>(nc)];
                    Scalar* d = px->grad.data() + nc * hw;
                    for (int64_t i = 0; i < hw; ++i) d[i] += gr[i] * gv;
                }
                if (pg->requires_grad) {
                    const Scalar* src = px->data.data() + nc * hw;
                    Scalar acc = 0;
                    for (int64_t i = 0; i < hw; ++i) acc += gr[i] * src[i];
                    pg->grad[static_cast<size_t>(nc)] += acc;
                }
                if (pb->requires_grad) {
                    Scalar acc = 0;
                    for (int64_t i = 0; i < hw; ++i) acc += gr[i];
                    pb->grad[static_cast<size_t>(nc)] += acc;
                }
            }
        };
    }
    return Tensor(out);
}

Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
    return channel_affine(instance_norm(x, eps), gamma, beta);
}

// ------------------------------------------------------- spectral norm

Tensor spectral_norm_apply(const Tensor& w, const std::vector<Scalar>& u,
                           const std::vector<Scalar>& v) {
    int rows = w.dim(0);
    int64_t cols = w.numel() / rows;
    if (static_cast<int64_t>(u.size()) != rows || static_cast<int64_t>(v.size()) != cols)
        throw std::invalid_argument("spectral_norm_apply: u/v size mismatch");
    // sigma = u^T W v
    Scalar sigma = 0;
    for (int r = 0; r < rows; ++r) {
        const Scalar* row = w.data().data() + static_cast<int64_t>(r) * cols;
        Scalar acc = 0;
        for (int64_t c = 0; c < cols; ++c) acc += row[c] * v[static_cast<size_t>(c)];
        sigma += u[static_cast<size_t>(r)] * acc;
    }
    bool tr = tracked_any({&w});
    auto out = make_result(w.shape(), tr);
    Scalar inv_sigma = Scalar(1) / sigma;
    for (size_t i = 0; i < w.data().size(); ++i) out->data[i] = w.data()[i] * inv_sigma;
    if (tr) {
        out->parents = {w.node()};
        auto uc = std::make_shared<std::vector<Scalar>>(u);
        auto vc = std::make_shared<std::vector<Scalar>>(v);
        out->backward = [rows, cols, sigma, uc, vc](Node& self) {
            Node* p = self.parents[0].get();
            p->ensure_grad();
            // d(W/sigma)/dW = I/sigma - W (u v^T) / sigma^2
            Scalar gw_dot_w = 0;
            for (size_t i = 0; i < p->data.size(); ++i) gw_dot_w += self.grad[i] * p->data[i];
            Scalar c2 = gw_dot_w / (sigma * sigma);
            for (int r = 0; r < rows; ++r)
                for (int64_t c = 0; c < cols; ++c) {
                    size_t i = static_cast<size_t>(r * cols + c);
                    p->grad[i] += self.grad[i] / sigma -
                                  c2 * (*uc)[static_cast<size_t>(r)] * (*vc)[static_cast<size_t>(c)];
                }
        };
    }
    return Tensor(out);
}

Scalar power_iteration_step(const std::vector<Scalar>& w, int rows, int cols,
                            std::vector<Scalar>& u, std::vector<Scalar>& v) {
    auto normalize = [](std::vector<Scalar>& x) {
        Scalar n = 0;
        for (Scalar t : x) n += t * t;
        n = std::sqrt(n) + Scalar(1e-12);
        for (Scalar& t : x) t /= n;
    };
    v.assign(static_cast<size_t>(cols), Scalar(0));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            v[static_cast<size_t>(c)] += w[static_cast<size_t>(r * cols + c)] * u[static_cast<size_t>(r)];
    normalize(v);
    std::vector<Scalar> nu(static_cast<size_t>(rows), Scalar(0));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            nu[static_cast<size_t>(r)] += w[static_cast<size_t>(r * cols + c)] * v[static_cast<size_t>(c)];
    normalize(nu);
    u = nu;
    Scalar sigma = 0;
    for (int r = 0; r < rows; ++r) {
        Scalar acc = 0;
        for (int c = 0; c < cols; ++c)
            acc += w[static_cast<size_t>(r * cols + c)] * v[static_cast<size_t>(c)];
        sigma += u[static_cast<size_t>(r)] * acc;
    }
    return sigma;
}

std::vector<Scalar> spectral_normalize(const std::vector<Scalar>& w, int rows, int cols,
                                       int iters, Scalar* sigma_out) {
    std::vector<Scalar> u(static_cast<size_t>(rows));
    // fixed deterministic start: alternating-sign ramp, cannot be orthogonal
    // to the leading singular vector for generic matrices
    for (int r = 0; r < rows; ++r)
        u[static_cast<size_t>(r)] = Scalar(1) + Scalar(0.37) * static_cast<Scalar>(r % 7);
    std::vector<Scalar> v;
    Scalar sigma = 1;
    for (int i = 0; i < iters; ++i) sigma = power_iteration_step(w, rows, cols, u, v);
    std::vector<Scalar> out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = w[i] / sigma;
    if (sigma_out) *sigma_out = sigma;
    return out;
}

}  // namespace tg
