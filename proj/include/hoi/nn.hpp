#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoi/rng.hpp"

namespace hoi::nn {

// 64-byte aligned buffers keep Eigen's packet paths identical across runs;
// unaligned heads would otherwise change reduction order run-to-run.
template <typename T, size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(size_t n) {
        void* p = ::operator new(n * sizeof(T), std::align_val_t(Align));
        return static_cast<T*>(p);
    }
    void deallocate(T* p, size_t) noexcept {
        ::operator delete(p, std::align_val_t(Align));
    }
    template <typename U>
    bool operator==(const AlignedAllocator<U, Align>&) const {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Tensor {
    std::vector<int> shape;
    AlignedVec<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(numel_of(shape), T(0));
    }

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dim");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t numel() const { return v.size(); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

using TensorF = Tensor<float>;

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

// ---- parameters ----

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void init_shape(std::vector<int> shape) {
        value = Tensor<T>(shape);
        grad = Tensor<T>(std::move(shape));
    }
};

// Fan-in scaled uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
void init_uniform_fan_in(Param<T>& p, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& x : p.value.v) x = static_cast<T>(rng.uniform(-bound, bound));
    p.grad.zero();
}

// ---- im2col / col2im (kernel k, stride s, pad p); cols is [C*k*k, OH*OW] row-major ----

inline int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, T* cols) {
    const int OH = conv_out_size(H, k, stride, pad);
    const int OW = conv_out_size(W, k, stride, pad);
    const int cols_w = OH * OW;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = cols + (static_cast<size_t>(c) * k * k + ki * k + kj) * cols_w;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) row[oy * OW + ox] = T(0);
                        continue;
                    }
                    const T* src = x + (static_cast<size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        row[oy * OW + ox] = (ix < 0 || ix >= W) ? T(0) : src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, int C, int H, int W, int k, int stride, int pad, T* x) {
    const int OH = conv_out_size(H, k, stride, pad);
    const int OW = conv_out_size(W, k, stride, pad);
    const int cols_w = OH * OW;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = cols + (static_cast<size_t>(c) * k * k + ki * k + kj) * cols_w;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = x + (static_cast<size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix >= 0 && ix < W) dst[ix] += row[oy * OW + ox];
                    }
                }
            }
        }
    }
}

// ---- layers ----

template <typename T>
struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
    Param<T> w;  // [out_c, in_c*k*k]
    Param<T> b;  // [out_c]

    struct Cache {
        Tensor<T> cols;  // [N, C*k*k, OH*OW] flattened
        int n = 0, ih = 0, iw = 0, oh = 0, ow = 0;
    };

    void configure(int in_channels, int out_channels, int kernel, int stride_, int pad_,
                   const std::string& name, Rng& rng) {
        in_c = in_channels;
        out_c = out_channels;
        k = kernel;
        stride = stride_;
        pad = pad_;
        w.name = name + ".w";
        b.name = name + ".b";
        w.init_shape({out_c, in_c * k * k});
        b.init_shape({out_c});
        init_uniform_fan_in(w, in_c * k * k, rng);
        b.grad.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        if (x.shape.size() != 4 || x.dim(1) != in_c)
            throw std::invalid_argument("conv: bad input shape");
        const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
        const int oh = conv_out_size(ih, k, stride, pad);
        const int ow = conv_out_size(iw, k, stride, pad);
        const int ckk = in_c * k * k;
        Tensor<T> cols_t({n, ckk, oh * ow});
        Tensor<T> y({n, out_c, oh, ow});
        CMapM<T> wm(w.value.v.data(), out_c, ckk);
        for (int i = 0; i < n; ++i) {
            T* cols = cols_t.v.data() + static_cast<size_t>(i) * ckk * oh * ow;
            im2col(x.v.data() + static_cast<size_t>(i) * in_c * ih * iw, in_c, ih, iw, k,
                   stride, pad, cols);
            CMapM<T> cm(cols, ckk, oh * ow);
            MapM<T> ym(y.v.data() + static_cast<size_t>(i) * out_c * oh * ow, out_c, oh * ow);
            ym.noalias() = wm * cm;
            for (int c = 0; c < out_c; ++c) ym.row(c).array() += b.value.v[c];
        }
        if (cache) {
            cache->cols = std::move(cols_t);
            cache->n = n;
            cache->ih = ih;
            cache->iw = iw;
            cache->oh = oh;
            cache->ow = ow;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) {
        const int n = cache.n, oh = cache.oh, ow = cache.ow;
        const int ckk = in_c * k * k;
        Tensor<T> dx({n, in_c, cache.ih, cache.iw});
        MapM<T> dwm(w.grad.v.data(), out_c, ckk);
        CMapM<T> wm(w.value.v.data(), out_c, ckk);
        Tensor<T> dcols({ckk, oh * ow});
        for (int i = 0; i < n; ++i) {
            CMapM<T> dym(dy.v.data() + static_cast<size_t>(i) * out_c * oh * ow, out_c, oh * ow);
            CMapM<T> cm(cache.cols.v.data() + static_cast<size_t>(i) * ckk * oh * ow, ckk,
                        oh * ow);
            dwm.noalias() += dym * cm.transpose();
            for (int c = 0; c < out_c; ++c) {
                const T* row = dy.v.data() + (static_cast<size_t>(i) * out_c + c) * oh * ow;
                T acc = T(0);
                for (int j = 0; j < oh * ow; ++j) acc += row[j];
                b.grad.v[c] += acc;
            }
            MapM<T> dcm(dcols.v.data(), ckk, oh * ow);
            dcm.noalias() = wm.transpose() * dym;
            col2im_add(dcols.v.data(), in_c, cache.ih, cache.iw, k, stride, pad,
                       dx.v.data() + static_cast<size_t>(i) * in_c * cache.ih * cache.iw);
        }
        return dx;
    }
};

// Transposed convolution; output spatial size = stride*(in-1) + k - 2*pad.
template <typename T>
struct ConvTranspose2d {
    int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
    Param<T> w;  // [in_c, out_c*k*k]
    Param<T> b;  // [out_c]

    struct Cache {
        Tensor<T> x;
        int n = 0, ih = 0, iw = 0, oh = 0, ow = 0;
    };

    void configure(int in_channels, int out_channels, int kernel, int stride_, int pad_,
                   const std::string& name, Rng& rng) {
        in_c = in_channels;
        out_c = out_channels;
        k = kernel;
        stride = stride_;
        pad = pad_;
        w.name = name + ".w";
        b.name = name + ".b";
        w.init_shape({in_c, out_c * k * k});
        b.init_shape({out_c});
        // fan_in per output unit of a deconv is in_c * k*k / stride^2
        init_uniform_fan_in(w, std::max(1, in_c * k * k / (stride * stride)), rng);
        b.grad.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        if (x.shape.size() != 4 || x.dim(1) != in_c)
            throw std::invalid_argument("deconv: bad input shape");
        const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
        const int oh = stride * (ih - 1) + k - 2 * pad;
        const int ow = stride * (iw - 1) + k - 2 * pad;
        if (conv_out_size(oh, k, stride, pad) != ih || conv_out_size(ow, k, stride, pad) != iw)
            throw std::invalid_argument("deconv: geometry not invertible");
        Tensor<T> y({n, out_c, oh, ow});
        const int ckk = out_c * k * k;
        Tensor<T> cols({ckk, ih * iw});
        CMapM<T> wm(w.value.v.data(), in_c, ckk);
        for (int i = 0; i < n; ++i) {
            CMapM<T> xm(x.v.data() + static_cast<size_t>(i) * in_c * ih * iw, in_c, ih * iw);
            MapM<T> cm(cols.v.data(), ckk, ih * iw);
            cm.noalias() = wm.transpose() * xm;
            T* yp = y.v.data() + static_cast<size_t>(i) * out_c * oh * ow;
            col2im_add(cols.v.data(), out_c, oh, ow, k, stride, pad, yp);
            MapM<T> ym(yp, out_c, oh * ow);
            for (int c = 0; c < out_c; ++c) ym.row(c).array() += b.value.v[c];
        }
        if (cache) {
            cache->x = x;
            cache->n = n;
            cache->ih = ih;
            cache->iw = iw;
            cache->oh = oh;
            cache->ow = ow;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) {
        const int n = cache.n, ih = cache.ih, iw = cache.iw;
        const int ckk = out_c * k * k;
        Tensor<T> dx({n, in_c, ih, iw});
        Tensor<T> dcols({ckk, ih * iw});
        CMapM<T> wm(w.value.v.data(), in_c, ckk);
        MapM<T> dwm(w.grad.v.data(), in_c, ckk);
        for (int i = 0; i < n; ++i) {
            const T* dyp = dy.v.data() + static_cast<size_t>(i) * out_c * cache.oh * cache.ow;
            im2col(dyp, out_c, cache.oh, cache.ow, k, stride, pad, dcols.v.data());
            CMapM<T> dcm(dcols.v.data(), ckk, ih * iw);
            CMapM<T> xm(cache.x.v.data() + static_cast<size_t>(i) * in_c * ih * iw, in_c,
                        ih * iw);
            MapM<T> dxm(dx.v.data() + static_cast<size_t>(i) * in_c * ih * iw, in_c, ih * iw);
            dxm.noalias() = wm * dcm;
            dwm.noalias() += xm * dcm.transpose();
            for (int c = 0; c < out_c; ++c) {
                const T* row = dyp + static_cast<size_t>(c) * cache.oh * cache.ow;
                T acc = T(0);
                for (int j = 0; j < cache.oh * cache.ow; ++j) acc += row[j];
                b.grad.v[c] += acc;
            }
        }
        return dx;
    }
};

template <typename T>
struct Linear {
    int in = 0, out = 0;
    Param<T> w;  // [out, in]
    Param<T> b;  // [out]

    struct Cache {
        Tensor<T> x;
    };

    void configure(int in_dim, int out_dim, const std::string& name, Rng& rng) {
        in = in_dim;
        out = out_dim;
        w.name = name + ".w";
        b.name = name + ".b";
        w.init_shape({out, in});
        b.init_shape({out});
        init_uniform_fan_in(w, in, rng);
        b.grad.zero();
    }

    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        if (x.shape.size() != 2 || x.dim(1) != in)
            throw std::invalid_argument("linear: bad input shape");
        const int n = x.dim(0);
        Tensor<T> y({n, out});
        CMapM<T> xm(x.v.data(), n, in);
        CMapM<T> wm(w.value.v.data(), out, in);
        MapM<T> ym(y.v.data(), n, out);
        ym.noalias() = xm * wm.transpose();
        for (int c = 0; c < out; ++c) ym.col(c).array() += b.value.v[c];
        if (cache) cache->x = x;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) {
        const int n = cache.x.dim(0);
        Tensor<T> dx({n, in});
        CMapM<T> dym(dy.v.data(), n, out);
        CMapM<T> xm(cache.x.v.data(), n, in);
        CMapM<T> wm(w.value.v.data(), out, in);
        MapM<T> dwm(w.grad.v.data(), out, in);
        MapM<T> dxm(dx.v.data(), n, in);
        dwm.noalias() += dym.transpose() * xm;
        for (int c = 0; c < out; ++c) {
            T acc = T(0);
            for (int i = 0; i < n; ++i) acc += dy.v[static_cast<size_t>(i) * out + c];
            b.grad.v[c] += acc;
        }
        dxm.noalias() = dym * wm;
        return dx;
    }
};

template <typename T>
struct Relu {
    struct Cache {
        Tensor<T> y;
    };
    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        Tensor<T> y = x;
        for (auto& v : y.v) v = v > T(0) ? v : T(0);
        if (cache) cache->y = y;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) const {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i)
            if (!(cache.y.v[i] > T(0))) dx.v[i] = T(0);
        return dx;
    }
};

template <typename T>
struct GlobalAvgPool {
    struct Cache {
        int n = 0, c = 0, h = 0, w = 0;
    };
    Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
        if (x.shape.size() != 4) throw std::invalid_argument("gap: expects NCHW");
        const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
        Tensor<T> y({n, c});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const T* p = x.v.data() + (static_cast<size_t>(i) * c + ch) * hw;
                T acc = T(0);
                for (int j = 0; j < hw; ++j) acc += p[j];
                y.v[static_cast<size_t>(i) * c + ch] = acc / static_cast<T>(hw);
            }
        if (cache) *cache = {n, c, x.dim(2), x.dim(3)};
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) const {
        const int hw = cache.h * cache.w;
        Tensor<T> dx({cache.n, cache.c, cache.h, cache.w});
        for (int i = 0; i < cache.n; ++i)
            for (int ch = 0; ch < cache.c; ++ch) {
                const T g = dy.v[static_cast<size_t>(i) * cache.c + ch] / static_cast<T>(hw);
                T* p = dx.v.data() + (static_cast<size_t>(i) * cache.c + ch) * hw;
                for (int j = 0; j < hw; ++j) p[j] = g;
            }
        return dx;
    }
};

template <typename T>
inline T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// Stable binary cross-entropy with logits; positive targets weighted by pos_weight.
// Per-element loss: pos_weight*y*softplus(-x) + (1-y)*softplus(x).
template <typename T>
struct BceWithLogits {
    static T value(const T* x, const T* y, size_t n, T pos_weight) {
        T acc = T(0);
        for (size_t i = 0; i < n; ++i) {
            const T sp_neg = x[i] > T(20) ? std::exp(-x[i]) : std::log1p(std::exp(-std::abs(x[i]))) + std::max(-x[i], T(0));
            const T sp_pos = x[i] < T(-20) ? std::exp(x[i]) : std::log1p(std::exp(-std::abs(x[i]))) + std::max(x[i], T(0));
            acc += pos_weight * y[i] * sp_neg + (T(1) - y[i]) * sp_pos;
        }
        return acc / static_cast<T>(n);
    }
    // d(loss)/dx, including the 1/n mean factor.
    static void grad(const T* x, const T* y, size_t n, T pos_weight, T scale, T* dx) {
        for (size_t i = 0; i < n; ++i) {
            const T s = sigmoid(x[i]);
            dx[i] = scale * (-pos_weight * y[i] * (T(1) - s) + (T(1) - y[i]) * s) /
                    static_cast<T>(n);
        }
    }
};

// ---- optimizer ----

template <typename T>
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.0;  // L2 added to gradients
    int64_t t = 0;

    struct Slot {
        std::vector<T> m, v;
    };
    std::vector<Slot> slots;

    void step(const std::vector<Param<T>*>& params) {
        if (slots.empty()) {
            slots.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                slots[i].m.assign(params[i]->value.numel(), T(0));
                slots[i].v.assign(params[i]->value.numel(), T(0));
            }
        }
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i];
            Slot& s = slots[i];
            for (size_t j = 0; j < p.value.v.size(); ++j) {
                double g = p.grad.v[j] + weight_decay * p.value.v[j];
                s.m[j] = static_cast<T>(beta1 * s.m[j] + (1 - beta1) * g);
                s.v[j] = static_cast<T>(beta2 * s.v[j] + (1 - beta2) * g * g);
                const double mhat = s.m[j] / bc1;
                const double vhat = s.v[j] / bc2;
                p.value.v[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

template <typename T>
void zero_grads(const std::vector<Param<T>*>& params) {
    for (auto* p : params) p->grad.zero();
}

}  // namespace hoi::nn
