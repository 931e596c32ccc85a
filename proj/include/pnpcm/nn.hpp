// SPDX-License-Identifier: Apache-2.0
//
// pnpcm - plug-and-play consistency-model channel estimation
// Copyright (C) 2026 pnpcm contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
//
// Small time-conditioned convolutional U-Net with hand-written backprop.
// Everything is templated on the scalar type: training runs in float,
// gradient checks instantiate the same code in double.

#ifndef PNPCM_NN_HPP
#define PNPCM_NN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pnpcm/errors.hpp"
#include "pnpcm/rng.hpp"

namespace pnpcm::nn {

// 64-byte aligned storage. Keeping every buffer base at a fixed alignment
// makes Eigen's vectorized kernels take the same code path on every run,
// which in turn makes training bit-reproducible for a given seed.
template <typename T> struct AlignedAlloc {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAlloc() = default;
    template <typename U> AlignedAlloc(const AlignedAlloc<U> &) noexcept {}

    T *allocate(std::size_t n) {
        return static_cast<T *>(::operator new(n * sizeof(T), kAlign));
    }
    void deallocate(T *p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U> bool operator==(const AlignedAlloc<U> &) const noexcept { return true; }
    template <typename U> bool operator!=(const AlignedAlloc<U> &) const noexcept { return false; }
};

template <typename S> using AVec = std::vector<S, AlignedAlloc<S>>;

template <typename S> struct Tensor {
    int c = 0, h = 0, w = 0;
    AVec<S> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, S(0)) {}

    std::size_t size() const { return v.size(); }
    int plane() const { return h * w; }
    S *data() { return v.data(); }
    const S *data() const { return v.data(); }
    S &at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    const S &at(int ci, int y, int x) const {
        return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
    }
    bool same_shape(const Tensor &o) const { return c == o.c && h == o.h && w == o.w; }
};

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using MatXR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Named flat parameter storage; layers hold offsets into it. Keeping one
// contiguous array makes the optimizer, EMA and checkpointing trivial and
// keeps the parameter order stable for serialization.
template <typename S> struct ParamStore {
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };

    AVec<S> w;
    std::vector<Entry> entries;

    std::size_t add(const std::string &name, std::vector<int> shape) {
        std::size_t count = 1;
        for (int d : shape)
            count *= static_cast<std::size_t>(d);
        Entry e{name, std::move(shape), w.size(), count};
        entries.push_back(e);
        w.resize(w.size() + count, S(0));
        return e.offset;
    }

    std::size_t size() const { return w.size(); }
};

template <typename S> struct Workspace {
    AVec<S> col;  // im2col scratch
    AVec<S> col2; // gradient scratch

    S *col_buf(std::size_t n) {
        if (col.size() < n)
            col.resize(n);
        return col.data();
    }
    S *col2_buf(std::size_t n) {
        if (col2.size() < n)
            col2.resize(n);
        return col2.data();
    }
};

template <typename S> inline S silu_scalar(S x) {
    S sig = S(1) / (S(1) + std::exp(-x));
    return x * sig;
}

template <typename S> struct SiLU {
    struct Cache {
        Tensor<S> x;
    };
    static Tensor<S> forward(const Tensor<S> &x, Cache &cache) {
        cache.x = x;
        Tensor<S> y = x;
        for (auto &e : y.v)
            e = silu_scalar(e);
        return y;
    }
    static Tensor<S> backward(const Cache &cache, const Tensor<S> &dy) {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) {
            S x = cache.x.v[i];
            S sig = S(1) / (S(1) + std::exp(-x));
            dx.v[i] *= sig * (S(1) + x * (S(1) - sig));
        }
        return dx;
    }
};

template <typename S> struct Conv2d {
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
    std::size_t w_off = 0, b_off = 0;

    struct Cache {
        Tensor<S> x;
    };

    void init(ParamStore<S> &store, const std::string &name, int cin_, int cout_, int k_,
              int stride_, bool zero_init, Rng &rng) {
        cin = cin_;
        cout = cout_;
        k = k_;
        stride = stride_;
        pad = k_ / 2;
        w_off = store.add(name + ".weight", {cout, cin, k, k});
        b_off = store.add(name + ".bias", {cout});
        if (!zero_init) {
            const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
            for (std::size_t i = 0; i < static_cast<std::size_t>(cout) * cin * k * k; ++i)
                store.w[w_off + i] = static_cast<S>(rng.normal() * std);
        }
    }

    int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
    int out_w(int w) const { return (w + 2 * pad - k) / stride + 1; }

    void im2col(const Tensor<S> &x, S *col) const {
        const int ho = out_h(x.h), wo = out_w(x.w);
        // col is (cin*k*k) x (ho*wo), column-major
        for (int xo = 0; xo < wo; ++xo)
            for (int yo = 0; yo < ho; ++yo) {
                S *dst = col + static_cast<std::size_t>(yo * wo + xo) * (cin * k * k);
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky) {
                        const int yi = yo * stride + ky - pad;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xi = xo * stride + kx - pad;
                            *dst++ = (yi >= 0 && yi < x.h && xi >= 0 && xi < x.w)
                                         ? x.at(ci, yi, xi)
                                         : S(0);
                        }
                    }
            }
    }

    Tensor<S> forward(const ParamStore<S> &store, const Tensor<S> &x, Cache &cache,
                      Workspace<S> &ws) const {
        require(x.c == cin, errc::shape_mismatch, "conv2d: channel mismatch");
        cache.x = x;
        const int ho = out_h(x.h), wo = out_w(x.w), n = ho * wo, kk = cin * k * k;
        S *col = ws.col_buf(static_cast<std::size_t>(kk) * n);
        im2col(x, col);

        Tensor<S> y(cout, ho, wo);
        Eigen::Map<const MatXR<S>> wmat(store.w.data() + w_off, cout, kk);
        Eigen::Map<const MatX<S>> cmat(col, kk, n);
        Eigen::Map<MatXR<S>> ymat(y.data(), cout, n);
        ymat.noalias() = wmat * cmat;
        Eigen::Map<const VecX<S>> bias(store.w.data() + b_off, cout);
        ymat.colwise() += bias;
        return y;
    }

    Tensor<S> backward(const ParamStore<S> &store, const Cache &cache, const Tensor<S> &dy,
                       AVec<S> &grad, Workspace<S> &ws) const {
        const Tensor<S> &x = cache.x;
        const int ho = dy.h, wo = dy.w, n = ho * wo, kk = cin * k * k;
        S *col = ws.col_buf(static_cast<std::size_t>(kk) * n);
        im2col(x, col);

        Eigen::Map<const MatXR<S>> dymat(dy.data(), cout, n);
        Eigen::Map<const MatX<S>> cmat(col, kk, n);
        Eigen::Map<MatXR<S>> dwmat(grad.data() + w_off, cout, kk);
        dwmat.noalias() += dymat * cmat.transpose();
        for (int co = 0; co < cout; ++co) {
            const S *row = dy.data() + static_cast<std::size_t>(co) * n;
            S acc = S(0);
            for (int i = 0; i < n; ++i)
                acc += row[i];
            grad[b_off + co] += acc;
        }

        S *dcol = ws.col2_buf(static_cast<std::size_t>(kk) * n);
        Eigen::Map<const MatXR<S>> wmat(store.w.data() + w_off, cout, kk);
        Eigen::Map<MatX<S>> dcmat(dcol, kk, n);
        dcmat.noalias() = wmat.transpose() * dymat;

        Tensor<S> dx(x.c, x.h, x.w);
        for (int xo = 0; xo < wo; ++xo)
            for (int yo = 0; yo < ho; ++yo) {
                const S *src = dcol + static_cast<std::size_t>(yo * wo + xo) * kk;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky) {
                        const int yi = yo * stride + ky - pad;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xi = xo * stride + kx - pad;
                            if (yi >= 0 && yi < x.h && xi >= 0 && xi < x.w)
                                dx.at(ci, yi, xi) += src[(ci * k + ky) * k + kx];
                        }
                    }
            }
        return dx;
    }
};

template <typename S> struct GroupNorm {
    int c = 0, groups = 1;
    std::size_t g_off = 0, b_off = 0;
    static constexpr double kEps = 1e-5;

    struct Cache {
        Tensor<S> xhat;
        AVec<S> inv; // per group
    };

    void init(ParamStore<S> &store, const std::string &name, int c_, int groups_) {
        c = c_;
        groups = std::min(groups_, c_);
        while (c % groups != 0)
            --groups;
        g_off = store.add(name + ".gamma", {c});
        b_off = store.add(name + ".beta", {c});
        for (int i = 0; i < c; ++i)
            store.w[g_off + i] = S(1);
    }

    Tensor<S> forward(const ParamStore<S> &store, const Tensor<S> &x, Cache &cache) const {
        require(x.c == c, errc::shape_mismatch, "groupnorm: channel mismatch");
        const int cg = c / groups;
        const std::size_t gn = static_cast<std::size_t>(cg) * x.plane();
        cache.xhat = Tensor<S>(x.c, x.h, x.w);
        cache.inv.assign(groups, S(0));
        Tensor<S> y(x.c, x.h, x.w);
        for (int g = 0; g < groups; ++g) {
            const S *xs = x.data() + static_cast<std::size_t>(g) * gn;
            S mean = S(0);
            for (std::size_t i = 0; i < gn; ++i)
                mean += xs[i];
            mean /= static_cast<S>(gn);
            S var = S(0);
            for (std::size_t i = 0; i < gn; ++i) {
                S d = xs[i] - mean;
                var += d * d;
            }
            var /= static_cast<S>(gn);
            const S inv = S(1) / std::sqrt(var + static_cast<S>(kEps));
            cache.inv[g] = inv;
            S *xh = cache.xhat.data() + static_cast<std::size_t>(g) * gn;
            S *yo = y.data() + static_cast<std::size_t>(g) * gn;
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = store.w[g_off + g * cg + cc];
                const S beta = store.w[b_off + g * cg + cc];
                const std::size_t base = static_cast<std::size_t>(cc) * x.plane();
                for (int i = 0; i < x.plane(); ++i) {
                    S xhat = (xs[base + i] - mean) * inv;
                    xh[base + i] = xhat;
                    yo[base + i] = gamma * xhat + beta;
                }
            }
        }
        return y;
    }

    Tensor<S> backward(const ParamStore<S> &store, const Cache &cache, const Tensor<S> &dy,
                       AVec<S> &grad) const {
        const int cg = c / groups;
        const int plane = dy.plane();
        const std::size_t gn = static_cast<std::size_t>(cg) * plane;
        Tensor<S> dx(dy.c, dy.h, dy.w);
        for (int g = 0; g < groups; ++g) {
            const S *xh = cache.xhat.data() + static_cast<std::size_t>(g) * gn;
            const S *dys = dy.data() + static_cast<std::size_t>(g) * gn;
            S *dxs = dx.data() + static_cast<std::size_t>(g) * gn;
            S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = store.w[g_off + g * cg + cc];
                const std::size_t base = static_cast<std::size_t>(cc) * plane;
                S dg = S(0), db = S(0);
                for (int i = 0; i < plane; ++i) {
                    const S d = dys[base + i];
                    dg += d * xh[base + i];
                    db += d;
                    const S dxhat = d * gamma;
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xh[base + i];
                }
                grad[g_off + g * cg + cc] += dg;
                grad[b_off + g * cg + cc] += db;
            }
            const S inv = cache.inv[g];
            const S m = S(1) / static_cast<S>(gn);
            for (int cc = 0; cc < cg; ++cc) {
                const S gamma = store.w[g_off + g * cg + cc];
                const std::size_t base = static_cast<std::size_t>(cc) * plane;
                for (int i = 0; i < plane; ++i) {
                    const S dxhat = dys[base + i] * gamma;
                    dxs[base + i] =
                        inv * (dxhat - m * sum_dxhat - xh[base + i] * m * sum_dxhat_xhat);
                }
            }
        }
        return dx;
    }
};

template <typename S> struct Linear {
    int in = 0, out = 0;
    std::size_t w_off = 0, b_off = 0;

    struct Cache {
        AVec<S> x;
    };

    void init(ParamStore<S> &store, const std::string &name, int in_, int out_, Rng &rng) {
        in = in_;
        out = out_;
        w_off = store.add(name + ".weight", {out, in});
        b_off = store.add(name + ".bias", {out});
        const double std = std::sqrt(1.0 / in_);
        for (std::size_t i = 0; i < static_cast<std::size_t>(out) * in; ++i)
            store.w[w_off + i] = static_cast<S>(rng.normal() * std);
    }

    AVec<S> forward(const ParamStore<S> &store, const AVec<S> &x,
                           Cache &cache) const {
        require(static_cast<int>(x.size()) == in, errc::shape_mismatch, "linear: input size");
        cache.x = x;
        AVec<S> y(out);
        Eigen::Map<const MatXR<S>> wmat(store.w.data() + w_off, out, in);
        Eigen::Map<const VecX<S>> xv(x.data(), in);
        Eigen::Map<VecX<S>> yv(y.data(), out);
        yv.noalias() = wmat * xv;
        Eigen::Map<const VecX<S>> bias(store.w.data() + b_off, out);
        yv += bias;
        return y;
    }

    AVec<S> backward(const ParamStore<S> &store, const Cache &cache,
                            const AVec<S> &dy, AVec<S> &grad) const {
        Eigen::Map<const VecX<S>> dyv(dy.data(), out);
        Eigen::Map<const VecX<S>> xv(cache.x.data(), in);
        Eigen::Map<MatXR<S>> dwmat(grad.data() + w_off, out, in);
        dwmat.noalias() += dyv * xv.transpose();
        Eigen::Map<VecX<S>> dbias(grad.data() + b_off, out);
        dbias += dyv;
        AVec<S> dx(in);
        Eigen::Map<const MatXR<S>> wmat(store.w.data() + w_off, out, in);
        Eigen::Map<VecX<S>> dxv(dx.data(), in);
        dxv.noalias() = wmat.transpose() * dyv;
        return dx;
    }
};

// Residual block: GN -> SiLU -> conv -> (+ time bias) -> GN -> SiLU -> conv,
// with identity or 1x1 skip. The second conv starts at zero.
template <typename S> struct ResBlock {
    GroupNorm<S> gn1, gn2;
    Conv2d<S> conv1, conv2, skip;
    Linear<S> temb_proj;
    bool has_skip = false;

    struct Cache {
        typename GroupNorm<S>::Cache gn1c, gn2c;
        typename SiLU<S>::Cache s1c, s2c;
        typename Conv2d<S>::Cache c1c, c2c, skipc;
        typename Linear<S>::Cache tc;
    };

    void init(ParamStore<S> &store, const std::string &name, int cin, int cout, int temb_dim,
              int gn_groups, Rng &rng) {
        gn1.init(store, name + ".gn1", cin, std::min(gn_groups, cin));
        conv1.init(store, name + ".conv1", cin, cout, 3, 1, false, rng);
        temb_proj.init(store, name + ".temb", temb_dim, cout, rng);
        gn2.init(store, name + ".gn2", cout, std::min(gn_groups, cout));
        conv2.init(store, name + ".conv2", cout, cout, 3, 1, true, rng);
        has_skip = cin != cout;
        if (has_skip)
            skip.init(store, name + ".skip", cin, cout, 1, 1, false, rng);
    }

    Tensor<S> forward(const ParamStore<S> &store, const Tensor<S> &x,
                      const AVec<S> &temb_act, Cache &cache, Workspace<S> &ws) const {
        Tensor<S> h = gn1.forward(store, x, cache.gn1c);
        h = SiLU<S>::forward(h, cache.s1c);
        h = conv1.forward(store, h, cache.c1c, ws);
        AVec<S> tb = temb_proj.forward(store, temb_act, cache.tc);
        for (int ci = 0; ci < h.c; ++ci) {
            S *plane = h.data() + static_cast<std::size_t>(ci) * h.plane();
            for (int i = 0; i < h.plane(); ++i)
                plane[i] += tb[ci];
        }
        h = gn2.forward(store, h, cache.gn2c);
        h = SiLU<S>::forward(h, cache.s2c);
        h = conv2.forward(store, h, cache.c2c, ws);
        Tensor<S> res = has_skip ? skip.forward(store, x, cache.skipc, ws) : x;
        for (std::size_t i = 0; i < h.v.size(); ++i)
            h.v[i] += res.v[i];
        return h;
    }

    Tensor<S> backward(const ParamStore<S> &store, const Cache &cache, const Tensor<S> &dy,
                       AVec<S> &grad, AVec<S> &d_temb_act,
                       Workspace<S> &ws) const {
        Tensor<S> dh = conv2.backward(store, cache.c2c, dy, grad, ws);
        dh = SiLU<S>::backward(cache.s2c, dh);
        dh = gn2.backward(store, cache.gn2c, dh, grad);

        AVec<S> dtb(conv1.cout, S(0));
        for (int ci = 0; ci < dh.c; ++ci) {
            const S *plane = dh.data() + static_cast<std::size_t>(ci) * dh.plane();
            S acc = S(0);
            for (int i = 0; i < dh.plane(); ++i)
                acc += plane[i];
            dtb[ci] = acc;
        }
        AVec<S> dt = temb_proj.backward(store, cache.tc, dtb, grad);
        for (std::size_t i = 0; i < d_temb_act.size(); ++i)
            d_temb_act[i] += dt[i];

        dh = conv1.backward(store, cache.c1c, dh, grad, ws);
        dh = SiLU<S>::backward(cache.s1c, dh);
        Tensor<S> dx = gn1.backward(store, cache.gn1c, dh, grad);

        if (has_skip) {
            Tensor<S> ds = skip.backward(store, cache.skipc, dy, grad, ws);
            for (std::size_t i = 0; i < dx.v.size(); ++i)
                dx.v[i] += ds.v[i];
        } else {
            for (std::size_t i = 0; i < dx.v.size(); ++i)
                dx.v[i] += dy.v[i];
        }
        return dx;
    }
};

// Single-head self-attention over spatial positions, used at coarse levels.
template <typename S> struct Attention {
    GroupNorm<S> gn;
    Conv2d<S> qkv, proj;
    int channels = 0;

    struct Cache {
        typename GroupNorm<S>::Cache gnc;
        typename Conv2d<S>::Cache qkvc, projc;
        MatX<S> q, k, v, attn; // q,k,v: C x N; attn: N x N row-softmax
    };

    void init(ParamStore<S> &store, const std::string &name, int c, int gn_groups, Rng &rng) {
        channels = c;
        gn.init(store, name + ".gn", c, std::min(gn_groups, c));
        qkv.init(store, name + ".qkv", c, 3 * c, 1, 1, false, rng);
        proj.init(store, name + ".proj", c, c, 1, 1, true, rng);
    }

    Tensor<S> forward(const ParamStore<S> &store, const Tensor<S> &x, Cache &cache,
                      Workspace<S> &ws) const {
        const int n = x.plane();
        Tensor<S> h = gn.forward(store, x, cache.gnc);
        Tensor<S> qkv_t = qkv.forward(store, h, cache.qkvc, ws);
        Eigen::Map<const MatXR<S>> qkv_m(qkv_t.data(), 3 * channels, n);
        cache.q = qkv_m.topRows(channels);
        cache.k = qkv_m.middleRows(channels, channels);
        cache.v = qkv_m.bottomRows(channels);

        const S scale = S(1) / std::sqrt(static_cast<S>(channels));
        MatX<S> scores = (cache.q.transpose() * cache.k) * scale; // N x N
        for (int r = 0; r < n; ++r) {
            S mx = scores.row(r).maxCoeff();
            scores.row(r) = (scores.row(r).array() - mx).exp();
            scores.row(r) /= scores.row(r).sum();
        }
        cache.attn = std::move(scores);

        Tensor<S> out(x.c, x.h, x.w);
        Eigen::Map<MatXR<S>> out_m(out.data(), channels, n);
        out_m.noalias() = cache.v * cache.attn.transpose();
        out = proj.forward(store, out, cache.projc, ws);
        for (std::size_t i = 0; i < out.v.size(); ++i)
            out.v[i] += x.v[i];
        return out;
    }

    Tensor<S> backward(const ParamStore<S> &store, const Cache &cache, const Tensor<S> &dy,
                       AVec<S> &grad, Workspace<S> &ws) const {
        const int n = dy.plane();
        Tensor<S> dout = proj.backward(store, cache.projc, dy, grad, ws);
        Eigen::Map<const MatXR<S>> dout_m(dout.data(), channels, n);

        MatX<S> dv = dout_m * cache.attn;                 // C x N
        MatX<S> dattn = dout_m.transpose() * cache.v;     // N x N
        // softmax backward, row-wise
        for (int r = 0; r < n; ++r) {
            S dot = (dattn.row(r).array() * cache.attn.row(r).array()).sum();
            dattn.row(r) = cache.attn.row(r).array() * (dattn.row(r).array() - dot);
        }
        const S scale = S(1) / std::sqrt(static_cast<S>(channels));
        MatX<S> dq = (cache.k * dattn.transpose()) * scale; // C x N
        MatX<S> dk = (cache.q * dattn) * scale;             // C x N

        Tensor<S> dqkv(3 * channels, dy.h, dy.w);
        Eigen::Map<MatXR<S>> dqkv_m(dqkv.data(), 3 * channels, n);
        dqkv_m.topRows(channels) = dq;
        dqkv_m.middleRows(channels, channels) = dk;
        dqkv_m.bottomRows(channels) = dv;

        Tensor<S> dh = qkv.backward(store, cache.qkvc, dqkv, grad, ws);
        Tensor<S> dx = gn.backward(store, cache.gnc, dh, grad);
        for (std::size_t i = 0; i < dx.v.size(); ++i)
            dx.v[i] += dy.v[i];
        return dx;
    }
};

template <typename S> struct Upsample {
    Conv2d<S> conv;

    struct Cache {
        typename Conv2d<S>::Cache convc;
    };

    void init(ParamStore<S> &store, const std::string &name, int cin, int cout, Rng &rng) {
        conv.init(store, name + ".conv", cin, cout, 3, 1, false, rng);
    }

    Tensor<S> forward(const ParamStore<S> &store, const Tensor<S> &x, Cache &cache,
                      Workspace<S> &ws) const {
        Tensor<S> up(x.c, x.h * 2, x.w * 2);
        for (int ci = 0; ci < x.c; ++ci)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    const S v = x.at(ci, y, xx);
                    up.at(ci, 2 * y, 2 * xx) = v;
                    up.at(ci, 2 * y, 2 * xx + 1) = v;
                    up.at(ci, 2 * y + 1, 2 * xx) = v;
                    up.at(ci, 2 * y + 1, 2 * xx + 1) = v;
                }
        return conv.forward(store, up, cache.convc, ws);
    }

    Tensor<S> backward(const ParamStore<S> &store, const Cache &cache, const Tensor<S> &dy,
                       AVec<S> &grad, Workspace<S> &ws) const {
        Tensor<S> dup = conv.backward(store, cache.convc, dy, grad, ws);
        Tensor<S> dx(dup.c, dup.h / 2, dup.w / 2);
        for (int ci = 0; ci < dx.c; ++ci)
            for (int y = 0; y < dx.h; ++y)
                for (int xx = 0; xx < dx.w; ++xx)
                    dx.at(ci, y, xx) = dup.at(ci, 2 * y, 2 * xx) + dup.at(ci, 2 * y, 2 * xx + 1) +
                                       dup.at(ci, 2 * y + 1, 2 * xx) +
                                       dup.at(ci, 2 * y + 1, 2 * xx + 1);
        return dx;
    }
};

struct UNetConfig {
    int in_channels = 2;
    int base_channels = 24;
    std::vector<int> channel_mults = {1, 2, 3};
    int blocks_per_level = 1;
    std::vector<bool> attention = {};  // per level; empty = none
    bool mid_attention = false;
    int temb_dim = 96;
    int gn_groups = 8;
    double time_scale = 1000.0; // maps noise levels to embedding positions

    int levels() const { return static_cast<int>(channel_mults.size()); }
    int width(int level) const { return base_channels * channel_mults[level]; }
    bool attn_at(int level) const {
        return level < static_cast<int>(attention.size()) && attention[level];
    }
};

template <typename S> class UNet {
  public:
    ParamStore<S> store;

    UNet(const UNetConfig &config, std::uint64_t init_seed) : cfg_(config) {
        require(cfg_.levels() >= 1, errc::invalid_argument, "unet: need at least one level");
        require(cfg_.blocks_per_level >= 1, errc::invalid_argument, "unet: blocks_per_level >= 1");
        Rng rng(init_seed);

        t_lin1_.init(store, "temb.lin1", cfg_.temb_dim, cfg_.temb_dim, rng);
        t_lin2_.init(store, "temb.lin2", cfg_.temb_dim, cfg_.temb_dim, rng);
        conv_in_.init(store, "conv_in", cfg_.in_channels, cfg_.width(0), 3, 1, false, rng);

        enc_.resize(cfg_.levels());
        enc_attn_.resize(cfg_.levels());
        downs_.resize(cfg_.levels() - 1);
        int width = cfg_.width(0);
        for (int l = 0; l < cfg_.levels(); ++l) {
            enc_[l].resize(cfg_.blocks_per_level);
            for (int b = 0; b < cfg_.blocks_per_level; ++b) {
                enc_[l][b].init(store, "enc" + std::to_string(l) + ".block" + std::to_string(b),
                                width, cfg_.width(l), cfg_.temb_dim, cfg_.gn_groups, rng);
                width = cfg_.width(l);
            }
            if (cfg_.attn_at(l))
                enc_attn_[l].init(store, "enc" + std::to_string(l) + ".attn", width,
                                  cfg_.gn_groups, rng);
            if (l + 1 < cfg_.levels())
                downs_[l].init(store, "down" + std::to_string(l), width, width, 3, 2, false, rng);
        }

        mid1_.init(store, "mid.block0", width, width, cfg_.temb_dim, cfg_.gn_groups, rng);
        if (cfg_.mid_attention)
            mid_attn_.init(store, "mid.attn", width, cfg_.gn_groups, rng);
        mid2_.init(store, "mid.block1", width, width, cfg_.temb_dim, cfg_.gn_groups, rng);

        dec_.resize(cfg_.levels());
        dec_attn_.resize(cfg_.levels());
        ups_.resize(cfg_.levels() - 1);
        for (int l = cfg_.levels() - 1; l >= 0; --l) {
            dec_[l].resize(cfg_.blocks_per_level);
            for (int b = 0; b < cfg_.blocks_per_level; ++b) {
                const int cin = b == 0 ? 2 * cfg_.width(l) : cfg_.width(l);
                dec_[l][b].init(store, "dec" + std::to_string(l) + ".block" + std::to_string(b),
                                cin, cfg_.width(l), cfg_.temb_dim, cfg_.gn_groups, rng);
            }
            if (cfg_.attn_at(l))
                dec_attn_[l].init(store, "dec" + std::to_string(l) + ".attn", cfg_.width(l),
                                  cfg_.gn_groups, rng);
            if (l > 0)
                ups_[l - 1].init(store, "up" + std::to_string(l - 1), cfg_.width(l),
                                 cfg_.width(l - 1), rng);
        }

        gn_out_.init(store, "out.gn", cfg_.width(0), std::min(cfg_.gn_groups, cfg_.width(0)));
        conv_out_.init(store, "out.conv", cfg_.width(0), cfg_.in_channels, 3, 1, true, rng);
    }

    const UNetConfig &config() const { return cfg_; }

    struct Cache {
        AVec<S> sinus, temb_pre, temb_act;
        typename Linear<S>::Cache t1c, t2c;
        typename SiLU<S>::Cache ts;
        typename Conv2d<S>::Cache cinc;
        std::vector<std::vector<typename ResBlock<S>::Cache>> enc;
        std::vector<typename Attention<S>::Cache> enc_attn;
        std::vector<typename Conv2d<S>::Cache> downs;
        typename ResBlock<S>::Cache mid1, mid2;
        typename Attention<S>::Cache mid_attn;
        std::vector<std::vector<typename ResBlock<S>::Cache>> dec;
        std::vector<typename Attention<S>::Cache> dec_attn;
        std::vector<typename Upsample<S>::Cache> ups;
        std::vector<Tensor<S>> skips;
        typename GroupNorm<S>::Cache gnoc;
        typename SiLU<S>::Cache soc;
        typename Conv2d<S>::Cache coutc;
    };

    Tensor<S> forward(const Tensor<S> &x, double t, Cache &cache, Workspace<S> &ws) const {
        require(x.c == cfg_.in_channels, errc::shape_mismatch, "unet: input channels");
        const int div = 1 << (cfg_.levels() - 1);
        require(x.h % div == 0 && x.w % div == 0, errc::shape_mismatch,
                "unet: H and W must be divisible by " + std::to_string(div));

        cache.enc.assign(cfg_.levels(), std::vector<typename ResBlock<S>::Cache>(
                                            static_cast<std::size_t>(cfg_.blocks_per_level)));
        cache.enc_attn.resize(cfg_.levels());
        cache.downs.resize(cfg_.levels() - 1);
        cache.dec.assign(cfg_.levels(), std::vector<typename ResBlock<S>::Cache>(
                                            static_cast<std::size_t>(cfg_.blocks_per_level)));
        cache.dec_attn.resize(cfg_.levels());
        cache.ups.resize(cfg_.levels() - 1);
        cache.skips.clear();
        cache.skips.resize(cfg_.levels());

        cache.sinus = sinusoidal_embedding(t);
        AVec<S> temb = t_lin1_.forward(store, cache.sinus, cache.t1c);
        {
            Tensor<S> tmp(1, 1, static_cast<int>(temb.size()));
            tmp.v = temb;
            tmp = SiLU<S>::forward(tmp, cache.ts);
            temb = tmp.v;
        }
        temb = t_lin2_.forward(store, temb, cache.t2c);
        cache.temb_pre = temb;
        cache.temb_act = temb;
        for (auto &e : cache.temb_act)
            e = silu_scalar(e);

        Tensor<S> h = conv_in_.forward(store, x, cache.cinc, ws);
        for (int l = 0; l < cfg_.levels(); ++l) {
            for (int b = 0; b < cfg_.blocks_per_level; ++b)
                h = enc_[l][b].forward(store, h, cache.temb_act, cache.enc[l][b], ws);
            if (cfg_.attn_at(l))
                h = enc_attn_[l].forward(store, h, cache.enc_attn[l], ws);
            cache.skips[l] = h;
            if (l + 1 < cfg_.levels())
                h = downs_[l].forward(store, h, cache.downs[l], ws);
        }

        h = mid1_.forward(store, h, cache.temb_act, cache.mid1, ws);
        if (cfg_.mid_attention)
            h = mid_attn_.forward(store, h, cache.mid_attn, ws);
        h = mid2_.forward(store, h, cache.temb_act, cache.mid2, ws);

        for (int l = cfg_.levels() - 1; l >= 0; --l) {
            h = concat_channels(cache.skips[l], h);
            for (int b = 0; b < cfg_.blocks_per_level; ++b)
                h = dec_[l][b].forward(store, h, cache.temb_act, cache.dec[l][b], ws);
            if (cfg_.attn_at(l))
                h = dec_attn_[l].forward(store, h, cache.dec_attn[l], ws);
            if (l > 0)
                h = ups_[l - 1].forward(store, h, cache.ups[l - 1], ws);
        }

        h = gn_out_.forward(store, h, cache.gnoc);
        h = SiLU<S>::forward(h, cache.soc);
        return conv_out_.forward(store, h, cache.coutc, ws);
    }

    void backward(const Tensor<S> &dy, const Cache &cache, AVec<S> &grad,
                  Workspace<S> &ws) const {
        AVec<S> d_temb_act(cfg_.temb_dim, S(0));

        Tensor<S> dh = conv_out_.backward(store, cache.coutc, dy, grad, ws);
        dh = SiLU<S>::backward(cache.soc, dh);
        dh = gn_out_.backward(store, cache.gnoc, dh, grad);

        std::vector<Tensor<S>> dskips(cfg_.levels());
        for (int l = 0; l <= cfg_.levels() - 1; ++l) {
            if (l > 0)
                dh = ups_[l - 1].backward(store, cache.ups[l - 1], dh, grad, ws);
            // note: decoder levels were executed from high l to low l, so
            // the reverse pass walks l from 0 upward re-entering each level
            if (cfg_.attn_at(l))
                dh = dec_attn_[l].backward(store, cache.dec_attn[l], dh, grad, ws);
            for (int b = cfg_.blocks_per_level - 1; b >= 0; --b)
                dh = dec_[l][b].backward(store, cache.dec[l][b], dh, grad, d_temb_act, ws);
            auto [dskip, dbody] = split_channels(dh, cache.skips[l].c);
            dskips[l] = std::move(dskip);
            dh = std::move(dbody);
        }

        dh = mid2_.backward(store, cache.mid2, dh, grad, d_temb_act, ws);
        if (cfg_.mid_attention)
            dh = mid_attn_.backward(store, cache.mid_attn, dh, grad, ws);
        dh = mid1_.backward(store, cache.mid1, dh, grad, d_temb_act, ws);

        for (int l = cfg_.levels() - 1; l >= 0; --l) {
            if (l + 1 < cfg_.levels())
                dh = downs_[l].backward(store, cache.downs[l], dh, grad, ws);
            for (std::size_t i = 0; i < dh.v.size(); ++i)
                dh.v[i] += dskips[l].v[i];
            if (cfg_.attn_at(l))
                dh = enc_attn_[l].backward(store, cache.enc_attn[l], dh, grad, ws);
            for (int b = cfg_.blocks_per_level - 1; b >= 0; --b)
                dh = enc_[l][b].backward(store, cache.enc[l][b], dh, grad, d_temb_act, ws);
        }
        conv_in_.backward(store, cache.cinc, dh, grad, ws);

        // time-embedding MLP
        AVec<S> dt2(cfg_.temb_dim);
        for (int i = 0; i < cfg_.temb_dim; ++i) {
            S xp = cache.temb_pre[i];
            S sig = S(1) / (S(1) + std::exp(-xp));
            dt2[i] = d_temb_act[i] * sig * (S(1) + xp * (S(1) - sig));
        }
        AVec<S> dt1 = t_lin2_.backward(store, cache.t2c, dt2, grad);
        {
            Tensor<S> tmp(1, 1, static_cast<int>(dt1.size()));
            tmp.v = dt1;
            tmp = SiLU<S>::backward(cache.ts, tmp);
            dt1 = tmp.v;
        }
        t_lin1_.backward(store, cache.t1c, dt1, grad);
    }

    AVec<S> sinusoidal_embedding(double t) const {
        const int half = cfg_.temb_dim / 2;
        AVec<S> emb(cfg_.temb_dim);
        const double s = t * cfg_.time_scale;
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            emb[i] = static_cast<S>(std::sin(s * freq));
            emb[half + i] = static_cast<S>(std::cos(s * freq));
        }
        return emb;
    }

  private:
    static Tensor<S> concat_channels(const Tensor<S> &a, const Tensor<S> &b) {
        require(a.h == b.h && a.w == b.w, errc::shape_mismatch, "concat: spatial mismatch");
        Tensor<S> out(a.c + b.c, a.h, a.w);
        std::copy(a.v.begin(), a.v.end(), out.v.begin());
        std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
        return out;
    }

    static std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S> &x, int c_first) {
        Tensor<S> a(c_first, x.h, x.w);
        Tensor<S> b(x.c - c_first, x.h, x.w);
        std::copy(x.v.begin(), x.v.begin() + a.v.size(), a.v.begin());
        std::copy(x.v.begin() + a.v.size(), x.v.end(), b.v.begin());
        return {std::move(a), std::move(b)};
    }

    UNetConfig cfg_;
    Linear<S> t_lin1_, t_lin2_;
    Conv2d<S> conv_in_;
    std::vector<std::vector<ResBlock<S>>> enc_;
    std::vector<Attention<S>> enc_attn_;
    std::vector<Conv2d<S>> downs_;
    ResBlock<S> mid1_, mid2_;
    Attention<S> mid_attn_;
    std::vector<std::vector<ResBlock<S>>> dec_;
    std::vector<Attention<S>> dec_attn_;
    std::vector<Upsample<S>> ups_;
    GroupNorm<S> gn_out_;
    Conv2d<S> conv_out_;
};

} // namespace pnpcm::nn

#endif
