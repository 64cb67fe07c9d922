#pragma once

// Structured ops on rank-2/3 tensors: dense 2-D convolution, batch
// normalization, 2x max-pool / nearest upsample, bilinear point sampling and
// circular 1-D convolution along a closed contour.

#include "csnake/tensor.hpp"

namespace csnake {

// ---------------------------------------------------------------------------
// conv2d: x [Ci,H,W] * w [Co,Ci,kh,kw] (+ b [Co]) -> [Co,Ho,Wo]

template <class T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b, int stride, int pad) {
    if (x->shape.size() != 3 || w->shape.size() != 4)
        throw ContractViolation("conv2d: expected x rank 3 and w rank 4");
    int ci = x->shape[0], h = x->shape[1], wd = x->shape[2];
    int co = w->shape[0], kh = w->shape[2], kw = w->shape[3];
    if (w->shape[1] != ci)
        throw ContractViolation("conv2d: input channels " + std::to_string(ci) + " vs kernel " +
                                std::to_string(w->shape[1]));
    if (b && (b->shape.size() != 1 || b->shape[0] != co)) throw ContractViolation("conv2d: bad bias shape");
    if (stride < 1 || pad < 0) throw ContractViolation("conv2d: bad stride/pad");
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw ContractViolation("conv2d: kernel larger than padded input");

    std::vector<T> v(static_cast<std::size_t>(co) * ho * wo, T(0));
    const T* xd = x->data.data();
    const T* wdp = w->data.data();
    for (int oc = 0; oc < co; ++oc) {
        T* oplane = v.data() + static_cast<std::size_t>(oc) * ho * wo;
        if (b) {
            T bv = b->data[oc];
            for (int i = 0; i < ho * wo; ++i) oplane[i] = bv;
        }
        for (int ic = 0; ic < ci; ++ic) {
            const T* xplane = xd + static_cast<std::size_t>(ic) * h * wd;
            const T* wrow = wdp + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    T wv = wrow[ky * kw + kx];
                    if (wv == T(0)) continue;
                    int d = kx - pad;
                    int ox_lo = d < 0 ? (-d + stride - 1) / stride : 0;
                    int ox_hi = std::min(wo - 1, (wd - 1 - d) / stride);
                    for (int oy = 0; oy < ho; ++oy) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const T* xr = xplane + static_cast<std::size_t>(iy) * wd + d;
                        T* orow = oplane + static_cast<std::size_t>(oy) * wo;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * xr[ox];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * xr[ox * stride];
                        }
                    }
                }
            }
        }
    }
    std::vector<TensorPtr<T>> parents = b ? std::vector<TensorPtr<T>>{x, w, b} : std::vector<TensorPtr<T>>{x, w};
    auto out = detail::make_node(Shape{co, ho, wo}, std::move(v), std::move(parents));
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *px = x.get(), *pw = w.get();
        Tensor<T>* pb = b ? b.get() : nullptr;
        out->backward_fn = [o, px, pw, pb, ci, h, wd, co, kh, kw, ho, wo, stride, pad] {
            const T* gy = o->grad.data();
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                for (int oc = 0; oc < co; ++oc) {
                    const T* gplane = gy + static_cast<std::size_t>(oc) * ho * wo;
                    T acc = T(0);
                    for (int i = 0; i < ho * wo; ++i) acc += gplane[i];
                    pb->grad[oc] += acc;
                }
            }
            bool need_x = px->requires_grad, need_w = pw->requires_grad;
            if (!need_x && !need_w) return;
            if (need_x) px->ensure_grad();
            if (need_w) pw->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                const T* gplane = gy + static_cast<std::size_t>(oc) * ho * wo;
                for (int ic = 0; ic < ci; ++ic) {
                    const T* xplane = px->data.data() + static_cast<std::size_t>(ic) * h * wd;
                    T* gxplane = need_x ? px->grad.data() + static_cast<std::size_t>(ic) * h * wd : nullptr;
                    std::size_t wbase = (static_cast<std::size_t>(oc) * ci + ic) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            T wv = pw->data[wbase + ky * kw + kx];
                            T dw = T(0);
                            int d = kx - pad;
                            int ox_lo = d < 0 ? (-d + stride - 1) / stride : 0;
                            int ox_hi = std::min(wo - 1, (wd - 1 - d) / stride);
                            for (int oy = 0; oy < ho; ++oy) {
                                int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                const T* xr = xplane + static_cast<std::size_t>(iy) * wd + d;
                                const T* grow = gplane + static_cast<std::size_t>(oy) * wo;
                                T* gxr = need_x ? gxplane + static_cast<std::size_t>(iy) * wd + d : nullptr;
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    T g = grow[ox];
                                    if (need_w) dw += g * xr[ox * stride];
                                    if (need_x) gxr[ox * stride] += wv * g;
                                }
                            }
                            if (need_w) pw->grad[wbase + ky * kw + kx] += dw;
                        }
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch normalization over all-but-first axis (works for [C,H,W] and [C,N])

template <class T>
struct BnStats {
    // tensors (not graph nodes) so checkpoints can share their storage
    TensorPtr<T> running_mean;
    TensorPtr<T> running_var;  // biased, matching the training statistics
    T momentum = T(0.1);
    T eps = T(1e-5);

    explicit BnStats(int channels = 0)
        : running_mean(Tensor<T>::zeros({channels})), running_var(Tensor<T>::full({channels}, T(1))) {}
};

template <class T>
TensorPtr<T> batchnorm(const TensorPtr<T>& x, const TensorPtr<T>& gamma, const TensorPtr<T>& beta,
                       BnStats<T>& stats, bool training, bool update_running = true) {
    if (x->shape.size() < 2) throw ContractViolation("batchnorm: expected rank >= 2 input");
    int c = x->shape[0];
    std::size_t m = x->size() / static_cast<std::size_t>(c);
    if (m == 0) throw ContractViolation("batchnorm: empty spatial extent");
    if (gamma->size() != static_cast<std::size_t>(c) || beta->size() != static_cast<std::size_t>(c) ||
        stats.running_mean->size() != static_cast<std::size_t>(c))
        throw ContractViolation("batchnorm: channel mismatch");

    std::vector<T> mu(c), istd(c);
    if (training) {
        for (int i = 0; i < c; ++i) {
            const T* row = x->data.data() + static_cast<std::size_t>(i) * m;
            T s = T(0);
            for (std::size_t j = 0; j < m; ++j) s += row[j];
            T mean_i = s / static_cast<T>(m);
            T vs = T(0);
            for (std::size_t j = 0; j < m; ++j) {
                T d = row[j] - mean_i;
                vs += d * d;
            }
            T var_i = vs / static_cast<T>(m);
            mu[i] = mean_i;
            istd[i] = T(1) / std::sqrt(var_i + stats.eps);
            if (update_running) {
                stats.running_mean->data[i] =
                    (T(1) - stats.momentum) * stats.running_mean->data[i] + stats.momentum * mean_i;
                stats.running_var->data[i] =
                    (T(1) - stats.momentum) * stats.running_var->data[i] + stats.momentum * var_i;
            }
        }
    } else {
        for (int i = 0; i < c; ++i) {
            mu[i] = stats.running_mean->data[i];
            istd[i] = T(1) / std::sqrt(stats.running_var->data[i] + stats.eps);
        }
    }

    std::vector<T> xhat(x->size()), v(x->size());
    for (int i = 0; i < c; ++i) {
        const T* row = x->data.data() + static_cast<std::size_t>(i) * m;
        T* hr = xhat.data() + static_cast<std::size_t>(i) * m;
        T* vr = v.data() + static_cast<std::size_t>(i) * m;
        T g = gamma->data[i], bb = beta->data[i], mm = mu[i], is = istd[i];
        for (std::size_t j = 0; j < m; ++j) {
            hr[j] = (row[j] - mm) * is;
            vr[j] = g * hr[j] + bb;
        }
    }
    auto out = detail::make_node(x->shape, std::move(v), {x, gamma, beta});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *px = x.get(), *pg = gamma.get(), *pbeta = beta.get();
        out->backward_fn = [o, px, pg, pbeta, c, m, training, xhat = std::move(xhat), istd = std::move(istd)] {
            const T* gy = o->grad.data();
            if (pg->requires_grad) pg->ensure_grad();
            if (pbeta->requires_grad) pbeta->ensure_grad();
            if (px->requires_grad) px->ensure_grad();
            for (int i = 0; i < c; ++i) {
                const T* gr = gy + static_cast<std::size_t>(i) * m;
                const T* hr = xhat.data() + static_cast<std::size_t>(i) * m;
                T sum_g = T(0), sum_gh = T(0);
                for (std::size_t j = 0; j < m; ++j) {
                    sum_g += gr[j];
                    sum_gh += gr[j] * hr[j];
                }
                if (pg->requires_grad) pg->grad[i] += sum_gh;
                if (pbeta->requires_grad) pbeta->grad[i] += sum_g;
                if (px->requires_grad) {
                    T* gx = px->grad.data() + static_cast<std::size_t>(i) * m;
                    T k = pg->data[i] * istd[i];
                    if (training) {
                        T inv_m = T(1) / static_cast<T>(m);
                        for (std::size_t j = 0; j < m; ++j)
                            gx[j] += k * (gr[j] - inv_m * sum_g - hr[j] * inv_m * sum_gh);
                    } else {
                        for (std::size_t j = 0; j < m; ++j) gx[j] += k * gr[j];
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// 2x max-pool and nearest upsample on [C,H,W]

template <class T>
TensorPtr<T> maxpool2x(const TensorPtr<T>& x) {
    if (x->shape.size() != 3) throw ContractViolation("maxpool2x: expected rank-3 input");
    int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    if (h % 2 || w % 2) throw ContractViolation("maxpool2x: extents must be even");
    int ho = h / 2, wo = w / 2;
    std::vector<T> v(static_cast<std::size_t>(c) * ho * wo);
    std::vector<std::uint32_t> arg(v.size());
    for (int ic = 0; ic < c; ++ic) {
        const T* xp = x->data.data() + static_cast<std::size_t>(ic) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                std::size_t base = static_cast<std::size_t>(2 * oy) * w + 2 * ox;
                std::size_t best = base;
                T bv = xp[base];
                for (std::size_t cand : {base + 1, base + w, base + w + 1}) {
                    if (xp[cand] > bv) {
                        bv = xp[cand];
                        best = cand;
                    }
                }
                std::size_t oi = (static_cast<std::size_t>(ic) * ho + oy) * wo + ox;
                v[oi] = bv;
                arg[oi] = static_cast<std::uint32_t>(best + static_cast<std::size_t>(ic) * h * w);
            }
        }
    }
    auto out = detail::make_node(Shape{c, ho, wo}, std::move(v), {x});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *px = x.get();
        out->backward_fn = [o, px, arg = std::move(arg)] {
            px->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) px->grad[arg[i]] += o->grad[i];
        };
    }
    return out;
}

template <class T>
TensorPtr<T> upsample2x(const TensorPtr<T>& x) {
    if (x->shape.size() != 3) throw ContractViolation("upsample2x: expected rank-3 input");
    int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    std::vector<T> v(static_cast<std::size_t>(c) * 4 * h * w);
    for (int ic = 0; ic < c; ++ic) {
        const T* xp = x->data.data() + static_cast<std::size_t>(ic) * h * w;
        T* op = v.data() + static_cast<std::size_t>(ic) * 4 * h * w;
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                T val = xp[static_cast<std::size_t>(y) * w + xx];
                std::size_t o0 = static_cast<std::size_t>(2 * y) * (2 * w) + 2 * xx;
                op[o0] = val;
                op[o0 + 1] = val;
                op[o0 + 2 * w] = val;
                op[o0 + 2 * w + 1] = val;
            }
        }
    }
    auto out = detail::make_node(Shape{c, 2 * h, 2 * w}, std::move(v), {x});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *px = x.get();
        out->backward_fn = [o, px, c, h, w] {
            px->ensure_grad();
            for (int ic = 0; ic < c; ++ic) {
                const T* gp = o->grad.data() + static_cast<std::size_t>(ic) * 4 * h * w;
                T* gx = px->grad.data() + static_cast<std::size_t>(ic) * h * w;
                for (int y = 0; y < h; ++y) {
                    for (int xx = 0; xx < w; ++xx) {
                        std::size_t o0 = static_cast<std::size_t>(2 * y) * (2 * w) + 2 * xx;
                        gx[static_cast<std::size_t>(y) * w + xx] +=
                            gp[o0] + gp[o0 + 1] + gp[o0 + 2 * w] + gp[o0 + 2 * w + 1];
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// bilinear sampling of a feature map at real-valued points
//
// Points are in feature-map pixel coordinates; coordinates outside
// [0, dim-1] clamp to the border. Differentiable w.r.t. the map; the points
// are treated as constants. An empty point list yields a [D,0] tensor.

template <class T>
TensorPtr<T> bilinear_sample(const TensorPtr<T>& map, const std::vector<Vec2>& points) {
    if (map->shape.size() != 3) throw ContractViolation("bilinear_sample: expected rank-3 map");
    int d = map->shape[0], h = map->shape[1], w = map->shape[2];
    int p = static_cast<int>(points.size());
    struct Tap {
        std::size_t i00, i01, i10, i11;
        T w00, w01, w10, w11;
    };
    std::vector<Tap> taps(p);
    for (int i = 0; i < p; ++i) {
        double xf = std::min(static_cast<double>(w - 1), std::max(0.0, points[i].x));
        double yf = std::min(static_cast<double>(h - 1), std::max(0.0, points[i].y));
        int x0 = std::min(w - 1, static_cast<int>(std::floor(xf)));
        int y0 = std::min(h - 1, static_cast<int>(std::floor(yf)));
        int x1 = std::min(w - 1, x0 + 1);
        int y1 = std::min(h - 1, y0 + 1);
        T fx = static_cast<T>(xf - x0), fy = static_cast<T>(yf - y0);
        taps[i] = {static_cast<std::size_t>(y0) * w + x0, static_cast<std::size_t>(y0) * w + x1,
                   static_cast<std::size_t>(y1) * w + x0, static_cast<std::size_t>(y1) * w + x1,
                   (T(1) - fx) * (T(1) - fy), fx * (T(1) - fy), (T(1) - fx) * fy, fx * fy};
    }
    std::vector<T> v(static_cast<std::size_t>(d) * p);
    for (int ic = 0; ic < d; ++ic) {
        const T* plane = map->data.data() + static_cast<std::size_t>(ic) * h * w;
        T* orow = v.data() + static_cast<std::size_t>(ic) * p;
        for (int i = 0; i < p; ++i) {
            const Tap& t = taps[i];
            orow[i] = t.w00 * plane[t.i00] + t.w01 * plane[t.i01] + t.w10 * plane[t.i10] + t.w11 * plane[t.i11];
        }
    }
    auto out = detail::make_node(Shape{d, p}, std::move(v), {map});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pm = map.get();
        std::size_t plane_n = static_cast<std::size_t>(h) * w;
        out->backward_fn = [o, pm, taps = std::move(taps), d, p, plane_n] {
            pm->ensure_grad();
            for (int ic = 0; ic < d; ++ic) {
                T* gplane = pm->grad.data() + static_cast<std::size_t>(ic) * plane_n;
                const T* grow = o->grad.data() + static_cast<std::size_t>(ic) * p;
                for (int i = 0; i < p; ++i) {
                    const Tap& t = taps[i];
                    T g = grow[i];
                    gplane[t.i00] += t.w00 * g;
                    gplane[t.i01] += t.w01 * g;
                    gplane[t.i10] += t.w10 * g;
                    gplane[t.i11] += t.w11 * g;
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// circular 1-D convolution along a closed contour
//
// f [Ci,N] * k [Co,Ci,2r+1] (+ b [Co]) -> [Co,N], indices wrapping mod N:
// out[co,i] = b[co] + sum_ci sum_{j=-r..r} f[ci,(i+j) mod N] * k[co,ci,j+r]

template <class T>
TensorPtr<T> circular_conv(const TensorPtr<T>& f, const TensorPtr<T>& k, const TensorPtr<T>& b = nullptr) {
    if (f->shape.size() != 2 || k->shape.size() != 3)
        throw ContractViolation("circular_conv: expected f rank 2 and k rank 3");
    int ci = f->shape[0], n = f->shape[1];
    int co = k->shape[0], ksz = k->shape[2];
    if (k->shape[1] != ci) throw ContractViolation("circular_conv: channel mismatch");
    if (ksz % 2 == 0) throw ContractViolation("circular_conv: kernel size must be odd");
    int r = ksz / 2;
    if (n <= 2 * r)
        throw ContractViolation("circular_conv: vertex count " + std::to_string(n) +
                                " must exceed kernel halfwidth span " + std::to_string(2 * r));
    if (b && (b->shape.size() != 1 || b->shape[0] != co)) throw ContractViolation("circular_conv: bad bias shape");

    std::vector<T> v(static_cast<std::size_t>(co) * n, T(0));
    for (int oc = 0; oc < co; ++oc) {
        T* orow = v.data() + static_cast<std::size_t>(oc) * n;
        if (b) {
            T bv = b->data[oc];
            for (int i = 0; i < n; ++i) orow[i] = bv;
        }
        for (int ic = 0; ic < ci; ++ic) {
            const T* frow = f->data.data() + static_cast<std::size_t>(ic) * n;
            const T* krow = k->data.data() + (static_cast<std::size_t>(oc) * ci + ic) * ksz;
            for (int j = 0; j < ksz; ++j) {
                T kv = krow[j];
                int d = j - r;
                int lo = std::max(0, -d), hi = std::min(n, n - d);
                for (int i = lo; i < hi; ++i) orow[i] += kv * frow[i + d];
                for (int i = 0; i < lo; ++i) orow[i] += kv * frow[i + d + n];
                for (int i = hi; i < n; ++i) orow[i] += kv * frow[i + d - n];
            }
        }
    }
    std::vector<TensorPtr<T>> parents = b ? std::vector<TensorPtr<T>>{f, k, b} : std::vector<TensorPtr<T>>{f, k};
    auto out = detail::make_node(Shape{co, n}, std::move(v), std::move(parents));
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pf = f.get(), *pk = k.get();
        Tensor<T>* pb = b ? b.get() : nullptr;
        out->backward_fn = [o, pf, pk, pb, ci, co, n, ksz, r] {
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                for (int oc = 0; oc < co; ++oc) {
                    const T* grow = o->grad.data() + static_cast<std::size_t>(oc) * n;
                    T acc = T(0);
                    for (int i = 0; i < n; ++i) acc += grow[i];
                    pb->grad[oc] += acc;
                }
            }
            bool need_f = pf->requires_grad, need_k = pk->requires_grad;
            if (!need_f && !need_k) return;
            if (need_f) pf->ensure_grad();
            if (need_k) pk->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                const T* grow = o->grad.data() + static_cast<std::size_t>(oc) * n;
                for (int ic = 0; ic < ci; ++ic) {
                    const T* frow = pf->data.data() + static_cast<std::size_t>(ic) * n;
                    T* gfrow = need_f ? pf->grad.data() + static_cast<std::size_t>(ic) * n : nullptr;
                    std::size_t kbase = (static_cast<std::size_t>(oc) * ci + ic) * ksz;
                    for (int j = 0; j < ksz; ++j) {
                        T kv = pk->data[kbase + j];
                        T dk = T(0);
                        int d = j - r;
                        int lo = std::max(0, -d), hi = std::min(n, n - d);
                        for (int i = lo; i < hi; ++i) {
                            if (need_k) dk += frow[i + d] * grow[i];
                            if (need_f) gfrow[i + d] += kv * grow[i];
                        }
                        for (int i = 0; i < lo; ++i) {
                            if (need_k) dk += frow[i + d + n] * grow[i];
                            if (need_f) gfrow[i + d + n] += kv * grow[i];
                        }
                        for (int i = hi; i < n; ++i) {
                            if (need_k) dk += frow[i + d - n] * grow[i];
                            if (need_f) gfrow[i + d - n] += kv * grow[i];
                        }
                        if (need_k) pk->grad[kbase + j] += dk;
                    }
                }
            }
        };
    }
    return out;
}

}  // namespace csnake
