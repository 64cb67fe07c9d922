#pragma once

// Thin layer wrappers: parameter ownership, seeded initialization and a
// registry that maps every tensor to a stable checkpoint name.

#include "csnake/nn_ops.hpp"

namespace csnake {

template <class T>
struct ParamRegistry {
    std::vector<std::pair<std::string, TensorPtr<T>>> params;   // trainable
    std::vector<std::pair<std::string, TensorPtr<T>>> buffers;  // running stats

    void add_param(const std::string& name, const TensorPtr<T>& t) { params.emplace_back(name, t); }
    void add_buffer(const std::string& name, const TensorPtr<T>& t) { buffers.emplace_back(name, t); }

    TensorPtr<T> find(const std::string& name) const {
        for (const auto& [n, t] : params)
            if (n == name) return t;
        for (const auto& [n, t] : buffers)
            if (n == name) return t;
        return nullptr;
    }
};

namespace detail {

template <class T>
void fill_normal(const TensorPtr<T>& t, Rng& rng, double stddev) {
    for (auto& v : t->data) v = static_cast<T>(rng.normal(0.0, stddev));
}

}  // namespace detail

template <class T>
struct Conv2dLayer {
    TensorPtr<T> w, b;
    int stride = 1, pad = 1;

    void init(Rng& rng, int in_ch, int out_ch, int k, int stride_, int pad_) {
        stride = stride_;
        pad = pad_;
        w = Tensor<T>::zeros({out_ch, in_ch, k, k}, true);
        b = Tensor<T>::zeros({out_ch}, true);
        detail::fill_normal(w, rng, std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k)));
    }

    TensorPtr<T> forward(const TensorPtr<T>& x) const { return conv2d(x, w, b, stride, pad); }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix) const {
        reg.add_param(prefix + ".w", w);
        reg.add_param(prefix + ".b", b);
    }
};

template <class T>
struct BatchNormLayer {
    TensorPtr<T> gamma, beta;
    BnStats<T> stats;

    void init(int channels) {
        gamma = Tensor<T>::full({channels}, T(1), true);
        beta = Tensor<T>::zeros({channels}, true);
        stats = BnStats<T>(channels);
    }

    TensorPtr<T> forward(const TensorPtr<T>& x, bool training) {
        return batchnorm(x, gamma, beta, stats, training);
    }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix) const {
        reg.add_param(prefix + ".gamma", gamma);
        reg.add_param(prefix + ".beta", beta);
        reg.add_buffer(prefix + ".running_mean", stats.running_mean);
        reg.add_buffer(prefix + ".running_var", stats.running_var);
    }
};

template <class T>
struct ConvBnRelu {
    Conv2dLayer<T> conv;
    BatchNormLayer<T> bn;

    void init(Rng& rng, int in_ch, int out_ch, int k, int stride, int pad) {
        conv.init(rng, in_ch, out_ch, k, stride, pad);
        bn.init(out_ch);
    }

    TensorPtr<T> forward(const TensorPtr<T>& x, bool training) {
        return relu(bn.forward(conv.forward(x), training));
    }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix) const {
        conv.register_into(reg, prefix + ".conv");
        bn.register_into(reg, prefix + ".bn");
    }
};

// 1-D convolution layer along a closed contour; kernel size 1 makes it a
// per-vertex linear map.
template <class T>
struct CirConvLayer {
    TensorPtr<T> w, b;  // [out, in, k]

    void init(Rng& rng, int in_ch, int out_ch, int k, bool zero_init = false) {
        w = Tensor<T>::zeros({out_ch, in_ch, k}, true);
        b = Tensor<T>::zeros({out_ch}, true);
        if (!zero_init) detail::fill_normal(w, rng, std::sqrt(2.0 / (static_cast<double>(in_ch) * k)));
    }

    TensorPtr<T> forward(const TensorPtr<T>& f) const { return circular_conv(f, w, b); }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix) const {
        reg.add_param(prefix + ".w", w);
        reg.add_param(prefix + ".b", b);
    }
};

}  // namespace csnake
