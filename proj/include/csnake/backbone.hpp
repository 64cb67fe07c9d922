#pragma once

// Small hourglass-style image backbone with stride-4 output: a stride-2
// stem, three pool+conv down blocks, a middle block, and two upsample blocks
// with concatenated skip connections. Widths come from the run config.

#include "csnake/layers.hpp"

namespace csnake {

template <class T>
class Backbone {
public:
    // widths[0] = stem, widths[1..3] = down blocks; the final feature width
    // equals widths[1] at stride 4
    std::vector<int> widths{16, 32, 64, 128};
    bool training = true;

    ConvBnRelu<T> stem;          // 3 -> w0, stride 2
    ConvBnRelu<T> down1, down2, down3;
    ConvBnRelu<T> mid;
    ConvBnRelu<T> up1_reduce;    // 1x1 after upsample+skip concat
    ConvBnRelu<T> up2_reduce;
    ConvBnRelu<T> up2_conv;      // 3x3 at the output resolution

    int out_channels() const { return widths[1]; }

    // input extents must be divisible by this for the skip concats to align
    static constexpr int kSizeMultiple = 32;

    void init(Rng& rng, const std::vector<int>& w) {
        if (w.size() != 4) throw ContractViolation("backbone: need 4 widths");
        widths = w;
        stem.init(rng, 3, w[0], 3, 2, 1);
        down1.init(rng, w[0], w[1], 3, 1, 1);
        down2.init(rng, w[1], w[2], 3, 1, 1);
        down3.init(rng, w[2], w[3], 3, 1, 1);
        mid.init(rng, w[3], w[3], 3, 1, 1);
        up1_reduce.init(rng, w[3] + w[2], w[2], 1, 1, 0);
        up2_reduce.init(rng, w[2] + w[1], w[1], 1, 1, 0);
        up2_conv.init(rng, w[1], w[1], 3, 1, 1);
    }

    // [3,H,W] -> [w1, H/4, W/4]; H and W must be multiples of kSizeMultiple
    TensorPtr<T> forward(const TensorPtr<T>& img) {
        if (img->shape.size() != 3 || img->shape[0] != 3)
            throw ContractViolation("backbone: expected a [3,H,W] image tensor");
        if (img->shape[1] % kSizeMultiple || img->shape[2] % kSizeMultiple)
            throw ContractViolation("backbone: extents must be multiples of " + std::to_string(kSizeMultiple));
        auto s = stem.forward(img, training);                      // w0 @ H/2
        auto d1 = down1.forward(maxpool2x(s), training);           // w1 @ H/4
        auto d2 = down2.forward(maxpool2x(d1), training);          // w2 @ H/8
        auto d3 = down3.forward(maxpool2x(d2), training);          // w3 @ H/16
        auto m = mid.forward(d3, training);                        // w3 @ H/16
        auto u1 = up1_reduce.forward(concat0<T>({upsample2x(m), d2}), training);   // w2 @ H/8
        auto u2 = up2_reduce.forward(concat0<T>({upsample2x(u1), d1}), training);  // w1 @ H/4
        return up2_conv.forward(u2, training);
    }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix = "backbone") const {
        stem.register_into(reg, prefix + ".stem");
        down1.register_into(reg, prefix + ".down1");
        down2.register_into(reg, prefix + ".down2");
        down3.register_into(reg, prefix + ".down3");
        mid.register_into(reg, prefix + ".mid");
        up1_reduce.register_into(reg, prefix + ".up1_reduce");
        up2_reduce.register_into(reg, prefix + ".up2_reduce");
        up2_conv.register_into(reg, prefix + ".up2_conv");
    }
};

// Detection heads on the shared backbone feature: per head a 1x1 conv with
// ReLU then a 1x1 projection to the output width. The heatmap head's final
// bias starts at -2.19 so the initial sigmoid sits near 0.1.
template <class T>
class DetectionHeads {
public:
    Conv2dLayer<T> hm1, hm2;
    Conv2dLayer<T> radius1, radius2;
    Conv2dLayer<T> offset1, offset2;

    void init(Rng& rng, int in_ch, int head_conv, int class_count) {
        hm1.init(rng, in_ch, head_conv, 1, 1, 0);
        hm2.init(rng, head_conv, class_count, 1, 1, 0);
        for (auto& v : hm2.b->data) v = T(-2.19);
        radius1.init(rng, in_ch, head_conv, 1, 1, 0);
        radius2.init(rng, head_conv, 1, 1, 1, 0);
        offset1.init(rng, in_ch, head_conv, 1, 1, 0);
        offset2.init(rng, head_conv, 2, 1, 1, 0);
    }

    TensorPtr<T> heatmap_logits(const TensorPtr<T>& f) const { return hm2.forward(relu(hm1.forward(f))); }
    TensorPtr<T> radius(const TensorPtr<T>& f) const { return radius2.forward(relu(radius1.forward(f))); }
    TensorPtr<T> offset(const TensorPtr<T>& f) const { return offset2.forward(relu(offset1.forward(f))); }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix = "head") const {
        hm1.register_into(reg, prefix + ".hm1");
        hm2.register_into(reg, prefix + ".hm2");
        radius1.register_into(reg, prefix + ".radius1");
        radius2.register_into(reg, prefix + ".radius2");
        offset1.register_into(reg, prefix + ".offset1");
        offset2.register_into(reg, prefix + ".offset2");
    }
};

}  // namespace csnake
