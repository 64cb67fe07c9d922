#pragma once

// Contour deformation network: per-vertex feature construction, a backbone
// of eight CirConv-Bn-ReLU blocks with residual skips, a fusion stage
// (concat -> 1x1 conv -> vertex-wise max pool broadcast back), and a
// three-layer 1x1 prediction head emitting per-vertex offsets. The
// deformation driver applies the network iteratively, keeping each
// iteration's output so the loss can supervise all of them.

#include "csnake/geometry.hpp"
#include "csnake/layers.hpp"

namespace csnake {

template <class T>
struct VertexFeatures {
    TensorPtr<T> values;  // [(D+2), N]: D sampled channels then 2 coordinate rows
    int n = 0;
};

// Samples the feature map (stride R) at each vertex and appends the vertex
// coordinates normalized to the contour's local frame: centered on the
// contour centroid, scaled by its largest axis extent. Raw pixel coordinates
// destabilize training.
template <class T>
VertexFeatures<T> build_vertex_features(const TensorPtr<T>& feature_map, const Contour& contour, int R) {
    int n = static_cast<int>(contour.vertices.size());
    std::vector<Vec2> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = {contour.vertices[i].x / R, contour.vertices[i].y / R};
    auto feat = bilinear_sample(feature_map, pts);

    Vec2 c = centroid(contour.vertices);
    double s = 1e-6;
    for (const Vec2& v : contour.vertices)
        s = std::max({s, std::abs(v.x - c.x), std::abs(v.y - c.y)});
    auto coords = Tensor<T>::zeros({2, n});
    for (int i = 0; i < n; ++i) {
        coords->data[i] = static_cast<T>((contour.vertices[i].x - c.x) / s);
        coords->data[static_cast<std::size_t>(n) + i] = static_cast<T>((contour.vertices[i].y - c.y) / s);
    }
    return {concat0<T>({feat, coords}), n};
}

template <class T>
class SnakeNetwork {
public:
    static constexpr int kDepth = 8;
    static constexpr int kKernelSize = 9;
    static constexpr int kHeadMid = 64;

    int in_width = 0;
    int width = 0;
    bool training = true;

    struct Block {
        CirConvLayer<T> conv;
        BatchNormLayer<T> bn;
    };
    CirConvLayer<T> proj;  // channel-matching residual projection for block 0
    std::vector<Block> blocks;
    CirConvLayer<T> fuse;
    CirConvLayer<T> head1, head2, head3;

    void init(Rng& rng, int in_width_, int width_) {
        in_width = in_width_;
        width = width_;
        proj.init(rng, in_width, width, 1);
        blocks.resize(kDepth);
        for (int i = 0; i < kDepth; ++i) {
            blocks[i].conv.init(rng, i == 0 ? in_width : width, width, kKernelSize);
            blocks[i].bn.init(width);
        }
        fuse.init(rng, kDepth * width, width, 1);
        head1.init(rng, (kDepth + 1) * width, width, 1);
        head2.init(rng, width, kHeadMid, 1);
        // zero-initialized final layer: the untrained network is the
        // identity deformation
        head3.init(rng, kHeadMid, 2, 1, /*zero_init=*/true);
    }

    // [(D+2), N] vertex features -> [2, N] per-vertex offsets
    TensorPtr<T> forward(const TensorPtr<T>& vf) {
        if (vf->shape.size() != 2 || vf->shape[0] != in_width)
            throw ContractViolation("snake: feature width " + shape_str(vf->shape) + " does not match input width " +
                                    std::to_string(in_width));
        int n = vf->shape[1];
        std::vector<TensorPtr<T>> outs;
        outs.reserve(kDepth);
        TensorPtr<T> h = vf;
        for (int i = 0; i < kDepth; ++i) {
            auto conv_out = relu(blocks[i].bn.forward(blocks[i].conv.forward(h), training));
            h = add(conv_out, i == 0 ? proj.forward(h) : h);
            outs.push_back(h);
        }
        auto cat = concat0<T>(outs);
        auto global = broadcast_cols(rowmax(fuse.forward(cat)), n);
        auto head_in = concat0<T>({global, cat});
        return head3.forward(relu(head2.forward(relu(head1.forward(head_in)))));
    }

    void register_into(ParamRegistry<T>& reg, const std::string& prefix = "snake") const {
        proj.register_into(reg, prefix + ".proj");
        for (int i = 0; i < kDepth; ++i) {
            blocks[i].conv.register_into(reg, prefix + ".block" + std::to_string(i) + ".conv");
            blocks[i].bn.register_into(reg, prefix + ".block" + std::to_string(i) + ".bn");
        }
        fuse.register_into(reg, prefix + ".fuse");
        head1.register_into(reg, prefix + ".head1");
        head2.register_into(reg, prefix + ".head2");
        head3.register_into(reg, prefix + ".head3");
    }
};

template <class T>
struct DeformResult {
    Contour final;
    std::vector<Contour> steps;           // contour after each iteration
    std::vector<TensorPtr<T>> step_xy;    // [2,N] graph nodes, one per iteration
};

// Iterative deformation: build features at the current vertices, predict
// offsets, move. Vertex positions feed the next iteration as constants;
// gradients flow through each iteration's offsets and the sampled features.
template <class T>
DeformResult<T> deform(const Contour& initial, const TensorPtr<T>& feature_map, SnakeNetwork<T>& net,
                       int iterations, int R) {
    if (iterations < 1) throw ContractViolation("deform: iterations must be >= 1");
    int n = static_cast<int>(initial.vertices.size());
    DeformResult<T> res;
    Contour cur = initial;
    for (int it = 0; it < iterations; ++it) {
        auto vf = build_vertex_features(feature_map, cur, R);
        auto offsets = net.forward(vf.values);
        auto cur_xy = Tensor<T>::zeros({2, n});
        for (int i = 0; i < n; ++i) {
            cur_xy->data[i] = static_cast<T>(cur.vertices[i].x);
            cur_xy->data[static_cast<std::size_t>(n) + i] = static_cast<T>(cur.vertices[i].y);
        }
        auto new_xy = add(cur_xy, offsets);
        for (T v : new_xy->data)
            if (!std::isfinite(static_cast<double>(v)))
                throw InternalError("deform: non-finite offsets at iteration " + std::to_string(it));
        Contour nxt;
        nxt.class_id = initial.class_id;
        nxt.vertices.resize(n);
        for (int i = 0; i < n; ++i)
            nxt.vertices[i] = {static_cast<double>(new_xy->data[i]),
                               static_cast<double>(new_xy->data[static_cast<std::size_t>(n) + i])};
        res.step_xy.push_back(new_xy);
        res.steps.push_back(nxt);
        cur = std::move(nxt);
    }
    res.final = res.steps.back();
    return res;
}

}  // namespace csnake
