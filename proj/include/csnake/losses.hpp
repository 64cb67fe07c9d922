#pragma once

// Training objectives: penalty-reduced focal loss on the class heatmaps,
// L1 radius and center-offset regression at ground-truth cells, their
// weighted detection total, and the per-iteration contour deformation L1.

#include "csnake/geometry.hpp"
#include "csnake/heatmap.hpp"
#include "csnake/tensor.hpp"

namespace csnake {

struct LossWeights {
    double lambda_radius = 0.1;
    double lambda_off = 1.0;
    double alpha = 2.0;
    double beta = 4.0;
};

struct LossBreakdown {
    double l_focal = 0, l_radius = 0, l_offset = 0, l_det = 0, l_iter = 0;

    // the detection total must always be recomputable from its parts
    double recompose(const LossWeights& w) const {
        return l_focal + w.lambda_radius * l_radius + w.lambda_off * l_offset;
    }
};

namespace detail {

template <class T>
int supervision_count(const DetectionTargets<T>& t) {
    return std::max(1, t.object_count);
}

// zero-valued loss that still touches `pred` so gradients exist (as zeros)
// for every head even on background-only patches
template <class T>
TensorPtr<T> connected_zero(const TensorPtr<T>& pred) {
    return sum(mul(pred, Tensor<T>::zeros(pred->shape)));
}

}  // namespace detail

// Two-branch focal loss over all cells and classes, normalized by the number
// of ground-truth objects (floored at 1). Predictions must lie strictly
// inside (0,1); the heatmap head's clamped sigmoid guarantees that.
template <class T>
TensorPtr<T> focal_loss(const TensorPtr<T>& pred, const DetectionTargets<T>& targets, double alpha, double beta) {
    if (pred->shape != targets.heatmap->shape)
        throw ContractViolation("focal_loss: prediction shape " + shape_str(pred->shape) +
                                " does not match target " + shape_str(targets.heatmap->shape));
    for (T v : pred->data)
        if (!(v > T(0) && v < T(1)))
            throw ContractViolation("focal_loss: prediction outside the open interval (0,1)");

    auto pos_mask = Tensor<T>::zeros(pred->shape);
    auto neg_weight = Tensor<T>::zeros(pred->shape);
    const auto& y = targets.heatmap->data;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == T(1))
            pos_mask->data[i] = T(1);
        else
            neg_weight->data[i] = std::pow(T(1) - y[i], static_cast<T>(beta));
    }
    auto pos_term = mul(pos_mask, mul(pow_scalar(one_minus(pred), static_cast<T>(alpha)), log_op(pred)));
    auto neg_term = mul(neg_weight, mul(pow_scalar(pred, static_cast<T>(alpha)), log_op(one_minus(pred))));
    T norm = static_cast<T>(-1.0 / detail::supervision_count(targets));
    return scale(sum(add(pos_term, neg_term)), norm);
}

// Mean L1 radius error over ground-truth center cells.
template <class T>
TensorPtr<T> radius_loss(const TensorPtr<T>& pred_radius, const DetectionTargets<T>& targets) {
    if (pred_radius->shape != targets.radius_map->shape)
        throw ContractViolation("radius_loss: shape mismatch");
    if (targets.object_count == 0) return detail::connected_zero(pred_radius);
    auto mask = Tensor<T>::zeros(pred_radius->shape);
    for (std::size_t i = 0; i < targets.center_mask.size(); ++i)
        if (targets.center_mask[i]) mask->data[i] = T(1);
    auto diff = mul(mask, sub(pred_radius, targets.radius_map));
    return scale(sum(abs_op(diff)), T(1) / static_cast<T>(targets.object_count));
}

// Mean L1 over both offset channels at ground-truth center cells.
template <class T>
TensorPtr<T> offset_loss(const TensorPtr<T>& pred_offset, const DetectionTargets<T>& targets) {
    if (pred_offset->shape != targets.offset_map->shape)
        throw ContractViolation("offset_loss: shape mismatch");
    if (targets.object_count == 0) return detail::connected_zero(pred_offset);
    auto mask = Tensor<T>::zeros(pred_offset->shape);
    std::size_t plane = targets.center_mask.size();
    for (std::size_t i = 0; i < plane; ++i) {
        if (targets.center_mask[i]) {
            mask->data[i] = T(1);
            mask->data[plane + i] = T(1);
        }
    }
    auto diff = mul(mask, sub(pred_offset, targets.offset_map));
    return scale(sum(abs_op(diff)), T(1) / static_cast<T>(targets.object_count));
}

// Weighted detection total; the returned breakdown carries the parts for
// logging and always recomposes to the total.
template <class T>
std::pair<TensorPtr<T>, LossBreakdown> detection_loss(const TensorPtr<T>& l_focal, const TensorPtr<T>& l_radius,
                                                      const TensorPtr<T>& l_offset, const LossWeights& w) {
    auto total = add(l_focal, add(scale(l_radius, static_cast<T>(w.lambda_radius)),
                                  scale(l_offset, static_cast<T>(w.lambda_off))));
    LossBreakdown b;
    b.l_focal = static_cast<double>(l_focal->value());
    b.l_radius = static_cast<double>(l_radius->value());
    b.l_offset = static_cast<double>(l_offset->value());
    b.l_det = b.recompose(w);
    return {total, b};
}

// Mean per-vertex L1 between a deformed contour (as a [2,N] tensor, rows x
// then y) and its index-aligned ground-truth ring.
template <class T>
TensorPtr<T> iter_loss(const TensorPtr<T>& deformed_xy, const Contour& gt) {
    if (deformed_xy->shape.size() != 2 || deformed_xy->shape[0] != 2)
        throw ContractViolation("iter_loss: expected [2,N] deformed coordinates");
    int n = deformed_xy->shape[1];
    if (static_cast<std::size_t>(n) != gt.vertices.size())
        throw ContractViolation("iter_loss: vertex count " + std::to_string(n) + " vs ground truth " +
                                std::to_string(gt.vertices.size()));
    auto target = Tensor<T>::zeros({2, n});
    for (int i = 0; i < n; ++i) {
        target->data[i] = static_cast<T>(gt.vertices[i].x);
        target->data[static_cast<std::size_t>(n) + i] = static_cast<T>(gt.vertices[i].y);
    }
    return scale(sum(abs_op(sub(deformed_xy, target))), T(1) / static_cast<T>(n));
}

// Convenience overload for already-materialized contours (evaluation paths).
template <class T = double>
TensorPtr<T> iter_loss(const Contour& deformed, const Contour& gt) {
    if (deformed.vertices.size() != gt.vertices.size())
        throw ContractViolation("iter_loss: vertex count mismatch");
    int n = static_cast<int>(deformed.vertices.size());
    auto xy = Tensor<T>::zeros({2, n});
    for (int i = 0; i < n; ++i) {
        xy->data[i] = static_cast<T>(deformed.vertices[i].x);
        xy->data[static_cast<std::size_t>(n) + i] = static_cast<T>(deformed.vertices[i].y);
    }
    return iter_loss(xy, gt);
}

}  // namespace csnake
