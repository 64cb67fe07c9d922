#include <gtest/gtest.h>

#include "csnake/grad_check.hpp"
#include "csnake/losses.hpp"

using namespace csnake;
using DT = Tensor<double>;
using DP = TensorPtr<double>;

namespace {

// single-cell targets: one class, 1x1 grid, optionally one object at the cell
DetectionTargets<double> single_cell(bool object) {
    DetectionTargets<double> t;
    t.grid_w = t.grid_h = 1;
    t.heatmap = DT::create({1, 1, 1}, {object ? 1.0 : 0.0});
    t.radius_map = DT::zeros({1, 1, 1});
    t.offset_map = DT::zeros({2, 1, 1});
    t.center_mask = {object ? std::uint8_t(1) : std::uint8_t(0)};
    t.object_count = object ? 1 : 0;
    return t;
}

DetectionTargets<double> grid_targets(const std::vector<Circle>& gts, int wh, int R, int C) {
    return encode_targets<double>(gts, wh, wh, R, C);
}

}  // namespace

TEST(Focal, PositiveBranchValue) {
    auto t = single_cell(true);
    auto pred = DT::create({1, 1, 1}, {0.5});
    double v = focal_loss(pred, t, 2.0, 4.0)->value();
    EXPECT_NEAR(v, -0.25 * std::log(0.5), 1e-12);
    EXPECT_NEAR(v, 0.1733, 5e-5);
}

TEST(Focal, BackgroundBranchValue) {
    auto t = single_cell(false);
    t.object_count = 1;  // N = 1 in the example
    auto pred = DT::create({1, 1, 1}, {0.5});
    double v = focal_loss(pred, t, 2.0, 4.0)->value();
    EXPECT_NEAR(v, -1.0 * 0.25 * std::log(0.5), 1e-12);
    EXPECT_NEAR(v, 0.1733, 5e-5);
}

TEST(Focal, VanishesAtPerfectPrediction) {
    std::vector<Circle> gts{{32, 32, 8, 0}};
    auto t = grid_targets(gts, 64, 4, 1);
    double eps = 1e-6;
    auto pred = DT::zeros(t.heatmap->shape);
    for (std::size_t i = 0; i < pred->size(); ++i)
        pred->data[i] = t.heatmap->data[i] == 1.0 ? 1.0 - eps : eps;
    EXPECT_LT(focal_loss(pred, t, 2.0, 4.0)->value(), 1e-3);
}

TEST(Focal, MonotoneInCenterConfidence) {
    auto t = single_cell(true);
    double prev = 1e9;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
        double v = focal_loss(DT::create({1, 1, 1}, {p}), t, 2.0, 4.0)->value();
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Focal, EndpointValuesRejected) {
    auto t = single_cell(true);
    EXPECT_THROW(focal_loss(DT::create({1, 1, 1}, {1.0}), t, 2.0, 4.0), ContractViolation);
    EXPECT_THROW(focal_loss(DT::create({1, 1, 1}, {0.0}), t, 2.0, 4.0), ContractViolation);
}

TEST(Radius, Examples) {
    std::vector<Circle> gts{{40, 40, 16, 0}, {100, 100, 8, 0}};
    auto t = grid_targets(gts, 160, 4, 1);
    auto exact = DT::create(t.radius_map->shape, t.radius_map->data);
    EXPECT_DOUBLE_EQ(radius_loss(exact, t)->value(), 0.0);

    // one object: |5 - 4| = 1
    std::vector<Circle> one{{40, 40, 16, 0}};
    auto t1 = grid_targets(one, 160, 4, 1);
    auto pred = DT::create(t1.radius_map->shape, t1.radius_map->data);
    pred->data[10 * t1.grid_w + 10] = 5.0;
    t1.radius_map->data[10 * t1.grid_w + 10] = 4.0;
    EXPECT_DOUBLE_EQ(radius_loss(pred, t1)->value(), 1.0);

    // two objects with errors 1 and 3 -> mean 2
    auto pred2 = DT::create(t.radius_map->shape, t.radius_map->data);
    pred2->data[10 * t.grid_w + 10] += 1.0;
    pred2->data[25 * t.grid_w + 25] += 3.0;
    EXPECT_DOUBLE_EQ(radius_loss(pred2, t)->value(), 2.0);
}

TEST(Radius, EmptyMaskIsZero) {
    auto t = single_cell(false);
    auto pred = DT::create({1, 1, 1}, {7.0});
    auto l = radius_loss(pred, t);
    EXPECT_DOUBLE_EQ(l->value(), 0.0);
}

TEST(Offset, ExactAndSingleError) {
    std::vector<Circle> gts{{41.0, 22.0, 12, 0}};
    auto t = grid_targets(gts, 128, 4, 1);
    auto exact = DT::create(t.offset_map->shape, t.offset_map->data);
    EXPECT_DOUBLE_EQ(offset_loss(exact, t)->value(), 0.0);

    // pred (0.5, 0.5) vs target (0.25, 0.5) -> 0.25
    auto pred = DT::create(t.offset_map->shape, t.offset_map->data);
    pred->data[5 * t.grid_w + 10] = 0.5;
    EXPECT_DOUBLE_EQ(offset_loss(pred, t)->value(), 0.25);
}

TEST(Detection, WeightedComposition) {
    LossWeights w;  // lambda_radius = 0.1, lambda_off = 1
    auto lf = DT::scalar(1.0);
    auto lr = DT::scalar(2.0);
    auto lo = DT::scalar(0.5);
    auto [total, b] = detection_loss(lf, lr, lo, w);
    EXPECT_NEAR(total->value(), 1.7, 1e-12);
    EXPECT_NEAR(b.l_det, 1.7, 1e-12);
    EXPECT_NEAR(b.l_det, b.recompose(w), 1e-15);

    auto [zero, zb] = detection_loss(DT::scalar(0.0), DT::scalar(0.0), DT::scalar(0.0), w);
    EXPECT_DOUBLE_EQ(zero->value(), 0.0);

    LossWeights w2 = w;
    w2.lambda_off = 2.0;
    auto [t2, b2] = detection_loss(lf, lr, lo, w2);
    EXPECT_NEAR(t2->value() - total->value(), 0.5, 1e-12);  // only the offset part doubles
}

TEST(Iter, Examples) {
    Contour gt;
    gt.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    Contour same = gt;
    EXPECT_DOUBLE_EQ(iter_loss<double>(same, gt)->value(), 0.0);

    Contour shifted = gt;
    for (auto& v : shifted.vertices) v.x += 1.0;
    EXPECT_DOUBLE_EQ(iter_loss<double>(shifted, gt)->value(), 1.0);

    Contour a, b;
    a.vertices = {{1, 1}, {0, 3}};
    b.vertices = {{0, 0}, {0, 0}};
    EXPECT_DOUBLE_EQ(iter_loss<double>(a, b)->value(), 2.5);
}

TEST(Iter, VertexCountMismatchRejected) {
    Contour a, b;
    a.vertices = {{0, 0}, {1, 1}, {2, 2}};
    b.vertices = {{0, 0}, {1, 1}};
    EXPECT_THROW(iter_loss<double>(a, b), ContractViolation);
}

TEST(Gradients, AllLossesPassGradCheck) {
    Rng rng(5);
    std::vector<Circle> gts{{20, 24, 8, 0}, {49, 50, 10, 1}};
    auto t = grid_targets(gts, 64, 4, 2);

    // focal: predictions sampled strictly inside (0,1)
    auto hm0 = DT::zeros(t.heatmap->shape);
    for (auto& v : hm0->data) v = 0.05 + 0.9 * rng.uniform();
    auto rep = grad_check([&](const DP& p) { return focal_loss(p, t, 2.0, 4.0); }, hm0, 1e-6);
    EXPECT_LT(rep.max_rel_error, 1e-4);

    // radius / offset: keep away from the L1 kink
    auto r0 = DT::zeros(t.radius_map->shape);
    for (auto& v : r0->data) v = rng.uniform(2.0, 6.0);
    EXPECT_LT(grad_check([&](const DP& p) { return radius_loss(p, t); }, r0, 1e-6).max_rel_error, 1e-4);

    auto o0 = DT::zeros(t.offset_map->shape);
    for (auto& v : o0->data) v = rng.uniform(0.6, 0.9);
    EXPECT_LT(grad_check([&](const DP& p) { return offset_loss(p, t); }, o0, 1e-6).max_rel_error, 1e-4);

    // iter: [2,N] coordinates vs a circle ring
    Contour gt = sample_circle_contour({10, 10, 5, 0}, 16);
    auto xy = DT::zeros({2, 16});
    for (auto& v : xy->data) v = rng.uniform(2.0, 18.0);
    EXPECT_LT(grad_check([&](const DP& p) { return iter_loss(p, gt); }, xy, 1e-6).max_rel_error, 1e-4);

    // composed detection total stays consistent with its breakdown
    LossWeights w;
    auto lf = focal_loss(hm0, t, 2.0, 4.0);
    auto lr = radius_loss(r0, t);
    auto lo = offset_loss(o0, t);
    auto [total, bd] = detection_loss(lf, lr, lo, w);
    EXPECT_NEAR(bd.l_det, bd.recompose(w), 1e-12);
    EXPECT_GE(total->value(), 0.0);
}

TEST(Gradients, BreakdownRecompositionTight) {
    Rng rng(8);
    std::vector<Circle> gts{{30, 30, 9, 0}};
    auto t = grid_targets(gts, 64, 4, 1);
    auto hm = DT::zeros(t.heatmap->shape);
    for (auto& v : hm->data) v = 0.2 + 0.6 * rng.uniform();
    auto r = DT::zeros(t.radius_map->shape);
    for (auto& v : r->data) v = rng.uniform(1.0, 5.0);
    auto o = DT::zeros(t.offset_map->shape);
    for (auto& v : o->data) v = rng.uniform(0.1, 0.4);
    LossWeights w;
    auto [total, b] = detection_loss(focal_loss(hm, t, w.alpha, w.beta), radius_loss(r, t), offset_loss(o, t), w);
    EXPECT_NEAR(total->value(), b.recompose(w), 1e-12);
    EXPECT_GE(b.l_focal, 0.0);
    EXPECT_GE(b.l_radius, 0.0);
    EXPECT_GE(b.l_offset, 0.0);
}
