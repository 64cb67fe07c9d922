#include <gtest/gtest.h>

#include "csnake/adam.hpp"
#include "csnake/grad_check.hpp"
#include "csnake/losses.hpp"
#include "csnake/snake.hpp"

using namespace csnake;
using DT = Tensor<double>;
using DP = TensorPtr<double>;

namespace {

DP random_map(Rng& rng, int d, int h, int w) {
    auto t = DT::zeros({d, h, w});
    for (auto& v : t->data) v = rng.normal();
    return t;
}

}  // namespace

TEST(VertexFeatures, ConstantMapSamplesConstant) {
    auto map = DT::full({4, 16, 16}, 3.25);
    Contour ring = sample_circle_contour({32, 32, 10, 0}, 16);
    auto vf = build_vertex_features(map, ring, 4);
    ASSERT_EQ(vf.values->shape, (Shape{6, 16}));
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(vf.values->data[c * 16 + i], 3.25);
}

TEST(VertexFeatures, CoordinateChannelsZeroMean) {
    Rng rng(3);
    auto map = random_map(rng, 3, 32, 32);
    Contour ring = sample_circle_contour({60, 70, 21, 1}, 128);
    auto vf = build_vertex_features(map, ring, 4);
    ASSERT_EQ(vf.values->shape, (Shape{5, 128}));
    double mx = 0, my = 0;
    for (int i = 0; i < 128; ++i) {
        mx += vf.values->data[3 * 128 + i];
        my += vf.values->data[4 * 128 + i];
    }
    EXPECT_NEAR(mx / 128, 0.0, 1e-9);
    EXPECT_NEAR(my / 128, 0.0, 1e-9);
    // normalized coordinates stay within the unit box
    for (int i = 0; i < 128; ++i) {
        EXPECT_LE(std::abs(vf.values->data[3 * 128 + i]), 1.0 + 1e-9);
        EXPECT_LE(std::abs(vf.values->data[4 * 128 + i]), 1.0 + 1e-9);
    }
}

TEST(SnakeNet, ZeroInitHeadGivesZeroOffsets) {
    Rng rng(5);
    SnakeNetwork<double> net;
    net.init(rng, 6, 32);
    auto vf = DT::zeros({6, 24});
    for (auto& v : vf->data) v = rng.normal();
    auto off = net.forward(vf);
    ASSERT_EQ(off->shape, (Shape{2, 24}));
    for (double v : off->data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SnakeNet, OutputShapeContract) {
    Rng rng(7);
    SnakeNetwork<double> net;
    net.init(rng, 10, 16);
    for (int n : {9, 32, 128}) {
        auto vf = DT::zeros({10, n});
        for (auto& v : vf->data) v = rng.normal();
        EXPECT_EQ(net.forward(vf)->shape, (Shape{2, n}));
    }
    auto bad = DT::zeros({7, 32});
    EXPECT_THROW(net.forward(bad), ContractViolation);
}

TEST(SnakeNet, GradCheckThroughNetwork) {
    Rng rng(11);
    SnakeNetwork<double> net;
    net.init(rng, 5, 8);
    // give the zero head a nonzero last layer so gradients reach everything
    for (auto& v : net.head3.w->data) v = rng.normal(0.0, 0.2);
    auto vf0 = DT::zeros({5, 12});
    for (auto& v : vf0->data) v = rng.normal();
    auto rep = grad_check([&](const DP& t) { return sum(mul(net.forward(t), net.forward(t))); }, vf0, 1e-6);
    EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Deform, ZeroNetworkIsIdentity) {
    Rng rng(13);
    SnakeNetwork<double> net;
    net.init(rng, 5, 16);  // head3 zero-init
    auto map = random_map(rng, 3, 32, 32);
    Contour init = sample_circle_contour({60, 60, 15, 2}, 32);
    auto res = deform(init, map, net, 3, 4);
    ASSERT_EQ(res.steps.size(), 3u);
    ASSERT_EQ(res.step_xy.size(), 3u);
    EXPECT_EQ(res.final.vertices.size(), init.vertices.size());
    EXPECT_EQ(res.final.class_id, 2);
    for (std::size_t i = 0; i < init.vertices.size(); ++i) {
        EXPECT_DOUBLE_EQ(res.final.vertices[i].x, init.vertices[i].x);
        EXPECT_DOUBLE_EQ(res.final.vertices[i].y, init.vertices[i].y);
    }
}

TEST(Deform, PreservesVertexCountWithLiveNet) {
    Rng rng(17);
    SnakeNetwork<double> net;
    net.init(rng, 5, 8);
    for (auto& v : net.head3.w->data) v = rng.normal(0.0, 0.1);
    auto map = random_map(rng, 3, 16, 16);
    Contour init = sample_circle_contour({30, 30, 10, 0}, 48);
    auto res = deform(init, map, net, 3, 4);
    for (const auto& s : res.steps) EXPECT_EQ(s.vertices.size(), 48u);
}

TEST(Deform, RejectsZeroIterations) {
    Rng rng(19);
    SnakeNetwork<double> net;
    net.init(rng, 5, 8);
    auto map = random_map(rng, 3, 8, 8);
    Contour init = sample_circle_contour({10, 10, 4, 0}, 16);
    EXPECT_THROW(deform(init, map, net, 0, 4), ContractViolation);
}

TEST(Deform, EveryParameterReceivesGradientAfterOneStep) {
    // the zero-initialized head blocks upstream gradients on the very first
    // backward pass; after one optimizer step the whole network must be live
    Rng rng(23);
    SnakeNetwork<double> net;
    net.init(rng, 5, 8);
    ParamRegistry<double> reg;
    net.register_into(reg);
    Adam<double> opt;
    for (auto& [name, p] : reg.params) opt.register_param(name, p);

    auto map = random_map(rng, 3, 32, 32);
    Contour gt = resample_polygon(sample_circle_contour({60, 64, 14, 0}, 64).vertices, 32);
    Contour init = sample_circle_contour({64, 60, 12, 0}, 32);

    for (int step = 0; step < 2; ++step) {
        opt.zero_grad();
        auto res = deform(init, map, net, 3, 4);
        TensorPtr<double> total;
        for (auto& xy : res.step_xy) {
            auto l = iter_loss(xy, gt);
            total = total ? add(total, l) : l;
        }
        backward(total);
        if (step == 0) opt.step();
    }
    for (auto& [name, p] : reg.params) {
        double norm = 0;
        for (double g : p->grad) norm += std::abs(g);
        EXPECT_GT(norm, 0.0) << "gradient-dead parameter: " << name;
    }
}
