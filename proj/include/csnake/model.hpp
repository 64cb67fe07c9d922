#pragma once

// End-to-end assembly: backbone -> detection heads -> circle decoding ->
// circle contour proposal -> iterative deformation. Owns parameter naming,
// the per-batch training step and checkpoint round-trips.

#include "csnake/backbone.hpp"
#include "csnake/checkpoint.hpp"
#include "csnake/config.hpp"
#include "csnake/losses.hpp"
#include "csnake/snake.hpp"

namespace csnake {

struct InstancePrediction {
    Circle circle;
    Contour contour;
    double score = 0.0;
};

template <class T>
struct HeadMaps {
    TensorPtr<T> heatmap;  // after the clamped sigmoid, values in (0,1)
    TensorPtr<T> radius;
    TensorPtr<T> offset;
    TensorPtr<T> feature;  // shared backbone feature at stride R
};

// One prepared training example. Images are padded to the backbone size
// multiple before they get here.
template <class T>
struct TrainExample {
    TensorPtr<T> image;
    DetectionTargets<T> targets;
    std::vector<Circle> gt_circles;
    std::vector<Contour> gt_contours;  // resampled to N vertices, top-start aligned
    int image_id = 0;
};

template <class T>
class CircleSnakeModel {
public:
    static constexpr T kSigmoidClamp = T(1e-4);

    RunConfig cfg;
    Backbone<T> backbone;
    DetectionHeads<T> heads;
    SnakeNetwork<T> snake;
    ParamRegistry<T> registry;

    void init(const RunConfig& config) {
        cfg = config;
        cfg.validate();
        Rng rng(static_cast<std::uint64_t>(cfg.seed));
        backbone.init(rng, cfg.backbone_widths);
        heads.init(rng, backbone.out_channels(), cfg.head_conv, cfg.class_count());
        snake.init(rng, backbone.out_channels() + 2, cfg.snake_width);
        registry = ParamRegistry<T>();
        backbone.register_into(registry);
        heads.register_into(registry);
        snake.register_into(registry);
    }

    void set_training(bool training) {
        backbone.training = training;
        snake.training = training;
    }

    void register_optimizer(Adam<T>& opt) const {
        for (const auto& [name, p] : registry.params) opt.register_param(name, p);
    }

    HeadMaps<T> forward_maps(const TensorPtr<T>& image) {
        if (image->shape.size() != 3 || image->shape[0] != 3)
            throw ContractViolation("model: expected a 3-channel image tensor");
        HeadMaps<T> m;
        m.feature = backbone.forward(image);
        m.heatmap = sigmoid_clamped(heads.heatmap_logits(m.feature), kSigmoidClamp, T(1) - kSigmoidClamp);
        m.radius = heads.radius(m.feature);
        m.offset = heads.offset(m.feature);
        return m;
    }

    // Inference: decode circles, propose circle contours, deform. Runs with
    // gradient recording off and batch-norm in running-stats mode.
    std::vector<InstancePrediction> predict(const TensorPtr<T>& image, double ct_score) {
        NoGradGuard ng;
        bool was_training = backbone.training;
        set_training(false);
        auto maps = forward_maps(image);
        auto decoded = decode_circles(maps.heatmap, maps.radius, maps.offset, cfg.top_n, ct_score,
                                      cfg.down_ratio);
        std::vector<InstancePrediction> out;
        out.reserve(decoded.circles.size());
        for (const Circle& c : decoded.circles) {
            Contour proposal = sample_circle_contour(c, cfg.vertices);
            auto res = deform(proposal, maps.feature, snake, cfg.deform_iters, cfg.down_ratio);
            out.push_back({c, res.final, c.score});
        }
        set_training(was_training);
        return out;
    }

    std::vector<InstancePrediction> predict(const TensorPtr<T>& image) { return predict(image, cfg.ct_score); }

    // One optimizer step over a batch: detection losses on every image plus
    // deformation supervision on contours proposed from jittered ground-truth
    // circles. Returns the batch-averaged breakdown.
    LossBreakdown train_step(const std::vector<const TrainExample<T>*>& batch, Adam<T>& opt, Rng& rng,
                             long step_index = -1) {
        if (batch.empty()) throw ContractViolation("train_step: empty batch");
        set_training(true);
        LossWeights w{cfg.lambda_radius, cfg.lambda_off, cfg.focal_alpha, cfg.focal_beta};
        LossBreakdown acc;
        T inv_batch = T(1) / static_cast<T>(batch.size());

        for (const TrainExample<T>* ex : batch) {
            auto maps = forward_maps(ex->image);
            auto lf = focal_loss(maps.heatmap, ex->targets, cfg.focal_alpha, cfg.focal_beta);
            auto lr_ = radius_loss(maps.radius, ex->targets);
            auto lo = offset_loss(maps.offset, ex->targets);
            auto [l_det, bd] = detection_loss(lf, lr_, lo, w);

            auto [l_iter, iter_value] = snake_supervision(*ex, maps.feature, rng);
            bd.l_iter = iter_value;

            auto total = add(l_det, scale(l_iter, static_cast<T>(cfg.iter_weight)));
            double tv = static_cast<double>(total->value());
            if (!std::isfinite(tv))
                throw InternalError("train_step: non-finite loss at step " + std::to_string(step_index) +
                                    " (focal " + std::to_string(bd.l_focal) + ", radius " +
                                    std::to_string(bd.l_radius) + ", offset " + std::to_string(bd.l_offset) +
                                    ", iter " + std::to_string(bd.l_iter) + ")");
            backward(scale(total, inv_batch));

            acc.l_focal += bd.l_focal;
            acc.l_radius += bd.l_radius;
            acc.l_offset += bd.l_offset;
            acc.l_iter += bd.l_iter;
        }
        double n = static_cast<double>(batch.size());
        acc.l_focal /= n;
        acc.l_radius /= n;
        acc.l_offset /= n;
        acc.l_iter /= n;
        acc.l_det = acc.recompose(w);
        opt.step();
        opt.zero_grad();
        return acc;
    }

    void save_checkpoint(const std::string& path, const Adam<T>* opt = nullptr) const {
        Checkpoint<T> ck;
        for (const auto& [name, t] : registry.params) ck.tensors.push_back({name, t->shape, t->data});
        for (const auto& [name, t] : registry.buffers) ck.tensors.push_back({name, t->shape, t->data});
        if (opt) {
            ck.has_optimizer = true;
            ck.step_count = static_cast<std::uint64_t>(opt->step_count());
            ck.lr = static_cast<double>(opt->config().lr);
            ck.beta1 = static_cast<double>(opt->config().beta1);
            ck.beta2 = static_cast<double>(opt->config().beta2);
            ck.eps = static_cast<double>(opt->config().eps);
            for (std::size_t i = 0; i < opt->param_count(); ++i)
                ck.moments.push_back({opt->param_names()[i], opt->first_moment(i), opt->second_moment(i)});
        }
        ck.config_text = serialize_config(cfg);
        ck.save(path);
    }

    // Loads weights and buffers; optionally restores optimizer moments. A
    // mismatched or truncated file throws before any tensor is modified.
    void load_checkpoint(const std::string& path, Adam<T>* opt = nullptr) {
        auto ck = Checkpoint<T>::load(path);
        std::size_t expected = registry.params.size() + registry.buffers.size();
        if (ck.tensors.size() != expected)
            throw IoError("checkpoint: tensor count " + std::to_string(ck.tensors.size()) +
                          " does not match this model (" + std::to_string(expected) + ")");
        auto stage = [&ck](const std::vector<std::pair<std::string, TensorPtr<T>>>& list) {
            std::vector<const typename Checkpoint<T>::Entry*> found;
            for (const auto& [name, t] : list) {
                const auto* e = ck.find(name);
                if (!e) throw IoError("checkpoint: missing tensor '" + name + "'");
                if (e->shape != t->shape)
                    throw IoError("checkpoint: shape mismatch for '" + name + "': file " + shape_str(e->shape) +
                                  " vs model " + shape_str(t->shape));
                found.push_back(e);
            }
            return found;
        };
        auto pf = stage(registry.params);
        auto bf = stage(registry.buffers);
        for (std::size_t i = 0; i < registry.params.size(); ++i) registry.params[i].second->data = pf[i]->data;
        for (std::size_t i = 0; i < registry.buffers.size(); ++i) registry.buffers[i].second->data = bf[i]->data;
        if (opt && ck.has_optimizer) {
            std::vector<std::vector<T>> m, v;
            for (const auto& [name, t] : registry.params) {
                const typename Checkpoint<T>::MomentEntry* me = nullptr;
                for (const auto& cand : ck.moments)
                    if (cand.name == name) me = &cand;
                if (!me) throw IoError("checkpoint: missing optimizer state for '" + name + "'");
                m.push_back(me->m);
                v.push_back(me->v);
            }
            opt->restore_state(static_cast<long>(ck.step_count), std::move(m), std::move(v));
        }
    }

private:
    // Deformation supervision from jittered ground-truth circle proposals,
    // summed over iterations and averaged over instances. Background-only
    // images run one zero-weighted deformation so every snake parameter
    // still receives a (zero) gradient.
    std::pair<TensorPtr<T>, double> snake_supervision(const TrainExample<T>& ex, const TensorPtr<T>& feature,
                                                      Rng& rng) {
        std::vector<std::size_t> order(ex.gt_circles.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        std::size_t take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.snake_instances));

        if (take == 0) {
            int R = cfg.down_ratio;
            double img_w = static_cast<double>(ex.image->shape[2]);
            double img_h = static_cast<double>(ex.image->shape[1]);
            Circle dummy{img_w / 2, img_h / 2, 8.0 * R, 0};
            Contour init = sample_circle_contour(dummy, cfg.vertices);
            auto res = deform(init, feature, snake, 1, R);
            return {scale(iter_loss(res.step_xy[0], init), T(0)), 0.0};
        }

        TensorPtr<T> total;
        for (std::size_t i = 0; i < take; ++i) {
            const Circle& gt = ex.gt_circles[order[i]];
            const Contour& gt_ring = ex.gt_contours[order[i]];
            Circle prop = gt;
            prop.cx += rng.uniform(-cfg.proposal_jitter, cfg.proposal_jitter) * gt.r;
            prop.cy += rng.uniform(-cfg.proposal_jitter, cfg.proposal_jitter) * gt.r;
            prop.r *= 1.0 + rng.uniform(-cfg.proposal_jitter, cfg.proposal_jitter);
            Contour init = sample_circle_contour(prop, cfg.vertices);
            auto res = deform(init, feature, snake, cfg.deform_iters, cfg.down_ratio);
            for (auto& xy : res.step_xy) {
                auto l = iter_loss(xy, gt_ring);
                total = total ? add(total, l) : l;
            }
        }
        total = scale(total, T(1) / static_cast<T>(take));
        return {total, static_cast<double>(total->value())};
    }
};

}  // namespace csnake
