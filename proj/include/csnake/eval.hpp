#pragma once

// COCO-style evaluation over circle or mask predictions: greedy same-class
// matching at each IoU threshold, 101-point interpolated average precision,
// the threshold-mean AP, size-bucketed AP over the standard area ranges,
// per-class AP, and optional mean Dice over matched pairs.

#include <iomanip>
#include <map>
#include <sstream>

#include "csnake/geometry.hpp"

namespace csnake {

struct EvalGt {
    int class_id = 0;
    Circle circle;
    std::vector<Vec2> polygon;  // original annotation boundary
    double area = 0.0;          // polygon area (segm) used for size buckets
};

struct EvalPred {
    int class_id = 0;
    double score = 0.0;
    Circle circle;
    Contour contour;
};

struct EvalImage {
    int image_id = 0;
    int w = 0, h = 0;
    std::vector<EvalGt> gts;
    std::vector<EvalPred> preds;
};

enum class EvalMode { Circle, Segm };

struct EvalOptions {
    EvalMode mode = EvalMode::Segm;
    bool dice = false;
    // per-class report metric: threshold-mean AP by default, AP50 optionally
    bool per_class_ap50 = false;
};

struct EvalReport {
    double ap = 0, ap50 = 0, ap75 = 0, ap_s = 0, ap_m = 0;
    std::map<int, double> per_class;  // class -> AP (not-applicable classes omitted)
    // diagnostics at each threshold, summed over classes (all-area bucket)
    std::vector<double> thresholds;
    std::vector<std::size_t> tp, fp, fn;
    double mean_dice = -1.0;  // only set when options.dice and mode Segm
    std::string per_class_metric = "ap";

    std::string to_table(const std::vector<std::string>& class_names = {}) const;
    std::string to_kv(const std::vector<std::string>& class_names = {}) const;
};

struct MatchResult {
    // pred index -> gt index pairs, plus the leftovers
    std::vector<std::pair<int, int>> matches;
    std::vector<int> unmatched_preds;
    std::vector<int> unmatched_gts;
};

// Greedy matcher: predictions in descending score order each take the
// highest-IoU not-yet-matched ground truth with IoU >= threshold. The iou
// matrix is [preds x gts]; callers restrict both sides to a single class.
inline MatchResult match_detections(const std::vector<std::vector<double>>& iou, double threshold) {
    std::size_t np = iou.size();
    std::size_t ng = np ? iou[0].size() : 0;
    MatchResult res;
    std::vector<bool> gt_taken(ng, false);
    for (std::size_t p = 0; p < np; ++p) {
        int best = -1;
        double best_iou = threshold;
        for (std::size_t g = 0; g < ng; ++g) {
            if (gt_taken[g]) continue;
            if (iou[p][g] >= best_iou) {
                best_iou = iou[p][g];
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            gt_taken[best] = true;
            res.matches.emplace_back(static_cast<int>(p), best);
        } else {
            res.unmatched_preds.push_back(static_cast<int>(p));
        }
    }
    for (std::size_t g = 0; g < ng; ++g)
        if (!gt_taken[g]) res.unmatched_gts.push_back(static_cast<int>(g));
    return res;
}

// 101-point interpolated AP from scored TP flags. Entries may arrive in any
// order; only the score ordering matters. gt_count == 0 means the metric is
// not applicable and -1 is returned (callers exclude it from means).
inline double average_precision(std::vector<std::pair<double, bool>> scored, std::size_t gt_count) {
    if (gt_count == 0) return -1.0;
    if (scored.empty()) return 0.0;
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t n = scored.size();
    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (scored[i].second) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    // right-to-left envelope: interpolated precision at r is the max
    // precision at any recall >= r
    for (std::size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double acc = 0.0;
    std::size_t j = 0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        while (j < n && recall[j] < r - 1e-12) ++j;
        acc += (j < n) ? precision[j] : 0.0;
    }
    return acc / 101.0;
}

namespace evaldetail {

struct AreaRange {
    double lo, hi;
};
inline constexpr AreaRange kAllArea{0.0, 1e18};
inline constexpr AreaRange kSmallArea{0.0, 32.0 * 32.0};
inline constexpr AreaRange kMediumArea{32.0 * 32.0, 96.0 * 96.0};

inline double pred_area(const EvalPred& p, EvalMode mode) {
    if (mode == EvalMode::Circle) return kPi * p.circle.r * p.circle.r;
    return polygon_area(p.contour.vertices);
}

// per-image, per-class IoU matrix, computed once and reused across
// thresholds and area ranges
struct ImageClassEntry {
    std::vector<int> pred_idx;  // into image preds, score-ordered
    std::vector<int> gt_idx;
    std::vector<std::vector<double>> iou;
};

}  // namespace evaldetail

inline EvalReport evaluate(const std::vector<EvalImage>& images, int class_count, const EvalOptions& opt) {
    using namespace evaldetail;
    std::vector<double> thresholds;
    for (int k = 0; k < 10; ++k) thresholds.push_back(0.5 + 0.05 * k);

    // precompute per image, per class: score-ordered preds and the IoU matrix
    std::vector<std::vector<ImageClassEntry>> entries(images.size(),
                                                      std::vector<ImageClassEntry>(class_count));
    for (std::size_t ii = 0; ii < images.size(); ++ii) {
        const EvalImage& im = images[ii];
        for (const auto& g : im.gts)
            if (g.class_id < 0 || g.class_id >= class_count)
                throw ContractViolation("evaluate: gt class " + std::to_string(g.class_id) +
                                        " outside the class universe");
        for (const auto& p : im.preds)
            if (p.class_id < 0 || p.class_id >= class_count)
                throw ContractViolation("evaluate: prediction class " + std::to_string(p.class_id) +
                                        " outside the class universe");

        // masks once per instance (segm mode)
        std::vector<Mask> gt_masks, pred_masks;
        if (opt.mode == EvalMode::Segm) {
            gt_masks.reserve(im.gts.size());
            for (const auto& g : im.gts) {
                Mask m(im.w, im.h);
                rasterize_into(g.polygon, m);
                gt_masks.push_back(std::move(m));
            }
            pred_masks.reserve(im.preds.size());
            for (const auto& p : im.preds) {
                Mask m(im.w, im.h);
                rasterize_into(p.contour.vertices, m);
                pred_masks.push_back(std::move(m));
            }
        }
        for (int c = 0; c < class_count; ++c) {
            auto& e = entries[ii][c];
            for (std::size_t pi = 0; pi < im.preds.size(); ++pi)
                if (im.preds[pi].class_id == c) e.pred_idx.push_back(static_cast<int>(pi));
            for (std::size_t gi = 0; gi < im.gts.size(); ++gi)
                if (im.gts[gi].class_id == c) e.gt_idx.push_back(static_cast<int>(gi));
            std::stable_sort(e.pred_idx.begin(), e.pred_idx.end(), [&](int a, int b) {
                return im.preds[a].score > im.preds[b].score;
            });
            e.iou.assign(e.pred_idx.size(), std::vector<double>(e.gt_idx.size(), 0.0));
            for (std::size_t p = 0; p < e.pred_idx.size(); ++p) {
                for (std::size_t g = 0; g < e.gt_idx.size(); ++g) {
                    if (opt.mode == EvalMode::Circle)
                        e.iou[p][g] = circle_iou(im.preds[e.pred_idx[p]].circle, im.gts[e.gt_idx[g]].circle);
                    else
                        e.iou[p][g] = mask_iou(pred_masks[e.pred_idx[p]], gt_masks[e.gt_idx[g]]);
                }
            }
        }
    }

    // AP for one class, threshold and area range; -1 when not applicable
    auto class_ap = [&](int c, double thr, const AreaRange& range, std::size_t* tp_out, std::size_t* fp_out,
                        std::size_t* fn_out) {
        std::vector<std::pair<double, bool>> scored;
        std::size_t gt_count = 0, tps = 0;
        for (std::size_t ii = 0; ii < images.size(); ++ii) {
            const EvalImage& im = images[ii];
            const auto& e = entries[ii][c];
            std::vector<bool> gt_in_range(e.gt_idx.size());
            for (std::size_t g = 0; g < e.gt_idx.size(); ++g) {
                double a = im.gts[e.gt_idx[g]].area;
                gt_in_range[g] = (a >= range.lo && a < range.hi);
                if (gt_in_range[g]) ++gt_count;
            }
            auto mr = match_detections(e.iou, thr);
            std::vector<int> pred_match(e.pred_idx.size(), -1);
            for (auto [p, g] : mr.matches) pred_match[p] = g;
            for (std::size_t p = 0; p < e.pred_idx.size(); ++p) {
                double score = im.preds[e.pred_idx[p]].score;
                if (pred_match[p] >= 0) {
                    if (gt_in_range[pred_match[p]]) {
                        scored.emplace_back(score, true);
                        ++tps;
                    }
                    // matched to an out-of-range gt: ignored entirely
                } else {
                    double pa = pred_area(im.preds[e.pred_idx[p]], opt.mode);
                    if (pa >= range.lo && pa < range.hi) scored.emplace_back(score, false);
                    // unmatched and outside the range: ignored
                }
            }
        }
        if (tp_out) *tp_out = tps;
        if (fp_out) {
            *fp_out = 0;
            for (const auto& s : scored)
                if (!s.second) ++*fp_out;
        }
        if (fn_out) *fn_out = gt_count - tps;
        return average_precision(std::move(scored), gt_count);
    };

    auto mean_over_classes = [&](double thr, const AreaRange& range) {
        double acc = 0.0;
        int applicable = 0;
        for (int c = 0; c < class_count; ++c) {
            double ap = class_ap(c, thr, range, nullptr, nullptr, nullptr);
            if (ap >= 0.0) {
                acc += ap;
                ++applicable;
            }
        }
        return applicable ? acc / applicable : -1.0;
    };
    auto threshold_mean = [&](const AreaRange& range) {
        double acc = 0.0;
        int applicable = 0;
        for (double thr : thresholds) {
            double v = mean_over_classes(thr, range);
            if (v >= 0.0) {
                acc += v;
                ++applicable;
            }
        }
        return applicable ? acc / applicable : -1.0;
    };

    EvalReport rep;
    rep.thresholds = thresholds;
    rep.ap = threshold_mean(kAllArea);
    rep.ap50 = mean_over_classes(0.50, kAllArea);
    rep.ap75 = mean_over_classes(0.75, kAllArea);
    rep.ap_s = threshold_mean(kSmallArea);
    rep.ap_m = threshold_mean(kMediumArea);
    rep.per_class_metric = opt.per_class_ap50 ? "ap50" : "ap";
    for (int c = 0; c < class_count; ++c) {
        double v;
        if (opt.per_class_ap50) {
            v = class_ap(c, 0.50, kAllArea, nullptr, nullptr, nullptr);
        } else {
            double acc = 0.0;
            int applicable = 0;
            for (double thr : thresholds) {
                double ap = class_ap(c, thr, kAllArea, nullptr, nullptr, nullptr);
                if (ap >= 0.0) {
                    acc += ap;
                    ++applicable;
                }
            }
            v = applicable ? acc / applicable : -1.0;
        }
        if (v >= 0.0) rep.per_class[c] = v;
    }
    for (double thr : thresholds) {
        std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
        for (int c = 0; c < class_count; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            class_ap(c, thr, kAllArea, &tp, &fp, &fn);
            tp_sum += tp;
            fp_sum += fp;
            fn_sum += fn;
        }
        rep.tp.push_back(tp_sum);
        rep.fp.push_back(fp_sum);
        rep.fn.push_back(fn_sum);
    }

    if (opt.dice && opt.mode == EvalMode::Segm) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t ii = 0; ii < images.size(); ++ii) {
            const EvalImage& im = images[ii];
            std::vector<Mask> gt_masks, pred_masks;
            for (const auto& g : im.gts) {
                Mask m(im.w, im.h);
                rasterize_into(g.polygon, m);
                gt_masks.push_back(std::move(m));
            }
            for (const auto& p : im.preds) {
                Mask m(im.w, im.h);
                rasterize_into(p.contour.vertices, m);
                pred_masks.push_back(std::move(m));
            }
            for (int c = 0; c < class_count; ++c) {
                const auto& e = entries[ii][c];
                auto mr = match_detections(e.iou, 0.5);
                for (auto [p, g] : mr.matches) {
                    acc += mask_dice(pred_masks[e.pred_idx[p]], gt_masks[e.gt_idx[g]]);
                    ++count;
                }
            }
        }
        rep.mean_dice = count ? acc / count : 0.0;
    }
    return rep;
}

inline std::string EvalReport::to_table(const std::vector<std::string>& class_names) const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "           AP    AP50   AP75   AP_S   AP_M\n";
    auto cell = [](double v) {
        std::ostringstream c;
        if (v < 0)
            c << "   -  ";
        else
            c << std::fixed << std::setprecision(3) << std::setw(6) << v;
        return c.str();
    };
    os << "metrics  " << cell(ap) << " " << cell(ap50) << " " << cell(ap75) << " " << cell(ap_s) << " "
       << cell(ap_m) << "\n\n";
    os << "per-class (" << per_class_metric << "):\n";
    for (const auto& [c, v] : per_class) {
        std::string name = (c < static_cast<int>(class_names.size())) ? class_names[c]
                                                                      : "class_" + std::to_string(c);
        os << "  " << std::left << std::setw(16) << name << std::right << cell(v) << "\n";
    }
    if (mean_dice >= 0) os << "\nmean dice over matched pairs: " << std::setprecision(4) << mean_dice << "\n";
    os << "\nmatching diagnostics (all classes):\n  thr     TP     FP     FN\n";
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        os << "  " << std::setprecision(2) << thresholds[i] << " " << std::setw(6) << tp[i] << " " << std::setw(6)
           << fp[i] << " " << std::setw(6) << fn[i] << "\n";
    return os.str();
}

inline std::string EvalReport::to_kv(const std::vector<std::string>& class_names) const {
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    os << "ap " << ap << "\nap50 " << ap50 << "\nap75 " << ap75 << "\nap_s " << ap_s << "\nap_m " << ap_m << "\n";
    os << "per_class_metric " << per_class_metric << "\n";
    for (const auto& [c, v] : per_class) {
        std::string name = (c < static_cast<int>(class_names.size())) ? class_names[c]
                                                                      : "class_" + std::to_string(c);
        for (auto& ch : name)
            if (ch == ' ') ch = '_';
        os << "ap_class." << name << " " << v << "\n";
    }
    if (mean_dice >= 0) os << "mean_dice " << mean_dice << "\n";
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        os << "counts." << std::setprecision(2) << thresholds[i] << std::setprecision(6) << " tp " << tp[i]
           << " fp " << fp[i] << " fn " << fn[i] << "\n";
    return os.str();
}

}  // namespace csnake
