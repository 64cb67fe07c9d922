#pragma once

// Ground-truth encoding into per-class Gaussian heatmaps with radius and
// sub-cell offset regression targets, and the inverse decoding of network
// head maps into scored circles via 3x3 peak extraction.

#include "csnake/geometry.hpp"
#include "csnake/tensor.hpp"

namespace csnake {

template <class T>
struct DetectionTargets {
    TensorPtr<T> heatmap;     // [C, h, w], in [0,1], exactly 1 at center cells
    TensorPtr<T> radius_map;  // [1, h, w], output-grid units, set at centers only
    TensorPtr<T> offset_map;  // [2, h, w], sub-cell offsets at centers only
    std::vector<std::uint8_t> center_mask;  // h*w, 1 where a center lives
    int object_count = 0;
    int grid_w = 0, grid_h = 0;
    // pairs of gt indices that landed on the same output cell (encode is
    // lossy there: shared radius/offset cell, merged heat for equal classes)
    std::vector<std::pair<int, int>> collisions;
};

// Minimum-overlap keypoint radius rule: the largest displacement of a
// detected corner that still keeps IoU >= min_overlap with the true box.
inline double gaussian_radius(double box_h, double box_w, double min_overlap = 0.7) {
    double a1 = 1.0, b1 = box_h + box_w, c1 = box_w * box_h * (1.0 - min_overlap) / (1.0 + min_overlap);
    double r1 = (b1 - std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / (2.0 * a1);
    double a2 = 4.0, b2 = 2.0 * (box_h + box_w), c2 = (1.0 - min_overlap) * box_w * box_h;
    double r2 = (b2 - std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / (2.0 * a2);
    double a3 = 4.0 * min_overlap, b3 = -2.0 * min_overlap * (box_h + box_w);
    double c3 = (min_overlap - 1.0) * box_w * box_h;
    double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / (2.0 * a3);
    return std::min({r1, r2, r3});
}

// Object-adaptive Gaussian spread for a circle of radius r_out (output-grid
// units), using the bounding box of the circle under the 0.7 overlap rule.
inline double sigma_for_radius(double r_out) {
    return std::max(1.0, gaussian_radius(2.0 * r_out, 2.0 * r_out) / 3.0);
}

template <class T>
DetectionTargets<T> encode_targets(const std::vector<Circle>& gts, int input_w, int input_h, int R, int C) {
    if (input_w < 1 || input_h < 1 || R < 1 || C < 1)
        throw ContractViolation("encode_targets: bad dimensions");
    int gw = (input_w + R - 1) / R;
    int gh = (input_h + R - 1) / R;

    DetectionTargets<T> t;
    t.grid_w = gw;
    t.grid_h = gh;
    t.heatmap = Tensor<T>::zeros({C, gh, gw});
    t.radius_map = Tensor<T>::zeros({1, gh, gw});
    t.offset_map = Tensor<T>::zeros({2, gh, gw});
    t.center_mask.assign(static_cast<std::size_t>(gw) * gh, 0);

    std::vector<int> cell_owner(static_cast<std::size_t>(gw) * gh, -1);
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        const Circle& g = gts[gi];
        if (g.class_id < 0 || g.class_id >= C)
            throw ContractViolation("encode_targets: annotation " + std::to_string(gi) + " has class " +
                                    std::to_string(g.class_id) + " outside [0," + std::to_string(C) + ")");
        if (g.cx < 0 || g.cx >= input_w || g.cy < 0 || g.cy >= input_h)
            throw ContractViolation("encode_targets: annotation " + std::to_string(gi) +
                                    " lies outside the image");
        double gx = g.cx / R, gy = g.cy / R;
        int ix = std::min(gw - 1, static_cast<int>(std::floor(gx)));
        int iy = std::min(gh - 1, static_cast<int>(std::floor(gy)));
        std::size_t cell = static_cast<std::size_t>(iy) * gw + ix;

        double sigma = sigma_for_radius(g.r / R);
        int win = static_cast<int>(std::ceil(3.0 * sigma));  // truncate at 3 sigma
        T* plane = t.heatmap->data.data() + static_cast<std::size_t>(g.class_id) * gh * gw;
        for (int y = std::max(0, iy - win); y <= std::min(gh - 1, iy + win); ++y) {
            for (int x = std::max(0, ix - win); x <= std::min(gw - 1, ix + win); ++x) {
                double dx = x - ix, dy = y - iy;
                double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                T& cur = plane[static_cast<std::size_t>(y) * gw + x];
                cur = std::max(cur, static_cast<T>(v));  // same-channel overlap keeps the max
            }
        }
        plane[cell] = T(1);

        if (t.center_mask[cell]) t.collisions.emplace_back(cell_owner[cell], static_cast<int>(gi));
        cell_owner[cell] = static_cast<int>(gi);
        t.center_mask[cell] = 1;
        t.radius_map->data[cell] = static_cast<T>(g.r / R);
        t.offset_map->data[cell] = static_cast<T>(gx - ix);
        t.offset_map->data[static_cast<std::size_t>(gh) * gw + cell] = static_cast<T>(gy - iy);
        ++t.object_count;
    }
    return t;
}

struct Peak {
    int class_id = 0;
    int x = 0, y = 0;
    double score = 0.0;
};

// A cell is a peak iff it equals the maximum of its 3x3 neighborhood.
// Plateaus tie-break by row-major scan order; classes are never suppressed
// against each other.
template <class T>
std::vector<Peak> extract_peaks(const TensorPtr<T>& heatmap, int top_n) {
    if (heatmap->shape.size() != 3) throw ContractViolation("extract_peaks: expected [C,h,w] heatmap");
    int c = heatmap->shape[0], h = heatmap->shape[1], w = heatmap->shape[2];
    std::vector<Peak> peaks;
    for (int ic = 0; ic < c; ++ic) {
        const T* plane = heatmap->data.data() + static_cast<std::size_t>(ic) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                T v = plane[static_cast<std::size_t>(y) * w + x];
                if (!std::isfinite(static_cast<double>(v)))
                    throw ContractViolation("extract_peaks: non-finite heatmap value");
                bool is_peak = true;
                for (int dy = -1; dy <= 1 && is_peak; ++dy) {
                    int ny = y + dy;
                    if (ny < 0 || ny >= h) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = x + dx;
                        if (nx < 0 || nx >= w || (dx == 0 && dy == 0)) continue;
                        if (plane[static_cast<std::size_t>(ny) * w + nx] > v) {
                            is_peak = false;
                            break;
                        }
                    }
                }
                if (is_peak) peaks.push_back({ic, x, y, static_cast<double>(v)});
            }
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.score > b.score; });
    if (top_n >= 0 && peaks.size() > static_cast<std::size_t>(top_n)) peaks.resize(top_n);
    return peaks;
}

struct DetectionOutput {
    std::vector<Circle> circles;  // scores non-increasing, length <= top_n
};

template <class T>
DetectionOutput decode_circles(const TensorPtr<T>& heatmap, const TensorPtr<T>& radius_map,
                               const TensorPtr<T>& offset_map, int top_n, double ct_score, int R) {
    if (heatmap->shape.size() != 3 || radius_map->shape.size() != 3 || offset_map->shape.size() != 3)
        throw ContractViolation("decode_circles: expected rank-3 maps");
    int h = heatmap->shape[1], w = heatmap->shape[2];
    if (radius_map->shape[1] != h || radius_map->shape[2] != w || offset_map->shape[1] != h ||
        offset_map->shape[2] != w)
        throw ContractViolation("decode_circles: maps must share spatial extent");

    DetectionOutput out;
    for (const Peak& p : extract_peaks(heatmap, top_n)) {
        if (p.score < ct_score) continue;
        std::size_t cell = static_cast<std::size_t>(p.y) * w + p.x;
        double dx = static_cast<double>(offset_map->data[cell]);
        double dy = static_cast<double>(offset_map->data[static_cast<std::size_t>(h) * w + cell]);
        Circle c;
        c.cx = std::min(static_cast<double>(w) * R, std::max(0.0, (p.x + dx) * R));
        c.cy = std::min(static_cast<double>(h) * R, std::max(0.0, (p.y + dy) * R));
        c.r = std::max(1e-3, static_cast<double>(radius_map->data[cell]) * R);
        c.class_id = p.class_id;
        c.score = p.score;
        out.circles.push_back(c);
    }
    return out;
}

struct RoundtripResult {
    bool ok = false;
    std::vector<Circle> recovered;
    std::string message;
};

// Self-consistency harness: encode then decode must recover every ground
// truth (class exact, center within 0.5 px, radius within R/2). Requires
// pairwise center separation > 2R; same-cell collisions make the encoding
// lossy and are rejected up front.
template <class T>
RoundtripResult roundtrip_check(const std::vector<Circle>& gts, int input_w, int input_h, int R, int C,
                                int top_n, double ct_score = 0.3) {
    for (std::size_t i = 0; i < gts.size(); ++i)
        for (std::size_t j = i + 1; j < gts.size(); ++j)
            if (std::hypot(gts[i].cx - gts[j].cx, gts[i].cy - gts[j].cy) <= 2.0 * R)
                throw ContractViolation("roundtrip_check: circles " + std::to_string(i) + " and " +
                                        std::to_string(j) + " are separated by <= 2R; encoding would collide");

    auto targets = encode_targets<T>(gts, input_w, input_h, R, C);
    auto decoded = decode_circles(targets.heatmap, targets.radius_map, targets.offset_map, top_n, ct_score, R);

    RoundtripResult res;
    res.recovered = decoded.circles;
    std::vector<bool> used(decoded.circles.size(), false);
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
        const Circle& g = gts[gi];
        bool found = false;
        for (std::size_t di = 0; di < decoded.circles.size(); ++di) {
            if (used[di]) continue;
            const Circle& d = decoded.circles[di];
            if (d.class_id == g.class_id && std::hypot(d.cx - g.cx, d.cy - g.cy) <= 0.5 &&
                std::abs(d.r - g.r) <= R / 2.0) {
                used[di] = true;
                found = true;
                break;
            }
        }
        if (!found) {
            res.message = "ground truth " + std::to_string(gi) + " not recovered";
            return res;
        }
    }
    res.ok = true;
    return res;
}

}  // namespace csnake
