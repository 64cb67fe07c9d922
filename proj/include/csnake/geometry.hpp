#pragma once

// Circle and contour primitives.
//
// Coordinate convention used throughout: x grows right, y grows down,
// "top-most" means minimal y, and "clockwise" means clockwise on screen.
// signed_area() is negative for clockwise rings under this convention.

#include <cstdint>
#include <tuple>

#include "csnake/common.hpp"

namespace csnake {

struct Circle {
    double cx = 0, cy = 0;
    double r = 0;
    int class_id = 0;
    double score = 1.0;  // ground truth carries 1.0
};

struct Contour {
    std::vector<Vec2> vertices;
    int class_id = 0;
};

// Binary raster, row-major, 1 byte per pixel.
struct Mask {
    int w = 0, h = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w_, int h_) : w(w_), h(h_), data(static_cast<std::size_t>(w_) * h_, 0) {}
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * w + x]; }
    std::size_t area() const {
        std::size_t n = 0;
        for (auto v : data) n += v ? 1 : 0;
        return n;
    }
};

inline double signed_area(const std::vector<Vec2>& pts) {
    double acc = 0.0;
    std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[(i + 1) % n];
        acc += (b.x - a.x) * (b.y + a.y);
    }
    return 0.5 * acc;
}

inline double polygon_area(const std::vector<Vec2>& pts) { return std::abs(signed_area(pts)); }

inline double perimeter(const std::vector<Vec2>& pts) {
    double acc = 0.0;
    std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) acc += dist(pts[i], pts[(i + 1) % n]);
    return acc;
}

inline Vec2 centroid(const std::vector<Vec2>& pts) {
    Vec2 c;
    for (const Vec2& p : pts) {
        c.x += p.x;
        c.y += p.y;
    }
    if (!pts.empty()) {
        c.x /= static_cast<double>(pts.size());
        c.y /= static_cast<double>(pts.size());
    }
    return c;
}

inline double mean_radius(const std::vector<Vec2>& pts, const Vec2& center) {
    double acc = 0.0;
    for (const Vec2& p : pts) acc += dist(p, center);
    return pts.empty() ? 0.0 : acc / static_cast<double>(pts.size());
}

// N points on the circle, clockwise on screen, vertex 0 at the top-most
// point: vertex i = center + r * (cos t, sin t) with t = -pi/2 + 2*pi*i/n.
inline Contour sample_circle_contour(const Circle& c, int n) {
    if (n < 3) throw ContractViolation("sample_circle_contour: need at least 3 vertices");
    if (!(c.r > 0)) throw ContractViolation("sample_circle_contour: radius must be positive");
    Contour out;
    out.class_id = c.class_id;
    out.vertices.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = -kPi / 2.0 + 2.0 * kPi * i / n;
        out.vertices[i] = {c.cx + c.r * std::cos(t), c.cy + c.r * std::sin(t)};
    }
    return out;
}

// Resamples a closed polygon to n vertices equally spaced by arc length.
// Orientation is forced clockwise and the ring is rotated so vertex 0 is the
// input vertex closest to the top (minimal y, ties broken by minimal x).
// This mirrors the circle proposal's top-most start, so vertex i of a
// proposal and vertex i of its target correspond angularly.
inline Contour resample_polygon(const std::vector<Vec2>& points, int n, int class_id = 0) {
    if (n < 3) throw ContractViolation("resample_polygon: need at least 3 output vertices");
    if (points.size() < 3) throw ContractViolation("resample_polygon: need at least 3 input points");
    std::vector<Vec2> ring = points;
    if (signed_area(ring) > 0) std::reverse(ring.begin(), ring.end());

    std::size_t start = 0;
    for (std::size_t i = 1; i < ring.size(); ++i) {
        if (ring[i].y < ring[start].y || (ring[i].y == ring[start].y && ring[i].x < ring[start].x)) start = i;
    }
    std::rotate(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(start), ring.end());

    double total = perimeter(ring);
    if (!(total > 0)) throw ContractViolation("resample_polygon: degenerate polygon with zero perimeter");

    Contour out;
    out.class_id = class_id;
    out.vertices.resize(n);
    std::size_t m = ring.size();
    std::size_t seg = 0;
    double seg_start = 0.0;
    double seg_len = dist(ring[0], ring[1 % m]);
    for (int i = 0; i < n; ++i) {
        double target = total * i / n;
        while (seg_start + seg_len < target && seg + 1 < m) {
            seg_start += seg_len;
            ++seg;
            seg_len = dist(ring[seg], ring[(seg + 1) % m]);
        }
        double t = seg_len > 0 ? (target - seg_start) / seg_len : 0.0;
        const Vec2& a = ring[seg];
        const Vec2& b = ring[(seg + 1) % m];
        out.vertices[i] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    return out;
}

// Exact intersection-over-union of two discs via the lens area formula.
// Arguments are ordered canonically first so the result is bit-symmetric.
inline double circle_iou(const Circle& a_in, const Circle& b_in) {
    const Circle* pa = &a_in;
    const Circle* pb = &b_in;
    if (std::tie(pb->r, pb->cx, pb->cy) < std::tie(pa->r, pa->cx, pa->cy)) std::swap(pa, pb);
    const Circle& a = *pa;
    const Circle& b = *pb;
    if (!(a.r > 0) || !(b.r > 0)) throw ContractViolation("circle_iou: radii must be positive");
    double d = std::hypot(a.cx - b.cx, a.cy - b.cy);
    double area_a = kPi * a.r * a.r;
    double area_b = kPi * b.r * b.r;
    double inter;
    if (d >= a.r + b.r) {
        inter = 0.0;
    } else if (d <= std::abs(a.r - b.r)) {
        inter = std::min(area_a, area_b);
    } else {
        auto clamp1 = [](double v) { return std::min(1.0, std::max(-1.0, v)); };
        double cos_a = clamp1((d * d + a.r * a.r - b.r * b.r) / (2.0 * d * a.r));
        double cos_b = clamp1((d * d + b.r * b.r - a.r * a.r) / (2.0 * d * b.r));
        double lens = a.r * a.r * std::acos(cos_a) + b.r * b.r * std::acos(cos_b) -
                      0.5 * std::sqrt(std::max(0.0, (-d + a.r + b.r) * (d + a.r - b.r) * (d - a.r + b.r) *
                                                        (d + a.r + b.r)));
        inter = lens;
    }
    double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Scanline even-odd fill: a pixel is set iff its center lies inside the
// closed polygon. Deterministic; contours fully outside yield empty masks.
inline void rasterize_into(const std::vector<Vec2>& poly, Mask& mask) {
    std::size_t n = poly.size();
    if (n < 3) return;
    double ymin = poly[0].y, ymax = poly[0].y;
    for (const Vec2& p : poly) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    int y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    int y1 = std::min(mask.h - 1, static_cast<int>(std::ceil(ymax)));
    std::vector<double> xs;
    for (int y = y0; y <= y1; ++y) {
        double yc = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % n];
            if (a.y == b.y) continue;
            // half-open span so a scanline through a shared vertex counts once
            if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y))
                xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            int px0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
            int px1 = std::min(mask.w - 1, static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1);
            for (int x = px0; x <= px1; ++x) mask.at(x, y) = 1;
        }
    }
}

inline Mask rasterize_contour(const Contour& c, int width, int height) {
    if (width < 1 || height < 1) throw ContractViolation("rasterize_contour: canvas must be at least 1x1");
    Mask mask(width, height);
    rasterize_into(c.vertices, mask);
    return mask;
}

inline double mask_iou(const Mask& a, const Mask& b) {
    if (a.w != b.w || a.h != b.h) throw ContractViolation("mask_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb) ? 1 : 0;
        uni += (va || vb) ? 1 : 0;
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline double mask_dice(const Mask& a, const Mask& b) {
    if (a.w != b.w || a.h != b.h) throw ContractViolation("mask_dice: size mismatch");
    std::size_t inter = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb) ? 1 : 0;
        sa += va ? 1 : 0;
        sb += vb ? 1 : 0;
    }
    return (sa + sb) ? 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb) : 0.0;
}

}  // namespace csnake
