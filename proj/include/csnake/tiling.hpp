#pragma once

// Slide tiling with overlap and annotation-to-patch clipping.

#include "csnake/geometry.hpp"

namespace csnake {

struct TileGrid {
    int src_w = 0, src_h = 0;
    int tile_size = 512;
    int overlap = 256;
    std::vector<int> x_origins, y_origins;

    struct Tile {
        int x = 0, y = 0;
    };
    std::vector<Tile> tiles;  // row-major over (y_origins, x_origins)
};

// Per axis: origins 0, stride, 2*stride, ... plus a final origin clamped to
// dim - tile_size so the last tile ends exactly at the border. Dimensions
// smaller than the tile get a single origin at 0 (the patch writer pads).
inline std::vector<int> tile_origins(int dim, int tile_size, int overlap) {
    int stride = tile_size - overlap;
    std::vector<int> origins;
    if (dim <= tile_size) {
        origins.push_back(0);
        return origins;
    }
    for (int o = 0; o + tile_size < dim; o += stride) origins.push_back(o);
    int last = dim - tile_size;
    if (origins.empty() || origins.back() != last) origins.push_back(last);
    return origins;
}

inline TileGrid tile_grid(int w, int h, int tile_size = 512, int overlap = 256) {
    if (tile_size < 1) throw ContractViolation("tile_grid: tile_size must be positive");
    if (overlap < 0 || overlap >= tile_size)
        throw ContractViolation("tile_grid: overlap must satisfy 0 <= overlap < tile_size");
    if (w < 1 || h < 1) throw ContractViolation("tile_grid: empty source image");
    TileGrid g;
    g.src_w = w;
    g.src_h = h;
    g.tile_size = tile_size;
    g.overlap = overlap;
    g.x_origins = tile_origins(w, tile_size, overlap);
    g.y_origins = tile_origins(h, tile_size, overlap);
    for (int yo : g.y_origins)
        for (int xo : g.x_origins) g.tiles.push_back({xo, yo});
    return g;
}

// Sutherland-Hodgman clip of a polygon against an axis-aligned rectangle.
inline std::vector<Vec2> clip_polygon_rect(const std::vector<Vec2>& poly, double x0, double y0, double x1,
                                           double y1) {
    auto clip_edge = [](const std::vector<Vec2>& in, auto inside, auto intersect) {
        std::vector<Vec2> out;
        std::size_t n = in.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = in[i];
            const Vec2& b = in[(i + 1) % n];
            bool ia = inside(a), ib = inside(b);
            if (ia && ib) {
                out.push_back(b);
            } else if (ia && !ib) {
                out.push_back(intersect(a, b));
            } else if (!ia && ib) {
                out.push_back(intersect(a, b));
                out.push_back(b);
            }
        }
        return out;
    };
    auto at_x = [](const Vec2& a, const Vec2& b, double x) {
        double t = (x - a.x) / (b.x - a.x);
        return Vec2{x, a.y + t * (b.y - a.y)};
    };
    auto at_y = [](const Vec2& a, const Vec2& b, double y) {
        double t = (y - a.y) / (b.y - a.y);
        return Vec2{a.x + t * (b.x - a.x), y};
    };
    std::vector<Vec2> p = poly;
    p = clip_edge(p, [&](const Vec2& v) { return v.x >= x0; },
                  [&](const Vec2& a, const Vec2& b) { return at_x(a, b, x0); });
    if (p.empty()) return p;
    p = clip_edge(p, [&](const Vec2& v) { return v.x <= x1; },
                  [&](const Vec2& a, const Vec2& b) { return at_x(a, b, x1); });
    if (p.empty()) return p;
    p = clip_edge(p, [&](const Vec2& v) { return v.y >= y0; },
                  [&](const Vec2& a, const Vec2& b) { return at_y(a, b, y0); });
    if (p.empty()) return p;
    p = clip_edge(p, [&](const Vec2& v) { return v.y <= y1; },
                  [&](const Vec2& a, const Vec2& b) { return at_y(a, b, y1); });
    return p;
}

struct SlideAnnotation {
    int class_id = 0;
    std::vector<Vec2> polygon;  // slide coordinates
};

struct PatchAnnotation {
    int class_id = 0;
    std::vector<Vec2> polygon;  // tile-local coordinates
    int source_index = -1;      // index into the slide annotation list
};

struct TilePatch {
    TileGrid::Tile tile;
    std::vector<PatchAnnotation> annotations;
};

// Assigns every annotation to each tile it intersects, translated to
// tile-local coordinates and clipped to the tile rectangle. Pieces keeping
// less than min_keep_frac of their original area are dropped for that tile.
inline std::vector<TilePatch> annotations_to_patches(const std::vector<SlideAnnotation>& annotations,
                                                     const TileGrid& grid, double min_keep_frac = 0.3) {
    std::vector<TilePatch> out;
    out.reserve(grid.tiles.size());
    for (const auto& tile : grid.tiles) {
        TilePatch patch;
        patch.tile = tile;
        double x0 = tile.x, y0 = tile.y;
        double x1 = tile.x + grid.tile_size, y1 = tile.y + grid.tile_size;
        for (std::size_t ai = 0; ai < annotations.size(); ++ai) {
            const auto& ann = annotations[ai];
            if (ann.polygon.size() < 3) continue;
            auto clipped = clip_polygon_rect(ann.polygon, x0, y0, x1, y1);
            if (clipped.size() < 3) continue;
            double kept = polygon_area(clipped);
            double orig = polygon_area(ann.polygon);
            if (orig > 0 && kept < min_keep_frac * orig) continue;
            PatchAnnotation pa;
            pa.class_id = ann.class_id;
            pa.source_index = static_cast<int>(ai);
            pa.polygon.reserve(clipped.size());
            for (const Vec2& v : clipped) pa.polygon.push_back({v.x - tile.x, v.y - tile.y});
            patch.annotations.push_back(std::move(pa));
        }
        out.push_back(std::move(patch));
    }
    return out;
}

// Per-class binary masks for one tile.
inline std::vector<Mask> patch_class_masks(const TilePatch& patch, int tile_size, int class_count) {
    std::vector<Mask> masks;
    masks.reserve(class_count);
    for (int c = 0; c < class_count; ++c) masks.emplace_back(tile_size, tile_size);
    for (const auto& ann : patch.annotations) {
        if (ann.class_id < 0 || ann.class_id >= class_count)
            throw ContractViolation("patch_class_masks: class id out of range");
        rasterize_into(ann.polygon, masks[ann.class_id]);
    }
    return masks;
}

inline std::string patch_file_name(const std::string& wsi_id, int origin_x, int origin_y) {
    return wsi_id + "_x" + std::to_string(origin_x) + "_y" + std::to_string(origin_y) + ".png";
}

}  // namespace csnake
