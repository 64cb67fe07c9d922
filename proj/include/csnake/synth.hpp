#pragma once

// Seeded synthetic disk scenes standing in for slide patches: four classes
// of quasi-circular shapes (small eosinophil-like disks, clustered
// papillae-like disks, tiny oval RBC-like cells, large cluster-like blobs)
// on a textured background. Scenes are byte-deterministic per seed.

#include <filesystem>

#include "csnake/catalog.hpp"
#include "csnake/coco.hpp"
#include "csnake/config.hpp"
#include "csnake/png_io.hpp"

namespace csnake {

inline const std::vector<std::string>& synth_class_names() {
    static const std::vector<std::string> names{"Eos", "Papillae Eos", "RBC", "RBC Cluster"};
    return names;
}

struct SynthInstance {
    int class_id = 0;
    std::vector<Vec2> boundary;  // dense polygon in image coordinates
    Circle circle;               // centroid + mean radial distance
};

struct SynthScene {
    int width = 512, height = 512;
    ImageU8 image;
    std::vector<SynthInstance> instances;
};

namespace synthdetail {

struct ShapeSpec {
    double r_lo, r_hi;       // base radius range
    double wobble;           // radial noise amplitude (fraction of radius)
    double squash;           // 2-lobe amplitude, makes ovals
    std::array<int, 3> rgb;  // base fill color
};

inline const std::array<ShapeSpec, 4>& shape_specs() {
    // class order matches synth_class_names()
    static const std::array<ShapeSpec, 4> specs{{
        {7.0, 13.0, 0.13, 0.05, {204, 84, 94}},    // Eos: small red disks
        {9.0, 15.0, 0.12, 0.04, {150, 88, 160}},   // Papillae Eos: purple disks
        {5.0, 8.0, 0.08, 0.22, {232, 140, 92}},    // RBC: tiny ovals
        {28.0, 44.0, 0.16, 0.06, {170, 52, 60}},   // RBC Cluster: large blobs
    }};
    return specs;
}

// closed radial-perturbation boundary around a center
inline std::vector<Vec2> make_boundary(Rng& rng, const Vec2& center, const ShapeSpec& spec, double base_r,
                                       int samples = 180) {
    std::array<double, 4> amp;
    std::array<double, 4> phase;
    for (int k = 0; k < 4; ++k) {
        amp[k] = rng.uniform(0.25, 1.0) * spec.wobble / (k + 1);
        phase[k] = rng.uniform(0.0, 2.0 * kPi);
    }
    double squash_phase = rng.uniform(0.0, 2.0 * kPi);
    std::vector<Vec2> pts(samples);
    for (int i = 0; i < samples; ++i) {
        double t = 2.0 * kPi * i / samples;
        double rr = 1.0 + spec.squash * std::cos(2.0 * t + squash_phase);
        for (int k = 0; k < 4; ++k) rr += amp[k] * std::cos((k + 2) * t + phase[k]);
        double r = std::max(2.0, base_r * rr);
        pts[i] = {center.x + r * std::cos(t), center.y + r * std::sin(t)};
    }
    return pts;
}

inline std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
}

}  // namespace synthdetail

// Deterministic scene: textured pale background, colored shapes with a
// darker rim so boundaries carry signal, then mild pixel noise.
inline SynthScene synth_scene(std::uint64_t seed, int width = 512, int height = 512,
                              const std::array<int, 4>& class_counts = {6, 4, 5, 1}) {
    using namespace synthdetail;
    Rng rng(seed);
    SynthScene scene;
    scene.width = width;
    scene.height = height;
    scene.image = ImageU8(width, height, 3);

    // background: pale tissue-like wash with low-frequency blotches
    double bx = rng.uniform(0.0, 2.0 * kPi), by = rng.uniform(0.0, 2.0 * kPi);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double blotch = 10.0 * std::sin(x * 0.018 + bx) * std::cos(y * 0.023 + by);
            scene.image.at(x, y, 0) = clamp_u8(238 + blotch + rng.normal(0.0, 3.0));
            scene.image.at(x, y, 1) = clamp_u8(226 + blotch + rng.normal(0.0, 3.0));
            scene.image.at(x, y, 2) = clamp_u8(232 + blotch + rng.normal(0.0, 3.0));
        }
    }

    // placement: rejection sampling, no overlap, margins inside the canvas
    struct Placed {
        Vec2 c;
        double r;
    };
    std::vector<Placed> placed;
    auto try_place = [&](double base_r, double cluster_near, const Placed* anchor) -> Vec2 {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Vec2 c;
            if (anchor && cluster_near > 0) {
                double ang = rng.uniform(0.0, 2.0 * kPi);
                double d = anchor->r + base_r + rng.uniform(4.0, cluster_near);
                c = {anchor->c.x + d * std::cos(ang), anchor->c.y + d * std::sin(ang)};
            } else {
                c = {rng.uniform(base_r + 8.0, width - base_r - 8.0),
                     rng.uniform(base_r + 8.0, height - base_r - 8.0)};
            }
            if (c.x < base_r + 6 || c.x > width - base_r - 6 || c.y < base_r + 6 || c.y > height - base_r - 6)
                continue;
            bool ok = true;
            for (const auto& p : placed)
                if (dist(p.c, c) < p.r + base_r + 10.0) ok = false;
            if (ok) return c;
        }
        return {-1, -1};
    };

    for (int cls = 0; cls < 4; ++cls) {
        const ShapeSpec& spec = shape_specs()[cls];
        const Placed* anchor = nullptr;
        for (int k = 0; k < class_counts[cls]; ++k) {
            double base_r = rng.uniform(spec.r_lo, spec.r_hi);
            // papillae-like cells cluster near each other
            Vec2 c = try_place(base_r, cls == 1 && anchor ? 18.0 : 0.0, cls == 1 ? anchor : nullptr);
            if (c.x < 0) c = try_place(base_r, 0.0, nullptr);
            if (c.x < 0) continue;
            placed.push_back({c, base_r * 1.35});
            if (cls == 1) anchor = &placed.back();

            SynthInstance inst;
            inst.class_id = cls;
            inst.boundary = make_boundary(rng, c, spec, base_r);
            Vec2 ctr = centroid(inst.boundary);
            inst.circle = {ctr.x, ctr.y, mean_radius(inst.boundary, ctr), cls, 1.0};

            // fill with per-instance tint and inner texture
            double tint = rng.uniform(-14.0, 14.0);
            Mask m(width, height);
            rasterize_into(inst.boundary, m);
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    if (!m.at(x, y)) continue;
                    double grain = rng.normal(0.0, 4.0);
                    scene.image.at(x, y, 0) = clamp_u8(spec.rgb[0] + tint + grain);
                    scene.image.at(x, y, 1) = clamp_u8(spec.rgb[1] + tint * 0.5 + grain);
                    scene.image.at(x, y, 2) = clamp_u8(spec.rgb[2] + tint * 0.5 + grain);
                }
            }
            // darker rim: stamp boundary samples
            for (const Vec2& p : inst.boundary) {
                int px = static_cast<int>(std::lround(p.x));
                int py = static_cast<int>(std::lround(p.y));
                for (int dy = -1; dy <= 0; ++dy) {
                    for (int dx = -1; dx <= 0; ++dx) {
                        int qx = px + dx, qy = py + dy;
                        if (qx < 0 || qx >= width || qy < 0 || qy >= height) continue;
                        for (int ch = 0; ch < 3; ++ch)
                            scene.image.at(qx, qy, ch) =
                                clamp_u8(scene.image.at(qx, qy, ch) * 0.55);
                    }
                }
            }
            scene.instances.push_back(std::move(inst));
        }
    }
    return scene;
}

// Renders a scene's instances into COCO entries appended to `doc`.
inline void scene_to_coco(const SynthScene& scene, const std::string& file_name, int image_id,
                          CocoDocument& doc, int& next_ann_id) {
    doc.images.push_back({image_id, file_name, scene.width, scene.height});
    for (const auto& inst : scene.instances) {
        CocoAnnotation a;
        a.id = next_ann_id++;
        a.image_id = image_id;
        a.category_id = inst.class_id + 1;  // COCO ids are 1-based
        std::vector<double> flat;
        flat.reserve(inst.boundary.size() * 2);
        for (const Vec2& p : inst.boundary) {
            flat.push_back(p.x);
            flat.push_back(p.y);
        }
        a.segmentation.push_back(std::move(flat));
        a.area = polygon_area(inst.boundary);
        a.bbox = cocodetail::tight_bbox(a.segmentation);
        doc.annotations.push_back(std::move(a));
    }
}

struct SynthDataset {
    std::string root;
    std::string coco_path;
    std::string registry_path;
    std::string config_path;
    int scenes = 0;
};

// Writes a ready-to-train synthetic dataset: PNG scenes, one COCO document,
// a dataset registration (train and eval names over the same scenes, for
// overfit-style runs) and a config pre-pointing at them.
inline SynthDataset make_synth_dataset(const std::string& out_dir, int scenes, std::uint64_t seed,
                                       int size = 512, const std::array<int, 4>& class_counts = {6, 4, 5, 1}) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");

    CocoDocument doc;
    doc.info.description = "synthetic circle-snake scenes";
    doc.info.contributor = "synth generator";
    doc.info.date_created = "seed " + std::to_string(seed);
    for (std::size_t i = 0; i < synth_class_names().size(); ++i)
        doc.categories.push_back({static_cast<int>(i) + 1, synth_class_names()[i], "Cell"});

    int next_ann = 1;
    for (int s = 0; s < scenes; ++s) {
        SynthScene scene = synth_scene(seed + static_cast<std::uint64_t>(s) * 1000003ull, size, size,
                                       class_counts);
        std::string name = "scene_" + std::to_string(s) + ".png";
        write_png((fs::path(out_dir) / "images" / name).string(), scene.image);
        scene_to_coco(scene, name, s + 1, doc, next_ann);
    }

    SynthDataset ds;
    ds.root = out_dir;
    ds.scenes = scenes;
    ds.coco_path = (fs::path(out_dir) / "synth_coco.json").string();
    write_coco_file(doc, ds.coco_path);

    DatasetRegistry reg;
    std::string img_root = (fs::path(out_dir) / "images").string();
    reg["synthTrain"] = {"coco", img_root, ds.coco_path, "train"};
    reg["synthEval"] = {"coco_test", img_root, ds.coco_path, "test"};
    ds.registry_path = (fs::path(out_dir) / "catalog.json").string();
    save_registry(reg, ds.registry_path);

    RunConfig cfg;
    cfg.train_dataset = "synthTrain";
    cfg.test_dataset = "synthEval";
    cfg.catalog = ds.registry_path;
    cfg.model_dir = (fs::path(out_dir) / "out").string();
    cfg.seed = static_cast<int>(seed % 1000000007ull);
    ds.config_path = (fs::path(out_dir) / "synth.yaml").string();
    std::ofstream os(ds.config_path);
    os << serialize_config(cfg);
    return ds;
}

}  // namespace csnake
