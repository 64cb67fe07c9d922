#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "csnake/catalog.hpp"
#include "csnake/coco.hpp"
#include "csnake/png_io.hpp"
#include "csnake/synth.hpp"
#include "csnake/tiling.hpp"

using namespace csnake;
namespace fs = std::filesystem;

TEST(Tiling, StandardGrid) {
    auto g = tile_grid(1024, 1024, 512, 256);
    EXPECT_EQ(g.x_origins, (std::vector<int>{0, 256, 512}));
    EXPECT_EQ(g.y_origins, (std::vector<int>{0, 256, 512}));
    EXPECT_EQ(g.tiles.size(), 9u);
}

TEST(Tiling, SingleTileAndClampedGrid) {
    auto one = tile_grid(512, 512, 512, 256);
    ASSERT_EQ(one.tiles.size(), 1u);
    EXPECT_EQ(one.tiles[0].x, 0);
    EXPECT_EQ(one.tiles[0].y, 0);

    auto g = tile_grid(700, 512, 512, 256);
    EXPECT_EQ(g.x_origins, (std::vector<int>{0, 188}));
    EXPECT_EQ(g.y_origins, (std::vector<int>{0}));
    EXPECT_EQ(g.tiles.size(), 2u);
}

TEST(Tiling, FullCoverage) {
    for (auto [w, h] : std::vector<std::pair<int, int>>{{1024, 1024}, {700, 512}, {1300, 900}, {513, 513}}) {
        auto g = tile_grid(w, h, 512, 256);
        std::vector<std::uint8_t> cover(static_cast<std::size_t>(w) * h, 0);
        for (const auto& t : g.tiles)
            for (int y = t.y; y < std::min(h, t.y + g.tile_size); ++y)
                for (int x = t.x; x < std::min(w, t.x + g.tile_size); ++x)
                    cover[static_cast<std::size_t>(y) * w + x] = 1;
        for (auto v : cover) ASSERT_EQ(v, 1);
    }
}

TEST(Tiling, BadOverlapRejected) {
    EXPECT_THROW(tile_grid(1024, 1024, 512, 512), ContractViolation);
    EXPECT_THROW(tile_grid(1024, 1024, 512, -1), ContractViolation);
}

TEST(Patches, AnnotationAssignmentAndTranslation) {
    auto g = tile_grid(1024, 1024, 512, 256);
    // square fully inside the top-left tile region but overlapping the
    // second tile's range as well (x in [200,300] intersects tiles at 0 and 256)
    SlideAnnotation ann{0, {{200, 100}, {300, 100}, {300, 200}, {200, 200}}};
    auto patches = annotations_to_patches({ann}, g, 0.0);
    int appearances = 0;
    for (const auto& p : patches) {
        bool intersects = !(300 <= p.tile.x || 200 >= p.tile.x + 512 || 200 <= p.tile.y || 100 >= p.tile.y + 512);
        if (!p.annotations.empty()) {
            ++appearances;
            EXPECT_TRUE(intersects);
            const auto& pa = p.annotations[0];
            // translated into tile-local coordinates
            for (const auto& v : pa.polygon) {
                EXPECT_GE(v.x, 0.0);
                EXPECT_LE(v.x, 512.0);
            }
        }
    }
    EXPECT_GE(appearances, 2);  // straddles at least two tile rectangles
}

TEST(Patches, AreaConservedWithoutOverlap) {
    auto g = tile_grid(1024, 1024, 512, 0);
    SlideAnnotation ann{1, {{400, 480}, {700, 480}, {700, 620}, {400, 620}}};
    double orig = polygon_area(ann.polygon);
    auto patches = annotations_to_patches({ann}, g, 0.0);
    double total = 0;
    for (const auto& p : patches)
        for (const auto& pa : p.annotations) total += polygon_area(pa.polygon);
    EXPECT_NEAR(total, orig, 1e-6);  // partition: clipped pieces sum exactly
}

TEST(Patches, OverlapDuplicatesNeverLose) {
    auto g = tile_grid(1024, 1024, 512, 256);
    SlideAnnotation ann{0, {{240, 240}, {340, 240}, {340, 340}, {240, 340}}};
    double orig = polygon_area(ann.polygon);
    auto patches = annotations_to_patches({ann}, g, 0.0);
    double total = 0;
    for (const auto& p : patches)
        for (const auto& pa : p.annotations) total += polygon_area(pa.polygon);
    EXPECT_GE(total, orig - 1e-6);
}

TEST(Patches, SmallPiecesDropped) {
    auto g = tile_grid(1024, 512, 512, 0);
    // 95% of this square lies in the left tile; the right sliver is < 30%
    SlideAnnotation ann{0, {{472, 100}, {522, 100}, {522, 200}, {472, 200}}};
    auto patches = annotations_to_patches({ann}, g, 0.3);
    int appearances = 0;
    for (const auto& p : patches) appearances += static_cast<int>(p.annotations.size());
    EXPECT_EQ(appearances, 1);
}

TEST(Patches, RasterizationCommutesWithTranslation) {
    std::vector<Vec2> poly{{600, 300}, {680, 310}, {660, 380}, {590, 360}};
    auto g = tile_grid(1024, 1024, 512, 256);
    auto patches = annotations_to_patches({SlideAnnotation{0, poly}}, g, 0.0);
    for (const auto& p : patches) {
        for (const auto& pa : p.annotations) {
            Mask local(512, 512);
            rasterize_into(pa.polygon, local);
            Mask global(1024, 1024);
            rasterize_into(poly, global);
            // compare the tile window of the global mask with the local raster
            std::size_t diff = 0;
            for (int y = 0; y < 512; ++y)
                for (int x = 0; x < 512; ++x) {
                    int gx = x + p.tile.x, gy = y + p.tile.y;
                    std::uint8_t gv = (gx < 1024 && gy < 1024) ? global.at(gx, gy) : 0;
                    if (gv != local.at(x, y)) ++diff;
                }
            EXPECT_LE(diff, 64u);  // boundary pixels only
        }
    }
}

namespace {

std::string example_coco_text() {
    // numeric instantiation of the documented two-image example layout
    return R"({
  "info": {"description": "Example COCO file", "version": "1.0", "year": 2023,
           "contributor": "Your Name", "date_created": "2023-06-14"},
  "images": [
    {"id": 1, "file_name": "image1.jpg", "width": 512, "height": 512},
    {"id": 2, "file_name": "image2.jpg", "width": 512, "height": 512}
  ],
  "annotations": [
    {"id": 1, "image_id": 1, "category_id": 1,
     "segmentation": [[10.0, 10.0, 20.0, 10.0, 20.0, 20.0, 10.0, 20.0]],
     "area": 100.0, "bbox": [10.0, 10.0, 10.0, 10.0]},
    {"id": 2, "image_id": 2, "category_id": 2,
     "segmentation": [[30.0, 30.0, 50.0, 30.0, 50.0, 40.0, 30.0, 40.0]],
     "area": 200.0, "bbox": [30.0, 30.0, 20.0, 10.0]}
  ],
  "categories": [
    {"id": 1, "name": "Class 1", "supercategory": "Class"},
    {"id": 2, "name": "Class 2", "supercategory": "Class"}
  ]
})";
}

}  // namespace

TEST(Coco, ExampleDocumentParses) {
    auto doc = read_coco(example_coco_text());
    EXPECT_EQ(doc.images.size(), 2u);
    EXPECT_EQ(doc.annotations.size(), 2u);
    EXPECT_EQ(doc.categories.size(), 2u);
    EXPECT_EQ(doc.info.description, "Example COCO file");
    EXPECT_EQ(doc.images[1].file_name, "image2.jpg");
    EXPECT_DOUBLE_EQ(doc.annotations[1].area, 200.0);
}

TEST(Coco, RoundTripIsSemanticIdentity) {
    auto doc = read_coco(example_coco_text());
    auto text = write_coco(doc);
    auto doc2 = read_coco(text);
    EXPECT_TRUE(coco_equal(doc, doc2));
    EXPECT_EQ(write_coco(doc2), text);
}

TEST(Coco, EmptyListsAreValid) {
    auto doc = read_coco(R"({"info": {}, "images": [], "annotations": [], "categories": []})");
    EXPECT_TRUE(doc.images.empty());
}

TEST(Coco, DanglingIdsRejectedWithIds) {
    std::string text = R"({
      "images": [{"id": 1, "file_name": "a.png", "width": 64, "height": 64}],
      "annotations": [
        {"id": 7, "image_id": 99, "category_id": 1,
         "segmentation": [[0.0,0.0, 10.0,0.0, 10.0,10.0]], "area": 50.0, "bbox": [0,0,10,10]}
      ],
      "categories": [{"id": 1, "name": "c", "supercategory": "s"}]
    })";
    try {
        read_coco(text);
        FAIL() << "expected rejection";
    } catch (const IoError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("annotation 7"), std::string::npos);
        EXPECT_NE(msg.find("99"), std::string::npos);
    }
}

TEST(Coco, MalformedPolygonsRejected) {
    std::string odd = R"({
      "images": [{"id": 1, "file_name": "a.png", "width": 64, "height": 64}],
      "annotations": [
        {"id": 3, "image_id": 1, "category_id": 1,
         "segmentation": [[0.0, 0.0, 10.0, 0.0, 10.0]], "area": 50.0, "bbox": [0,0,10,10]}
      ],
      "categories": [{"id": 1, "name": "c", "supercategory": "s"}]
    })";
    EXPECT_THROW(read_coco(odd), IoError);

    std::string two_points = R"({
      "images": [{"id": 1, "file_name": "a.png", "width": 64, "height": 64}],
      "annotations": [
        {"id": 4, "image_id": 1, "category_id": 1,
         "segmentation": [[0.0, 0.0, 10.0, 0.0]], "area": 50.0, "bbox": [0,0,10,0]}
      ],
      "categories": [{"id": 1, "name": "c", "supercategory": "s"}]
    })";
    EXPECT_THROW(read_coco(two_points), IoError);
}

TEST(Coco, LooseBboxOrAreaRejected) {
    std::string bad_bbox = R"({
      "images": [{"id": 1, "file_name": "a.png", "width": 64, "height": 64}],
      "annotations": [
        {"id": 5, "image_id": 1, "category_id": 1,
         "segmentation": [[10.0,10.0, 20.0,10.0, 20.0,20.0, 10.0,20.0]],
         "area": 100.0, "bbox": [0.0, 10.0, 20.0, 10.0]}
      ],
      "categories": [{"id": 1, "name": "c", "supercategory": "s"}]
    })";
    EXPECT_THROW(read_coco(bad_bbox), IoError);

    std::string bad_area = R"({
      "images": [{"id": 1, "file_name": "a.png", "width": 64, "height": 64}],
      "annotations": [
        {"id": 6, "image_id": 1, "category_id": 1,
         "segmentation": [[10.0,10.0, 20.0,10.0, 20.0,20.0, 10.0,20.0]],
         "area": 150.0, "bbox": [10.0, 10.0, 10.0, 10.0]}
      ],
      "categories": [{"id": 1, "name": "c", "supercategory": "s"}]
    })";
    EXPECT_THROW(read_coco(bad_area), IoError);
}

TEST(Split, PaperRatioCases) {
    std::vector<std::string> fifty;
    for (int i = 0; i < 50; ++i) fifty.push_back("wsi_" + std::to_string(i));
    auto cat = split_catalog(fifty, {7, 1, 2}, 1234);
    EXPECT_EQ(cat.ids_in(Split::Train).size(), 35u);
    EXPECT_EQ(cat.ids_in(Split::Val).size(), 5u);
    EXPECT_EQ(cat.ids_in(Split::Test).size(), 10u);

    std::vector<std::string> ten;
    for (int i = 0; i < 10; ++i) ten.push_back("w" + std::to_string(i));
    auto cat10 = split_catalog(ten, {7, 1, 2}, 7);
    EXPECT_EQ(cat10.ids_in(Split::Train).size(), 7u);
    EXPECT_EQ(cat10.ids_in(Split::Val).size(), 1u);
    EXPECT_EQ(cat10.ids_in(Split::Test).size(), 2u);
}

TEST(Split, DeterministicAndExhaustive) {
    std::vector<std::string> ids;
    for (int i = 0; i < 23; ++i) ids.push_back("s" + std::to_string(i));
    auto a = split_catalog(ids, {7, 1, 2}, 42);
    auto b = split_catalog(ids, {7, 1, 2}, 42);
    EXPECT_EQ(a.assignment, b.assignment);
    auto c = split_catalog(ids, {7, 1, 2}, 43);
    EXPECT_NE(a.assignment, c.assignment);  // different seed, different shuffle
    // exhaustive and disjoint by construction of the map
    EXPECT_EQ(a.assignment.size(), ids.size());
    std::size_t total = a.ids_in(Split::Train).size() + a.ids_in(Split::Val).size() + a.ids_in(Split::Test).size();
    EXPECT_EQ(total, ids.size());
}

TEST(Split, TooFewSlidesRejected) {
    EXPECT_THROW(split_catalog({"a", "b"}, {7, 1, 2}, 1), ContractViolation);
    EXPECT_THROW(split_catalog({}, {7, 1, 2}, 1), ContractViolation);
}

TEST(Stats, SumConsistencyAndTotals) {
    // the documented grand totals: 8581 + 1172 + 2453 = 12206
    EXPECT_EQ(8581 + 1172 + 2453, 12206);

    CocoDocument train, val, test;
    for (auto* d : {&train, &val, &test}) {
        d->categories.push_back({1, "Eos", "Cell"});
        d->categories.push_back({2, "RBC", "Cell"});
        d->images.push_back({1, "x.png", 64, 64});
    }
    auto add_ann = [](CocoDocument& d, int id, int cat) {
        CocoAnnotation a;
        a.id = id;
        a.image_id = 1;
        a.category_id = cat;
        a.segmentation = {{0.0, 0.0, 10.0, 0.0, 10.0, 10.0, 0.0, 10.0}};
        a.area = 100.0;
        a.bbox = {0, 0, 10, 10};
        d.annotations.push_back(a);
    };
    add_ann(train, 1, 1);
    add_ann(train, 2, 1);
    add_ann(train, 3, 2);
    add_ann(val, 4, 1);
    add_ann(test, 5, 2);

    auto st = catalog_stats({&train, &val, &test});
    EXPECT_TRUE(st.sums_consistent());
    EXPECT_EQ(st.grand_total, 5u);
    EXPECT_EQ(st.split_totals[0], 3u);
    EXPECT_EQ(st.counts[0][0], 2u);  // Eos in train
    EXPECT_EQ(st.counts[1][2], 1u);  // RBC in test
    auto table = st.to_table();
    EXPECT_NE(table.find("Eos"), std::string::npos);
    EXPECT_NE(table.find("Total"), std::string::npos);
}

TEST(Stats, EmptyIsAllZero) {
    CocoDocument empty;
    auto st = catalog_stats({&empty, &empty, &empty});
    EXPECT_EQ(st.grand_total, 0u);
    EXPECT_TRUE(st.sums_consistent());
}

TEST(Synth, DeterministicPerSeed) {
    auto a = synth_scene(77, 256, 256, {3, 2, 2, 1});
    auto b = synth_scene(77, 256, 256, {3, 2, 2, 1});
    EXPECT_EQ(a.image.pix, b.image.pix);
    ASSERT_EQ(a.instances.size(), b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        EXPECT_EQ(a.instances[i].class_id, b.instances[i].class_id);
        EXPECT_DOUBLE_EQ(a.instances[i].circle.cx, b.instances[i].circle.cx);
    }
    auto c = synth_scene(78, 256, 256, {3, 2, 2, 1});
    EXPECT_NE(a.image.pix, c.image.pix);
}

TEST(Synth, RequestedInstanceCount) {
    auto s = synth_scene(1, 512, 512, {4, 3, 2, 1});
    EXPECT_EQ(s.instances.size(), 10u);
    int per_class[4] = {0, 0, 0, 0};
    for (const auto& inst : s.instances) ++per_class[inst.class_id];
    EXPECT_EQ(per_class[0], 4);
    EXPECT_EQ(per_class[1], 3);
    EXPECT_EQ(per_class[2], 2);
    EXPECT_EQ(per_class[3], 1);
}

TEST(Synth, ContourRasterAreaMatchesGenerator) {
    auto s = synth_scene(5, 512, 512, {5, 3, 4, 1});
    for (const auto& inst : s.instances) {
        double gen_area = polygon_area(inst.boundary);
        Contour ring = resample_polygon(inst.boundary, 128, inst.class_id);
        Mask m = rasterize_contour(ring, 512, 512);
        EXPECT_NEAR(static_cast<double>(m.area()), gen_area, 0.10 * gen_area);
        EXPECT_GE(inst.circle.r, 4.0);  // non-degenerate instances
    }
}

TEST(Synth, DatasetWriterProducesValidArtifacts) {
    auto dir = fs::temp_directory_path() / "csnake_synth_test";
    fs::remove_all(dir);
    auto ds = make_synth_dataset(dir.string(), 2, 11, 256, {3, 2, 2, 1});
    auto doc = read_coco_file(ds.coco_path);  // validating read
    EXPECT_EQ(doc.images.size(), 2u);
    EXPECT_EQ(doc.categories.size(), 4u);
    EXPECT_GT(doc.annotations.size(), 0u);
    auto reg = load_registry(ds.registry_path);
    EXPECT_TRUE(reg.count("synthTrain"));
    EXPECT_TRUE(reg.count("synthEval"));
    auto cfg = parse_config_file(ds.config_path);
    EXPECT_EQ(cfg.train_dataset, "synthTrain");
    // image files actually exist and load
    auto img = read_png((fs::path(reg["synthTrain"].data_root) / doc.images[0].file_name).string());
    EXPECT_EQ(img.w, 256);
    EXPECT_EQ(img.h, 256);
    EXPECT_EQ(img.channels, 3);
    fs::remove_all(dir);
}

TEST(Png, RoundTrip) {
    ImageU8 img(17, 9, 3);
    Rng rng(3);
    for (auto& v : img.pix) v = static_cast<std::uint8_t>(rng.below(256));
    auto path = fs::temp_directory_path() / "csnake_png_test.png";
    write_png(path.string(), img);
    auto rd = read_png(path.string());
    EXPECT_EQ(rd.w, img.w);
    EXPECT_EQ(rd.h, img.h);
    EXPECT_EQ(rd.channels, 3);
    EXPECT_EQ(rd.pix, img.pix);
    fs::remove(path);
}

TEST(Png, GrayMaskRoundTrip) {
    Mask m(8, 8);
    m.at(2, 3) = 1;
    m.at(7, 7) = 1;
    auto path = fs::temp_directory_path() / "csnake_mask_test.png";
    write_png(path.string(), mask_to_image(m));
    auto rd = read_png(path.string());
    EXPECT_EQ(rd.channels, 1);
    EXPECT_EQ(rd.at(2, 3, 0), 255);
    EXPECT_EQ(rd.at(0, 0, 0), 0);
    fs::remove(path);
}

TEST(WsiAnnotations, MinimalFormat) {
    std::string text = R"([
      {"class": "Eos", "points": [[1.0, 2.0], [10.0, 2.0], [10.0, 12.0]]},
      {"class": "RBC", "points": [[5, 5], [9, 5], [9, 9], [5, 9]]}
    ])";
    auto anns = read_wsi_annotations(text, "test");
    ASSERT_EQ(anns.size(), 2u);
    EXPECT_EQ(anns[0].class_name, "Eos");
    EXPECT_EQ(anns[1].points.size(), 4u);

    EXPECT_THROW(read_wsi_annotations(R"([{"class": "Eos"}])", "test"), IoError);
    EXPECT_THROW(read_wsi_annotations(R"([{"class": "Eos", "points": [[1,2],[3,4]]}])", "test"), IoError);
    EXPECT_THROW(read_wsi_annotations("not json", "test"), IoError);
}
