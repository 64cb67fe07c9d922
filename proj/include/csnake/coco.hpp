#pragma once

// COCO-style dataset documents: typed structs, strict validating reader,
// writer, and the results-list format used for per-image predictions.
// Invalid documents are rejected outright (no silent repair) with every
// offending annotation id listed; corrupt training data should be loud.

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csnake/geometry.hpp"

namespace csnake {

struct CocoInfo {
    std::string description = "circle-snake dataset";
    std::string version = "1.0";
    int year = 2023;
    std::string contributor;
    std::string date_created;
};

struct CocoImage {
    int id = 0;
    std::string file_name;
    int width = 0, height = 0;
};

struct CocoAnnotation {
    int id = 0;
    int image_id = 0;
    int category_id = 0;
    std::vector<std::vector<double>> segmentation;  // flat x,y rings
    double area = 0.0;
    std::array<double, 4> bbox{0, 0, 0, 0};  // x, y, width, height
};

struct CocoCategory {
    int id = 0;
    std::string name;
    std::string supercategory = "Class";
};

struct CocoDocument {
    CocoInfo info;
    std::vector<CocoImage> images;
    std::vector<CocoAnnotation> annotations;
    std::vector<CocoCategory> categories;

    const CocoImage* find_image(int id) const {
        for (const auto& im : images)
            if (im.id == id) return &im;
        return nullptr;
    }
    const CocoCategory* find_category(int id) const {
        for (const auto& c : categories)
            if (c.id == id) return &c;
        return nullptr;
    }
};

namespace cocodetail {

inline std::vector<Vec2> ring_points(const std::vector<double>& flat) {
    std::vector<Vec2> pts(flat.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {flat[2 * i], flat[2 * i + 1]};
    return pts;
}

inline std::array<double, 4> tight_bbox(const std::vector<std::vector<double>>& segm) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& ring : segm) {
        for (std::size_t i = 0; i + 1 < ring.size(); i += 2) {
            x0 = std::min(x0, ring[i]);
            x1 = std::max(x1, ring[i]);
            y0 = std::min(y0, ring[i + 1]);
            y1 = std::max(y1, ring[i + 1]);
        }
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

inline double segm_area(const std::vector<std::vector<double>>& segm) {
    double a = 0.0;
    for (const auto& ring : segm) a += polygon_area(ring_points(ring));
    return a;
}

}  // namespace cocodetail

// Validates all document invariants, collecting every violation before
// rejecting. Returns the list of problems (empty means valid).
inline std::vector<std::string> validate_coco(const CocoDocument& doc) {
    std::vector<std::string> problems;
    std::set<int> image_ids, category_ids, annotation_ids;
    for (const auto& im : doc.images) {
        if (!image_ids.insert(im.id).second)
            problems.push_back("duplicate image id " + std::to_string(im.id));
        if (im.width < 1 || im.height < 1)
            problems.push_back("image " + std::to_string(im.id) + " has non-positive extent");
    }
    for (const auto& c : doc.categories)
        if (!category_ids.insert(c.id).second)
            problems.push_back("duplicate category id " + std::to_string(c.id));
    for (const auto& a : doc.annotations) {
        std::string tag = "annotation " + std::to_string(a.id);
        if (!annotation_ids.insert(a.id).second) problems.push_back("duplicate " + tag);
        if (!image_ids.count(a.image_id))
            problems.push_back(tag + ": dangling image_id " + std::to_string(a.image_id));
        if (!category_ids.count(a.category_id))
            problems.push_back(tag + ": dangling category_id " + std::to_string(a.category_id));
        if (a.segmentation.empty()) problems.push_back(tag + ": empty segmentation");
        bool rings_ok = true;
        for (const auto& ring : a.segmentation) {
            if (ring.size() % 2 != 0) {
                problems.push_back(tag + ": odd coordinate count in polygon");
                rings_ok = false;
            } else if (ring.size() < 6) {
                problems.push_back(tag + ": polygon with fewer than 3 points");
                rings_ok = false;
            }
        }
        if (!rings_ok || a.segmentation.empty()) continue;
        auto tb = cocodetail::tight_bbox(a.segmentation);
        for (int k = 0; k < 4; ++k) {
            if (std::abs(tb[k] - a.bbox[k]) > 1.0) {
                problems.push_back(tag + ": bbox is not the tight polygon box (off by more than 1 px)");
                break;
            }
        }
        double area = cocodetail::segm_area(a.segmentation);
        double tol = std::max(area, a.area) * 0.01;
        if (std::abs(area - a.area) > tol + 1e-9)
            problems.push_back(tag + ": area " + std::to_string(a.area) + " differs from polygon area " +
                               std::to_string(area) + " by more than 1%");
    }
    return problems;
}

inline CocoDocument read_coco(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("coco: malformed JSON: ") + e.what());
    }
    CocoDocument doc;
    try {
        if (j.contains("info")) {
            const auto& ji = j["info"];
            doc.info.description = ji.value("description", "");
            doc.info.version = ji.value("version", "");
            doc.info.year = ji.value("year", 0);
            doc.info.contributor = ji.value("contributor", "");
            doc.info.date_created = ji.value("date_created", "");
        }
        for (const auto& im : j.value("images", nlohmann::json::array())) {
            CocoImage ci;
            ci.id = im.at("id").get<int>();
            ci.file_name = im.at("file_name").get<std::string>();
            ci.width = im.at("width").get<int>();
            ci.height = im.at("height").get<int>();
            doc.images.push_back(std::move(ci));
        }
        for (const auto& an : j.value("annotations", nlohmann::json::array())) {
            CocoAnnotation ca;
            ca.id = an.at("id").get<int>();
            ca.image_id = an.at("image_id").get<int>();
            ca.category_id = an.at("category_id").get<int>();
            for (const auto& ring : an.at("segmentation"))
                ca.segmentation.push_back(ring.get<std::vector<double>>());
            ca.area = an.at("area").get<double>();
            auto bb = an.at("bbox").get<std::vector<double>>();
            if (bb.size() != 4) throw IoError("coco: annotation " + std::to_string(ca.id) + " has a bad bbox");
            std::copy(bb.begin(), bb.end(), ca.bbox.begin());
            doc.annotations.push_back(std::move(ca));
        }
        for (const auto& ct : j.value("categories", nlohmann::json::array())) {
            CocoCategory cc;
            cc.id = ct.at("id").get<int>();
            cc.name = ct.at("name").get<std::string>();
            cc.supercategory = ct.value("supercategory", "");
            doc.categories.push_back(std::move(cc));
        }
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(std::string("coco: schema error: ") + e.what());
    }
    auto problems = validate_coco(doc);
    if (!problems.empty()) {
        std::ostringstream os;
        os << "coco: rejected document with " << problems.size() << " problem(s):";
        for (const auto& p : problems) os << "\n  - " << p;
        throw IoError(os.str());
    }
    return doc;
}

inline CocoDocument read_coco_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("coco: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return read_coco(ss.str());
}

inline std::string write_coco(const CocoDocument& doc) {
    nlohmann::ordered_json j;
    j["info"] = {{"description", doc.info.description}, {"version", doc.info.version},
                 {"year", doc.info.year},               {"contributor", doc.info.contributor},
                 {"date_created", doc.info.date_created}};
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& im : doc.images)
        j["images"].push_back(
            {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
    j["annotations"] = nlohmann::ordered_json::array();
    for (const auto& a : doc.annotations)
        j["annotations"].push_back({{"id", a.id},
                                    {"image_id", a.image_id},
                                    {"category_id", a.category_id},
                                    {"segmentation", a.segmentation},
                                    {"area", a.area},
                                    {"bbox", a.bbox}});
    j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : doc.categories)
        j["categories"].push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
    return j.dump(2) + "\n";
}

inline void write_coco_file(const CocoDocument& doc, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("coco: cannot write '" + path + "'");
    os << write_coco(doc);
}

inline bool coco_equal(const CocoDocument& a, const CocoDocument& b) {
    if (a.images.size() != b.images.size() || a.annotations.size() != b.annotations.size() ||
        a.categories.size() != b.categories.size())
        return false;
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        const auto &x = a.images[i], &y = b.images[i];
        if (x.id != y.id || x.file_name != y.file_name || x.width != y.width || x.height != y.height) return false;
    }
    for (std::size_t i = 0; i < a.annotations.size(); ++i) {
        const auto &x = a.annotations[i], &y = b.annotations[i];
        if (x.id != y.id || x.image_id != y.image_id || x.category_id != y.category_id ||
            x.segmentation != y.segmentation || x.area != y.area || x.bbox != y.bbox)
            return false;
    }
    for (std::size_t i = 0; i < a.categories.size(); ++i) {
        const auto &x = a.categories[i], &y = b.categories[i];
        if (x.id != y.id || x.name != y.name || x.supercategory != y.supercategory) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// results format: a flat list of scored per-image detections, COCO-style,
// extended with the bounding circle

struct ResultRecord {
    int image_id = 0;
    int category_id = 0;
    double score = 0.0;
    std::array<double, 3> circle{0, 0, 0};  // cx, cy, r
    std::vector<double> segmentation;       // flat polygon ring
};

inline std::string write_results(const std::vector<ResultRecord>& results) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : results)
        j.push_back({{"image_id", r.image_id},
                     {"category_id", r.category_id},
                     {"score", r.score},
                     {"circle", r.circle},
                     {"segmentation", nlohmann::ordered_json::array({r.segmentation})}});
    return j.dump(2) + "\n";
}

inline std::vector<ResultRecord> read_results(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("results: malformed JSON: ") + e.what());
    }
    if (!j.is_array()) throw IoError("results: expected a JSON array");
    std::vector<ResultRecord> out;
    for (const auto& it : j) {
        ResultRecord r;
        r.image_id = it.at("image_id").get<int>();
        r.category_id = it.at("category_id").get<int>();
        r.score = it.at("score").get<double>();
        auto c = it.at("circle").get<std::vector<double>>();
        if (c.size() != 3) throw IoError("results: circle must be [cx, cy, r]");
        std::copy(c.begin(), c.end(), r.circle.begin());
        const auto& segm = it.at("segmentation");
        if (!segm.is_array() || segm.empty()) throw IoError("results: missing segmentation ring");
        r.segmentation = segm[0].get<std::vector<double>>();
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// minimal annotation-export ingestion: a JSON list of
// {"class": name, "points": [[x, y], ...]} objects per slide

struct WsiAnnotation {
    std::string class_name;
    std::vector<Vec2> points;
};

inline std::vector<WsiAnnotation> read_wsi_annotations(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw IoError("annotations: malformed JSON in " + origin + ": " + e.what());
    }
    if (!j.is_array()) throw IoError("annotations: expected a JSON list in " + origin);
    std::vector<WsiAnnotation> out;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& it = j[i];
        WsiAnnotation a;
        if (!it.contains("class") || !it.contains("points")) {
            problems.push_back("entry " + std::to_string(i) + ": needs 'class' and 'points'");
            continue;
        }
        a.class_name = it["class"].get<std::string>();
        for (const auto& p : it["points"]) {
            if (!p.is_array() || p.size() != 2) {
                problems.push_back("entry " + std::to_string(i) + ": point is not an [x, y] pair");
                break;
            }
            a.points.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        if (a.points.size() < 3) problems.push_back("entry " + std::to_string(i) + ": fewer than 3 points");
        out.push_back(std::move(a));
    }
    if (!problems.empty()) {
        std::ostringstream os;
        os << "annotations: rejected " << origin << ":";
        for (const auto& p : problems) os << "\n  - " << p;
        throw IoError(os.str());
    }
    return out;
}

}  // namespace csnake
