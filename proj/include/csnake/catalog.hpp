#pragma once

// Slide-level dataset catalog: deterministic train/val/test splitting by
// largest-remainder apportionment, and the per-split per-class count table.

#include <iomanip>
#include <map>
#include <sstream>

#include "csnake/coco.hpp"

namespace csnake {

enum class Split { Train = 0, Val = 1, Test = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        default: return "test";
    }
}

struct DatasetCatalog {
    std::map<std::string, Split> assignment;  // WSI id -> split

    std::vector<std::string> ids_in(Split s) const {
        std::vector<std::string> out;
        for (const auto& [id, sp] : assignment)
            if (sp == s) out.push_back(id);
        return out;
    }
};

// Splits are by slide, never by tile. Deterministic: a seeded shuffle
// followed by largest-remainder apportionment of the ratio (exact when the
// counts divide, well defined otherwise).
inline DatasetCatalog split_catalog(std::vector<std::string> wsi_ids, const std::array<double, 3>& ratios,
                                    std::uint64_t seed) {
    if (wsi_ids.empty()) throw ContractViolation("split_catalog: no slides to split");
    if (wsi_ids.size() < 3) throw ContractViolation("split_catalog: fewer slides than splits");
    double total = ratios[0] + ratios[1] + ratios[2];
    for (double r : ratios)
        if (!(r > 0)) throw ContractViolation("split_catalog: ratios must be positive");

    std::sort(wsi_ids.begin(), wsi_ids.end());  // seed-independent base order
    Rng rng(seed);
    rng.shuffle(wsi_ids);

    std::size_t n = wsi_ids.size();
    std::array<double, 3> exact{};
    std::array<std::size_t, 3> counts{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        exact[i] = static_cast<double>(n) * ratios[i] / total;
        counts[i] = static_cast<std::size_t>(std::floor(exact[i]));
        assigned += counts[i];
    }
    std::vector<int> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        double ra = exact[a] - std::floor(exact[a]);
        double rb = exact[b] - std::floor(exact[b]);
        if (ra != rb) return ra > rb;
        return a < b;  // ties go to the earlier split
    });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];

    DatasetCatalog cat;
    std::size_t idx = 0;
    for (int s = 0; s < 3; ++s)
        for (std::size_t k = 0; k < counts[s]; ++k) cat.assignment[wsi_ids[idx++]] = static_cast<Split>(s);
    return cat;
}

struct CatalogStats {
    std::vector<std::string> class_names;
    // rows follow class_names, columns are train/val/test, plus totals
    std::vector<std::array<std::size_t, 3>> counts;
    std::array<std::size_t, 3> split_totals{};
    std::size_t grand_total = 0;

    bool sums_consistent() const {
        std::array<std::size_t, 3> col{};
        std::size_t all = 0;
        for (const auto& row : counts)
            for (int s = 0; s < 3; ++s) {
                col[s] += row[s];
                all += row[s];
            }
        return col == split_totals && all == grand_total;
    }

    std::string to_table() const {
        std::ostringstream os;
        std::size_t name_w = 12;
        for (const auto& n : class_names) name_w = std::max(name_w, n.size() + 2);
        os << std::left << std::setw(static_cast<int>(name_w)) << "" << std::right << std::setw(10) << "Train"
           << std::setw(10) << "Val" << std::setw(10) << "Test" << std::setw(10) << "All" << "\n";
        for (std::size_t i = 0; i < class_names.size(); ++i) {
            std::size_t row_total = counts[i][0] + counts[i][1] + counts[i][2];
            os << std::left << std::setw(static_cast<int>(name_w)) << class_names[i] << std::right
               << std::setw(10) << counts[i][0] << std::setw(10) << counts[i][1] << std::setw(10) << counts[i][2]
               << std::setw(10) << row_total << "\n";
        }
        os << std::left << std::setw(static_cast<int>(name_w)) << "Total" << std::right << std::setw(10)
           << split_totals[0] << std::setw(10) << split_totals[1] << std::setw(10) << split_totals[2]
           << std::setw(10) << grand_total << "\n";
        return os.str();
    }
};

// Count table over per-split documents; validates row/column consistency.
inline CatalogStats catalog_stats(const std::array<const CocoDocument*, 3>& split_docs) {
    CatalogStats st;
    std::map<int, std::size_t> cat_row;
    for (int s = 0; s < 3; ++s) {
        if (!split_docs[s]) continue;
        for (const auto& c : split_docs[s]->categories) {
            if (!cat_row.count(c.id)) {
                cat_row[c.id] = st.class_names.size();
                st.class_names.push_back(c.name);
                st.counts.push_back({0, 0, 0});
            }
        }
    }
    for (int s = 0; s < 3; ++s) {
        if (!split_docs[s]) continue;
        for (const auto& a : split_docs[s]->annotations) {
            auto it = cat_row.find(a.category_id);
            if (it == cat_row.end())
                throw ContractViolation("catalog_stats: annotation category " + std::to_string(a.category_id) +
                                        " missing from the category lists");
            ++st.counts[it->second][s];
            ++st.split_totals[s];
            ++st.grand_total;
        }
    }
    if (!st.sums_consistent()) throw InternalError("catalog_stats: count table sums are inconsistent");
    return st;
}

}  // namespace csnake
