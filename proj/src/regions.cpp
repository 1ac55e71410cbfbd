#include "kerl/regions.hpp"

#include <algorithm>
#include <cmath>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::regions {

Mat location_scores(const FeatureMap& f) {
    const auto& ks = kernels::ops();
    Mat out(static_cast<std::size_t>(f.h), static_cast<std::size_t>(f.w));
    for (int i = 0; i < f.h; ++i)
        for (int j = 0; j < f.w; ++j)
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                ks.sum(f.loc(i, j), static_cast<std::size_t>(f.ch));
    return out;
}

Mat min_max_normalized(const Mat& m) {
    require(!m.a.empty(), "min_max_normalized: empty map");
    auto [lo_it, hi_it] = std::minmax_element(m.a.begin(), m.a.end());
    double lo = *lo_it, hi = *hi_it;
    Mat out(m.rows, m.cols);
    if (hi == lo) return out;
    double inv = 1.0 / (hi - lo);
    for (std::size_t k = 0; k < m.a.size(); ++k) out.a[k] = (m.a[k] - lo) * inv;
    return out;
}

double iou(const Region& a, const Region& b) {
    int ir0 = std::max(a.r0, b.r0), ir1 = std::min(a.r1, b.r1);
    int ic0 = std::max(a.c0, b.c0), ic1 = std::min(a.c1, b.c1);
    int inter = std::max(0, ir1 - ir0) * std::max(0, ic1 - ic0);
    int uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

Region candidate_box(int r, int c, int size, int map_h, int map_w) {
    require(size > 0 && map_h > 0 && map_w > 0, "candidate_box: bad dims");
    Region g;
    g.cell_r = r;
    g.cell_c = c;
    g.r0 = std::max(0, r - size / 2);
    g.r1 = std::min(map_h, g.r0 + size);
    g.c0 = std::max(0, c - size / 2);
    g.c1 = std::min(map_w, g.c0 + size);
    return g;
}

std::vector<Region> propose_regions(const Mat& scores, int region_size, double iou_threshold,
                                    int top_k) {
    require(top_k > 0, "propose_regions: top_k must be positive");
    const int h = static_cast<int>(scores.rows), w = static_cast<int>(scores.cols);
    std::vector<Region> cand;
    cand.reserve(scores.a.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            Region g = candidate_box(r, c, region_size, h, w);
            g.score = scores.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            cand.push_back(g);
        }
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Region& a, const Region& b) { return a.score > b.score; });

    std::vector<Region> kept;
    for (const Region& g : cand) {
        if (static_cast<int>(kept.size()) == top_k) break;
        bool drop = false;
        for (const Region& k : kept)
            if (iou(g, k) > iou_threshold) {
                drop = true;
                break;
            }
        if (!drop) kept.push_back(g);
    }
    return kept;
}

PixelBox crop_box(int cell_r, int cell_c, int stride, int crop, int img_h, int img_w) {
    require(stride > 0 && crop > 0, "crop_box: bad geometry");
    int cy = static_cast<int>(std::lround((cell_r + 0.5) * stride));
    int cx = static_cast<int>(std::lround((cell_c + 0.5) * stride));
    PixelBox b;
    b.y0 = std::max(0, cy - crop / 2);
    b.y1 = std::min(img_h, cy - crop / 2 + crop);
    b.x0 = std::max(0, cx - crop / 2);
    b.x1 = std::min(img_w, cx - crop / 2 + crop);
    require(b.width() > 0 && b.height() > 0, "crop_box: degenerate crop");
    return b;
}

CropSpec crop_and_map(const Region& region, int img_h, int img_w, int stride, int crop,
                      int resize) {
    require(resize > 0, "crop_and_map: bad resize target");
    CropSpec s;
    s.box = crop_box(region.cell_r, region.cell_c, stride, crop, img_h, img_w);
    s.resize = resize;
    return s;
}

Vec fuse_scores(const std::vector<Vec>& score_lists) {
    require(!score_lists.empty(), "fuse_scores: nothing to fuse");
    const std::size_t n = score_lists.front().size();
    Vec out(n, 0.0);
    const auto& ks = kernels::ops();
    for (const Vec& s : score_lists) {
        require(s.size() == n, "fuse_scores: length mismatch");
        ks.axpy(1.0, s.data(), out.data(), n);
    }
    ks.scal(1.0 / static_cast<double>(score_lists.size()), out.data(), n);
    return out;
}

Vec fuse_scores(const Vec& a, const Vec& b) { return fuse_scores(std::vector<Vec>{a, b}); }

}  // namespace kerl::regions
