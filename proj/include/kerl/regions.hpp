#pragma once

#include <vector>

#include "kerl/tensor.hpp"

// Highlighted-region selection on top of a feature map: per-location scores
// (channel sums), greedy NMS over fixed-size cell boxes, and the geometry
// mapping a selected cell back to a pixel crop of the input image.

namespace kerl::regions {

// Half-open cell box [r0,r1) x [c0,c1) anchored at a feature-map location.
struct Region {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
    int cell_r = 0, cell_c = 0;
    double score = 0.0;

    int area() const { return (r1 - r0) * (c1 - c0); }
};

// Half-open pixel box [x0,x1) x [y0,y1); x = column, y = row.
struct PixelBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

// A pixel crop plus the side length it should be resized to before scoring.
struct CropSpec {
    PixelBox box;
    int resize = 0;
};

// Per-location channel sums, h x w.
Mat location_scores(const FeatureMap& f);

// (v - min) / (max - min); a constant map maps to all zeros.
Mat min_max_normalized(const Mat& m);

double iou(const Region& a, const Region& b);

// Box for the candidate anchored at (r, c): start = anchor - size/2,
// end = start + size, clipped to the map bounds.
Region candidate_box(int r, int c, int size, int map_h, int map_w);

// Every location is a candidate. Greedy by descending score, ties broken
// row-major by anchor; a candidate is suppressed iff IoU with an already
// kept region exceeds the threshold (strictly).
std::vector<Region> propose_regions(const Mat& scores, int region_size, double iou_threshold,
                                    int top_k);

// Pixel crop for a cell: the cell center maps to (cell + 0.5) * stride, the
// box is center +/- crop/2, clipped to the image.
PixelBox crop_box(int cell_r, int cell_c, int stride, int crop, int img_h, int img_w);

CropSpec crop_and_map(const Region& region, int img_h, int img_w, int stride, int crop,
                      int resize);

// Element-wise mean of several class-score vectors (all the same length).
Vec fuse_scores(const std::vector<Vec>& score_lists);
Vec fuse_scores(const Vec& a, const Vec& b);

}  // namespace kerl::regions
