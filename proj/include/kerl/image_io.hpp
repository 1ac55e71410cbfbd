#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kerl/regions.hpp"
#include "kerl/tensor.hpp"

// Minimal uncompressed image handling: binary PPM (P6, 3-channel) and PGM
// (P5, 1-channel) with maxval 255, plus crop / bilinear resize and the
// conversions the pipeline needs (8-bit <-> [0,1] feature maps, heatmaps).

namespace kerl::image {

struct ImageU8 {
    int h = 0, w = 0, ch = 0;  // ch is 1 or 3, pixels interleaved row-major
    std::vector<std::uint8_t> pix;

    ImageU8() = default;
    ImageU8(int h_, int w_, int ch_)
        : h(h_), w(w_), ch(ch_), pix(static_cast<std::size_t>(h_) * w_ * ch_, 0) {}

    std::uint8_t& at(int i, int j, int k) {
        return pix[(static_cast<std::size_t>(i) * w + j) * ch + k];
    }
    std::uint8_t at(int i, int j, int k) const {
        return pix[(static_cast<std::size_t>(i) * w + j) * ch + k];
    }
};

// Reads P5 or P6 (dispatch on the magic); throws ParseError on anything else.
ImageU8 read_image(const std::string& path);
void write_image(const std::string& path, const ImageU8& img);  // P5 or P6 by ch

ImageU8 crop(const ImageU8& img, const regions::PixelBox& box);
ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w);

// 8-bit image -> h x w x ch doubles in [0,1].
FeatureMap to_feature(const ImageU8& img);

// [0,1] map -> grayscale image (values clamped, scaled to 255).
ImageU8 gray_from_unit(const Mat& m);

}  // namespace kerl::image
