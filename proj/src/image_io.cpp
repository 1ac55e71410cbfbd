#include "kerl/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kerl/error.hpp"

namespace kerl::image {

namespace {

// Skips whitespace and '#' comment lines, then reads one unsigned integer.
int next_header_int(std::istream& in, const std::string& path) {
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            in.get();
        }
        c = in.peek();
    }
    int v = -1;
    if (!(in >> v) || v < 0) throw ParseError(path, 0, "bad header integer");
    return v;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    int ch = 0;
    if (m0 == 'P' && m1 == '6')
        ch = 3;
    else if (m0 == 'P' && m1 == '5')
        ch = 1;
    else
        throw ParseError(path, 1, "expected P5 or P6 magic");

    int w = next_header_int(in, path);
    int h = next_header_int(in, path);
    int maxval = next_header_int(in, path);
    if (w <= 0 || h <= 0) throw ParseError(path, 0, "bad image dimensions");
    if (maxval != 255) throw ParseError(path, 0, "only maxval 255 supported");
    in.get();  // single whitespace before the raster

    ImageU8 img(h, w, ch);
    in.read(reinterpret_cast<char*>(img.pix.data()),
            static_cast<std::streamsize>(img.pix.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pix.size())
        throw ParseError(path, 0, "truncated raster");
    return img;
}

void write_image(const std::string& path, const ImageU8& img) {
    require(img.ch == 1 || img.ch == 3, "write_image: ch must be 1 or 3");
    require(img.h > 0 && img.w > 0, "write_image: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << (img.ch == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pix.data()),
              static_cast<std::streamsize>(img.pix.size()));
    if (!out) throw IoError("short write: " + path);
}

ImageU8 crop(const ImageU8& img, const regions::PixelBox& box) {
    require(box.x0 >= 0 && box.y0 >= 0 && box.x1 <= img.w && box.y1 <= img.h &&
                box.width() > 0 && box.height() > 0,
            "crop: box outside image");
    ImageU8 out(box.height(), box.width(), img.ch);
    for (int i = 0; i < out.h; ++i) {
        const std::uint8_t* src = &img.pix[(static_cast<std::size_t>(box.y0 + i) * img.w + box.x0) *
                                           img.ch];
        std::copy(src, src + static_cast<std::size_t>(out.w) * img.ch,
                  &out.pix[static_cast<std::size_t>(i) * out.w * out.ch]);
    }
    return out;
}

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w) {
    require(out_h > 0 && out_w > 0, "resize_bilinear: bad target");
    ImageU8 out(out_h, out_w, img.ch);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int i = 0; i < out_h; ++i) {
        double fy = (i + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, img.h - 1);
        int yb = std::clamp(y0 + 1, 0, img.h - 1);
        for (int j = 0; j < out_w; ++j) {
            double fx = (j + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, img.w - 1);
            int xb = std::clamp(x0 + 1, 0, img.w - 1);
            for (int k = 0; k < img.ch; ++k) {
                double top = (1.0 - wx) * img.at(ya, xa, k) + wx * img.at(ya, xb, k);
                double bot = (1.0 - wx) * img.at(yb, xa, k) + wx * img.at(yb, xb, k);
                double v = (1.0 - wy) * top + wy * bot;
                out.at(i, j, k) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
            }
        }
    }
    return out;
}

FeatureMap to_feature(const ImageU8& img) {
    FeatureMap f(img.h, img.w, img.ch);
    for (std::size_t k = 0; k < img.pix.size(); ++k) f.v[k] = img.pix[k] / 255.0;
    return f;
}

ImageU8 gray_from_unit(const Mat& m) {
    ImageU8 out(static_cast<int>(m.rows), static_cast<int>(m.cols), 1);
    for (std::size_t k = 0; k < m.a.size(); ++k) {
        double v = std::clamp(m.a[k], 0.0, 1.0);
        out.pix[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

}  // namespace kerl::image
