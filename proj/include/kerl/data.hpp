#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kerl/graph.hpp"
#include "kerl/image_io.hpp"
#include "kerl/regions.hpp"
#include "kerl/tensor.hpp"

// Dataset types shared by the synthetic generator and the CUB-format loader,
// plus the binary feature-tensor format for precomputed backbone outputs.

namespace kerl::data {

struct Sample {
    image::ImageU8 image;        // pixels, when the image pipeline is used
    FeatureMap features;         // precomputed feature map, when provided
    bool has_image = false;
    bool has_features = false;
    int label = 0;
    Vec attribute_scores;        // length A, entries in [0,1]
    regions::PixelBox bbox;      // zero-sized when absent
    // ground-truth attribute patches (synthetic only): parallel arrays
    std::vector<int> mask_attrs;
    std::vector<regions::PixelBox> masks;
};

struct Dataset {
    std::vector<std::string> class_names;
    std::vector<std::string> attribute_names;  // "part::value"
    std::vector<Sample> train, test;

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t num_attributes() const { return attribute_names.size(); }
};

// Instances for graph construction, taken from the training split.
std::vector<graph::Instance> train_instances(const Dataset& ds);

// ---- precomputed feature tensors -------------------------------------------
// Binary layout: magic "KFT1", then h, w, c as little-endian uint32, then
// h*w*c row-major channel-last IEEE float32 values.
void write_feature_tensor(const std::string& path, const FeatureMap& f);
FeatureMap read_feature_tensor(const std::string& path);

// ---- synthetic fine-grained task --------------------------------------------
// Four part anchors at the image quadrant centers; each attribute is one of
// three texture variants (solid / stripes / checker) of a part in a distinct
// color; each category renders three parts, one variant each. Categories are
// arranged in look-alike pairs that differ in a single part's variant, and
// every image also shows distractor patches of attributes the category does
// not have, drawn at random positions with their genuine appearance.
struct SynthConfig {
    int num_classes = 8;      // 2..8, rows of the built-in incidence table
    int num_attributes = 12;  // fixed: 4 parts x 3 variants
    int train_per_class = 40;
    int test_per_class = 20;
    int image = 64;           // square side, >= 48
    int patch = 14;           // attribute patch side
    int jitter = 5;           // max |offset| of a patch from its anchor
    int clutter = 3;          // foreign-attribute distractor patches per image
    double dropout = 0.08;    // chance an attribute patch is omitted
    double noise = 32.0;      // background noise amplitude (8-bit units)
};

// category -> attribute indices (parts-per-category entries each)
std::vector<std::vector<int>> synthetic_incidence(int num_classes);

graph::NodeRegistry synthetic_registry(const SynthConfig& cfg);

Dataset gen_synthetic(const SynthConfig& cfg, std::uint64_t seed);

// Directory layout: meta.txt, classes.txt, attributes.txt, images/*.ppm,
// train.tsv / test.tsv (one sample per line; see save_synthetic).
void save_synthetic(const Dataset& ds, const std::string& dir);
Dataset load_synthetic(const std::string& dir);

// ---- CUB-format annotations --------------------------------------------------
// Reads the CUB-200-2011 annotation text files. Images referenced by the
// dataset are loaded only when they are PPM/PGM files on disk; otherwise the
// sample carries annotations (label, attribute scores, bbox) without pixels,
// which is all graph construction needs.
enum class CubMode { image, bbox };

struct CertaintyMap {
    // score = is_present * w[certainty]; CUB certainties are 1..4
    double w[5] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0};
};

Dataset load_cub(const std::string& root, CubMode mode = CubMode::image,
                 const CertaintyMap& cmap = {});

}  // namespace kerl::data
