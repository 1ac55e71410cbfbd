#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kerl/data.hpp"
#include "kerl/error.hpp"
#include "kerl/rng.hpp"

namespace kerl::data {

namespace {

// attr = part * 3 + variant; four parts at the quadrant centers, three
// texture variants per part. Rows are arranged in look-alike pairs that
// differ in exactly one attribute (0/1, 2/3, 4/5, 6/7).
constexpr int kParts = 4;
constexpr int kVariants = 3;
constexpr int kMaxClasses = 8;
constexpr int kIncidence[kMaxClasses][3] = {
    {0, 3, 6}, {0, 3, 7}, {1, 4, 9}, {1, 4, 10},
    {2, 8, 11}, {2, 8, 9}, {5, 6, 10}, {5, 7, 11},
};

constexpr std::uint8_t kPalette[12][3] = {
    {220, 40, 40},  {40, 200, 60},   {50, 80, 230},  {235, 200, 40},
    {200, 60, 200}, {40, 200, 210},  {240, 130, 30}, {140, 70, 220},
    {120, 220, 120}, {250, 120, 170}, {100, 160, 40}, {60, 130, 130},
};

const char* kPartNames[kParts] = {"crown", "wing", "breast", "tail"};
const char* kVariantNames[kVariants] = {"solid", "striped", "checkered"};

void draw_patch(image::ImageU8& img, const regions::PixelBox& b, const std::uint8_t color[3],
                int texture) {
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) {
            bool dark = false;
            if (texture == 1)
                dark = ((y - b.y0) / 2) % 2 == 1;
            else if (texture == 2)
                dark = (((y - b.y0) / 3) + ((x - b.x0) / 3)) % 2 == 1;
            for (int k = 0; k < 3; ++k) {
                int v = color[k];
                if (dark) v /= 3;
                img.at(y, x, k) = static_cast<std::uint8_t>(v);
            }
        }
}

regions::PixelBox clipped_box(int cy, int cx, int side, int img_side) {
    regions::PixelBox b;
    b.y0 = std::clamp(cy - side / 2, 0, img_side - 1);
    b.x0 = std::clamp(cx - side / 2, 0, img_side - 1);
    b.y1 = std::min(img_side, b.y0 + side);
    b.x1 = std::min(img_side, b.x0 + side);
    return b;
}

Sample render_sample(const SynthConfig& cfg, int label,
                     const std::vector<std::vector<int>>& incidence, Rng& rng) {
    const int n = cfg.image;
    Sample s;
    s.label = label;
    s.attribute_scores.assign(static_cast<std::size_t>(cfg.num_attributes), 0.0);
    s.image = image::ImageU8(n, n, 3);
    s.has_image = true;

    for (auto& px : s.image.pix) {
        double v = 96.0 + cfg.noise * (2.0 * rng.uniform() - 1.0);
        px = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v), 0, 255));
    }

    // Distractors: attributes the category does not have, rendered with their
    // real color and texture at uniform positions. Locally indistinguishable
    // from true parts, so only the category-attribute incidence can veto them.
    const auto& own = incidence[static_cast<std::size_t>(label)];
    std::vector<int> foreign;
    for (int a = 0; a < cfg.num_attributes; ++a)
        if (std::find(own.begin(), own.end(), a) == own.end()) foreign.push_back(a);
    for (int t = 0; t < cfg.clutter && !foreign.empty(); ++t) {
        int attr = foreign[rng.uniform_int(foreign.size())];
        int cy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        int cx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        draw_patch(s.image, clipped_box(cy, cx, cfg.patch, n), kPalette[attr],
                   attr % kVariants);
    }

    const int anchor_r[kParts] = {n / 4, n / 4, 3 * n / 4, 3 * n / 4};
    const int anchor_c[kParts] = {n / 4, 3 * n / 4, n / 4, 3 * n / 4};
    for (int attr : own) {
        bool dropped = rng.bernoulli(cfg.dropout);
        int dy = static_cast<int>(rng.uniform_int(2 * cfg.jitter + 1)) - cfg.jitter;
        int dx = static_cast<int>(rng.uniform_int(2 * cfg.jitter + 1)) - cfg.jitter;
        if (dropped) continue;
        int part = attr / kVariants, variant = attr % kVariants;
        auto box = clipped_box(anchor_r[part] + dy, anchor_c[part] + dx, cfg.patch, n);
        draw_patch(s.image, box, kPalette[attr], variant);
        s.attribute_scores[static_cast<std::size_t>(attr)] = 1.0;
        s.mask_attrs.push_back(attr);
        s.masks.push_back(box);
    }

    if (!s.masks.empty()) {
        s.bbox = s.masks.front();
        for (const auto& m : s.masks) {
            s.bbox.x0 = std::min(s.bbox.x0, m.x0);
            s.bbox.y0 = std::min(s.bbox.y0, m.y0);
            s.bbox.x1 = std::max(s.bbox.x1, m.x1);
            s.bbox.y1 = std::max(s.bbox.y1, m.y1);
        }
    }
    return s;
}

}  // namespace

std::vector<std::vector<int>> synthetic_incidence(int num_classes) {
    require(num_classes >= 2 && num_classes <= kMaxClasses,
            "synthetic_incidence: 2..8 classes supported");
    std::vector<std::vector<int>> inc;
    for (int c = 0; c < num_classes; ++c)
        inc.push_back({kIncidence[c][0], kIncidence[c][1], kIncidence[c][2]});
    return inc;
}

graph::NodeRegistry synthetic_registry(const SynthConfig& cfg) {
    require(cfg.num_attributes == kParts * kVariants,
            "synthetic_registry: attribute count is fixed at 12");
    graph::NodeRegistry reg;
    for (int c = 0; c < cfg.num_classes; ++c) reg.categories.push_back("species_" + std::to_string(c));
    for (int a = 0; a < cfg.num_attributes; ++a)
        reg.attributes.push_back(std::string(kPartNames[a / kVariants]) + "::" +
                                 kVariantNames[a % kVariants]);
    return reg;
}

Dataset gen_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    require(cfg.image >= 48, "gen_synthetic: image side must be >= 48");
    require(cfg.patch >= 6 && cfg.patch + 2 * cfg.jitter <= cfg.image / 2,
            "gen_synthetic: patch/jitter too large for the image");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "gen_synthetic: bad dropout");
    auto incidence = synthetic_incidence(cfg.num_classes);
    auto reg = synthetic_registry(cfg);

    Dataset ds;
    ds.class_names = reg.categories;
    ds.attribute_names = reg.attributes;
    Rng rng(seed);
    for (int c = 0; c < cfg.num_classes; ++c)
        for (int i = 0; i < cfg.train_per_class; ++i)
            ds.train.push_back(render_sample(cfg, c, incidence, rng));
    for (int c = 0; c < cfg.num_classes; ++c)
        for (int i = 0; i < cfg.test_per_class; ++i)
            ds.test.push_back(render_sample(cfg, c, incidence, rng));
    return ds;
}

std::vector<graph::Instance> train_instances(const Dataset& ds) {
    std::vector<graph::Instance> out;
    out.reserve(ds.train.size());
    for (const auto& s : ds.train)
        out.push_back({static_cast<std::size_t>(s.label), s.attribute_scores});
    return out;
}

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path);
    for (const auto& l : lines) out << l << "\n";
}

std::string sample_line(const Sample& s, const std::string& rel) {
    std::ostringstream os;
    os << rel << " " << s.label << " " << s.bbox.x0 << " " << s.bbox.y0 << " " << s.bbox.x1
       << " " << s.bbox.y1;
    char buf[64];
    for (double v : s.attribute_scores) {
        std::snprintf(buf, sizeof(buf), " %.17g", v);
        os << buf;
    }
    os << " " << s.masks.size();
    for (std::size_t k = 0; k < s.masks.size(); ++k)
        os << " " << s.mask_attrs[k] << " " << s.masks[k].x0 << " " << s.masks[k].y0 << " "
           << s.masks[k].x1 << " " << s.masks[k].y1;
    return os.str();
}

void save_split(const std::vector<Sample>& split, const std::string& dir,
                const std::string& prefix, std::vector<std::string>& lines) {
    char name[64];
    for (std::size_t i = 0; i < split.size(); ++i) {
        std::snprintf(name, sizeof(name), "images/%s_%05zu.ppm", prefix.c_str(), i);
        image::write_image(dir + "/" + name, split[i].image);
        lines.push_back(sample_line(split[i], name));
    }
}

Sample parse_sample_line(const std::string& dir, const std::string& path, std::size_t lineno,
                         const std::string& line, std::size_t num_attrs) {
    std::istringstream is(line);
    std::string rel;
    Sample s;
    if (!(is >> rel >> s.label >> s.bbox.x0 >> s.bbox.y0 >> s.bbox.x1 >> s.bbox.y1))
        throw ParseError(path, lineno, "bad sample record");
    s.attribute_scores.resize(num_attrs);
    for (auto& v : s.attribute_scores)
        if (!(is >> v)) throw ParseError(path, lineno, "missing attribute score");
    std::size_t m = 0;
    if (!(is >> m)) throw ParseError(path, lineno, "missing mask count");
    s.mask_attrs.resize(m);
    s.masks.resize(m);
    for (std::size_t k = 0; k < m; ++k)
        if (!(is >> s.mask_attrs[k] >> s.masks[k].x0 >> s.masks[k].y0 >> s.masks[k].x1 >>
              s.masks[k].y1))
            throw ParseError(path, lineno, "bad mask record");
    s.image = image::read_image(dir + "/" + rel);
    s.has_image = true;
    return s;
}

}  // namespace

void save_synthetic(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    {
        std::ofstream meta(dir + "/meta.txt");
        if (!meta) throw IoError("cannot write: " + dir + "/meta.txt");
        meta << "kerl-synth 1\n"
             << "classes " << ds.class_names.size() << "\n"
             << "attributes " << ds.attribute_names.size() << "\n"
             << "train " << ds.train.size() << "\n"
             << "test " << ds.test.size() << "\n";
    }
    write_lines(dir + "/classes.txt", ds.class_names);
    write_lines(dir + "/attributes.txt", ds.attribute_names);
    std::vector<std::string> tr, te;
    save_split(ds.train, dir, "tr", tr);
    save_split(ds.test, dir, "te", te);
    write_lines(dir + "/train.tsv", tr);
    write_lines(dir + "/test.tsv", te);
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l))
        if (!l.empty()) lines.push_back(l);
    return lines;
}

}  // namespace

Dataset load_synthetic(const std::string& dir) {
    Dataset ds;
    std::size_t n_train = 0, n_test = 0, n_cls = 0, n_attr = 0;
    {
        const std::string meta_path = dir + "/meta.txt";
        std::ifstream meta(meta_path);
        if (!meta) throw IoError("cannot open: " + meta_path);
        std::string tag;
        int ver = 0;
        if (!(meta >> tag >> ver) || tag != "kerl-synth" || ver != 1)
            throw ParseError(meta_path, 1, "expected 'kerl-synth 1' header");
        std::string key;
        std::size_t val;
        while (meta >> key >> val) {
            if (key == "classes") n_cls = val;
            else if (key == "attributes") n_attr = val;
            else if (key == "train") n_train = val;
            else if (key == "test") n_test = val;
            else throw ParseError(meta_path, 0, "unknown meta key: " + key);
        }
    }
    ds.class_names = read_lines(dir + "/classes.txt");
    ds.attribute_names = read_lines(dir + "/attributes.txt");
    if (ds.class_names.size() != n_cls)
        throw ParseError(dir + "/classes.txt", 0, "class count does not match meta");
    if (ds.attribute_names.size() != n_attr)
        throw ParseError(dir + "/attributes.txt", 0, "attribute count does not match meta");

    struct SplitFile {
        const char* file;
        std::vector<Sample>* vec;
        std::size_t count;
    };
    const SplitFile splits[] = {{"train.tsv", &ds.train, n_train},
                                {"test.tsv", &ds.test, n_test}};
    for (const auto& sf : splits) {
        const std::string path = dir + "/" + sf.file;
        auto lines = read_lines(path);
        if (lines.size() != sf.count)
            throw ParseError(path, 0, "sample count does not match meta");
        for (std::size_t i = 0; i < lines.size(); ++i)
            sf.vec->push_back(parse_sample_line(dir, path, i + 1, lines[i], n_attr));
    }
    for (const auto& s : ds.train)
        require(s.label >= 0 && static_cast<std::size_t>(s.label) < n_cls,
                "load_synthetic: label out of range");
    for (const auto& s : ds.test)
        require(s.label >= 0 && static_cast<std::size_t>(s.label) < n_cls,
                "load_synthetic: label out of range");
    return ds;
}

}  // namespace kerl::data
