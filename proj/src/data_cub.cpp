#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kerl/data.hpp"
#include "kerl/error.hpp"

namespace kerl::data {

namespace {

constexpr char kFeatureMagic[4] = {'K', 'F', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError(path, 0, "truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_tensor(const std::string& path, const FeatureMap& f) {
    require(f.h > 0 && f.w > 0 && f.ch > 0, "write_feature_tensor: empty map");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out.write(kFeatureMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(f.h));
    write_u32(out, static_cast<std::uint32_t>(f.w));
    write_u32(out, static_cast<std::uint32_t>(f.ch));
    std::vector<float> buf(f.v.size());
    for (std::size_t i = 0; i < f.v.size(); ++i) buf[i] = static_cast<float>(f.v[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path);
}

FeatureMap read_feature_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw ParseError(path, 0, "bad feature-tensor magic");
    std::uint32_t h = read_u32(in, path), w = read_u32(in, path), c = read_u32(in, path);
    if (h == 0 || w == 0 || c == 0 || static_cast<std::uint64_t>(h) * w * c > (1u << 28))
        throw ParseError(path, 0, "implausible feature-tensor dims");
    FeatureMap f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    std::vector<float> buf(f.v.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(float))
        throw ParseError(path, 0, "truncated feature data");
    for (std::size_t i = 0; i < buf.size(); ++i) f.v[i] = buf[i];
    return f;
}

namespace {

struct LineReader {
    std::ifstream in;
    std::string path;
    std::size_t lineno = 0;

    explicit LineReader(const std::string& p) : in(p), path(p) {
        if (!in) throw IoError("cannot open: " + p);
    }
    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path, lineno, what); }
};

bool has_pnm_suffix(const std::string& p) {
    auto ends = [&](const char* s) {
        std::size_t n = std::strlen(s);
        return p.size() >= n && p.compare(p.size() - n, n, s) == 0;
    };
    return ends(".ppm") || ends(".pgm");
}

}  // namespace

Dataset load_cub(const std::string& root, CubMode mode, const CertaintyMap& cmap) {
    namespace fs = std::filesystem;

    // id -> relative path, in file order (CUB ids are 1-based and contiguous,
    // but only the mapping is assumed)
    std::map<int, std::string> paths;
    {
        LineReader r(root + "/images.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id;
            std::string rel;
            if (!(is >> id >> rel)) r.fail("expected '<id> <path>'");
            if (!paths.emplace(id, rel).second) r.fail("duplicate image id");
        }
        if (paths.empty()) r.fail("no images listed");
    }

    Dataset ds;
    {
        LineReader r(root + "/classes.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id;
            std::string name;
            if (!(is >> id >> name)) r.fail("expected '<id> <name>'");
            if (id != static_cast<int>(ds.class_names.size()) + 1)
                r.fail("class ids must be 1-based and consecutive");
            ds.class_names.push_back(name);
        }
        if (ds.class_names.empty()) r.fail("no classes listed");
    }
    {
        std::string attr_path = root + "/attributes/attributes.txt";
        if (!fs::exists(attr_path)) attr_path = root + "/attributes.txt";
        LineReader r(attr_path);
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id;
            std::string name;
            if (!(is >> id >> name)) r.fail("expected '<id> <name>'");
            if (id != static_cast<int>(ds.attribute_names.size()) + 1)
                r.fail("attribute ids must be 1-based and consecutive");
            ds.attribute_names.push_back(name);
        }
        if (ds.attribute_names.empty()) r.fail("no attributes listed");
    }
    const std::size_t num_attrs = ds.attribute_names.size();

    std::map<int, int> labels;
    {
        LineReader r(root + "/image_class_labels.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id, cls;
            if (!(is >> id >> cls)) r.fail("expected '<id> <class>'");
            if (cls < 1 || cls > static_cast<int>(ds.class_names.size()))
                r.fail("class id out of range");
            labels[id] = cls - 1;
        }
    }
    std::map<int, bool> is_train;
    {
        LineReader r(root + "/train_test_split.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id, flag;
            if (!(is >> id >> flag)) r.fail("expected '<id> <is_train>'");
            if (flag != 0 && flag != 1) r.fail("split flag must be 0 or 1");
            is_train[id] = flag == 1;
        }
    }
    std::map<int, regions::PixelBox> boxes;
    {
        LineReader r(root + "/bounding_boxes.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int id;
            double x, y, w, h;
            if (!(is >> id >> x >> y >> w >> h)) r.fail("expected '<id> <x> <y> <w> <h>'");
            if (w <= 0 || h <= 0) r.fail("non-positive bbox size");
            regions::PixelBox b;
            b.x0 = static_cast<int>(std::floor(x));
            b.y0 = static_cast<int>(std::floor(y));
            b.x1 = static_cast<int>(std::ceil(x + w));
            b.y1 = static_cast<int>(std::ceil(y + h));
            boxes[id] = b;
        }
    }
    std::map<int, Vec> scores;
    {
        LineReader r(root + "/attributes/image_attribute_labels.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream is(line);
            int img, attr, present, certainty;
            // trailing fields (annotation time, stray extras) are ignored
            if (!(is >> img >> attr >> present >> certainty))
                r.fail("expected '<image> <attr> <present> <certainty> ...'");
            if (attr < 1 || attr > static_cast<int>(num_attrs)) r.fail("attribute id out of range");
            if (present != 0 && present != 1) r.fail("presence flag must be 0 or 1");
            if (certainty < 1 || certainty > 4) r.fail("certainty must be 1..4");
            auto [it, fresh] = scores.try_emplace(img);
            if (fresh) it->second.assign(num_attrs, 0.0);
            it->second[static_cast<std::size_t>(attr - 1)] = present * cmap.w[certainty];
        }
    }

    for (const auto& [id, rel] : paths) {
        auto lab = labels.find(id);
        if (lab == labels.end())
            throw ParseError(root + "/image_class_labels.txt", 0,
                             "image " + std::to_string(id) + " has no label");
        auto spl = is_train.find(id);
        if (spl == is_train.end())
            throw ParseError(root + "/train_test_split.txt", 0,
                             "image " + std::to_string(id) + " has no split flag");
        Sample s;
        s.label = lab->second;
        auto sc = scores.find(id);
        s.attribute_scores = sc != scores.end() ? sc->second : Vec(num_attrs, 0.0);
        auto bb = boxes.find(id);
        if (bb != boxes.end()) s.bbox = bb->second;

        const std::string img_path = root + "/images/" + rel;
        if (has_pnm_suffix(rel) && fs::exists(img_path)) {
            s.image = image::read_image(img_path);
            s.has_image = true;
            if (mode == CubMode::bbox && bb != boxes.end()) {
                regions::PixelBox b = bb->second;
                b.x0 = std::clamp(b.x0, 0, s.image.w - 1);
                b.y0 = std::clamp(b.y0, 0, s.image.h - 1);
                b.x1 = std::clamp(b.x1, b.x0 + 1, s.image.w);
                b.y1 = std::clamp(b.y1, b.y0 + 1, s.image.h);
                s.image = image::crop(s.image, b);
            }
        } else {
            const std::string feat_path =
                root + "/features/" + std::to_string(id) + ".kft";
            if (fs::exists(feat_path)) {
                s.features = read_feature_tensor(feat_path);
                s.has_features = true;
            }
        }
        (spl->second ? ds.train : ds.test).push_back(std::move(s));
    }
    return ds;
}

}  // namespace kerl::data
