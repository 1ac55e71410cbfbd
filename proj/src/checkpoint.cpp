#include "kerl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "kerl/error.hpp"

namespace kerl::ckpt {

namespace {

constexpr char kMagic[8] = {'K', 'E', 'R', 'L', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError(path, 0, "truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw ParseError(path, 0, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& path) {
    if (n > (1ull << 32)) throw ParseError(path, 0, "implausible field length");
    std::string s(static_cast<std::size_t>(n), '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(in.gcount()) != n)
        throw ParseError(path, 0, "truncated checkpoint");
    return s;
}

}  // namespace

void Checkpoint::put_meta(const std::string& key, const std::string& value) {
    for (auto& kv : meta)
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    meta.emplace_back(key, value);
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
    for (const auto& kv : meta)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

const std::string& Checkpoint::need_meta(const std::string& key) const {
    const std::string* v = find_meta(key);
    if (!v) throw ParseError("checkpoint", 0, "missing metadata key: " + key);
    return *v;
}

void Checkpoint::put(const std::string& name, const Vec& v) { tensors.emplace_back(name, v); }

void Checkpoint::put(const std::string& name, const Mat& m) { tensors.emplace_back(name, m.a); }

const Vec* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.first == name) return &t.second;
    return nullptr;
}

const Vec& Checkpoint::need(const std::string& name, std::size_t expected_size) const {
    const Vec* v = find(name);
    if (!v) throw ParseError("checkpoint", 0, "missing tensor: " + name);
    if (v->size() != expected_size)
        throw ParseError("checkpoint", 0,
                         msg("tensor ", name, ": expected ", expected_size, " values, found ",
                             v->size()));
    return *v;
}

void Checkpoint::read_into(const std::string& name, Mat& m) const {
    m.a = need(name, m.a.size());
}

void Checkpoint::read_into(const std::string& name, Vec& v) const { v = need(name, v.size()); }

void save(const Checkpoint& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out.write(kMagic, 8);
    put_u32(out, static_cast<std::uint32_t>(c.meta.size()));
    for (const auto& [k, v] : c.meta) {
        put_u32(out, static_cast<std::uint32_t>(k.size()));
        out.write(k.data(), static_cast<std::streamsize>(k.size()));
        put_u64(out, v.size());
        out.write(v.data(), static_cast<std::streamsize>(v.size()));
    }
    put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, data] : c.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(out, data.size());
        for (double d : data) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            put_u64(out, bits);
        }
    }
    if (!out) throw IoError("short write: " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError(path, 0, "bad checkpoint magic");
    Checkpoint c;
    std::uint32_t nmeta = get_u32(in, path);
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        std::string key = get_bytes(in, get_u32(in, path), path);
        std::string value = get_bytes(in, get_u64(in, path), path);
        c.meta.emplace_back(std::move(key), std::move(value));
    }
    std::uint32_t ntens = get_u32(in, path);
    for (std::uint32_t i = 0; i < ntens; ++i) {
        std::string name = get_bytes(in, get_u32(in, path), path);
        std::uint64_t count = get_u64(in, path);
        if (count > (1ull << 31)) throw ParseError(path, 0, "implausible tensor size");
        Vec data(static_cast<std::size_t>(count));
        for (auto& d : data) {
            std::uint64_t bits = get_u64(in, path);
            std::memcpy(&d, &bits, 8);
        }
        c.tensors.emplace_back(std::move(name), std::move(data));
    }
    return c;
}

}  // namespace kerl::ckpt
