#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kerl/tensor.hpp"

// Checkpoint container: ordered string metadata plus an ordered table of
// named float64 tensors, serialized to a small binary format.
//
// File layout (all integers little-endian):
//   magic "KERLCKP1" (8 bytes)
//   u32 meta count; per entry: u32 key length, key bytes, u64 value length,
//     value bytes
//   u32 tensor count; per entry: u32 name length, name bytes, u64 element
//     count, elements as IEEE-754 binary64 bit patterns
// Doubles round-trip bit-exactly.

namespace kerl::ckpt {

struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, Vec>> tensors;

    void put_meta(const std::string& key, const std::string& value);
    const std::string* find_meta(const std::string& key) const;
    const std::string& need_meta(const std::string& key) const;

    void put(const std::string& name, const Vec& v);
    void put(const std::string& name, const Mat& m);
    const Vec* find(const std::string& name) const;
    const Vec& need(const std::string& name, std::size_t expected_size) const;
    void read_into(const std::string& name, Mat& m) const;
    void read_into(const std::string& name, Vec& v) const;
};

void save(const Checkpoint& c, const std::string& path);
Checkpoint load(const std::string& path);

}  // namespace kerl::ckpt
