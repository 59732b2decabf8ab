#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mixdown/tensor.hpp"

namespace mixdown {

// Ordered collection of named tensors: the carrier for pre-trained,
// backdoored, mixed and defended weights. Iteration order is insertion
// order; names are unique, non-empty UTF-8.
class WeightSet {
public:
    using Item = std::pair<std::string, Tensor>;

    void insert(std::string name, Tensor t);

    bool contains(std::string_view name) const;
    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);

    size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const std::vector<Item>& items() const { return items_; }
    std::vector<Item>& items() { return items_; }
    std::vector<std::string> names() const;

private:
    std::vector<Item> items_;
    std::unordered_map<std::string, size_t> index_;
};

// Same names in the same order with the same shapes.
bool same_schema(const WeightSet& a, const WeightSet& b);
void require_same_schema(const WeightSet& a, const WeightSet& b);

// Bitwise equality of names, order, shapes and f32 payloads.
bool bits_equal(const WeightSet& a, const WeightSet& b);

// Sum of element counts over tensors not named in `exclude`.
// Throws SchemaError if `exclude` names an unknown tensor.
size_t total_dimension(const WeightSet& ws, const std::set<std::string>& exclude = {});

// WSF1 container: magic "WSF1"; u32 tensor count; per tensor u16 name byte
// length, name bytes, u8 rank, rank x u64 dims, then product(dims) x f32
// payload. All integers and floats little-endian. Canonical: equal
// WeightSets encode to identical bytes.
std::vector<uint8_t> encode_weightset(const WeightSet& ws);
WeightSet decode_weightset(const std::vector<uint8_t>& bytes);

void write_weightset(const WeightSet& ws, const std::filesystem::path& path);
WeightSet read_weightset(const std::filesystem::path& path);

}  // namespace mixdown
