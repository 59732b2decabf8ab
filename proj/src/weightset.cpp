#include "mixdown/weightset.hpp"

#include <bit>
#include <fstream>
#include <limits>

#include "mixdown/errors.hpp"

namespace mixdown {

void WeightSet::insert(std::string name, Tensor t) {
    if (name.empty()) throw SchemaError("tensor name must be non-empty");
    if (index_.count(name)) throw SchemaError("duplicate tensor name: " + name);
    index_.emplace(name, items_.size());
    items_.emplace_back(std::move(name), std::move(t));
}

bool WeightSet::contains(std::string_view name) const {
    return index_.count(std::string(name)) != 0;
}

const Tensor& WeightSet::at(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        throw SchemaError("unknown tensor name: " + std::string(name));
    return items_[it->second].second;
}

Tensor& WeightSet::at(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        throw SchemaError("unknown tensor name: " + std::string(name));
    return items_[it->second].second;
}

std::vector<std::string> WeightSet::names() const {
    std::vector<std::string> out;
    out.reserve(items_.size());
    for (const auto& [n, _] : items_) out.push_back(n);
    return out;
}

bool same_schema(const WeightSet& a, const WeightSet& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a.items()[i].first != b.items()[i].first) return false;
        if (a.items()[i].second.dims != b.items()[i].second.dims) return false;
    }
    return true;
}

void require_same_schema(const WeightSet& a, const WeightSet& b) {
    if (!same_schema(a, b))
        throw SchemaError("weight sets have different schemas (names or shapes)");
}

bool bits_equal(const WeightSet& a, const WeightSet& b) {
    if (!same_schema(a, b)) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!bits_equal(a.items()[i].second, b.items()[i].second)) return false;
    return true;
}

size_t total_dimension(const WeightSet& ws, const std::set<std::string>& exclude) {
    for (const auto& name : exclude)
        if (!ws.contains(name))
            throw SchemaError("exclude names unknown tensor: " + name);
    size_t d = 0;
    for (const auto& [name, t] : ws.items())
        if (!exclude.count(name)) d += t.numel();
    return d;
}

namespace {

constexpr char kMagic[4] = {'W', 'S', 'F', '1'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

// Cursor with truncation checks; every read error names the byte offset.
struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > bytes.size())
            throw ParseError(pos, std::string("truncated ") + what);
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(bytes[pos]) |
                     static_cast<uint16_t>(bytes[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return bytes[pos++];
    }
};

}  // namespace

std::vector<uint8_t> encode_weightset(const WeightSet& ws) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    if (ws.size() > std::numeric_limits<uint32_t>::max())
        throw SchemaError("too many tensors for WSF1");
    put_u32(out, static_cast<uint32_t>(ws.size()));
    for (const auto& [name, t] : ws.items()) {
        if (name.size() > std::numeric_limits<uint16_t>::max())
            throw SchemaError("tensor name too long for WSF1: " + name);
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        if (t.rank() > 255) throw SchemaError("tensor rank too large for WSF1");
        out.push_back(static_cast<uint8_t>(t.rank()));
        for (size_t d : t.dims) put_u64(out, static_cast<uint64_t>(d));
        for (float v : t.data) put_f32(out, v);
    }
    return out;
}

WeightSet decode_weightset(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4, "magic");
    for (int i = 0; i < 4; ++i) {
        if (bytes[i] != static_cast<uint8_t>(kMagic[i]))
            throw ParseError(0, "bad magic (expected \"WSF1\")");
    }
    r.pos = 4;
    const uint32_t count = r.u32("tensor count");
    WeightSet ws;
    for (uint32_t ti = 0; ti < count; ++ti) {
        const size_t name_off = r.pos;
        const uint16_t name_len = r.u16("name length");
        if (name_len == 0) throw ParseError(name_off, "empty tensor name");
        r.need(name_len, "name");
        std::string name(bytes.begin() + static_cast<long>(r.pos),
                         bytes.begin() + static_cast<long>(r.pos + name_len));
        r.pos += name_len;
        if (ws.contains(name))
            throw ParseError(name_off, "duplicate tensor name: " + name);
        const uint8_t rank = r.u8("rank");
        std::vector<size_t> dims(rank);
        size_t numel = 1;
        for (uint8_t di = 0; di < rank; ++di) {
            const size_t dim_off = r.pos;
            const uint64_t d = r.u64("dimension");
            if (d == 0) throw ParseError(dim_off, "zero dimension");
            if (d > std::numeric_limits<size_t>::max() ||
                static_cast<size_t>(d) > std::numeric_limits<size_t>::max() / numel)
                throw ParseError(dim_off, "dimension product overflow");
            dims[di] = static_cast<size_t>(d);
            numel *= dims[di];
        }
        if (numel > (bytes.size() - r.pos) / 4)
            throw ParseError(r.pos, "truncated payload");
        std::vector<float> data(numel);
        for (size_t i = 0; i < numel; ++i)
            data[i] = std::bit_cast<float>(r.u32("payload"));
        Tensor t;
        t.dims = std::move(dims);
        t.data = std::move(data);
        ws.insert(std::move(name), std::move(t));
    }
    if (r.pos != bytes.size())
        throw ParseError(r.pos, "trailing data after last tensor");
    return ws;
}

void write_weightset(const WeightSet& ws, const std::filesystem::path& path) {
    const auto bytes = encode_weightset(ws);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

WeightSet read_weightset(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return decode_weightset(bytes);
}

}  // namespace mixdown
