#include "mixdown/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "mixdown/errors.hpp"

namespace mixdown {

size_t checked_numel(const std::vector<size_t>& dims) {
    size_t n = 1;
    for (size_t d : dims) {
        if (d == 0) throw ShapeError("zero dimension");
        if (d > std::numeric_limits<size_t>::max() / n)
            throw ShapeError("dimension product overflow");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<size_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
    if (checked_numel(dims) != data.size())
        throw ShapeError("data length does not match dimension product");
}

float& Tensor::at(size_t i, size_t j) {
    return data[i * dims[1] + j];
}

float Tensor::at(size_t i, size_t j) const {
    return data[i * dims[1] + j];
}

Tensor zeros(const std::vector<size_t>& dims) {
    Tensor t;
    t.dims = dims;
    t.data.assign(checked_numel(dims), 0.0f);
    return t;
}

Tensor randn(const std::vector<size_t>& dims, RngState& rng, float stddev) {
    if (!(stddev > 0.0f)) throw ConfigError("randn: stddev must be positive");
    Tensor t;
    t.dims = dims;
    const size_t n = checked_numel(dims);
    t.data.resize(n);
    for (size_t i = 0; i < n; ++i) t.data[i] = rng.next_normal(stddev);
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank-2");
    if (a.dims[1] != b.dims[0])
        throw ShapeError("matmul: inner dimensions differ");
    const size_t m = a.dims[0], k = a.dims[1], n = b.dims[1];
    Tensor c = zeros({m, n});
    for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
            const float av = a.data[i * k + p];
            for (size_t j = 0; j < n; ++j)
                c.data[i * n + j] += av * b.data[p * n + j];
        }
    }
    return c;
}

namespace {

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dims != b.dims)
        throw ShapeError(std::string(op) + ": operand shapes differ");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "add");
    Tensor c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "sub");
    Tensor c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Tensor scale(const Tensor& a, float c) {
    Tensor r = a;
    for (float& v : r.data) v *= c;
    return r;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_dims(a, b, "hadamard");
    Tensor c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

float l2_norm(const Tensor& a) {
    float s = 0.0f;
    for (float v : a.data) s += v * v;
    return std::sqrt(s);
}

bool same_dims(const Tensor& a, const Tensor& b) { return a.dims == b.dims; }

bool bits_equal(const Tensor& a, const Tensor& b) {
    if (a.dims != b.dims) return false;
    for (size_t i = 0; i < a.data.size(); ++i)
        if (std::bit_cast<uint32_t>(a.data[i]) != std::bit_cast<uint32_t>(b.data[i]))
            return false;
    return true;
}

}  // namespace mixdown
