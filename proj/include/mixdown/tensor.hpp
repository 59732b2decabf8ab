#pragma once

#include <cstddef>
#include <vector>

#include "mixdown/rng.hpp"

namespace mixdown {

// Dense row-major f32 tensor. Immutable by convention once built: library
// operations return fresh tensors instead of mutating inputs. A rank-0
// tensor is a scalar (one element).
struct Tensor {
    std::vector<size_t> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<size_t> dims_, std::vector<float> data_);

    size_t numel() const { return data.size(); }
    size_t rank() const { return dims.size(); }

    float& at(size_t i, size_t j);
    float at(size_t i, size_t j) const;
};

// Product of dims; throws ShapeError on a zero dimension or overflow.
size_t checked_numel(const std::vector<size_t>& dims);

Tensor zeros(const std::vector<size_t>& dims);
Tensor randn(const std::vector<size_t>& dims, RngState& rng, float stddev = 1.0f);

// 2-D matrix product. Accumulation is f32, sequential over the inner
// dimension (deterministic mode; there is no other mode here).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float c);
Tensor hadamard(const Tensor& a, const Tensor& b);

// sqrt of the f32 sequential sum of squares.
float l2_norm(const Tensor& a);

bool same_dims(const Tensor& a, const Tensor& b);

// Bitwise payload + dims equality (distinguishes NaN payloads and signed zeros).
bool bits_equal(const Tensor& a, const Tensor& b);

}  // namespace mixdown
