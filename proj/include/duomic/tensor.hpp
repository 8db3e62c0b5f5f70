#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "duomic/errors.hpp"

namespace duomic {

/// Dense row-major N-d array. float carries training state; double is used
/// by the finite-difference gradient checks.
template <typename T>
struct BasicTensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    BasicTensor() = default;

    explicit BasicTensor(std::vector<std::size_t> s, T fill = T(0))
        : shape(std::move(s)), data(count(shape), fill) {}

    BasicTensor(std::vector<std::size_t> s, std::vector<T> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str());
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    bool same_shape(const BasicTensor& o) const { return shape == o.shape; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // 2-d and 4-d accessors cover everything the network needs.
    T& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }

    /// Throws NumericError when any element is NaN/Inf. `context` names the
    /// producing operation in the message.
    void check_finite(const char* context) const {
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(static_cast<double>(data[i])))
                throw NumericError(std::string(context) + ": non-finite value at flat index " +
                                   std::to_string(i));
        }
    }
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
void require_shape(const BasicTensor<T>& t, const std::vector<std::size_t>& s, const char* what) {
    if (t.shape != s) {
        BasicTensor<T> want(s);
        throw DimensionError(std::string(what) + ": expected shape " + want.shape_str() +
                             ", got " + t.shape_str());
    }
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t r, const char* what) {
    if (t.rank() != r)
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) +
                             ", got " + t.shape_str());
}

}  // namespace duomic
