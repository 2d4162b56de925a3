#pragma once

#include <cstddef>
#include <memory>
#include <type_traits>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biolite/errors.hpp"

namespace biolite {

// Dense NCHW shape. All four dimensions must be strictly positive.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Shape&) const = default;

    std::size_t elems() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }

    void validate() const {
        if (n <= 0 || c <= 0 || h <= 0 || w <= 0) {
            throw ShapeError("invalid tensor shape (" + std::to_string(n) + "," +
                             std::to_string(c) + "," + std::to_string(h) + "," +
                             std::to_string(w) + "): all dimensions must be positive");
        }
    }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Vector allocator that default-initializes (skips zeroing) trivially
// constructible elements; kernels use it for outputs they fully overwrite.
template <typename T>
struct uninit_allocator : std::allocator<T> {
    template <typename U>
    struct rebind {
        using other = uninit_allocator<U>;
    };
    template <typename U>
    void construct(U* ptr) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(ptr)) U;
    }
    template <typename U, typename... Args>
    void construct(U* ptr, Args&&... args) {
        ::new (static_cast<void*>(ptr)) U(std::forward<Args>(args)...);
    }
};

struct Uninitialized {};
inline constexpr Uninitialized uninitialized{};

// Rank-4 dense tensor, row-major (n, c, h, w). Element (n,c,h,w) lives at flat
// offset ((n*C + c)*H + h)*W + w. Values are immutable unless mutated through
// the explicit non-const accessors; no internal locking.
template <typename T>
class Tensor4T {
public:
    Tensor4T() = default;

    explicit Tensor4T(Shape shape, T fill = T{}) : shape_(shape) {
        shape.validate();
        data_.assign(shape.elems(), fill);
    }

    // Allocates without writing; every element must be stored before reading.
    Tensor4T(Shape shape, Uninitialized) : shape_(shape) {
        shape.validate();
        data_.resize(shape.elems());
    }

    static Tensor4T filled(Shape shape, T value) { return Tensor4T(shape, value); }

    const Shape& shape() const { return shape_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    std::size_t offset(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

    std::span<T> flat() { return data_; }
    std::span<const T> flat() const { return data_; }

    // Contiguous H*W plane of one (sample, channel) pair.
    std::span<T> plane(int n, int c) {
        return std::span<T>(data_.data() + offset(n, c, 0, 0),
                            static_cast<std::size_t>(shape_.h) * shape_.w);
    }
    std::span<const T> plane(int n, int c) const {
        return std::span<const T>(data_.data() + offset(n, c, 0, 0),
                                  static_cast<std::size_t>(shape_.h) * shape_.w);
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    bool same_shape(const Tensor4T& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<T, uninit_allocator<T>> data_;
};

using Tensor4 = Tensor4T<float>;
using Tensor4d = Tensor4T<double>;

enum class BinaryOp { add, sub, mul };

template <typename T>
Tensor4T<T> elementwise(const Tensor4T<T>& a, const Tensor4T<T>& b, BinaryOp op) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise: shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
    Tensor4T<T> out(a.shape(), uninitialized);
    auto ap = a.flat();
    auto bp = b.flat();
    auto op_span = out.flat();
    switch (op) {
        case BinaryOp::add:
            for (std::size_t i = 0; i < ap.size(); ++i) op_span[i] = ap[i] + bp[i];
            break;
        case BinaryOp::sub:
            for (std::size_t i = 0; i < ap.size(); ++i) op_span[i] = ap[i] - bp[i];
            break;
        case BinaryOp::mul:
            for (std::size_t i = 0; i < ap.size(); ++i) op_span[i] = ap[i] * bp[i];
            break;
    }
    return out;
}

template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    return elementwise(a, b, BinaryOp::add);
}
template <typename T>
Tensor4T<T> sub(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    return elementwise(a, b, BinaryOp::sub);
}
template <typename T>
Tensor4T<T> mul(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    return elementwise(a, b, BinaryOp::mul);
}

// In-place a += b; used on gradient accumulation paths.
template <typename T>
void add_inplace(Tensor4T<T>& a, const Tensor4T<T>& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add_inplace: shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
    auto ap = a.flat();
    auto bp = b.flat();
    for (std::size_t i = 0; i < ap.size(); ++i) ap[i] += bp[i];
}

// Channel concatenation: a's channels occupy output indices [0, a.c),
// b's occupy [a.c, a.c + b.c).
template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw ShapeError("concat_channels: batch/spatial mismatch " + sa.str() + " vs " +
                         sb.str());
    }
    Tensor4T<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w}, uninitialized);
    const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
        T* dst = out.data() + out.offset(n, 0, 0, 0);
        const T* pa = a.data() + a.offset(n, 0, 0, 0);
        std::copy(pa, pa + plane * sa.c, dst);
        const T* pb = b.data() + b.offset(n, 0, 0, 0);
        std::copy(pb, pb + plane * sb.c, dst + plane * sa.c);
    }
    return out;
}

// Copies channels [c_begin, c_end) into a new tensor.
template <typename T>
Tensor4T<T> slice_channels(const Tensor4T<T>& x, int c_begin, int c_end) {
    const Shape& s = x.shape();
    if (c_begin < 0 || c_end > s.c || c_begin >= c_end) {
        throw ShapeError("slice_channels: range [" + std::to_string(c_begin) + "," +
                         std::to_string(c_end) + ") out of bounds for c=" + std::to_string(s.c));
    }
    Tensor4T<T> out(Shape{s.n, c_end - c_begin, s.h, s.w}, uninitialized);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        const T* src = x.data() + x.offset(n, c_begin, 0, 0);
        T* dst = out.data() + out.offset(n, 0, 0, 0);
        std::copy(src, src + plane * (c_end - c_begin), dst);
    }
    return out;
}

} // namespace biolite
