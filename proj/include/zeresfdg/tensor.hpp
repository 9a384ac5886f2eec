#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zeresfdg {

struct Shape4 {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    bool operator==(const Shape4&) const = default;

    int64_t elements() const { return n * c * h * w; }
    int64_t per_sample() const { return c * h * w; }
    std::string str() const;
};

// Dense NCHW tensor, float32 storage, row-major contiguous.
// Flat index of (b, ch, y, x) is ((b*c + ch)*h + y)*w + x.
struct Tensor4 {
    Shape4 shape;
    std::vector<float> data;

    Tensor4() = default;
    Tensor4(Shape4 s, float fill = 0.0f);
    Tensor4(Shape4 s, std::vector<float> values);

    int64_t size() const { return shape.elements(); }

    float& at(int64_t b, int64_t ch, int64_t y, int64_t x) {
        return data[((b * shape.c + ch) * shape.h + y) * shape.w + x];
    }
    float at(int64_t b, int64_t ch, int64_t y, int64_t x) const {
        return data[((b * shape.c + ch) * shape.h + y) * shape.w + x];
    }

    std::span<float> sample(int64_t b) {
        return {data.data() + b * shape.per_sample(), static_cast<size_t>(shape.per_sample())};
    }
    std::span<const float> sample(int64_t b) const {
        return {data.data() + b * shape.per_sample(), static_cast<size_t>(shape.per_sample())};
    }

    bool all_finite() const;
};

// Sampled Gaussian taps, renormalized to sum 1. radius = ceil(3*sigma),
// length 2*radius + 1.
struct GaussianKernel {
    double sigma = 0.0;
    int64_t radius = 0;
    std::vector<double> taps;

    static GaussianKernel make(double sigma);
};

// Mirror an out-of-range index back into [0, n) without repeating the border
// sample (..., 2, 1, 0 | 1, 2, ...).
int64_t reflect_index(int64_t p, int64_t n);

// a + k*b elementwise.
Tensor4 add_scaled(const Tensor4& a, const Tensor4& b, float k);

// Per-sample dot product over (c, h, w), accumulated in double.
std::vector<double> dot_per_sample(const Tensor4& a, const Tensor4& b);

// Per-sample population standard deviation over (c, h, w), two-pass in double.
std::vector<double> std_per_sample(const Tensor4& a);

// Separable blur, horizontal then vertical, reflect padding. The row pass is
// kept in double and rounded to float32 once after the column pass.
Tensor4 gaussian_blur(const Tensor4& a, const GaussianKernel& k);

// Per-channel 3x3 Sobel gradient magnitude with reflect padding, averaged over
// channels into a single-channel (n, 1, h, w) output. Needs h, w >= 3.
Tensor4 sobel_magnitude(const Tensor4& a);

// Per-sample quantile with linear interpolation between order statistics at
// position q*(m-1). q must lie in [0, 1].
std::vector<double> quantile_per_sample(const Tensor4& a, double q);

// Quantile of a plain value buffer, same interpolation rule. Sorts a copy.
double quantile_of(std::span<const float> values, double q);

}  // namespace zeresfdg
