#include "zeresfdg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

std::string Shape4::str() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "(%lld,%lld,%lld,%lld)", static_cast<long long>(n),
                  static_cast<long long>(c), static_cast<long long>(h), static_cast<long long>(w));
    return buf;
}

static void check_positive(const Shape4& s) {
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
        throw std::invalid_argument("tensor shape must be positive in every dim, got " + s.str());
    }
}

static void check_same_shape(const char* op, const Shape4& a, const Shape4& b) {
    if (!(a == b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
    }
}

Tensor4::Tensor4(Shape4 s, float fill) : shape(s) {
    check_positive(s);
    data.assign(static_cast<size_t>(s.elements()), fill);
}

Tensor4::Tensor4(Shape4 s, std::vector<float> values) : shape(s), data(std::move(values)) {
    check_positive(s);
    if (static_cast<int64_t>(data.size()) != s.elements()) {
        throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                    " does not match shape " + s.str());
    }
}

bool Tensor4::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

GaussianKernel GaussianKernel::make(double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("gaussian kernel sigma must be > 0, got " + std::to_string(sigma));
    }
    GaussianKernel k;
    k.sigma = sigma;
    k.radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    k.taps.resize(static_cast<size_t>(2 * k.radius + 1));
    double sum = 0.0;
    for (int64_t i = -k.radius; i <= k.radius; i++) {
        double t = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        k.taps[static_cast<size_t>(i + k.radius)] = t;
        sum += t;
    }
    for (double& t : k.taps) {
        t /= sum;
    }
    return k;
}

int64_t reflect_index(int64_t p, int64_t n) {
    if (n == 1) {
        return 0;
    }
    while (p < 0 || p >= n) {
        if (p < 0) {
            p = -p;
        }
        if (p >= n) {
            p = 2 * (n - 1) - p;
        }
    }
    return p;
}

Tensor4 add_scaled(const Tensor4& a, const Tensor4& b, float k) {
    check_same_shape("add_scaled", a.shape, b.shape);
    Tensor4 out(a.shape);
    for (int64_t i = 0; i < a.size(); i++) {
        out.data[i] = a.data[i] + k * b.data[i];
    }
    return out;
}

std::vector<double> dot_per_sample(const Tensor4& a, const Tensor4& b) {
    check_same_shape("dot_per_sample", a.shape, b.shape);
    std::vector<double> out(static_cast<size_t>(a.shape.n));
    const int64_t m = a.shape.per_sample();
    for (int64_t s = 0; s < a.shape.n; s++) {
        const float* pa = a.data.data() + s * m;
        const float* pb = b.data.data() + s * m;
        double acc = 0.0;
        for (int64_t i = 0; i < m; i++) {
            acc += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
        }
        out[static_cast<size_t>(s)] = acc;
    }
    return out;
}

std::vector<double> std_per_sample(const Tensor4& a) {
    std::vector<double> out(static_cast<size_t>(a.shape.n));
    const int64_t m = a.shape.per_sample();
    for (int64_t s = 0; s < a.shape.n; s++) {
        const float* p = a.data.data() + s * m;
        double mean = 0.0;
        for (int64_t i = 0; i < m; i++) {
            mean += p[i];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; i++) {
            double d = p[i] - mean;
            var += d * d;
        }
        out[static_cast<size_t>(s)] = std::sqrt(var / static_cast<double>(m));
    }
    return out;
}

Tensor4 gaussian_blur(const Tensor4& a, const GaussianKernel& k) {
    const int64_t h = a.shape.h;
    const int64_t w = a.shape.w;
    const int64_t r = k.radius;
    Tensor4 out(a.shape);
    std::vector<double> rows(static_cast<size_t>(h * w));
    const int64_t planes = a.shape.n * a.shape.c;
    for (int64_t pl = 0; pl < planes; pl++) {
        const float* src = a.data.data() + pl * h * w;
        float* dst = out.data.data() + pl * h * w;
        for (int64_t y = 0; y < h; y++) {
            for (int64_t x = 0; x < w; x++) {
                double acc = 0.0;
                for (int64_t i = -r; i <= r; i++) {
                    acc += k.taps[static_cast<size_t>(i + r)] * src[y * w + reflect_index(x + i, w)];
                }
                rows[static_cast<size_t>(y * w + x)] = acc;
            }
        }
        for (int64_t y = 0; y < h; y++) {
            for (int64_t x = 0; x < w; x++) {
                double acc = 0.0;
                for (int64_t i = -r; i <= r; i++) {
                    acc += k.taps[static_cast<size_t>(i + r)] * rows[static_cast<size_t>(reflect_index(y + i, h) * w + x)];
                }
                dst[y * w + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Tensor4 sobel_magnitude(const Tensor4& a) {
    const int64_t h = a.shape.h;
    const int64_t w = a.shape.w;
    if (h < 3 || w < 3) {
        throw std::invalid_argument("sobel_magnitude needs h, w >= 3, got " + a.shape.str());
    }
    static const double kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const double ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    Tensor4 out({a.shape.n, 1, h, w});
    for (int64_t b = 0; b < a.shape.n; b++) {
        float* dst = out.data.data() + b * h * w;
        for (int64_t y = 0; y < h; y++) {
            for (int64_t x = 0; x < w; x++) {
                double mag_sum = 0.0;
                for (int64_t ch = 0; ch < a.shape.c; ch++) {
                    const float* src = a.data.data() + (b * a.shape.c + ch) * h * w;
                    double gx = 0.0;
                    double gy = 0.0;
                    for (int64_t j = 0; j < 3; j++) {
                        for (int64_t i = 0; i < 3; i++) {
                            double v = src[reflect_index(y + j - 1, h) * w + reflect_index(x + i - 1, w)];
                            gx += kx[j][i] * v;
                            gy += ky[j][i] * v;
                        }
                    }
                    mag_sum += std::sqrt(gx * gx + gy * gy);
                }
                dst[y * w + x] = static_cast<float>(mag_sum / static_cast<double>(a.shape.c));
            }
        }
    }
    return out;
}

double quantile_of(std::span<const float> values, double q) {
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("quantile q must lie in [0, 1], got " + std::to_string(q));
    }
    if (values.empty()) {
        throw std::invalid_argument("quantile of empty value set");
    }
    std::vector<float> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[lo + 1]) - static_cast<double>(sorted[lo]));
}

std::vector<double> quantile_per_sample(const Tensor4& a, double q) {
    std::vector<double> out(static_cast<size_t>(a.shape.n));
    for (int64_t s = 0; s < a.shape.n; s++) {
        out[static_cast<size_t>(s)] = quantile_of(a.sample(s), q);
    }
    return out;
}

}  // namespace zeresfdg
