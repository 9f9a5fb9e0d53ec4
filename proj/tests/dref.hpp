#pragma once

// Double-precision reference ops, test-only. These mirror the primitive
// definitions but share no code with the engine: they are the independent
// oracle the finite-difference checks run through.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace dref {

using Vec = std::vector<double>;

// C (m x n) = A (m x k) * B (k x n), one slice
inline Vec matmul2d(const Vec& a, const Vec& b, int64_t m, int64_t k, int64_t n) {
    Vec c(static_cast<size_t>(m * n), 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t kk = 0; kk < k; ++kk)
            for (int64_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + kk] * b[kk * n + j];
    return c;
}

inline Vec transpose2d(const Vec& a, int64_t r, int64_t c) {
    Vec out(a.size());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
    return out;
}

// batched matmul, b shared when b_slices == 1
inline Vec matmul_batched(const Vec& a, const Vec& b, int64_t batch, int64_t m, int64_t k, int64_t n,
                          bool b_shared) {
    Vec c(static_cast<size_t>(batch * m * n));
    for (int64_t s = 0; s < batch; ++s) {
        Vec as(a.begin() + s * m * k, a.begin() + (s + 1) * m * k);
        Vec bs = b_shared ? b : Vec(b.begin() + s * k * n, b.begin() + (s + 1) * k * n);
        Vec cs = matmul2d(as, bs, m, k, n);
        std::copy(cs.begin(), cs.end(), c.begin() + s * m * n);
    }
    return c;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

inline Vec add_bias(const Vec& a, const Vec& bias) {
    Vec c(a.size());
    size_t n = bias.size();
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + bias[i % n];
    return c;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

inline Vec mul(const Vec& a, const Vec& b) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
    return c;
}

inline Vec scale(const Vec& a, double s) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] * s;
    return c;
}

inline Vec relu(const Vec& a) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] > 0.0 ? a[i] : 0.0;
    return c;
}

inline Vec vtanh(const Vec& a) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = std::tanh(a[i]);
    return c;
}

inline Vec softmax_lastdim(const Vec& a, int64_t n) {
    Vec c(a.size());
    int64_t rows = static_cast<int64_t>(a.size()) / n;
    for (int64_t r = 0; r < rows; ++r) {
        double mx = a[r * n];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, a[r * n + j]);
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            c[r * n + j] = std::exp(a[r * n + j] - mx);
            sum += c[r * n + j];
        }
        for (int64_t j = 0; j < n; ++j) c[r * n + j] /= sum;
    }
    return c;
}

inline Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, int64_t n, double eps = 1e-5) {
    Vec c(x.size());
    int64_t rows = static_cast<int64_t>(x.size()) / n;
    for (int64_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (int64_t j = 0; j < n; ++j) mu += x[r * n + j];
        mu /= n;
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double d = x[r * n + j] - mu;
            var += d * d;
        }
        var /= n;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t j = 0; j < n; ++j)
            c[r * n + j] = (x[r * n + j] - mu) * inv * gamma[j] + beta[j];
    }
    return c;
}

inline Vec embedding(const Vec& table, const std::vector<int32_t>& idx, int64_t d) {
    Vec c(idx.size() * static_cast<size_t>(d));
    for (size_t i = 0; i < idx.size(); ++i)
        for (int64_t j = 0; j < d; ++j) c[i * d + j] = table[static_cast<int64_t>(idx[i]) * d + j];
    return c;
}

inline Vec masked_fill(const Vec& a, const std::vector<uint8_t>& mask, double fill) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = mask[i] ? fill : a[i];
    return c;
}

inline double mean(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += v;
    return s / static_cast<double>(a.size());
}

inline Vec smooth_l1(const Vec& a, double beta) {
    Vec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        double ax = std::abs(a[i]);
        c[i] = ax < beta ? 0.5 * a[i] * a[i] / beta : ax - 0.5 * beta;
    }
    return c;
}

inline Vec dropout_with_mask(const Vec& a, const std::vector<uint8_t>& keep, double p) {
    Vec c(a.size());
    double s = 1.0 / (1.0 - p);
    for (size_t i = 0; i < a.size(); ++i) c[i] = keep[i] ? a[i] * s : 0.0;
    return c;
}

// interleave three (B,T,d) blocks into (B,3T,d)
inline Vec interleave3(const Vec& a, const Vec& b, const Vec& c, int64_t B, int64_t T, int64_t d) {
    Vec out(static_cast<size_t>(B * 3 * T * d));
    const Vec* parts[3] = {&a, &b, &c};
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t t = 0; t < T; ++t)
            for (int r = 0; r < 3; ++r)
                for (int64_t j = 0; j < d; ++j)
                    out[((bi * 3 * T) + 3 * t + r) * d + j] = (*parts[r])[(bi * T + t) * d + j];
    return out;
}

inline Vec take_every(const Vec& a, int64_t B, int64_t L, int64_t d, int64_t start, int64_t stride) {
    int64_t n = (L - 1 - start) / stride + 1;
    Vec out(static_cast<size_t>(B * n * d));
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < d; ++j)
                out[(bi * n + i) * d + j] = a[(bi * L + start + i * stride) * d + j];
    return out;
}

inline Vec slice_axis(const Vec& a, int64_t outer, int64_t axis_len, int64_t inner, int64_t start,
                      int64_t len) {
    Vec out(static_cast<size_t>(outer * len * inner));
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < len; ++i)
            for (int64_t j = 0; j < inner; ++j)
                out[(o * len + i) * inner + j] = a[(o * axis_len + start + i) * inner + j];
    return out;
}

}  // namespace dref
