#include "bessctl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bessctl::ad {

namespace {

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
    }
}

TensorPtr make_out(Tape* tape, Shape shape, std::vector<float> values,
                   std::initializer_list<TensorPtr> inputs) {
    auto out = std::make_shared<Tensor>();
    out->shape = std::move(shape);
    out->values = std::move(values);
    bool rg = false, nf = false;
    for (const auto& in : inputs) {
        rg = rg || in->requires_grad;
        nf = nf || in->nonfinite;
    }
    out->requires_grad = tape != nullptr && rg;
    out->nonfinite = nf;
    return out;
}

void record(Tape* tape, const char* name, std::vector<TensorPtr> inputs, const TensorPtr& out,
            std::function<void()> backward) {
    if (!tape) return;
    tape->record(std::move(inputs), out, out->requires_grad ? std::move(backward) : nullptr, name);
}

// dst += src, elementwise into a float grad buffer
void axpy(std::vector<float>& dst, const std::vector<float>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_doubles(std::vector<float>& dst, const std::vector<double>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<float>(src[i]);
}

// C += A (m x k, row-major) * B (k x n, row-major), double accumulation
void mm_acc(const float* A, const float* B, double* C, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        const float* arow = A + i * k;
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const float* brow = B + kk * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * static_cast<double>(brow[j]);
        }
    }
}

std::vector<float> transpose_last2(const Shape& shape, const std::vector<float>& v) {
    int nd = static_cast<int>(shape.size());
    int64_t r = shape[nd - 2], c = shape[nd - 1];
    int64_t batch = 1;
    for (int i = 0; i < nd - 2; ++i) batch *= shape[i];
    std::vector<float> out(v.size());
    for (int64_t s = 0; s < batch; ++s) {
        const float* src = v.data() + s * r * c;
        float* dst = out.data() + s * r * c;
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    return out;
}

struct MatDims {
    int64_t batch, m, k, n;
    bool b_broadcast;
};

MatDims matmul_dims(const TensorPtr& a, const TensorPtr& b, bool ta, bool tb) {
    if (a->ndim() < 2) throw std::invalid_argument("matmul: lhs must have >= 2 dims, got " + shape_str(a->shape));
    if (b->ndim() != a->ndim() && b->ndim() != 2)
        throw std::invalid_argument("matmul: rhs must be 2-D or match lhs rank: " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
    MatDims d{};
    d.m = ta ? a->dim(-1) : a->dim(-2);
    int64_t ka = ta ? a->dim(-2) : a->dim(-1);
    int64_t kb = tb ? b->dim(-1) : b->dim(-2);
    d.n = tb ? b->dim(-2) : b->dim(-1);
    if (ka != kb)
        throw std::invalid_argument("matmul: inner dims disagree: " + shape_str(a->shape) + " x " +
                                    shape_str(b->shape) + (ta ? " (lhs transposed)" : "") +
                                    (tb ? " (rhs transposed)" : ""));
    d.k = ka;
    d.batch = 1;
    for (int i = 0; i < a->ndim() - 2; ++i) d.batch *= a->shape[i];
    d.b_broadcast = b->ndim() == 2 && a->ndim() > 2;
    if (!d.b_broadcast && b->ndim() == a->ndim()) {
        for (int i = 0; i < a->ndim() - 2; ++i) {
            if (a->shape[i] != b->shape[i])
                throw std::invalid_argument("matmul: leading dims disagree: " + shape_str(a->shape) +
                                            " vs " + shape_str(b->shape));
        }
    }
    return d;
}

}  // namespace

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b, bool trans_a, bool trans_b) {
    MatDims d = matmul_dims(a, b, trans_a, trans_b);

    // materialize effective (non-transposed) operands once
    std::vector<float> at_store, bt_store;
    const float* ea = a->values.data();
    const float* eb = b->values.data();
    if (trans_a) {
        at_store = transpose_last2(a->shape, a->values);
        ea = at_store.data();
    }
    if (trans_b) {
        bt_store = transpose_last2(b->shape, b->values);
        eb = bt_store.data();
    }

    Shape out_shape(a->shape.begin(), a->shape.end() - 2);
    out_shape.push_back(d.m);
    out_shape.push_back(d.n);

    std::vector<double> acc(static_cast<size_t>(d.batch * d.m * d.n), 0.0);
    for (int64_t s = 0; s < d.batch; ++s) {
        const float* bp = d.b_broadcast || b->ndim() == 2 ? eb : eb + s * d.k * d.n;
        mm_acc(ea + s * d.m * d.k, bp, acc.data() + s * d.m * d.n, d.m, d.k, d.n);
    }
    std::vector<float> vals(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) vals[i] = static_cast<float>(acc[i]);

    auto out = make_out(tape, std::move(out_shape), std::move(vals), {a, b});
    record(tape, "matmul", {a, b}, out, [a, b, out, d, trans_a, trans_b]() {
        // effective operands again (tensors are immutable once recorded)
        std::vector<float> at_store, bt_store;
        const float* ea = a->values.data();
        const float* eb = b->values.data();
        if (trans_a) {
            at_store = transpose_last2(a->shape, a->values);
            ea = at_store.data();
        }
        if (trans_b) {
            bt_store = transpose_last2(b->shape, b->values);
            eb = bt_store.data();
        }
        const float* g = out->grad.data();
        bool b_is_2d = b->ndim() == 2;

        if (a->requires_grad) {
            // dEffA = G * effB^T per slice
            Shape ebs = b_is_2d ? Shape{d.k, d.n} : Shape{d.batch, d.k, d.n};
            std::vector<float> ebt =
                transpose_last2(ebs, std::vector<float>(eb, eb + (b_is_2d ? d.k * d.n : d.batch * d.k * d.n)));
            std::vector<double> da(static_cast<size_t>(d.batch * d.m * d.k), 0.0);
            for (int64_t s = 0; s < d.batch; ++s) {
                const float* bt = b_is_2d ? ebt.data() : ebt.data() + s * d.n * d.k;
                mm_acc(g + s * d.m * d.n, bt, da.data() + s * d.m * d.k, d.m, d.n, d.k);
            }
            if (trans_a) {
                Shape das(a->shape.begin(), a->shape.end() - 2);
                das.push_back(d.m);
                das.push_back(d.k);
                std::vector<float> daf(da.size());
                for (size_t i = 0; i < da.size(); ++i) daf[i] = static_cast<float>(da[i]);
                axpy(a->grad, transpose_last2(das, daf));
            } else {
                add_doubles(a->grad, da);
            }
        }
        if (b->requires_grad) {
            // dEffB = effA^T * G, summed over slices when b is shared
            int64_t slices = d.batch;
            std::vector<double> db(static_cast<size_t>((b_is_2d ? 1 : slices) * d.k * d.n), 0.0);
            Shape eas = d.batch > 1 ? Shape{d.batch, d.m, d.k} : Shape{d.m, d.k};
            std::vector<float> eat =
                transpose_last2(eas, std::vector<float>(ea, ea + d.batch * d.m * d.k));
            for (int64_t s = 0; s < slices; ++s) {
                double* dst = b_is_2d ? db.data() : db.data() + s * d.k * d.n;
                mm_acc(eat.data() + s * d.k * d.m, g + s * d.m * d.n, dst, d.k, d.m, d.n);
            }
            if (trans_b) {
                Shape dbs = b_is_2d ? Shape{d.k, d.n} : Shape{d.batch, d.k, d.n};
                std::vector<float> dbf(db.size());
                for (size_t i = 0; i < db.size(); ++i) dbf[i] = static_cast<float>(db[i]);
                axpy(b->grad, transpose_last2(dbs, dbf));
            } else {
                add_doubles(b->grad, db);
            }
        }
    });
    return out;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    bool bias = b->ndim() == 1 && a->ndim() > 1 && a->dim(-1) == b->dim(0);
    if (!bias) check_same_shape("add", a, b);

    std::vector<float> vals(a->values.size());
    if (bias) {
        int64_t n = b->dim(0);
        int64_t rows = a->numel() / n;
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < n; ++j) vals[r * n + j] = a->values[r * n + j] + b->values[j];
    } else {
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = a->values[i] + b->values[i];
    }
    auto out = make_out(tape, a->shape, std::move(vals), {a, b});
    record(tape, "add", {a, b}, out, [a, b, out, bias]() {
        if (a->requires_grad) axpy(a->grad, out->grad);
        if (b->requires_grad) {
            if (bias) {
                int64_t n = b->dim(0);
                int64_t rows = a->numel() / n;
                std::vector<double> acc(static_cast<size_t>(n), 0.0);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < n; ++j) acc[j] += out->grad[r * n + j];
                add_doubles(b->grad, acc);
            } else {
                axpy(b->grad, out->grad);
            }
        }
    });
    return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("sub", a, b);
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = a->values[i] - b->values[i];
    auto out = make_out(tape, a->shape, std::move(vals), {a, b});
    record(tape, "sub", {a, b}, out, [a, b, out]() {
        if (a->requires_grad) axpy(a->grad, out->grad);
        if (b->requires_grad)
            for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] -= out->grad[i];
    });
    return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape("mul", a, b);
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = a->values[i] * b->values[i];
    auto out = make_out(tape, a->shape, std::move(vals), {a, b});
    record(tape, "mul", {a, b}, out, [a, b, out]() {
        if (a->requires_grad)
            for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i] * b->values[i];
        if (b->requires_grad)
            for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i] * a->values[i];
    });
    return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(a->values[i] * c);
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "scale", {a}, out, [a, out, c]() {
        if (a->requires_grad)
            for (size_t i = 0; i < a->grad.size(); ++i)
                a->grad[i] += static_cast<float>(out->grad[i] * c);
    });
    return out;
}

TensorPtr relu(Tape* tape, const TensorPtr& a) {
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = a->values[i] > 0.0f ? a->values[i] : 0.0f;
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "relu", {a}, out, [a, out]() {
        if (a->requires_grad)
            for (size_t i = 0; i < a->grad.size(); ++i)
                if (a->values[i] > 0.0f) a->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr tanh_op(Tape* tape, const TensorPtr& a) {
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = std::tanh(a->values[i]);
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "tanh", {a}, out, [a, out]() {
        if (a->requires_grad)
            for (size_t i = 0; i < a->grad.size(); ++i) {
                float y = out->values[i];
                a->grad[i] += out->grad[i] * (1.0f - y * y);
            }
    });
    return out;
}

TensorPtr softmax_lastdim(Tape* tape, const TensorPtr& a) {
    int64_t n = a->dim(-1);
    int64_t rows = a->numel() / n;
    std::vector<float> vals(a->values.size());
    for (int64_t r = 0; r < rows; ++r) {
        const float* x = a->values.data() + r * n;
        float* y = vals.data() + r * n;
        double mx = x[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double e = std::exp(static_cast<double>(x[j]) - mx);
            y[j] = static_cast<float>(e);
            sum += e;
        }
        for (int64_t j = 0; j < n; ++j) y[j] = static_cast<float>(y[j] / sum);
    }
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "softmax_lastdim", {a}, out, [a, out, n, rows]() {
        if (!a->requires_grad) return;
        for (int64_t r = 0; r < rows; ++r) {
            const float* p = out->values.data() + r * n;
            const float* g = out->grad.data() + r * n;
            float* dx = a->grad.data() + r * n;
            double s = 0.0;
            for (int64_t j = 0; j < n; ++j) s += static_cast<double>(p[j]) * g[j];
            for (int64_t j = 0; j < n; ++j)
                dx[j] += static_cast<float>(p[j] * (static_cast<double>(g[j]) - s));
        }
    });
    return out;
}

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                     double eps) {
    int64_t n = x->dim(-1);
    if (gamma->ndim() != 1 || gamma->dim(0) != n || beta->ndim() != 1 || beta->dim(0) != n) {
        throw std::invalid_argument("layer_norm: affine params must be [" + std::to_string(n) +
                                    "], got " + shape_str(gamma->shape) + " and " + shape_str(beta->shape));
    }
    int64_t rows = x->numel() / n;
    std::vector<float> vals(x->values.size());
    auto xhat = std::make_shared<std::vector<float>>(x->values.size());
    auto inv = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const float* xr = x->values.data() + r * n;
        double mu = 0.0;
        for (int64_t j = 0; j < n; ++j) mu += xr[j];
        mu /= n;
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double d = xr[j] - mu;
            var += d * d;
        }
        var /= n;
        double iv = 1.0 / std::sqrt(var + eps);
        (*inv)[r] = iv;
        for (int64_t j = 0; j < n; ++j) {
            float h = static_cast<float>((xr[j] - mu) * iv);
            (*xhat)[r * n + j] = h;
            vals[r * n + j] = h * gamma->values[j] + beta->values[j];
        }
    }
    auto out = make_out(tape, x->shape, std::move(vals), {x, gamma, beta});
    record(tape, "layer_norm", {x, gamma, beta}, out, [x, gamma, beta, out, xhat, inv, n, rows]() {
        std::vector<double> dgamma(static_cast<size_t>(n), 0.0), dbeta(static_cast<size_t>(n), 0.0);
        for (int64_t r = 0; r < rows; ++r) {
            const float* g = out->grad.data() + r * n;
            const float* h = xhat->data() + r * n;
            if (gamma->requires_grad || beta->requires_grad) {
                for (int64_t j = 0; j < n; ++j) {
                    dgamma[j] += static_cast<double>(g[j]) * h[j];
                    dbeta[j] += g[j];
                }
            }
            if (x->requires_grad) {
                double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
                for (int64_t j = 0; j < n; ++j) {
                    double dh = static_cast<double>(g[j]) * gamma->values[j];
                    m1 += dh;
                    m2 += dh * h[j];
                }
                m1 /= n;
                m2 /= n;
                float* dx = x->grad.data() + r * n;
                double iv = (*inv)[r];
                for (int64_t j = 0; j < n; ++j) {
                    double dh = static_cast<double>(g[j]) * gamma->values[j];
                    dx[j] += static_cast<float>(iv * (dh - m1 - h[j] * m2));
                }
            }
        }
        if (gamma->requires_grad) add_doubles(gamma->grad, dgamma);
        if (beta->requires_grad) add_doubles(beta->grad, dbeta);
    });
    return out;
}

TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, const std::vector<int32_t>& indices,
                           Shape prefix_shape) {
    if (table->ndim() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D, got " + shape_str(table->shape));
    int64_t rows = table->dim(0), d = table->dim(1);
    if (shape_numel(prefix_shape) != static_cast<int64_t>(indices.size()))
        throw std::invalid_argument("embedding_lookup: prefix shape " + shape_str(prefix_shape) +
                                    " does not match " + std::to_string(indices.size()) + " indices");
    for (int32_t idx : indices) {
        if (idx < 0 || idx >= rows)
            throw std::invalid_argument("embedding_lookup: index " + std::to_string(idx) +
                                        " out of range [0," + std::to_string(rows) + ")");
    }
    std::vector<float> vals(indices.size() * static_cast<size_t>(d));
    for (size_t i = 0; i < indices.size(); ++i) {
        std::memcpy(vals.data() + i * d, table->values.data() + static_cast<int64_t>(indices[i]) * d,
                    static_cast<size_t>(d) * sizeof(float));
    }
    Shape out_shape = prefix_shape;
    out_shape.push_back(d);
    auto out = make_out(tape, std::move(out_shape), std::move(vals), {table});
    auto idx_copy = std::make_shared<std::vector<int32_t>>(indices);
    record(tape, "embedding_lookup", {table}, out, [table, out, idx_copy, d]() {
        if (!table->requires_grad) return;
        for (size_t i = 0; i < idx_copy->size(); ++i) {
            float* dst = table->grad.data() + static_cast<int64_t>((*idx_copy)[i]) * d;
            const float* src = out->grad.data() + i * d;
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const auto& first = parts[0];
    int nd = first->ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw std::invalid_argument("concat: axis out of range");
    int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p->ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
        for (int i = 0; i < nd; ++i) {
            if (i != axis && p->shape[i] != first->shape[i])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(p->shape) + " vs " +
                                            shape_str(first->shape));
        }
        axis_total += p->shape[axis];
    }
    Shape out_shape = first->shape;
    out_shape[axis] = axis_total;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[i];
    for (int i = axis + 1; i < nd; ++i) inner *= out_shape[i];

    std::vector<float> vals(static_cast<size_t>(shape_numel(out_shape)));
    int64_t out_stride = axis_total * inner;
    int64_t off = 0;
    for (const auto& p : parts) {
        int64_t blk = p->shape[axis] * inner;
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(vals.data() + o * out_stride + off, p->values.data() + o * blk,
                        static_cast<size_t>(blk) * sizeof(float));
        off += blk;
    }

    auto out = std::make_shared<Tensor>();
    out->shape = std::move(out_shape);
    out->values = std::move(vals);
    for (const auto& p : parts) {
        out->requires_grad = out->requires_grad || p->requires_grad;
        out->nonfinite = out->nonfinite || p->nonfinite;
    }
    out->requires_grad = out->requires_grad && tape != nullptr;

    std::vector<TensorPtr> inputs(parts.begin(), parts.end());
    record(tape, "concat", inputs, out, [parts, out, outer, inner, out_stride]() {
        int64_t off = 0;
        for (const auto& p : parts) {
            int64_t axis_len = p->numel() / (outer * inner);
            int64_t pblk = axis_len * inner;
            if (p->requires_grad) {
                for (int64_t o = 0; o < outer; ++o) {
                    const float* g = out->grad.data() + o * out_stride + off;
                    float* dst = p->grad.data() + o * pblk;
                    for (int64_t i = 0; i < pblk; ++i) dst[i] += g[i];
                }
            }
            off += pblk;
        }
    });
    return out;
}

TensorPtr slice(Tape* tape, const TensorPtr& a, int axis, int64_t start, int64_t len) {
    int nd = a->ndim();
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw std::invalid_argument("slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > a->shape[axis])
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of bounds for axis size " +
                                    std::to_string(a->shape[axis]));
    Shape out_shape = a->shape;
    out_shape[axis] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a->shape[i];
    for (int i = axis + 1; i < nd; ++i) inner *= a->shape[i];
    int64_t in_stride = a->shape[axis] * inner;
    int64_t out_blk = len * inner;

    std::vector<float> vals(static_cast<size_t>(outer * out_blk));
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(vals.data() + o * out_blk, a->values.data() + o * in_stride + start * inner,
                    static_cast<size_t>(out_blk) * sizeof(float));

    auto out = make_out(tape, std::move(out_shape), std::move(vals), {a});
    record(tape, "slice", {a}, out, [a, out, outer, inner, in_stride, out_blk, start]() {
        if (!a->requires_grad) return;
        for (int64_t o = 0; o < outer; ++o) {
            const float* g = out->grad.data() + o * out_blk;
            float* dst = a->grad.data() + o * in_stride + start * inner;
            for (int64_t i = 0; i < out_blk; ++i) dst[i] += g[i];
        }
    });
    return out;
}

TensorPtr masked_fill(Tape* tape, const TensorPtr& a, const std::vector<uint8_t>& mask, float fill) {
    if (mask.size() != a->values.size())
        throw std::invalid_argument("masked_fill: mask size " + std::to_string(mask.size()) +
                                    " != tensor numel " + std::to_string(a->values.size()));
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = mask[i] ? fill : a->values[i];
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
    record(tape, "masked_fill", {a}, out, [a, out, mask_copy]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < a->grad.size(); ++i)
            if (!(*mask_copy)[i]) a->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr reduce_mean(Tape* tape, const TensorPtr& a) {
    double sum = 0.0;
    for (float v : a->values) sum += v;
    double mean = sum / static_cast<double>(a->numel());
    auto out = make_out(tape, {1}, {static_cast<float>(mean)}, {a});
    out->hi = mean;
    out->has_hi = true;
    record(tape, "reduce_mean", {a}, out, [a, out]() {
        if (!a->requires_grad) return;
        float g = static_cast<float>(static_cast<double>(out->grad[0]) / a->numel());
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
    });
    return out;
}

TensorPtr smooth_l1(Tape* tape, const TensorPtr& a, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1: beta must be > 0");
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) {
        double x = a->values[i];
        double ax = std::abs(x);
        vals[i] = static_cast<float>(ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta);
    }
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "smooth_l1", {a}, out, [a, out, beta]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < a->grad.size(); ++i) {
            double x = a->values[i];
            double d = std::abs(x) < beta ? x / beta : (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
            a->grad[i] += static_cast<float>(out->grad[i] * d);
        }
    });
    return out;
}

TensorPtr dropout(Tape* tape, const TensorPtr& a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (p == 0.0) return a;
    auto keep = std::make_shared<std::vector<uint8_t>>(a->values.size());
    float s = static_cast<float>(1.0 / (1.0 - p));
    std::vector<float> vals(a->values.size());
    for (size_t i = 0; i < vals.size(); ++i) {
        bool k = rng.uniform() >= p;
        (*keep)[i] = k;
        vals[i] = k ? a->values[i] * s : 0.0f;
    }
    auto out = make_out(tape, a->shape, std::move(vals), {a});
    record(tape, "dropout", {a}, out, [a, out, keep, s]() {
        if (!a->requires_grad) return;
        for (size_t i = 0; i < a->grad.size(); ++i)
            if ((*keep)[i]) a->grad[i] += out->grad[i] * s;
    });
    return out;
}

TensorPtr interleave3(Tape* tape, const TensorPtr& a, const TensorPtr& b, const TensorPtr& c) {
    check_same_shape("interleave3", a, b);
    check_same_shape("interleave3", a, c);
    if (a->ndim() != 3) throw std::invalid_argument("interleave3: expects (B,T,d), got " + shape_str(a->shape));
    int64_t B = a->dim(0), T = a->dim(1), d = a->dim(2);
    std::vector<float> vals(static_cast<size_t>(B * 3 * T * d));
    const TensorPtr parts[3] = {a, b, c};
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t t = 0; t < T; ++t)
            for (int r = 0; r < 3; ++r)
                std::memcpy(vals.data() + ((bi * 3 * T) + 3 * t + r) * d,
                            parts[r]->values.data() + (bi * T + t) * d,
                            static_cast<size_t>(d) * sizeof(float));
    auto out = make_out(tape, {B, 3 * T, d}, std::move(vals), {a, b, c});
    record(tape, "interleave3", {a, b, c}, out, [a, b, c, out, B, T, d]() {
        const TensorPtr parts[3] = {a, b, c};
        for (int r = 0; r < 3; ++r) {
            if (!parts[r]->requires_grad) continue;
            for (int64_t bi = 0; bi < B; ++bi)
                for (int64_t t = 0; t < T; ++t) {
                    const float* g = out->grad.data() + ((bi * 3 * T) + 3 * t + r) * d;
                    float* dst = parts[r]->grad.data() + (bi * T + t) * d;
                    for (int64_t j = 0; j < d; ++j) dst[j] += g[j];
                }
        }
    });
    return out;
}

TensorPtr take_every(Tape* tape, const TensorPtr& a, int64_t start, int64_t stride) {
    if (a->ndim() != 3) throw std::invalid_argument("take_every: expects (B,L,d), got " + shape_str(a->shape));
    int64_t B = a->dim(0), L = a->dim(1), d = a->dim(2);
    if (start < 0 || start >= L || stride <= 0)
        throw std::invalid_argument("take_every: bad start/stride for axis size " + std::to_string(L));
    int64_t n = (L - 1 - start) / stride + 1;
    std::vector<float> vals(static_cast<size_t>(B * n * d));
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t i = 0; i < n; ++i)
            std::memcpy(vals.data() + (bi * n + i) * d,
                        a->values.data() + (bi * L + start + i * stride) * d,
                        static_cast<size_t>(d) * sizeof(float));
    auto out = make_out(tape, {B, n, d}, std::move(vals), {a});
    record(tape, "take_every", {a}, out, [a, out, B, L, d, n, start, stride]() {
        if (!a->requires_grad) return;
        for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t i = 0; i < n; ++i) {
                const float* g = out->grad.data() + (bi * n + i) * d;
                float* dst = a->grad.data() + (bi * L + start + i * stride) * d;
                for (int64_t j = 0; j < d; ++j) dst[j] += g[j];
            }
    });
    return out;
}

}  // namespace bessctl::ad
