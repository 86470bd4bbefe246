#include "moce/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "moce/errors.hpp"

namespace moce::num {

namespace {

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Output tensor for an op; differentiable only if the op is being recorded.
Tensor make_output(Shape shape, std::vector<double> values, bool recorded) {
    return Tensor(std::move(shape), std::move(values), recorded);
}

void accumulate(const Tensor& target, std::span<const double> delta) {
    auto g = target.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra and structure
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    const bool rec = needs_grad(tape, {&a, &b});
    Tensor c = make_output({m, n}, std::move(out), rec);
    if (rec) {
        tape->record([a, b, c, m, k, n]() mutable {
            const auto dc = c.grad();
            if (a.requires_grad()) {
                auto da = a.mutable_grad();
                const auto bv = b.values();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * bv[p * n + j];
                        da[i * k + p] += acc;
                    }
                }
            }
            if (b.requires_grad()) {
                auto db = b.mutable_grad();
                const auto av = a.values();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av[i * k + p];
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * dc[i * n + j];
                    }
                }
            }
        });
    }
    return c;
}

Tensor transpose(const Tensor& a, Tape* tape) {
    require_rank2(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    const auto av = a.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    const bool rec = needs_grad(tape, {&a});
    Tensor t = make_output({n, m}, std::move(out), rec);
    if (rec) {
        tape->record([a, t, m, n]() mutable {
            auto da = a.mutable_grad();
            const auto dt = t.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dt[j * m + i];
        });
    }
    return t;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    require_same_shape(a, b, "add");
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    const bool rec = needs_grad(tape, {&a, &b});
    Tensor c = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        tape->record([a, b, c]() mutable {
            if (a.requires_grad()) accumulate(a, c.grad());
            if (b.requires_grad()) accumulate(b, c.grad());
        });
    }
    return c;
}

Tensor add_row(const Tensor& a, const Tensor& bias, Tape* tape) {
    require_rank2(a, "add_row");
    const std::size_t m = a.rows(), n = a.cols();
    if (bias.numel() != n || bias.rank() > 2 || (bias.rank() == 2 && bias.rows() != 1)) {
        throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not broadcast over " +
                         shape_str(a.shape()));
    }
    const auto av = a.values();
    const auto bv = bias.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
    const bool rec = needs_grad(tape, {&a, &bias});
    Tensor c = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        tape->record([a, bias, c, m, n]() mutable {
            const auto dc = c.grad();
            if (a.requires_grad()) accumulate(a, dc);
            if (bias.requires_grad()) {
                auto db = bias.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) db[j] += dc[i * n + j];
            }
        });
    }
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
    require_same_shape(a, b, "mul");
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    const bool rec = needs_grad(tape, {&a, &b});
    Tensor c = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        tape->record([a, b, c]() mutable {
            const auto dc = c.grad();
            if (a.requires_grad()) {
                auto da = a.mutable_grad();
                const auto bv = b.values();
                for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * bv[i];
            }
            if (b.requires_grad()) {
                auto db = b.mutable_grad();
                const auto av = a.values();
                for (std::size_t i = 0; i < db.size(); ++i) db[i] += dc[i] * av[i];
            }
        });
    }
    return c;
}

Tensor scale(const Tensor& a, double factor, Tape* tape) {
    const auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        tape->record([a, c, factor]() mutable {
            auto da = a.mutable_grad();
            const auto dc = c.grad();
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * factor;
        });
    }
    return c;
}

Tensor mask(const Tensor& a, std::span<const double> mask_values, Tape* tape) {
    if (mask_values.size() != a.numel()) {
        throw ShapeError("mask: " + std::to_string(mask_values.size()) +
                         " mask values for tensor " + shape_str(a.shape()));
    }
    std::vector<double> m(mask_values.begin(), mask_values.end());
    const auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * m[i];
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output(a.shape(), std::move(out), rec);
    if (rec) {
        tape->record([a, c, m = std::move(m)]() mutable {
            auto da = a.mutable_grad();
            const auto dc = c.grad();
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * m[i];
        });
    }
    return c;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end, Tape* tape) {
    require_rank2(a, "slice_rows");
    if (begin >= end || end > a.rows()) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of " + shape_str(a.shape()));
    }
    const std::size_t n = a.cols();
    const auto av = a.values();
    std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * n),
                            av.begin() + static_cast<std::ptrdiff_t>(end * n));
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output({end - begin, n}, std::move(out), rec);
    if (rec) {
        tape->record([a, c, begin, n]() mutable {
            auto da = a.mutable_grad();
            const auto dc = c.grad();
            for (std::size_t i = 0; i < dc.size(); ++i) da[begin * n + i] += dc[i];
        });
    }
    return c;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end, Tape* tape) {
    require_rank2(a, "slice_cols");
    if (begin >= end || end > a.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of " + shape_str(a.shape()));
    }
    const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
    const auto av = a.values();
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * n + begin + j];
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output({m, w}, std::move(out), rec);
    if (rec) {
        tape->record([a, c, begin, m, n, w]() mutable {
            auto da = a.mutable_grad();
            const auto dc = c.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) da[i * n + begin + j] += dc[i * w + j];
        });
    }
    return c;
}

Tensor concat_rows(std::span<const Tensor> parts, Tape* tape) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.cols() != n) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        }
        m += p.rows();
        any_grad = any_grad || p.requires_grad();
    }
    std::vector<double> out;
    out.reserve(m * n);
    for (const auto& p : parts) {
        const auto v = p.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    const bool rec = tape != nullptr && any_grad;
    Tensor c = make_output({m, n}, std::move(out), rec);
    if (rec) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        tape->record([inputs = std::move(inputs), c]() mutable {
            const auto dc = c.grad();
            std::size_t offset = 0;
            for (auto& p : inputs) {
                const std::size_t len = p.numel();
                if (p.requires_grad()) accumulate(p, dc.subspan(offset, len));
                offset += len;
            }
        });
    }
    return c;
}

Tensor concat_cols(std::span<const Tensor> parts, Tape* tape) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.rows() != m) {
            throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        n += p.cols();
        any_grad = any_grad || p.requires_grad();
    }
    std::vector<double> out(m * n);
    std::size_t col = 0;
    for (const auto& p : parts) {
        const auto v = p.values();
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * n + col + j] = v[i * w + j];
        col += w;
    }
    const bool rec = tape != nullptr && any_grad;
    Tensor c = make_output({m, n}, std::move(out), rec);
    if (rec) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        tape->record([inputs = std::move(inputs), c, m, n]() mutable {
            const auto dc = c.grad();
            std::size_t col = 0;
            for (auto& p : inputs) {
                const std::size_t w = p.cols();
                if (p.requires_grad()) {
                    auto dp = p.mutable_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += dc[i * n + col + j];
                }
                col += w;
            }
        });
    }
    return c;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices, Tape* tape) {
    require_rank2(table, "gather_rows");
    if (indices.empty()) throw ShapeError("gather_rows: no indices");
    const std::size_t rows = table.rows(), n = table.cols();
    const auto tv = table.values();
    std::vector<double> out(indices.size() * n);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) {
            throw IndexError("gather_rows: index " + std::to_string(indices[r]) + " >= " +
                             std::to_string(rows));
        }
        std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(indices[r] * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    const bool rec = needs_grad(tape, {&table});
    Tensor c = make_output({indices.size(), n}, std::move(out), rec);
    if (rec) {
        std::vector<std::size_t> idx(indices.begin(), indices.end());
        tape->record([table, c, idx = std::move(idx), n]() mutable {
            auto dt = table.mutable_grad();
            const auto dc = c.grad();
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < n; ++j) dt[idx[r] * n + j] += dc[r * n + j];
        });
    }
    return c;
}

Tensor mean_rows(const Tensor& a, Tape* tape) {
    require_rank2(a, "mean_rows");
    const std::size_t m = a.rows(), n = a.cols();
    const auto av = a.values();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
    for (double& v : out) v /= static_cast<double>(m);
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output({1, n}, std::move(out), rec);
    if (rec) {
        tape->record([a, c, m, n]() mutable {
            auto da = a.mutable_grad();
            const auto dc = c.grad();
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dc[j] * inv;
        });
    }
    return c;
}

Tensor sum(const Tensor& a, Tape* tape) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const bool rec = needs_grad(tape, {&a});
    Tensor c = make_output({}, {s}, rec);
    if (rec) {
        tape->record([a, c]() mutable {
            const double g = c.grad()[0];
            for (double& d : a.mutable_grad()) d += g;
        });
    }
    return c;
}

Tensor weighted_sum(std::span<const Tensor> items, const Tensor& weights,
                    std::span<const std::size_t> indices, Tape* tape) {
    if (items.empty() || items.size() != indices.size()) {
        throw ShapeError("weighted_sum: " + std::to_string(items.size()) + " items for " +
                         std::to_string(indices.size()) + " indices");
    }
    const Shape& shape = items[0].shape();
    const auto wv = weights.values();
    std::vector<double> out(items[0].numel(), 0.0);
    bool any_grad = weights.requires_grad();
    for (std::size_t j = 0; j < items.size(); ++j) {
        if (items[j].shape() != shape) {
            throw ShapeError("weighted_sum: item shape " + shape_str(items[j].shape()) + " vs " +
                             shape_str(shape));
        }
        if (indices[j] >= wv.size()) {
            throw IndexError("weighted_sum: weight index " + std::to_string(indices[j]) +
                             " >= " + std::to_string(wv.size()));
        }
        const double w = wv[indices[j]];
        const auto iv = items[j].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * iv[i];
        any_grad = any_grad || items[j].requires_grad();
    }
    const bool rec = tape != nullptr && any_grad;
    Tensor c = make_output(shape, std::move(out), rec);
    if (rec) {
        std::vector<Tensor> inputs(items.begin(), items.end());
        std::vector<std::size_t> idx(indices.begin(), indices.end());
        tape->record([inputs = std::move(inputs), idx = std::move(idx), weights, c]() mutable {
            const auto dc = c.grad();
            const auto wv = weights.values();
            for (std::size_t j = 0; j < inputs.size(); ++j) {
                auto& item = inputs[j];
                if (item.requires_grad()) {
                    auto di = item.mutable_grad();
                    const double w = wv[idx[j]];
                    for (std::size_t i = 0; i < di.size(); ++i) di[i] += w * dc[i];
                }
                if (weights.requires_grad()) {
                    const auto iv = item.values();
                    double dot = 0.0;
                    for (std::size_t i = 0; i < iv.size(); ++i) dot += iv[i] * dc[i];
                    weights.mutable_grad()[idx[j]] += dot;
                }
            }
        });
    }
    return c;
}

// ---------------------------------------------------------------------------
// Activations and normalisation
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits, int axis, Tape* tape) {
    const Shape& shape = logits.shape();
    const int rank = static_cast<int>(shape.size());
    if (rank == 0) throw ShapeError("softmax: empty axis on scalar tensor");
    const int ax = axis < 0 ? rank + axis : axis;
    if (ax < 0 || ax >= rank) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape));
    }
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < ax; ++d) outer *= shape[d];
    for (int d = ax + 1; d < rank; ++d) inner *= shape[d];
    const std::size_t n = shape[ax];
    const auto x = logits.values();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            double mx = x[base];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(x[base + j * inner] - mx);
                y[base + j * inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < n; ++j) y[base + j * inner] /= z;
        }
    }
    const bool rec = needs_grad(tape, {&logits});
    Tensor out = make_output(shape, std::move(y), rec);
    if (rec) {
        tape->record([logits, out, outer, inner, n]() mutable {
            auto dx = logits.mutable_grad();
            const auto dy = out.grad();
            const auto yv = out.values();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        dot += dy[base + j * inner] * yv[base + j * inner];
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t i = base + j * inner;
                        dx[i] += yv[i] * (dy[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& x, Tape* tape) {
    const auto xv = x.values();
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = xv[i];
        // Branch on sign so exp never overflows.
        if (v >= 0) {
            y[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y[i] = e / (1.0 + e);
        }
    }
    const bool rec = needs_grad(tape, {&x});
    Tensor out = make_output(x.shape(), std::move(y), rec);
    if (rec) {
        tape->record([x, out]() mutable {
            auto dx = x.mutable_grad();
            const auto dy = out.grad();
            const auto yv = out.values();
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
        });
    }
    return out;
}

Tensor gelu(const Tensor& x, Tape* tape) {
    const auto xv = x.values();
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * normal_cdf(xv[i]);
    const bool rec = needs_grad(tape, {&x});
    Tensor out = make_output(x.shape(), std::move(y), rec);
    if (rec) {
        tape->record([x, out]() mutable {
            auto dx = x.mutable_grad();
            const auto dy = out.grad();
            const auto xv = x.values();
            for (std::size_t i = 0; i < dx.size(); ++i) {
                dx[i] += dy[i] * (normal_cdf(xv[i]) + xv[i] * normal_pdf(xv[i]));
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                  Tape* tape) {
    require_rank2(x, "layer_norm");
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.numel() != n || bias.numel() != n) {
        throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " for input " + shape_str(x.shape()));
    }
    const auto xv = x.values();
    const auto gv = gain.values();
    const auto bv = bias.values();
    std::vector<double> y(m * n), xhat(m * n), rstd(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xv[i * n + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        rstd[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (xv[i * n + j] - mu) * rstd[i];
            xhat[i * n + j] = h;
            y[i * n + j] = h * gv[j] + bv[j];
        }
    }
    const bool rec = needs_grad(tape, {&x, &gain, &bias});
    Tensor out = make_output(x.shape(), std::move(y), rec);
    if (rec) {
        tape->record([x, gain, bias, out, xhat = std::move(xhat), rstd = std::move(rstd), m,
                      n]() mutable {
            const auto dy = out.grad();
            const auto gv = gain.values();
            if (gain.requires_grad()) {
                auto dg = gain.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) dg[j] += dy[i * n + j] * xhat[i * n + j];
            }
            if (bias.requires_grad()) {
                auto db = bias.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) db[j] += dy[i * n + j];
            }
            if (x.requires_grad()) {
                auto dx = x.mutable_grad();
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = dy[i * n + j] * gv[j];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat[i * n + j];
                    }
                    mean_dh *= inv_n;
                    mean_dh_h *= inv_n;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = dy[i * n + j] * gv[j];
                        dx[i * n + j] += rstd[i] * (dh - mean_dh - xhat[i * n + j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

Tensor normalize_rows(const Tensor& x, Tape* tape) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto xv = x.values();
    std::vector<double> y(m * n), sums(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j];
        if (!(s > 0.0)) throw NumericError("normalize_rows: non-positive row sum");
        sums[i] = s;
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] / s;
    }
    const bool rec = needs_grad(tape, {&x});
    Tensor out = make_output(x.shape(), std::move(y), rec);
    if (rec) {
        tape->record([x, out, sums = std::move(sums), m, n]() mutable {
            auto dx = x.mutable_grad();
            const auto dy = out.grad();
            const auto yv = out.values();
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += dy[i * n + j] * yv[i * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    dx[i * n + j] += (dy[i * n + j] - dot) / sums[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets, Tape* tape) {
    require_rank2(logits, "cross_entropy");
    const std::size_t b = logits.rows(), n = logits.cols();
    if (targets.size() != b) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()));
    }
    const auto lv = logits.values();
    std::vector<double> probs(b * n);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (targets[i] >= n) {
            throw IndexError("cross_entropy: target " + std::to_string(targets[i]) +
                             " out of range for " + std::to_string(n) + " classes");
        }
        const double* row = lv.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        total += lse - row[targets[i]];
        for (std::size_t j = 0; j < n; ++j) probs[i * n + j] = std::exp(row[j] - lse);
    }
    const bool rec = needs_grad(tape, {&logits});
    Tensor out = make_output({}, {total / static_cast<double>(b)}, rec);
    if (rec) {
        std::vector<std::size_t> t(targets.begin(), targets.end());
        tape->record([logits, out, probs = std::move(probs), t = std::move(t), b, n]() mutable {
            auto dl = logits.mutable_grad();
            const double g = out.grad()[0] / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    dl[i * n + j] += g * (probs[i * n + j] - (j == t[i] ? 1.0 : 0.0));
                }
            }
        });
    }
    return out;
}

Tensor rmse(const Tensor& pred, std::span<const double> target, Tape* tape) {
    const std::size_t b = pred.numel();
    const bool column = pred.rank() == 1 || (pred.rank() == 2 && pred.cols() == 1);
    if (!column || target.size() != b) {
        throw ShapeError("rmse: prediction " + shape_str(pred.shape()) + " vs " +
                         std::to_string(target.size()) + " targets");
    }
    const auto pv = pred.values();
    std::vector<double> diff(b);
    double sq = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        diff[i] = pv[i] - target[i];
        sq += diff[i] * diff[i];
    }
    const double r = std::sqrt(sq / static_cast<double>(b));
    const bool rec = needs_grad(tape, {&pred});
    Tensor out = make_output({}, {r}, rec);
    if (rec) {
        tape->record([pred, out, diff = std::move(diff), b, r]() mutable {
            // The subgradient at r == 0 is taken as zero.
            if (r == 0.0) return;
            auto dp = pred.mutable_grad();
            const double g = out.grad()[0] / (static_cast<double>(b) * r);
            for (std::size_t i = 0; i < b; ++i) dp[i] += g * diff[i];
        });
    }
    return out;
}

Tensor cv_squared(const Tensor& x, Tape* tape) {
    const auto xv = x.values();
    const double n = static_cast<double>(xv.size());
    double mu = 0.0;
    for (double v : xv) mu += v;
    mu /= n;
    if (std::abs(mu) < 1e-300) throw NumericError("cv_squared: zero mean");
    double var = 0.0;
    for (double v : xv) var += (v - mu) * (v - mu);
    var /= n;
    const double cv2 = var / (mu * mu);
    const bool rec = needs_grad(tape, {&x});
    Tensor out = make_output({}, {cv2}, rec);
    if (rec) {
        tape->record([x, out, mu, var, n]() mutable {
            auto dx = x.mutable_grad();
            const auto xv = x.values();
            const double g = out.grad()[0];
            const double mu2 = mu * mu;
            for (std::size_t i = 0; i < dx.size(); ++i) {
                const double dvar = 2.0 * (xv[i] - mu) / n;
                const double dmu = 1.0 / n;
                dx[i] += g * (dvar / mu2 - 2.0 * var / (mu2 * mu) * dmu);
            }
        });
    }
    return out;
}

}  // namespace moce::num
