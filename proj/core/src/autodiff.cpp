#include "edl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "edl/errors.hpp"
#include "edl/special.hpp"

namespace edl {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_op(const char* op, Shape shape, std::vector<double> value,
               std::vector<NodePtr> inputs, std::function<void(Node&)> backprop) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool tracked = false;
    for (const auto& in : inputs) tracked = tracked || in->tracked;
    if (tracked) {
        node->tracked = true;
        node->grad.assign(node->value.size(), 0.0);
        node->inputs = std::move(inputs);
        node->backprop = std::move(backprop);
    }
    return Tensor(std::move(node));
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " do not broadcast");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// row-major strides of `in` right-aligned against `out`, 0 on broadcast axes
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::int64_t> strides(out.size(), 0);
    std::int64_t s = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
        const std::size_t o = i + (out.size() - in.size());
        strides[o] = (in[i] == 1 && out[o] != 1) ? 0 : s;
        s *= in[i];
    }
    return strides;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_bcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
    const std::int64_t n = shape_size(out);
    if (sa == out && sb == out) {
        for (std::int64_t i = 0; i < n; ++i) f(i, i, i);
        return;
    }
    if (sa == out && shape_size(sb) == 1) {
        for (std::int64_t i = 0; i < n; ++i) f(i, i, 0);
        return;
    }
    if (sb == out && shape_size(sa) == 1) {
        for (std::int64_t i = 0; i < n; ++i) f(i, 0, i);
        return;
    }
    const auto stra = broadcast_strides(sa, out);
    const auto strb = broadcast_strides(sb, out);
    std::vector<std::int64_t> coord(out.size(), 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        f(i, ia, ib);
        for (std::size_t d = out.size(); d-- > 0;) {
            ++coord[d];
            ia += stra[d];
            ib += strb[d];
            if (coord[d] < out[d]) break;
            ia -= stra[d] * out[d];
            ib -= strb[d] * out[d];
            coord[d] = 0;
        }
    }
}

// fwd(a,b) -> out; dfa/dfb give d(out)/d(a or b) from (a, b, out)
template <typename Fwd, typename Dfa, typename Dfb>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Dfa dfa, Dfb dfb) {
    const Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
    std::vector<double> out(static_cast<std::size_t>(shape_size(out_shape)));
    const auto av = a.values();
    const auto bv = b.values();
    for_each_bcast(out_shape, a.shape(), b.shape(), [&](auto i, auto ia, auto ib) {
        out[static_cast<std::size_t>(i)] = fwd(av[ia], bv[ib]);
    });
    auto an = a.node();
    auto bn = b.node();
    Shape sa = a.shape(), sb = b.shape();
    return make_op(name, out_shape, std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), sa = std::move(sa), sb = std::move(sb),
                    dfa, dfb](Node& self) {
                       for_each_bcast(self.shape, sa, sb, [&](auto i, auto ia, auto ib) {
                           const double g = self.grad[static_cast<std::size_t>(i)];
                           const double x = an->value[static_cast<std::size_t>(ia)];
                           const double y = bn->value[static_cast<std::size_t>(ib)];
                           const double o = self.value[static_cast<std::size_t>(i)];
                           if (an->tracked) an->grad[static_cast<std::size_t>(ia)] += g * dfa(x, y, o);
                           if (bn->tracked) bn->grad[static_cast<std::size_t>(ib)] += g * dfb(x, y, o);
                       });
                   });
}

// fwd(x) -> out; df gives d(out)/dx from (x, out)
template <typename Fwd, typename Df>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Df df) {
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    const auto xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    auto xn = x.node();
    return make_op(name, x.shape(), std::move(out), {xn}, [xn = xn.get(), df](Node& self) {
        if (!xn->tracked) return;
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            xn->grad[i] += self.grad[i] * df(xn->value[i], self.value[i]);
        }
    });
}

// C[M,N] += A[M,K] * B[K,N]
void mm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
           const double* a, const double* b, double* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
void mm_nt(std::int64_t m, std::int64_t n, std::int64_t k,
           const double* a, const double* b, double* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            const double* arow = a + i * k;
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N]
void mm_tn(std::int64_t m, std::int64_t n, std::int64_t k,
           const double* a, const double* b, double* c) {
    for (std::int64_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const double aip = arow[i];
            double* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double o) { return -o / y; });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
    return unary_op(
        "softplus", x,
        [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
        [](double v, double) { return sigmoid(v); });
}

Tensor exp(const Tensor& x) {
    return unary_op(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double o) { return o; });
}

Tensor log(const Tensor& x) {
    return unary_op(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
    return unary_op(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor min_const(const Tensor& x, double cap) {
    return unary_op(
        "min_const", x, [cap](double v) { return std::min(v, cap); },
        [cap](double v, double) { return v < cap ? 1.0 : 0.0; });
}

Tensor lgamma(const Tensor& x) {
    return unary_op(
        "lgamma", x, [](double v) { return special::lgamma(v); },
        [](double v, double) { return special::digamma(v); });
}

Tensor digamma(const Tensor& x) {
    return unary_op(
        "digamma", x, [](double v) { return special::digamma(v); },
        [](double v, double) { return special::trigamma(v); });
}

Tensor detach(const Tensor& x) {
    return Tensor::from(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    mm_nn(m, n, k, a.values().data(), b.values().data(), out.data());
    auto an = a.node();
    auto bn = b.node();
    return make_op("matmul", {m, n}, std::move(out), {an, bn},
                   [an = an.get(), bn = bn.get(), m, n, k](Node& self) {
                       if (an->tracked) {
                           mm_nt(m, k, n, self.grad.data(), bn->value.data(), an->grad.data());
                       }
                       if (bn->tracked) {
                           mm_tn(k, n, m, an->value.data(), self.grad.data(), bn->grad.data());
                       }
                   });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, Padding pad) {
    if (input.rank() != 4 || kernel.rank() != 4) {
        throw ShapeError("conv2d: expected rank-4 input and kernel, got " +
                         shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    }
    if (input.dim(1) != kernel.dim(1)) {
        throw ShapeError("conv2d: channel mismatch: " + shape_str(input.shape()) + " vs " +
                         shape_str(kernel.shape()));
    }
    const std::int64_t nb = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const std::int64_t pt = pad == Padding::Same ? (kh - 1) / 2 : 0;
    const std::int64_t pl = pad == Padding::Same ? (kw - 1) / 2 : 0;
    const std::int64_t ho = pad == Padding::Same ? h : h - kh + 1;
    const std::int64_t wo = pad == Padding::Same ? w : w - kw + 1;
    if (ho <= 0 || wo <= 0) {
        throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than input " + shape_str(input.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(nb * co * ho * wo), 0.0);
    const double* in = input.values().data();
    const double* ker = kernel.values().data();
    for (std::int64_t b = 0; b < nb; ++b) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
            for (std::int64_t y = 0; y < ho; ++y) {
                for (std::int64_t x = 0; x < wo; ++x) {
                    double acc = 0.0;
                    for (std::int64_t ic = 0; ic < ci; ++ic) {
                        for (std::int64_t dy = 0; dy < kh; ++dy) {
                            const std::int64_t iy = y + dy - pt;
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const std::int64_t ix = x + dx - pl;
                                if (ix < 0 || ix >= w) continue;
                                acc += in[((b * ci + ic) * h + iy) * w + ix] *
                                       ker[((oc * ci + ic) * kh + dy) * kw + dx];
                            }
                        }
                    }
                    out[((b * co + oc) * ho + y) * wo + x] = acc;
                }
            }
        }
    }
    auto xn = input.node();
    auto kn = kernel.node();
    return make_op("conv2d", {nb, co, ho, wo}, std::move(out), {xn, kn},
                   [xn = xn.get(), kn = kn.get(), nb, ci, h, w, co, kh, kw, pt, pl, ho,
                    wo](Node& self) {
                       const double* in = xn->value.data();
                       const double* ker = kn->value.data();
                       for (std::int64_t b = 0; b < nb; ++b) {
                           for (std::int64_t oc = 0; oc < co; ++oc) {
                               for (std::int64_t y = 0; y < ho; ++y) {
                                   for (std::int64_t x = 0; x < wo; ++x) {
                                       const double g =
                                           self.grad[static_cast<std::size_t>(
                                               ((b * co + oc) * ho + y) * wo + x)];
                                       if (g == 0.0) continue;
                                       for (std::int64_t ic = 0; ic < ci; ++ic) {
                                           for (std::int64_t dy = 0; dy < kh; ++dy) {
                                               const std::int64_t iy = y + dy - pt;
                                               if (iy < 0 || iy >= h) continue;
                                               for (std::int64_t dx = 0; dx < kw; ++dx) {
                                                   const std::int64_t ix = x + dx - pl;
                                                   if (ix < 0 || ix >= w) continue;
                                                   const auto ii = static_cast<std::size_t>(
                                                       ((b * ci + ic) * h + iy) * w + ix);
                                                   const auto ki = static_cast<std::size_t>(
                                                       ((oc * ci + ic) * kh + dy) * kw + dx);
                                                   if (kn->tracked) kn->grad[ki] += g * in[ii];
                                                   if (xn->tracked) xn->grad[ii] += g * ker[ki];
                                               }
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   });
}

Tensor maxpool2x2(const Tensor& x) {
    if (x.rank() != 4) {
        throw ShapeError("maxpool2x2: expected rank-4 input, got " + shape_str(x.shape()));
    }
    const std::int64_t nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2x2: spatial extents must be even, got " + shape_str(x.shape()));
    }
    const std::int64_t ho = h / 2, wo = w / 2;
    std::vector<double> out(static_cast<std::size_t>(nb * c * ho * wo));
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const double* in = x.values().data();
    std::size_t o = 0;
    for (std::int64_t b = 0; b < nb; ++b) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            for (std::int64_t y = 0; y < ho; ++y) {
                for (std::int64_t xx = 0; xx < wo; ++xx, ++o) {
                    const std::int64_t base = ((b * c + ch) * h + 2 * y) * w + 2 * xx;
                    std::size_t best = static_cast<std::size_t>(base);
                    for (std::size_t cand :
                         {static_cast<std::size_t>(base + 1), static_cast<std::size_t>(base + w),
                          static_cast<std::size_t>(base + w + 1)}) {
                        if (in[cand] > in[best]) best = cand;
                    }
                    out[o] = in[best];
                    (*argmax)[o] = best;
                }
            }
        }
    }
    auto xn = x.node();
    return make_op("maxpool2x2", {nb, c, ho, wo}, std::move(out), {xn},
                   [xn = xn.get(), argmax](Node& self) {
                       if (!xn->tracked) return;
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           xn->grad[(*argmax)[i]] += self.grad[i];
                       }
                   });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    auto xn = x.node();
    return make_op("sum", {}, {acc}, {xn}, [xn = xn.get()](Node& self) {
        if (!xn->tracked) return;
        const double g = self.grad[0];
        for (auto& gv : xn->grad) gv += g;
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean: empty tensor");
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    auto xn = x.node();
    return make_op("mean", {}, {acc * inv}, {xn}, [xn = xn.get(), inv](Node& self) {
        if (!xn->tracked) return;
        const double g = self.grad[0] * inv;
        for (auto& gv : xn->grad) gv += g;
    });
}

Tensor sum_last(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("sum_last: expected rank >= 1, got " + shape_str(x.shape()));
    const std::int64_t k = x.dim(x.rank() - 1);
    const std::int64_t rows = x.size() / k;
    Shape out_shape = x.shape();
    out_shape.back() = 1;
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    const auto xv = x.values();
    for (std::int64_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < k; ++j) acc += xv[static_cast<std::size_t>(r * k + j)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    auto xn = x.node();
    return make_op("sum_last", std::move(out_shape), std::move(out), {xn},
                   [xn = xn.get(), rows, k](Node& self) {
                       if (!xn->tracked) return;
                       for (std::int64_t r = 0; r < rows; ++r) {
                           const double g = self.grad[static_cast<std::size_t>(r)];
                           for (std::int64_t j = 0; j < k; ++j) {
                               xn->grad[static_cast<std::size_t>(r * k + j)] += g;
                           }
                       }
                   });
}

Tensor softmax(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("softmax: expected rank >= 1, got " + shape_str(x.shape()));
    const std::int64_t k = x.dim(x.rank() - 1);
    const std::int64_t rows = x.size() / k;
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    const auto xv = x.values();
    for (std::int64_t r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r * k);
        double mx = xv[base];
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, xv[base + static_cast<std::size_t>(j)]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            const double e = std::exp(xv[base + static_cast<std::size_t>(j)] - mx);
            out[base + static_cast<std::size_t>(j)] = e;
            denom += e;
        }
        for (std::int64_t j = 0; j < k; ++j) out[base + static_cast<std::size_t>(j)] /= denom;
    }
    auto xn = x.node();
    return make_op("softmax", x.shape(), std::move(out), {xn},
                   [xn = xn.get(), rows, k](Node& self) {
                       if (!xn->tracked) return;
                       for (std::int64_t r = 0; r < rows; ++r) {
                           const std::size_t base = static_cast<std::size_t>(r * k);
                           double dot = 0.0;
                           for (std::int64_t j = 0; j < k; ++j) {
                               const auto i = base + static_cast<std::size_t>(j);
                               dot += self.grad[i] * self.value[i];
                           }
                           for (std::int64_t j = 0; j < k; ++j) {
                               const auto i = base + static_cast<std::size_t>(j);
                               xn->grad[i] += self.value[i] * (self.grad[i] - dot);
                           }
                       }
                   });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& labels) {
    if (x.rank() != 2) {
        throw ShapeError("gather_rows: expected rank-2 input, got " + shape_str(x.shape()));
    }
    const std::int64_t n = x.dim(0), k = x.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n) {
        throw ShapeError("gather_rows: " + std::to_string(labels.size()) + " labels for " +
                         shape_str(x.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    const auto xv = x.values();
    for (std::int64_t i = 0; i < n; ++i) {
        const int lab = labels[static_cast<std::size_t>(i)];
        if (lab < 0 || lab >= k) {
            throw ConfigError("gather_rows: label " + std::to_string(lab) +
                              " out of range for " + shape_str(x.shape()));
        }
        out[static_cast<std::size_t>(i)] = xv[static_cast<std::size_t>(i * k + lab)];
    }
    auto xn = x.node();
    return make_op("gather_rows", {n}, std::move(out), {xn},
                   [xn = xn.get(), labels, k](Node& self) {
                       if (!xn->tracked) return;
                       for (std::size_t i = 0; i < labels.size(); ++i) {
                           xn->grad[i * static_cast<std::size_t>(k) +
                                    static_cast<std::size_t>(labels[i])] += self.grad[i];
                       }
                   });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_size(new_shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    auto xn = x.node();
    return make_op("reshape", std::move(new_shape), std::move(out), {xn},
                   [xn = xn.get()](Node& self) {
                       if (!xn->tracked) return;
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           xn->grad[i] += self.grad[i];
                       }
                   });
}

}  // namespace edl
