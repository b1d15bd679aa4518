#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace qrl {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != r * c) throw invalid_argument("matrix data does not match its shape");
    }

    static Matrix row_vector(std::span<const double> v) { return {1, v.size(), std::vector<double>(v.begin(), v.end())}; }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return data.empty(); }
    bool operator==(const Matrix&) const = default;
};

/// A learnable tensor with a gradient slot of identical shape.
struct Tensor {
    Matrix value;
    Matrix grad;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : value(r, c), grad(r, c) {}

    std::size_t rows() const { return value.rows; }
    std::size_t cols() const { return value.cols; }
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Named, insertion-ordered collection of tensors with stable addresses.
class ParameterSet {
  public:
    Tensor& add(const std::string& name, std::size_t rows, std::size_t cols) {
        for (const auto& e : entries_) {
            if (e->name == name) throw invalid_argument("duplicate parameter " + name);
        }
        entries_.push_back(std::make_unique<Entry>(Entry{name, Tensor(rows, cols)}));
        return entries_.back()->tensor;
    }

    Tensor& at(const std::string& name) {
        for (auto& e : entries_) {
            if (e->name == name) return e->tensor;
        }
        throw not_found("no parameter " + name);
    }
    const Tensor& at(const std::string& name) const { return const_cast<ParameterSet*>(this)->at(name); }

    bool contains(const std::string& name) const {
        return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e->name == name; });
    }

    template <typename F>
    void for_each(F&& f) {
        for (auto& e : entries_) f(e->name, e->tensor);
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& e : entries_) f(e->name, static_cast<const Tensor&>(e->tensor));
    }

    std::size_t size() const { return entries_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e->tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e->tensor.zero_grad();
    }

    double grad_norm() const {
        double s = 0.0;
        for (const auto& e : entries_) {
            for (double g : e->tensor.grad.data) s += g * g;
        }
        return std::sqrt(s);
    }

    /// Order-sensitive digest of every value, for cheap equality checks.
    std::uint64_t checksum() const {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& e : entries_) {
            for (double v : e->tensor.value.data) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                h = (h ^ bits) * 1099511628211ull;
            }
        }
        return h;
    }

    void copy_values_from(const ParameterSet& other) {
        if (other.entries_.size() != entries_.size()) throw invalid_argument("parameter sets differ in size");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            auto& dst = entries_[i]->tensor.value;
            const auto& src = other.entries_[i]->tensor.value;
            if (entries_[i]->name != other.entries_[i]->name || !dst.same_shape(src)) {
                throw invalid_argument("parameter sets differ at " + entries_[i]->name);
            }
            dst = src;
        }
    }

  private:
    struct Entry {
        std::string name;
        Tensor tensor;
    };
    std::vector<std::unique_ptr<Entry>> entries_;
};

/// Handle to a node of a Graph.
struct Var {
    std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
    bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

namespace detail {

inline double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

}  // namespace detail

/// Tape-based reverse-mode differentiation over Matrix values.
///
/// Every op appends a node; backward() walks the tape in reverse. Nodes
/// that depend on no parameter carry no gradient and are skipped.
class Graph {
  public:
    Var constant(Matrix m) { return push(std::move(m), false, nullptr); }

    Var param(Tensor& t) {
        auto v = push(t.value, true, nullptr);
        auto id = v.id;
        nodes_[id].back = [this, id, &t] {
            const auto& g = nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) t.grad.data[i] += g.data[i];
        };
        return v;
    }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const {
        const auto& m = value(v);
        if (m.size() != 1) throw invalid_argument("node is not a scalar");
        return m.data[0];
    }
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// x W^T (+ b broadcast over rows). x: n×in, W: out×in, b: 1×out.
    Var linear(Var x, Var w, Var b = {}) {
        const auto& X = value(x);
        const auto& W = value(w);
        if (X.cols != W.cols) throw invalid_argument("linear: input width does not match weight");
        if (b.valid() && (value(b).rows != 1 || value(b).cols != W.rows)) throw invalid_argument("linear: bad bias shape");
        Matrix y(X.rows, W.rows);
        for (std::size_t i = 0; i < X.rows; ++i) {
            const double* xi = X.row(i);
            double* yi = y.row(i);
            for (std::size_t o = 0; o < W.rows; ++o) {
                const double* wo = W.row(o);
                double s = 0.0;
                for (std::size_t k = 0; k < X.cols; ++k) s += xi[k] * wo[k];
                yi[o] = s;
            }
            if (b.valid()) {
                const double* bv = value(b).data.data();
                for (std::size_t o = 0; o < W.rows; ++o) yi[o] += bv[o];
            }
        }
        bool ng = needs_grad(x) || needs_grad(w) || (b.valid() && needs_grad(b));
        auto out = push(std::move(y), ng, nullptr);
        if (ng) {
            nodes_[out.id].back = [this, x, w, b, out] {
                const auto& dy = nodes_[out.id].grad;
                const auto& X = value(x);
                const auto& W = value(w);
                if (needs_grad(x)) {
                    auto& dx = grad(x);
                    for (std::size_t i = 0; i < X.rows; ++i) {
                        double* dxi = dx.row(i);
                        for (std::size_t o = 0; o < W.rows; ++o) {
                            double g = dy(i, o);
                            if (g == 0.0) continue;
                            const double* wo = W.row(o);
                            for (std::size_t k = 0; k < X.cols; ++k) dxi[k] += g * wo[k];
                        }
                    }
                }
                if (needs_grad(w)) {
                    auto& dw = grad(w);
                    for (std::size_t i = 0; i < X.rows; ++i) {
                        const double* xi = X.row(i);
                        for (std::size_t o = 0; o < W.rows; ++o) {
                            double g = dy(i, o);
                            if (g == 0.0) continue;
                            double* dwo = dw.row(o);
                            for (std::size_t k = 0; k < X.cols; ++k) dwo[k] += g * xi[k];
                        }
                    }
                }
                if (b.valid() && needs_grad(b)) {
                    auto& db = grad(b);
                    for (std::size_t i = 0; i < dy.rows; ++i) {
                        for (std::size_t o = 0; o < dy.cols; ++o) db.data[o] += dy(i, o);
                    }
                }
            };
        }
        return out;
    }

    /// a + b; b may be a single row broadcast over a's rows.
    Var add(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        bool bcast = B.rows == 1 && A.rows != 1;
        if (A.cols != B.cols || (!bcast && A.rows != B.rows)) throw invalid_argument("add: shape mismatch");
        Matrix y = A;
        for (std::size_t i = 0; i < y.rows; ++i) {
            const double* bi = B.row(bcast ? 0 : i);
            double* yi = y.row(i);
            for (std::size_t c = 0; c < y.cols; ++c) yi[c] += bi[c];
        }
        return unary_like(std::move(y), {a, b}, [this, a, b, bcast](const Matrix& dy) {
            if (needs_grad(a)) accumulate(grad(a), dy);
            if (needs_grad(b)) {
                auto& db = grad(b);
                if (bcast) {
                    for (std::size_t i = 0; i < dy.rows; ++i) {
                        for (std::size_t c = 0; c < dy.cols; ++c) db.data[c] += dy(i, c);
                    }
                } else {
                    accumulate(db, dy);
                }
            }
        });
    }

    Var mul(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (!A.same_shape(B)) throw invalid_argument("mul: shape mismatch");
        Matrix y = A;
        for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= B.data[i];
        return unary_like(std::move(y), {a, b}, [this, a, b](const Matrix& dy) {
            const auto& A = value(a);
            const auto& B = value(b);
            if (needs_grad(a)) {
                auto& da = grad(a);
                for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * B.data[i];
            }
            if (needs_grad(b)) {
                auto& db = grad(b);
                for (std::size_t i = 0; i < dy.size(); ++i) db.data[i] += dy.data[i] * A.data[i];
            }
        });
    }

    Var scale(Var a, double s) {
        Matrix y = value(a);
        for (auto& v : y.data) v *= s;
        return unary_like(std::move(y), {a}, [this, a, s](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += s * dy.data[i];
        });
    }

    /// 1 - a, elementwise.
    Var one_minus(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = 1.0 - v;
        return unary_like(std::move(y), {a}, [this, a](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] -= dy.data[i];
        });
    }

    Var tanh(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = std::tanh(v);
        auto out = unary_like(std::move(y), {a}, nullptr);
        set_back(out, [this, a, out](const Matrix& dy) {
            const auto& Y = value(out);
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * (1.0 - Y.data[i] * Y.data[i]);
        });
        return out;
    }

    Var sigmoid(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = detail::stable_sigmoid(v);
        auto out = unary_like(std::move(y), {a}, nullptr);
        set_back(out, [this, a, out](const Matrix& dy) {
            const auto& Y = value(out);
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * Y.data[i] * (1.0 - Y.data[i]);
        });
        return out;
    }

    /// log σ(a), computed without forming σ(a).
    Var log_sigmoid(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = detail::log_sigmoid(v);
        return unary_like(std::move(y), {a}, [this, a](const Matrix& dy) {
            const auto& A = value(a);
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * detail::stable_sigmoid(-A.data[i]);
        });
    }

    Var exp(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = std::exp(v);
        auto out = unary_like(std::move(y), {a}, nullptr);
        set_back(out, [this, a, out](const Matrix& dy) {
            const auto& Y = value(out);
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] * Y.data[i];
        });
        return out;
    }

    Var log(Var a) {
        Matrix y = value(a);
        for (auto& v : y.data) v = std::log(v);
        return unary_like(std::move(y), {a}, [this, a](const Matrix& dy) {
            const auto& A = value(a);
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] / A.data[i];
        });
    }

    /// [a | b] along columns; a single-row operand is broadcast.
    Var concat_cols(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        std::size_t rows = std::max(A.rows, B.rows);
        if ((A.rows != rows && A.rows != 1) || (B.rows != rows && B.rows != 1)) {
            throw invalid_argument("concat_cols: row mismatch");
        }
        Matrix y(rows, A.cols + B.cols);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy_n(A.row(A.rows == 1 ? 0 : i), A.cols, y.row(i));
            std::copy_n(B.row(B.rows == 1 ? 0 : i), B.cols, y.row(i) + A.cols);
        }
        return unary_like(std::move(y), {a, b}, [this, a, b](const Matrix& dy) {
            const auto ac = value(a).cols;
            for (auto [v, off, w] : {std::tuple{a, std::size_t{0}, ac}, std::tuple{b, ac, value(b).cols}}) {
                if (!needs_grad(v)) continue;
                auto& g = grad(v);
                bool bc = g.rows == 1;
                for (std::size_t i = 0; i < dy.rows; ++i) {
                    double* gi = g.row(bc ? 0 : i);
                    const double* di = dy.row(i) + off;
                    for (std::size_t c = 0; c < w; ++c) gi[c] += di[c];
                }
            }
        });
    }

    Var slice_cols(Var a, std::size_t begin, std::size_t end) {
        const auto& A = value(a);
        if (begin > end || end > A.cols) throw invalid_argument("slice_cols: range out of bounds");
        Matrix y(A.rows, end - begin);
        for (std::size_t i = 0; i < A.rows; ++i) std::copy(A.row(i) + begin, A.row(i) + end, y.row(i));
        return unary_like(std::move(y), {a}, [this, a, begin](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.rows; ++i) {
                for (std::size_t c = 0; c < dy.cols; ++c) da(i, begin + c) += dy(i, c);
            }
        });
    }

    /// Row r of the result is the concatenation of rows
    /// idx[r*group .. r*group+group-1] of a; index -1 yields zeros.
    Var gather(Var a, std::vector<int> idx, std::size_t group = 1) {
        const auto& A = value(a);
        if (group == 0 || idx.size() % group != 0) throw invalid_argument("gather: index count not a multiple of group");
        for (int i : idx) {
            if (i >= static_cast<int>(A.rows) || i < -1) throw invalid_argument("gather: row index out of range");
        }
        std::size_t rows = idx.size() / group, w = A.cols;
        Matrix y(rows, group * w);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t g = 0; g < group; ++g) {
                int src = idx[r * group + g];
                if (src >= 0) std::copy_n(A.row(static_cast<std::size_t>(src)), w, y.row(r) + g * w);
            }
        }
        return unary_like(std::move(y), {a}, [this, a, idx = std::move(idx), group, w](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t r = 0; r < dy.rows; ++r) {
                for (std::size_t g = 0; g < group; ++g) {
                    int src = idx[r * group + g];
                    if (src < 0) continue;
                    double* d = da.row(static_cast<std::size_t>(src));
                    const double* s = dy.row(r) + g * w;
                    for (std::size_t c = 0; c < w; ++c) d[c] += s[c];
                }
            }
        });
    }

    Var stack_rows(const std::vector<Var>& parts) {
        if (parts.empty()) throw invalid_argument("stack_rows: nothing to stack");
        std::size_t cols = value(parts[0]).cols, rows = 0;
        for (auto p : parts) {
            if (value(p).cols != cols) throw invalid_argument("stack_rows: column mismatch");
            rows += value(p).rows;
        }
        Matrix y(rows, cols);
        std::size_t r = 0;
        for (auto p : parts) {
            const auto& P = value(p);
            std::copy(P.data.begin(), P.data.end(), y.row(r));
            r += P.rows;
        }
        return unary_like(std::move(y), parts, [this, parts](const Matrix& dy) {
            std::size_t r = 0;
            for (auto p : parts) {
                auto n = value(p).size();
                if (needs_grad(p)) {
                    auto& g = grad(p);
                    for (std::size_t i = 0; i < n; ++i) g.data[i] += dy.data[r * dy.cols + i];
                }
                r += value(p).rows;
            }
        });
    }

    Var mean_rows(Var a) {
        const auto& A = value(a);
        if (A.rows == 0) throw invalid_argument("mean_rows of an empty matrix");
        Matrix y(1, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
            for (std::size_t c = 0; c < A.cols; ++c) y.data[c] += A(i, c);
        }
        double inv = 1.0 / static_cast<double>(A.rows);
        for (auto& v : y.data) v *= inv;
        return unary_like(std::move(y), {a}, [this, a, inv](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t i = 0; i < da.rows; ++i) {
                for (std::size_t c = 0; c < da.cols; ++c) da(i, c) += dy.data[c] * inv;
            }
        });
    }

    /// Column-wise maximum over rows; the first maximal row receives the gradient.
    Var max_rows(Var a) {
        const auto& A = value(a);
        if (A.rows == 0) throw invalid_argument("max_rows of an empty matrix");
        Matrix y(1, A.cols);
        std::vector<std::size_t> arg(A.cols, 0);
        for (std::size_t c = 0; c < A.cols; ++c) {
            y.data[c] = A(0, c);
            for (std::size_t i = 1; i < A.rows; ++i) {
                if (A(i, c) > y.data[c]) {
                    y.data[c] = A(i, c);
                    arg[c] = i;
                }
            }
        }
        return unary_like(std::move(y), {a}, [this, a, arg = std::move(arg)](const Matrix& dy) {
            auto& da = grad(a);
            for (std::size_t c = 0; c < dy.cols; ++c) da(arg[c], c) += dy.data[c];
        });
    }

    Var sum(Var a) {
        const auto& A = value(a);
        double s = 0.0;
        for (double v : A.data) s += v;
        return unary_like(Matrix(1, 1, s), {a}, [this, a](const Matrix& dy) {
            auto& da = grad(a);
            for (auto& v : da.data) v += dy.data[0];
        });
    }

    /// log softmax over every entry of a.
    Var log_softmax(Var a) {
        const auto& A = value(a);
        if (A.size() == 0) throw invalid_argument("log_softmax of an empty matrix");
        double mx = *std::max_element(A.data.begin(), A.data.end());
        double z = 0.0;
        for (double v : A.data) z += std::exp(v - mx);
        double lse = mx + std::log(z);
        Matrix y = A;
        for (auto& v : y.data) v -= lse;
        auto out = unary_like(std::move(y), {a}, nullptr);
        set_back(out, [this, a, out](const Matrix& dy) {
            const auto& Y = value(out);
            double total = 0.0;
            for (double g : dy.data) total += g;
            auto& da = grad(a);
            for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] - std::exp(Y.data[i]) * total;
        });
        return out;
    }

    Var element(Var a, std::size_t r, std::size_t c) {
        const auto& A = value(a);
        if (r >= A.rows || c >= A.cols) throw invalid_argument("element: index out of range");
        return unary_like(Matrix(1, 1, A(r, c)), {a}, [this, a, r, c](const Matrix& dy) { grad(a)(r, c) += dy.data[0]; });
    }

    /// Copy of `base` with each row i where mask[i] is set replaced by the single row `row`.
    Var substitute_rows(Matrix base, Var row, const std::vector<bool>& mask) {
        const auto& R = value(row);
        if (R.rows != 1 || R.cols != base.cols || mask.size() != base.rows) {
            throw invalid_argument("substitute_rows: shape mismatch");
        }
        for (std::size_t i = 0; i < base.rows; ++i) {
            if (mask[i]) std::copy_n(R.data.data(), R.cols, base.row(i));
        }
        return unary_like(std::move(base), {row}, [this, row, mask](const Matrix& dy) {
            auto& dr = grad(row);
            for (std::size_t i = 0; i < dy.rows; ++i) {
                if (!mask[i]) continue;
                for (std::size_t c = 0; c < dy.cols; ++c) dr.data[c] += dy(i, c);
            }
        });
    }

    /// Same value, no gradient flows back through it.
    Var detach(Var a) { return constant(value(a)); }

    /// Accumulates d(loss)/d(parameter) into each bound Tensor's grad.
    void backward(Var loss) {
        if (value(loss).size() != 1) throw invalid_argument("backward needs a scalar loss");
        if (!needs_grad(loss)) return;
        grad(loss).data[0] += 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (n.back && !n.grad.empty()) n.back();
        }
    }

  private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    Var push(Matrix value, bool needs_grad, std::function<void()> back) {
        nodes_.push_back({std::move(value), {}, needs_grad, std::move(back)});
        return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    Matrix& grad(Var v) {
        auto& n = nodes_[v.id];
        if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
        return n.grad;
    }

    static void accumulate(Matrix& dst, const Matrix& src) {
        for (std::size_t i = 0; i < src.size(); ++i) dst.data[i] += src.data[i];
    }

    template <typename F>
    void set_back(Var out, F f) {
        if (!nodes_[out.id].needs_grad) return;
        nodes_[out.id].back = [this, out, f = std::move(f)] { f(nodes_[out.id].grad); };
    }

    template <typename F>
    Var unary_like(Matrix y, std::initializer_list<Var> inputs, F f) {
        return unary_like(std::move(y), std::vector<Var>(inputs), std::move(f));
    }

    template <typename F>
    Var unary_like(Matrix y, const std::vector<Var>& inputs, F f) {
        bool ng = std::any_of(inputs.begin(), inputs.end(), [this](Var v) { return needs_grad(v); });
        auto out = push(std::move(y), ng, nullptr);
        if constexpr (!std::is_same_v<F, std::nullptr_t>) set_back(out, std::move(f));
        return out;
    }

    std::vector<Node> nodes_;
};

/// Fills every tensor with U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in being
/// the column count; tensors whose name ends in "bias" are zeroed.
inline void init_uniform(ParameterSet& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params.for_each([&](const std::string& name, Tensor& t) {
        bool is_bias = name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
        double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, t.cols())));
        std::uniform_real_distribution<double> u(-r, r);
        for (auto& v : t.value.data) v = is_bias ? 0.0 : u(rng);
    });
}

enum class Difference {
    central,     // (f(θ+ε) - f(θ-ε)) / 2ε
    richardson,  // (4 D(ε) - D(2ε)) / 3 over central differences D; O(ε⁴) truncation
};

/// Finite-difference check of the analytic gradient.
///
/// `loss(true)` must zero nothing itself, build the graph, backpropagate into
/// the parameters' grad slots and return the loss; `loss(false)` returns the
/// loss only. Returns max |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
template <typename LossFn>
double grad_check(LossFn&& loss, ParameterSet& params, double epsilon = 1e-5,
                  Difference scheme = Difference::central) {
    if (epsilon < 1e-6 || epsilon > 1e-3) throw invalid_argument("grad_check epsilon must lie in [1e-6, 1e-3]");
    params.zero_grad();
    double base = loss(true);
    if (!std::isfinite(base)) throw numeric_error("grad_check: loss is not finite");
    double worst = 0.0;
    params.for_each([&](const std::string&, Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            double orig = t.value.data[i];
            auto central = [&](double h) {
                t.value.data[i] = orig + h;
                double up = loss(false);
                t.value.data[i] = orig - h;
                double down = loss(false);
                t.value.data[i] = orig;
                if (!std::isfinite(up) || !std::isfinite(down)) throw numeric_error("grad_check: loss is not finite");
                return (up - down) / (2.0 * h);
            };
            double numeric = central(epsilon);
            if (scheme == Difference::richardson) numeric = (4.0 * numeric - central(2.0 * epsilon)) / 3.0;
            double analytic = t.grad.data[i];
            double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    });
    return worst;
}

}  // namespace qrl
