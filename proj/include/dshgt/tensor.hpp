#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "dshgt/common.hpp"

namespace dshgt {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

namespace ad {

struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // sized on demand
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads. Captures
    // only parent pointers and plain data, never the node itself.
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0f);
    }
};

// When false, ops compute values without recording the tape (evaluation mode).
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Running hash of activation sign patterns; grad_check uses it to detect
// coordinates whose perturbation crosses a relu kink.
inline std::uint64_t*& activation_signature() {
    thread_local std::uint64_t* sig = nullptr;
    return sig;
}

}  // namespace ad

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(ad::grad_mode()) { ad::grad_mode() = false; }
    ~NoGradGuard() { ad::grad_mode() = prev; }
};

class Tensor {
public:
    Tensor() : node_(std::make_shared<ad::Node>()) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value.assign(static_cast<std::size_t>(numel_of(t.node_->shape)), 0.0f);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(Shape shape, float v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (float& x : t.node_->value) x = v;
        return t;
    }

    static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false) {
        if (numel_of(shape) != static_cast<std::int64_t>(data.size()))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(float v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
    std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }

    const std::vector<float>& values() const { return node_->value; }
    std::vector<float>& values_mut() { return node_->value; }
    const std::vector<float>& grad() const { return node_->grad; }

    float item() const {
        if (numel() != 1)
            throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape()));
        return node_->value[0];
    }

    float at(std::int64_t i) const { return node_->value.at(static_cast<std::size_t>(i)); }
    float at(std::int64_t r, std::int64_t c) const {
        return node_->value.at(static_cast<std::size_t>(r * dim(1) + c));
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0f); }

    std::shared_ptr<ad::Node> node() const { return node_; }

private:
    std::shared_ptr<ad::Node> node_;
};

namespace ad {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!grad_mode()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

inline Tensor make_result(Shape shape, std::vector<float> value) {
    return Tensor::from(std::move(shape), std::move(value));
}

inline void attach(Tensor& result, std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> backprop) {
    auto n = result.node();
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
}

// C (m,n) += A (m,k) * B (k,n), double accumulation.
inline void mm_nn(const float* A, const float* B, float* C, std::int64_t m, std::int64_t k,
                  std::int64_t n, bool accumulate) {
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* arow = A + i * k;
        for (std::int64_t t = 0; t < k; ++t) {
            double a = arow[t];
            const float* brow = B + t * n;
            for (std::int64_t j = 0; j < n; ++j) acc[j] += a * brow[j];
        }
        float* crow = C + i * n;
        for (std::int64_t j = 0; j < n; ++j)
            crow[j] = accumulate ? crow[j] + static_cast<float>(acc[j])
                                 : static_cast<float>(acc[j]);
    }
}

// C (m,k) += A (m,n) * B^T where B is (k,n).
inline void mm_nt(const float* A, const float* B, float* C, std::int64_t m, std::int64_t n,
                  std::int64_t k, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        const float* arow = A + i * n;
        float* crow = C + i * k;
        for (std::int64_t j = 0; j < k; ++j) {
            const float* brow = B + j * n;
            double acc = 0.0;
            for (std::int64_t t = 0; t < n; ++t) acc += double(arow[t]) * brow[t];
            crow[j] = accumulate ? crow[j] + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

// C (k,n) += A^T * B where A is (m,k), B is (m,n).
inline void mm_tn(const float* A, const float* B, float* C, std::int64_t m, std::int64_t k,
                  std::int64_t n, bool accumulate) {
    std::vector<double> acc(static_cast<std::size_t>(k * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        const float* arow = A + i * k;
        const float* brow = B + i * n;
        for (std::int64_t t = 0; t < k; ++t) {
            double a = arow[t];
            double* crow = acc.data() + t * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
    for (std::int64_t idx = 0; idx < k * n; ++idx)
        C[idx] = accumulate ? C[idx] + static_cast<float>(acc[idx])
                            : static_cast<float>(acc[idx]);
}

}  // namespace ad

// ---------------------------------------------------------------------------
// core ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> out(static_cast<std::size_t>(m * n));
    ad::mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n, false);
    Tensor r = ad::make_result({m, n}, std::move(out));
    if (ad::should_record({&a, &b})) {
        auto pa = a.node(), pb = b.node();
        ad::attach(r, {pa, pb}, [pa, pb, m, k, n](ad::Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                ad::mm_nt(self.grad.data(), pb->value.data(), pa->grad.data(), m, n, k, true);
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                ad::mm_tn(pa->value.data(), self.grad.data(), pb->grad.data(), m, k, n, true);
            }
        });
    }
    return r;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects rank 2, got " + shape_str(a.shape()));
    const std::int64_t m = a.dim(0), n = a.dim(1);
    std::vector<float> out(static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
    Tensor r = ad::make_result({n, m}, std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, m, n](ad::Node& self) {
            pa->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j)
                    pa->grad[i * n + j] += self.grad[j * m + i];
        });
    }
    return r;
}

namespace ad {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace ad

inline Tensor add(const Tensor& a, const Tensor& b) {
    ad::check_same_shape(a, b, "add");
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a, &b})) {
        auto pa = a.node(), pb = b.node();
        ad::attach(r, {pa, pb}, [pa, pb](ad::Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
            }
        });
    }
    return r;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    ad::check_same_shape(a, b, "sub");
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a, &b})) {
        auto pa = a.node(), pb = b.node();
        ad::attach(r, {pa, pb}, [pa, pb](ad::Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
            }
        });
    }
    return r;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    ad::check_same_shape(a, b, "mul");
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a, &b})) {
        auto pa = a.node(), pb = b.node();
        ad::attach(r, {pa, pb}, [pa, pb](ad::Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    pa->grad[i] += self.grad[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    pb->grad[i] += self.grad[i] * pa->value[i];
            }
        });
    }
    return r;
}

inline Tensor scalar_mul(const Tensor& a, float c) {
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, c](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * c;
        });
    }
    return r;
}

inline Tensor scalar_add(const Tensor& a, float c) {
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        });
    }
    return r;
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    Tensor r = ad::make_result(std::move(shape), a.values());
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        });
    }
    return r;
}

// Concatenation along axis 0 or 1 (rank 1 tensors: axis 0 only).
inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const std::size_t rank = parts[0].rank();
    if (axis < 0 || static_cast<std::size_t>(axis) >= rank)
        throw ShapeError("concat axis out of range for shape " + shape_str(parts[0].shape()));
    for (const Tensor& p : parts) {
        if (p.rank() != rank)
            throw ShapeError("concat rank mismatch: " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        for (std::size_t d = 0; d < rank; ++d)
            if (static_cast<int>(d) != axis && p.shape()[d] != parts[0].shape()[d])
                throw ShapeError("concat shape mismatch: " + shape_str(parts[0].shape()) +
                                 " vs " + shape_str(p.shape()));
    }
    Shape out_shape = parts[0].shape();
    std::int64_t total = 0;
    for (const Tensor& p : parts) total += p.shape()[static_cast<std::size_t>(axis)];
    out_shape[static_cast<std::size_t>(axis)] = total;

    std::vector<float> out(static_cast<std::size_t>(numel_of(out_shape)));
    // copy chunks; for axis 0 (or rank 1) the layout is a plain append
    if (axis == 0) {
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            std::copy(p.values().begin(), p.values().end(), out.begin() + off);
            off += p.values().size();
        }
    } else {  // axis == 1, rank 2
        const std::int64_t rows = out_shape[0];
        std::int64_t col_off = 0;
        for (const Tensor& p : parts) {
            const std::int64_t pc = p.dim(1);
            for (std::int64_t i = 0; i < rows; ++i)
                std::copy(p.values().begin() + i * pc, p.values().begin() + (i + 1) * pc,
                          out.begin() + i * total + col_off);
            col_off += pc;
        }
    }
    Tensor r = ad::make_result(out_shape, std::move(out));
    bool record = false;
    if (ad::grad_mode())
        for (const Tensor& p : parts)
            if (p.requires_grad()) record = true;
    if (record) {
        std::vector<std::shared_ptr<ad::Node>> parents;
        std::vector<std::int64_t> sizes;
        for (const Tensor& p : parts) {
            parents.push_back(p.node());
            sizes.push_back(p.shape()[static_cast<std::size_t>(axis)]);
        }
        auto ps = parents;
        std::int64_t rows = rank == 2 ? out_shape[0] : 1;
        ad::attach(r, parents, [ps, sizes, axis, rows, total](ad::Node& self) {
            if (axis == 0) {
                std::size_t off = 0;
                for (std::size_t pi = 0; pi < ps.size(); ++pi) {
                    auto& p = ps[pi];
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::size_t i = 0; i < p->value.size(); ++i)
                            p->grad[i] += self.grad[off + i];
                    }
                    off += p->value.size();
                }
            } else {
                std::int64_t col_off = 0;
                for (std::size_t pi = 0; pi < ps.size(); ++pi) {
                    auto& p = ps[pi];
                    const std::int64_t pc = sizes[pi];
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::int64_t i = 0; i < rows; ++i)
                            for (std::int64_t j = 0; j < pc; ++j)
                                p->grad[i * pc + j] += self.grad[i * total + col_off + j];
                    }
                    col_off += pc;
                }
            }
        });
    }
    return r;
}

inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    return concat(std::vector<Tensor>{a, b}, axis);
}

inline Tensor slice_rows(const Tensor& a, std::int64_t begin, std::int64_t end) {
    if (a.rank() != 2 && a.rank() != 1)
        throw ShapeError("slice_rows expects rank 1 or 2, got " + shape_str(a.shape()));
    const std::int64_t rows = a.dim(0);
    const std::int64_t cols = a.rank() == 2 ? a.dim(1) : 1;
    if (begin < 0 || end > rows || begin >= end)
        throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for shape " + shape_str(a.shape()));
    std::vector<float> out(static_cast<std::size_t>((end - begin) * cols));
    std::copy(a.values().begin() + begin * cols, a.values().begin() + end * cols, out.begin());
    Shape shape = a.rank() == 2 ? Shape{end - begin, cols} : Shape{end - begin};
    Tensor r = ad::make_result(std::move(shape), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, begin, cols](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[static_cast<std::size_t>(begin * cols) + i] += self.grad[i];
        });
    }
    return r;
}

inline Tensor row(const Tensor& a, std::int64_t r) { return slice_rows(a, r, r + 1); }

// Splits along an axis into equal sections.
inline std::vector<Tensor> split(const Tensor& a, int sections, int axis) {
    if (sections <= 0) throw ShapeError("split requires positive section count");
    const std::int64_t extent = a.shape().at(static_cast<std::size_t>(axis));
    if (extent % sections != 0)
        throw ShapeError("split of axis extent " + std::to_string(extent) + " into " +
                         std::to_string(sections) + " sections");
    const std::int64_t step = extent / sections;
    std::vector<Tensor> out;
    if (axis == 0) {
        for (int s = 0; s < sections; ++s) out.push_back(slice_rows(a, s * step, (s + 1) * step));
        return out;
    }
    if (axis != 1 || a.rank() != 2)
        throw ShapeError("split supports axis 0, or axis 1 on rank 2, got " +
                         shape_str(a.shape()));
    const std::int64_t rows = a.dim(0), cols = a.dim(1);
    for (int s = 0; s < sections; ++s) {
        const std::int64_t c0 = s * step;
        std::vector<float> vals(static_cast<std::size_t>(rows * step));
        for (std::int64_t i = 0; i < rows; ++i)
            std::copy(a.values().begin() + i * cols + c0, a.values().begin() + i * cols + c0 + step,
                      vals.begin() + i * step);
        Tensor piece = ad::make_result({rows, step}, std::move(vals));
        if (ad::should_record({&a})) {
            auto pa = a.node();
            ad::attach(piece, {pa}, [pa, rows, cols, c0, step](ad::Node& self) {
                pa->ensure_grad();
                for (std::int64_t i = 0; i < rows; ++i)
                    for (std::int64_t j = 0; j < step; ++j)
                        pa->grad[i * cols + c0 + j] += self.grad[i * step + j];
            });
        }
        out.push_back(std::move(piece));
    }
    return out;
}

// Row gather; also serves as embedding lookup.
inline Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& rows) {
    if (a.rank() != 2) throw ShapeError("gather_rows expects rank 2, got " + shape_str(a.shape()));
    const std::int64_t n = a.dim(0), cols = a.dim(1);
    for (std::int64_t rix : rows)
        if (rix < 0 || rix >= n)
            throw ShapeError("gather_rows index " + std::to_string(rix) +
                             " out of range for shape " + shape_str(a.shape()));
    std::vector<float> out(rows.size() * static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(a.values().begin() + rows[i] * cols, a.values().begin() + (rows[i] + 1) * cols,
                  out.begin() + static_cast<std::int64_t>(i) * cols);
    Tensor r = ad::make_result({static_cast<std::int64_t>(rows.size()), cols}, std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        auto idx = rows;
        ad::attach(r, {pa}, [pa, idx, cols](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::int64_t j = 0; j < cols; ++j)
                    pa->grad[idx[i] * cols + j] +=
                        self.grad[static_cast<std::int64_t>(i) * cols + j];
        });
    }
    return r;
}

inline Tensor embedding_lookup(const Tensor& table, const std::vector<std::int64_t>& ids) {
    return gather_rows(table, ids);
}

// Scalar pick by flat index.
inline Tensor element(const Tensor& a, std::int64_t flat_index) {
    if (flat_index < 0 || flat_index >= a.numel())
        throw ShapeError("element index " + std::to_string(flat_index) +
                         " out of range for shape " + shape_str(a.shape()));
    Tensor r = ad::make_result({1}, {a.values()[static_cast<std::size_t>(flat_index)]});
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, flat_index](ad::Node& self) {
            pa->ensure_grad();
            pa->grad[static_cast<std::size_t>(flat_index)] += self.grad[0];
        });
    }
    return r;
}

inline Tensor mean_rows(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("mean_rows expects rank 2, got " + shape_str(a.shape()));
    const std::int64_t m = a.dim(0), n = a.dim(1);
    if (m == 0) throw ShapeError("mean over empty axis for shape " + shape_str(a.shape()));
    std::vector<float> out(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < m; ++i) acc += a.values()[i * n + j];
        out[static_cast<std::size_t>(j)] = static_cast<float>(acc / static_cast<double>(m));
    }
    Tensor r = ad::make_result({1, n}, std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, m, n](ad::Node& self) {
            pa->ensure_grad();
            const float inv = 1.0f / static_cast<float>(m);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) pa->grad[i * n + j] += self.grad[j] * inv;
        });
    }
    return r;
}

inline Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.values()) acc += v;
    Tensor r = ad::make_result({1}, {static_cast<float>(acc)});
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa](ad::Node& self) {
            pa->ensure_grad();
            for (float& g : pa->grad) g += self.grad[0];
        });
    }
    return r;
}

inline Tensor mean_all(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean over empty tensor");
    return scalar_mul(sum_all(a), 1.0f / static_cast<float>(a.numel()));
}

inline Tensor relu(const Tensor& a) {
    std::vector<float> out(a.values().size());
    std::uint64_t sig = 1469598103934665603ull;
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool pos = a.values()[i] > 0.0f;
        out[i] = pos ? a.values()[i] : 0.0f;
        sig ^= pos ? 0x9e3779b97f4a7c15ull + i : i;
        sig *= 1099511628211ull;
    }
    if (ad::activation_signature()) *ad::activation_signature() ^= sig;
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (pa->value[i] > 0.0f) pa->grad[i] += self.grad[i];
        });
    }
    return r;
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-double(a.values()[i]))));
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        auto y = r.values();
        ad::attach(r, {pa}, [pa, y](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * y[i] * (1.0f - y[i]);
        });
    }
    return r;
}

inline Tensor tanh_op(const Tensor& a) {
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(std::tanh(double(a.values()[i])));
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        auto y = r.values();
        ad::attach(r, {pa}, [pa, y](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * (1.0f - y[i] * y[i]);
        });
    }
    return r;
}

namespace ad {

// softmax over contiguous or strided slices; shared by 1-D and both 2-D axes
inline void softmax_slices(const std::vector<float>& in, std::vector<float>& out,
                           std::int64_t slices, std::int64_t len, std::int64_t stride,
                           std::int64_t slice_stride) {
    for (std::int64_t s = 0; s < slices; ++s) {
        const std::int64_t base = s * slice_stride;
        double mx = -HUGE_VAL;
        for (std::int64_t i = 0; i < len; ++i) mx = std::max(mx, double(in[base + i * stride]));
        double denom = 0.0;
        for (std::int64_t i = 0; i < len; ++i) denom += std::exp(double(in[base + i * stride]) - mx);
        for (std::int64_t i = 0; i < len; ++i)
            out[base + i * stride] =
                static_cast<float>(std::exp(double(in[base + i * stride]) - mx) / denom);
    }
}

}  // namespace ad

// Softmax along `axis`. Rank 1: axis 0. Rank 2: axis 0 normalizes down each
// column, axis 1 along each row.
inline Tensor softmax(const Tensor& a, int axis) {
    std::int64_t slices, len, stride, slice_stride;
    if (a.rank() == 1) {
        if (axis != 0) throw ShapeError("softmax axis out of range for " + shape_str(a.shape()));
        slices = 1, len = a.dim(0), stride = 1, slice_stride = 0;
    } else if (a.rank() == 2) {
        if (axis == 0) {
            slices = a.dim(1), len = a.dim(0), stride = a.dim(1), slice_stride = 1;
        } else if (axis == 1) {
            slices = a.dim(0), len = a.dim(1), stride = 1, slice_stride = a.dim(1);
        } else {
            throw ShapeError("softmax axis out of range for " + shape_str(a.shape()));
        }
    } else {
        throw ShapeError("softmax expects rank 1 or 2, got " + shape_str(a.shape()));
    }
    if (len == 0) throw ShapeError("softmax over empty axis for shape " + shape_str(a.shape()));
    std::vector<float> out(a.values().size());
    ad::softmax_slices(a.values(), out, slices, len, stride, slice_stride);
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        auto y = r.values();
        ad::attach(r, {pa}, [pa, y, slices, len, stride, slice_stride](ad::Node& self) {
            pa->ensure_grad();
            for (std::int64_t s = 0; s < slices; ++s) {
                const std::int64_t base = s * slice_stride;
                double dot = 0.0;
                for (std::int64_t i = 0; i < len; ++i)
                    dot += double(self.grad[base + i * stride]) * y[base + i * stride];
                for (std::int64_t i = 0; i < len; ++i) {
                    const std::int64_t k = base + i * stride;
                    pa->grad[k] += y[k] * (self.grad[k] - static_cast<float>(dot));
                }
            }
        });
    }
    return r;
}

// Inverted dropout: kept activations are scaled by 1/(1-p) at train time, so
// evaluation needs no rescaling. The mask is a pure function of the seed.
inline Tensor dropout(const Tensor& a, float p, std::uint64_t seed) {
    if (p < 0.0f || p >= 1.0f)
        throw ConfigError("dropout probability must be in [0,1), got " + std::to_string(p));
    if (p == 0.0f) return a;
    Rng rng(seed);
    std::vector<std::uint8_t> mask(a.values().size());
    const float scale = 1.0f / (1.0f - p);
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = rng.uniform() >= p ? 1 : 0;
        out[i] = mask[i] ? a.values()[i] * scale : 0.0f;
    }
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(r, {pa}, [pa, mask, scale](ad::Node& self) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (mask[i]) pa->grad[i] += self.grad[i] * scale;
        });
    }
    return r;
}

namespace ad {

inline void check_logits(const Tensor& logits) {
    if (!(logits.rank() == 1 || (logits.rank() == 2 && logits.dim(0) == 1)))
        throw ShapeError("cross_entropy expects a logit vector, got " +
                         shape_str(logits.shape()));
    if (logits.numel() == 0) throw ShapeError("cross_entropy on empty logits");
}

inline double log_sum_exp(const std::vector<float>& v, double& mx_out) {
    double mx = -HUGE_VAL;
    for (float x : v) mx = std::max(mx, double(x));
    double acc = 0.0;
    for (float x : v) acc += std::exp(double(x) - mx);
    mx_out = mx;
    return mx + std::log(acc);
}

}  // namespace ad

inline Tensor cross_entropy(const Tensor& logits, std::int64_t target) {
    ad::check_logits(logits);
    const std::int64_t c = logits.numel();
    if (target < 0 || target >= c)
        throw ShapeError("cross_entropy target " + std::to_string(target) +
                         " out of range for " + shape_str(logits.shape()));
    double mx;
    const double lse = ad::log_sum_exp(logits.values(), mx);
    const double loss = lse - double(logits.values()[static_cast<std::size_t>(target)]);
    Tensor r = ad::make_result({1}, {static_cast<float>(loss)});
    if (ad::should_record({&logits})) {
        auto pl = logits.node();
        ad::attach(r, {pl}, [pl, target, lse](ad::Node& self) {
            pl->ensure_grad();
            for (std::size_t i = 0; i < pl->value.size(); ++i) {
                double smax = std::exp(double(pl->value[i]) - lse);
                double onehot = static_cast<std::int64_t>(i) == target ? 1.0 : 0.0;
                pl->grad[i] += self.grad[0] * static_cast<float>(smax - onehot);
            }
        });
    }
    return r;
}

inline Tensor cross_entropy(const Tensor& logits, const Tensor& target_dist) {
    ad::check_logits(logits);
    if (target_dist.numel() != logits.numel())
        throw ShapeError("cross_entropy distribution shape " + shape_str(target_dist.shape()) +
                         " does not match logits " + shape_str(logits.shape()));
    double mx;
    const double lse = ad::log_sum_exp(logits.values(), mx);
    double psum = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < logits.values().size(); ++i) {
        psum += target_dist.values()[i];
        dot += double(target_dist.values()[i]) * logits.values()[i];
    }
    Tensor r = ad::make_result({1}, {static_cast<float>(psum * lse - dot)});
    if (ad::should_record({&logits})) {
        auto pl = logits.node();
        auto p = target_dist.values();
        ad::attach(r, {pl}, [pl, p, lse, psum](ad::Node& self) {
            pl->ensure_grad();
            for (std::size_t i = 0; i < pl->value.size(); ++i) {
                double smax = std::exp(double(pl->value[i]) - lse);
                pl->grad[i] += self.grad[0] * static_cast<float>(psum * smax - p[i]);
            }
        });
    }
    return r;
}

// Rows of m scaled by the matching entry of a length-(rows) vector.
inline Tensor scale_rows(const Tensor& m, const Tensor& a) {
    if (m.rank() != 2 || a.numel() != m.dim(0))
        throw ShapeError("scale_rows shape mismatch: " + shape_str(m.shape()) + " vs " +
                         shape_str(a.shape()));
    const std::int64_t rows = m.dim(0), cols = m.dim(1);
    std::vector<float> out(m.values().size());
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
            out[i * cols + j] = m.values()[i * cols + j] * a.values()[static_cast<std::size_t>(i)];
    Tensor r = ad::make_result(m.shape(), std::move(out));
    if (ad::should_record({&m, &a})) {
        auto pm = m.node(), pa = a.node();
        ad::attach(r, {pm, pa}, [pm, pa, rows, cols](ad::Node& self) {
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::int64_t i = 0; i < rows; ++i)
                    for (std::int64_t j = 0; j < cols; ++j)
                        pm->grad[i * cols + j] +=
                            self.grad[i * cols + j] * pa->value[static_cast<std::size_t>(i)];
            }
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::int64_t i = 0; i < rows; ++i) {
                    double acc = 0.0;
                    for (std::int64_t j = 0; j < cols; ++j)
                        acc += double(self.grad[i * cols + j]) * pm->value[i * cols + j];
                    pa->grad[static_cast<std::size_t>(i)] += static_cast<float>(acc);
                }
            }
        });
    }
    return r;
}

// Adds a row vector to every row of a matrix.
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.numel() != m.dim(1))
        throw ShapeError("add_rowvec shape mismatch: " + shape_str(m.shape()) + " vs " +
                         shape_str(v.shape()));
    const std::int64_t rows = m.dim(0), cols = m.dim(1);
    std::vector<float> out(m.values().size());
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
            out[i * cols + j] = m.values()[i * cols + j] + v.values()[static_cast<std::size_t>(j)];
    Tensor r = ad::make_result(m.shape(), std::move(out));
    if (ad::should_record({&m, &v})) {
        auto pm = m.node(), pv = v.node();
        ad::attach(r, {pm, pv}, [pm, pv, rows, cols](ad::Node& self) {
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) pm->grad[i] += self.grad[i];
            }
            if (pv->requires_grad) {
                pv->ensure_grad();
                for (std::int64_t j = 0; j < cols; ++j) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < rows; ++i) acc += self.grad[i * cols + j];
                    pv->grad[static_cast<std::size_t>(j)] += static_cast<float>(acc);
                }
            }
        });
    }
    return r;
}

// Multiplies every element by a single-element scalar tensor; gradients flow
// into both operands.
inline Tensor mul_scalar_t(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1)
        throw ShapeError("mul_scalar_t scale must be a scalar, got " + shape_str(s.shape()));
    const float c = s.values()[0];
    std::vector<float> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    Tensor r = ad::make_result(a.shape(), std::move(out));
    if (ad::should_record({&a, &s})) {
        auto pa = a.node(), ps = s.node();
        ad::attach(r, {pa, ps}, [pa, ps, c](ad::Node& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    pa->grad[i] += self.grad[i] * c;
            }
            if (ps->requires_grad) {
                ps->ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    acc += double(self.grad[i]) * pa->value[i];
                ps->grad[0] += static_cast<float>(acc);
            }
        });
    }
    return r;
}

// Elementwise sum of same-shaped tensors with 64-bit accumulation, so the
// result does not depend on pairwise association.
inline Tensor add_n(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("add_n of zero tensors");
    for (const Tensor& p : parts) ad::check_same_shape(parts[0], p, "add_n");
    std::vector<float> out(parts[0].values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (const Tensor& p : parts) acc += p.values()[i];
        out[i] = static_cast<float>(acc);
    }
    Tensor r = ad::make_result(parts[0].shape(), std::move(out));
    bool record = false;
    if (ad::grad_mode())
        for (const Tensor& p : parts)
            if (p.requires_grad()) record = true;
    if (record) {
        std::vector<std::shared_ptr<ad::Node>> parents;
        for (const Tensor& p : parts) parents.push_back(p.node());
        auto ps = parents;
        ad::attach(r, parents, [ps](ad::Node& self) {
            for (auto& p : ps) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
            }
        });
    }
    return r;
}

// Per-head bilinear score: out[i] = K[i,:] * W[i,:,:] * Q[i,:]^T.
// K, Q are (h, dh); W is (h, dh, dh).
inline Tensor multi_head_bilinear(const Tensor& k, const Tensor& w, const Tensor& q) {
    if (k.rank() != 2 || q.rank() != 2 || w.rank() != 3 || k.shape() != q.shape() ||
        w.dim(0) != k.dim(0) || w.dim(1) != k.dim(1) || w.dim(2) != k.dim(1))
        throw ShapeError("multi_head_bilinear shape mismatch: K" + shape_str(k.shape()) + " W" +
                         shape_str(w.shape()) + " Q" + shape_str(q.shape()));
    const std::int64_t h = k.dim(0), dh = k.dim(1);
    std::vector<float> out(static_cast<std::size_t>(h));
    for (std::int64_t i = 0; i < h; ++i) {
        const float* kv = k.values().data() + i * dh;
        const float* qv = q.values().data() + i * dh;
        const float* wv = w.values().data() + i * dh * dh;
        double acc = 0.0;
        for (std::int64_t a = 0; a < dh; ++a) {
            double row = 0.0;
            for (std::int64_t b = 0; b < dh; ++b) row += double(wv[a * dh + b]) * qv[b];
            acc += double(kv[a]) * row;
        }
        out[static_cast<std::size_t>(i)] = static_cast<float>(acc);
    }
    Tensor r = ad::make_result({h}, std::move(out));
    if (ad::should_record({&k, &w, &q})) {
        auto pk = k.node(), pw = w.node(), pq = q.node();
        ad::attach(r, {pk, pw, pq}, [pk, pw, pq, h, dh](ad::Node& self) {
            for (std::int64_t i = 0; i < h; ++i) {
                const float g = self.grad[static_cast<std::size_t>(i)];
                if (g == 0.0f) continue;
                const float* kv = pk->value.data() + i * dh;
                const float* qv = pq->value.data() + i * dh;
                const float* wv = pw->value.data() + i * dh * dh;
                if (pk->requires_grad) {
                    pk->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a) {
                        double acc = 0.0;
                        for (std::int64_t b = 0; b < dh; ++b) acc += double(wv[a * dh + b]) * qv[b];
                        pk->grad[i * dh + a] += g * static_cast<float>(acc);
                    }
                }
                if (pq->requires_grad) {
                    pq->ensure_grad();
                    for (std::int64_t b = 0; b < dh; ++b) {
                        double acc = 0.0;
                        for (std::int64_t a = 0; a < dh; ++a) acc += double(kv[a]) * wv[a * dh + b];
                        pq->grad[i * dh + b] += g * static_cast<float>(acc);
                    }
                }
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a)
                        for (std::int64_t b = 0; b < dh; ++b)
                            pw->grad[i * dh * dh + a * dh + b] += g * kv[a] * qv[b];
                }
            }
        });
    }
    return r;
}

// Fused relation score: out[i] = (K[i,:] * W[i,:,:] * Q[i,:]^T) * mu[mu_index] * scale.
// One tape node per edge instead of a bilinear/element/multiply chain.
inline Tensor relation_scores(const Tensor& k, const Tensor& w, const Tensor& q,
                              const Tensor& mu, std::int64_t mu_index, float scale) {
    if (k.rank() != 2 || q.rank() != 2 || w.rank() != 3 || k.shape() != q.shape() ||
        w.dim(0) != k.dim(0) || w.dim(1) != k.dim(1) || w.dim(2) != k.dim(1))
        throw ShapeError("relation_scores shape mismatch: K" + shape_str(k.shape()) + " W" +
                         shape_str(w.shape()) + " Q" + shape_str(q.shape()));
    if (mu_index < 0 || mu_index >= mu.numel())
        throw ShapeError("relation_scores prior index " + std::to_string(mu_index) +
                         " out of range for " + shape_str(mu.shape()));
    const std::int64_t h = k.dim(0), dh = k.dim(1);
    const float prior = mu.values()[static_cast<std::size_t>(mu_index)];
    std::vector<float> raw(static_cast<std::size_t>(h));
    std::vector<float> out(static_cast<std::size_t>(h));
    for (std::int64_t i = 0; i < h; ++i) {
        const float* kv = k.values().data() + i * dh;
        const float* qv = q.values().data() + i * dh;
        const float* wv = w.values().data() + i * dh * dh;
        double acc = 0.0;
        for (std::int64_t a = 0; a < dh; ++a) {
            double rowacc = 0.0;
            for (std::int64_t b = 0; b < dh; ++b) rowacc += double(wv[a * dh + b]) * qv[b];
            acc += double(kv[a]) * rowacc;
        }
        raw[static_cast<std::size_t>(i)] = static_cast<float>(acc);
        out[static_cast<std::size_t>(i)] = static_cast<float>(acc) * prior * scale;
    }
    Tensor r = ad::make_result({h}, std::move(out));
    if (ad::should_record({&k, &w, &q, &mu})) {
        auto pk = k.node(), pw = w.node(), pq = q.node(), pmu = mu.node();
        ad::attach(r, {pk, pw, pq, pmu}, [pk, pw, pq, pmu, h, dh, mu_index, scale,
                                          raw](ad::Node& self) {
            const float prior = pmu->value[static_cast<std::size_t>(mu_index)];
            for (std::int64_t i = 0; i < h; ++i) {
                const float g = self.grad[static_cast<std::size_t>(i)];
                if (g == 0.0f) continue;
                const float g_raw = g * prior * scale;
                const float* kv = pk->value.data() + i * dh;
                const float* qv = pq->value.data() + i * dh;
                const float* wv = pw->value.data() + i * dh * dh;
                if (pmu->requires_grad) {
                    pmu->ensure_grad();
                    pmu->grad[static_cast<std::size_t>(mu_index)] +=
                        g * raw[static_cast<std::size_t>(i)] * scale;
                }
                if (pk->requires_grad) {
                    pk->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a) {
                        double acc = 0.0;
                        for (std::int64_t b = 0; b < dh; ++b)
                            acc += double(wv[a * dh + b]) * qv[b];
                        pk->grad[i * dh + a] += g_raw * static_cast<float>(acc);
                    }
                }
                if (pq->requires_grad) {
                    pq->ensure_grad();
                    for (std::int64_t b = 0; b < dh; ++b) {
                        double acc = 0.0;
                        for (std::int64_t a = 0; a < dh; ++a)
                            acc += double(kv[a]) * wv[a * dh + b];
                        pq->grad[i * dh + b] += g_raw * static_cast<float>(acc);
                    }
                }
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a)
                        for (std::int64_t b = 0; b < dh; ++b)
                            pw->grad[i * dh * dh + a * dh + b] += g_raw * kv[a] * qv[b];
                }
            }
        });
    }
    return r;
}

// Stacks same-length rank-1 tensors into a matrix, one tape node total.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows of zero tensors");
    const std::int64_t cols = rows[0].numel();
    for (const Tensor& r : rows)
        if (r.rank() != 1 || r.numel() != cols)
            throw ShapeError("stack_rows expects equal-length vectors, got " +
                             shape_str(rows[0].shape()) + " vs " + shape_str(r.shape()));
    std::vector<float> out;
    out.reserve(rows.size() * static_cast<std::size_t>(cols));
    for (const Tensor& r : rows) out.insert(out.end(), r.values().begin(), r.values().end());
    Tensor res = ad::make_result({static_cast<std::int64_t>(rows.size()), cols}, std::move(out));
    bool record = false;
    if (ad::grad_mode())
        for (const Tensor& r : rows)
            if (r.requires_grad()) record = true;
    if (record) {
        std::vector<std::shared_ptr<ad::Node>> parents;
        for (const Tensor& r : rows) parents.push_back(r.node());
        auto ps = parents;
        ad::attach(res, parents, [ps, cols](ad::Node& self) {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (!ps[i]->requires_grad) continue;
                ps[i]->ensure_grad();
                for (std::int64_t j = 0; j < cols; ++j)
                    ps[i]->grad[static_cast<std::size_t>(j)] +=
                        self.grad[i * static_cast<std::size_t>(cols) +
                                  static_cast<std::size_t>(j)];
            }
        });
    }
    return res;
}

// One row of a matrix as a rank-1 tensor.
inline Tensor row_vec(const Tensor& a, std::int64_t r) {
    if (a.rank() != 2 || r < 0 || r >= a.dim(0))
        throw ShapeError("row_vec index " + std::to_string(r) + " out of range for " +
                         shape_str(a.shape()));
    const std::int64_t cols = a.dim(1);
    std::vector<float> out(a.values().begin() + r * cols, a.values().begin() + (r + 1) * cols);
    Tensor res = ad::make_result({cols}, std::move(out));
    if (ad::should_record({&a})) {
        auto pa = a.node();
        ad::attach(res, {pa}, [pa, r, cols](ad::Node& self) {
            pa->ensure_grad();
            for (std::int64_t j = 0; j < cols; ++j) pa->grad[r * cols + j] += self.grad[j];
        });
    }
    return res;
}

// Per-head linear map: out[i,:] = V[i,:] * W[i,:,:]. V is (h, dh), W (h, dh, dh).
inline Tensor multi_head_transform(const Tensor& v, const Tensor& w) {
    if (v.rank() != 2 || w.rank() != 3 || w.dim(0) != v.dim(0) || w.dim(1) != v.dim(1) ||
        w.dim(2) != v.dim(1))
        throw ShapeError("multi_head_transform shape mismatch: V" + shape_str(v.shape()) + " W" +
                         shape_str(w.shape()));
    const std::int64_t h = v.dim(0), dh = v.dim(1);
    std::vector<float> out(v.values().size());
    for (std::int64_t i = 0; i < h; ++i) {
        const float* vv = v.values().data() + i * dh;
        const float* wv = w.values().data() + i * dh * dh;
        for (std::int64_t b = 0; b < dh; ++b) {
            double acc = 0.0;
            for (std::int64_t a = 0; a < dh; ++a) acc += double(vv[a]) * wv[a * dh + b];
            out[i * dh + b] = static_cast<float>(acc);
        }
    }
    Tensor r = ad::make_result({h, dh}, std::move(out));
    if (ad::should_record({&v, &w})) {
        auto pv = v.node(), pw = w.node();
        ad::attach(r, {pv, pw}, [pv, pw, h, dh](ad::Node& self) {
            for (std::int64_t i = 0; i < h; ++i) {
                const float* g = self.grad.data() + i * dh;
                const float* vv = pv->value.data() + i * dh;
                const float* wv = pw->value.data() + i * dh * dh;
                if (pv->requires_grad) {
                    pv->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a) {
                        double acc = 0.0;
                        for (std::int64_t b = 0; b < dh; ++b) acc += double(g[b]) * wv[a * dh + b];
                        pv->grad[i * dh + a] += static_cast<float>(acc);
                    }
                }
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    for (std::int64_t a = 0; a < dh; ++a)
                        for (std::int64_t b = 0; b < dh; ++b)
                            pw->grad[i * dh * dh + a * dh + b] += vv[a] * g[b];
                }
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// reverse pass
// ---------------------------------------------------------------------------

inline void backward(const Tensor& loss) {
    auto root = loss.node();
    if (root->value.size() != 1)
        throw ShapeError("backward requires a scalar loss, got shape " +
                         shape_str(root->shape));
    if (!root->requires_grad) throw NumericError("backward on a tensor outside the tape");
    if (root->backward_done)
        throw NumericError("backward already ran on this tape; build a fresh forward pass");
    root->backward_done = true;

    // post-order over the recorded graph; reversed it visits consumers first
    std::vector<ad::Node*> order;
    std::unordered_set<ad::Node*> visited;
    struct Frame {
        ad::Node* n;
        std::size_t next;
    };
    std::vector<Frame> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            ad::Node* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        ad::Node* n = *it;
        if (!n->backprop) continue;
        n->ensure_grad();
        n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// gradient verification
// ---------------------------------------------------------------------------

struct GradCheckReport {
    bool pass = false;
    double max_rel_error = 0.0;
    double tol = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;  // coordinates at nondifferentiable points
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
};

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares reverse-mode gradients of a scalar function against central finite
// differences. Coordinates whose +/- eps probes land on different relu
// activation patterns are excluded as nondifferentiable.
inline GradCheckReport grad_check(const TensorFn& f, std::vector<Tensor> inputs, double tol,
                                  double eps = 1e-3) {
    GradCheckReport report;
    report.tol = tol;

    for (Tensor& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tensor loss = f(inputs);
    if (loss.numel() != 1)
        throw ShapeError("grad_check requires a scalar function, got shape " +
                         shape_str(loss.shape()));
    backward(loss);

    std::vector<std::vector<float>> analytic;
    for (Tensor& t : inputs) {
        analytic.push_back(t.grad().empty() ? std::vector<float>(t.values().size(), 0.0f)
                                            : t.grad());
    }

    auto probe = [&](std::uint64_t& sig_out) {
        NoGradGuard ng;
        std::uint64_t sig = 0;
        ad::activation_signature() = &sig;
        Tensor out = f(inputs);
        ad::activation_signature() = nullptr;
        sig_out = sig;
        return double(out.item());
    };

    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        std::vector<float>& vals = inputs[ti].values_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const float saved = vals[i];
            std::uint64_t sig_plus = 0, sig_minus = 0;
            vals[i] = static_cast<float>(saved + eps);
            const double lp = probe(sig_plus);
            vals[i] = static_cast<float>(saved - eps);
            const double lm = probe(sig_minus);
            vals[i] = saved;
            if (sig_plus != sig_minus) {
                ++report.excluded;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * eps);
            const double adv = analytic[ti][i];
            const double rel = std::abs(adv - fd) / std::max({1.0, std::abs(adv), std::abs(fd)});
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_input = ti;
                report.worst_index = i;
            }
        }
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

// Xavier (variance-scaled uniform) initialization.
inline Tensor xavier_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (float& v : t.values_mut()) v = static_cast<float>(rng.uniform(-limit, limit));
    return t;
}

inline std::int64_t argmax(const Tensor& t) {
    std::int64_t best = 0;
    for (std::int64_t i = 1; i < t.numel(); ++i)
        if (t.values()[static_cast<std::size_t>(i)] > t.values()[static_cast<std::size_t>(best)])
            best = i;
    return best;
}

}  // namespace dshgt
