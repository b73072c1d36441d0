#pragma once

// Dense tensors with reverse-mode automatic differentiation.
//
// The graph is define-by-run: every op allocates a fresh node holding its
// forward output and a closure that pushes gradients to its parents.
// backward() on a scalar root walks the graph once in reverse topological
// order. Tensors are cheap shared handles; data is immutable once a tensor
// has entered a graph (optimizer updates build new tensors instead).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sthar/error.hpp"

namespace sthar {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

enum class Act { Tanh, Sigmoid, Relu, Elu };

template <typename T>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;  // allocated lazily, same length as data
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;  // nullptr for leaves

        void ensure_grad() {
            if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        }
    };

    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        node_->shape = std::move(shape);
        node_->data.assign(shape_numel(node_->shape), T(0));
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::fill(t.node_->data.begin(), t.node_->data.end(), value);
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = T(1);
        return t;
    }

    template <typename Rng>
    static Tensor uniform(Shape shape, T lo, T hi, Rng& rng, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::uniform_real_distribution<double> dist{double(lo), double(hi)};
        for (auto& v : t.node_->data) v = T(dist(rng));
        return t;
    }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }
    std::size_t extent(std::size_t axis) const { return node_->shape[axis]; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->data.size(), T(0)); }

    // Matrix accessors (2-D).
    std::size_t rows() const { return node_->shape[0]; }
    std::size_t cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }
    T& at(std::size_t r, std::size_t c) { return node_->data[r * cols() + c]; }
    T at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
    T& operator[](std::size_t i) { return node_->data[i]; }
    T operator[](std::size_t i) const { return node_->data[i]; }
    T item() const {
        if (size() != 1) throw ContractError("item(): tensor is not scalar");
        return node_->data[0];
    }

    std::shared_ptr<Node> node() const { return node_; }

    // Reverse-mode sweep from a scalar root. Intermediate (non-leaf) grads are
    // reset each call; leaf grads accumulate so repeated backward over fresh
    // graphs sums into parameters as usual.
    void backward() const {
        if (size() != 1) throw ContractError("backward: root must be scalar, got shape " + shape_str(shape()));
        std::vector<Node*> order = topo_order(node_.get());
        for (Node* n : order) {
            n->ensure_grad();
            if (!n->parents.empty()) std::fill(n->grad.begin(), n->grad.end(), T(0));
        }
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward) (*it)->backward(**it);
        }
    }

    // Internal: build an op node.
    static Tensor make_op(Shape shape, std::vector<T> data,
                          std::vector<std::shared_ptr<Node>> parents,
                          std::function<void(Node&)> backward) {
        Tensor t(std::move(shape), std::move(data));
        t.node_->parents = std::move(parents);
        t.node_->backward = std::move(backward);
        return t;
    }

private:
    static std::vector<Node*> topo_order(Node* root) {
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        // Iterative post-order DFS; parent visit order is fixed, so the
        // traversal (and therefore gradient accumulation order) is
        // deterministic run to run.
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(root, 0);
        seen.insert(root);
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<Node> node_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) {
        T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor<T>::make_op(a.shape(), std::move(out), {an, bn},
                              [an, bn](typename Tensor<T>::Node& self) {
                                  an->ensure_grad();
                                  bn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                      an->grad[i] += self.grad[i];
                                      bn->grad[i] += self.grad[i];
                                  }
                              });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor<T>::make_op(a.shape(), std::move(out), {an, bn},
                              [an, bn](typename Tensor<T>::Node& self) {
                                  an->ensure_grad();
                                  bn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                      an->grad[i] += self.grad[i];
                                      bn->grad[i] -= self.grad[i];
                                  }
                              });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return Tensor<T>::make_op(a.shape(), std::move(out), {an, bn},
                              [an, bn](typename Tensor<T>::Node& self) {
                                  an->ensure_grad();
                                  bn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                      an->grad[i] += self.grad[i] * bn->data[i];
                                      bn->grad[i] += self.grad[i] * an->data[i];
                                  }
                              });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    auto an = a.node();
    return Tensor<T>::make_op(a.shape(), std::move(out), {an},
                              [an, s](typename Tensor<T>::Node& self) {
                                  an->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      an->grad[i] += self.grad[i] * s;
                              });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.extent(1) != b.extent(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    std::vector<T> out(m * n, T(0));
    const T* ad = a.data().data();
    const T* bd = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ad[i * k + p];
            const T* brow = bd + p * n;
            T* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    auto an = a.node();
    auto bn = b.node();
    return Tensor<T>::make_op(
        {m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](typename Tensor<T>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            const T* g = self.grad.data();
            // dA = g * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T acc = T(0);
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bn->data[p * n + j];
                    an->grad[i * k + p] += acc;
                }
            // dB = A^T * g
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    T acc = T(0);
                    for (std::size_t i = 0; i < m; ++i) acc += an->data[i * k + p] * g[i * n + j];
                    bn->grad[p * n + j] += acc;
                }
        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.ndim() != 2) throw DimensionError("transpose: expected matrix, got " + shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<T> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
    auto an = a.node();
    return Tensor<T>::make_op({c, r}, std::move(out), {an},
                              [an, r, c](typename Tensor<T>::Node& self) {
                                  an->ensure_grad();
                                  for (std::size_t i = 0; i < r; ++i)
                                      for (std::size_t j = 0; j < c; ++j)
                                          an->grad[i * c + j] += self.grad[j * r + i];
                              });
}

// Adds a length-c bias to every row of an r×c matrix.
template <typename T>
Tensor<T> add_bias_rows(const Tensor<T>& m, const Tensor<T>& bias) {
    if (m.ndim() != 2 || bias.size() != m.cols())
        throw DimensionError("add_bias_rows: bias length " + std::to_string(bias.size()) +
                             " vs matrix " + shape_str(m.shape()));
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<T> out(m.data());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.data()[j];
    auto mn = m.node();
    auto bn = bias.node();
    return Tensor<T>::make_op(m.shape(), std::move(out), {mn, bn},
                              [mn, bn, r, c](typename Tensor<T>::Node& self) {
                                  mn->ensure_grad();
                                  bn->ensure_grad();
                                  for (std::size_t i = 0; i < r; ++i)
                                      for (std::size_t j = 0; j < c; ++j) {
                                          mn->grad[i * c + j] += self.grad[i * c + j];
                                          bn->grad[j] += self.grad[i * c + j];
                                      }
                              });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind, T alpha = T(1)) {
    std::vector<T> out(x.size());
    const auto& xd = x.data();
    switch (kind) {
        case Act::Tanh:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xd[i]);
            break;
        case Act::Sigmoid:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_sigmoid(xd[i]);
            break;
        case Act::Relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
            break;
        case Act::Elu:
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = xd[i] > T(0) ? xd[i] : alpha * (std::exp(xd[i]) - T(1));
            break;
    }
    auto xn = x.node();
    return Tensor<T>::make_op(
        x.shape(), std::move(out), {xn}, [xn, kind, alpha](typename Tensor<T>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                T d;
                const T y = self.data[i];
                switch (kind) {
                    case Act::Tanh: d = T(1) - y * y; break;
                    case Act::Sigmoid: d = y * (T(1) - y); break;
                    case Act::Relu: d = xn->data[i] > T(0) ? T(1) : T(0); break;
                    case Act::Elu: d = xn->data[i] > T(0) ? T(1) : y + alpha; break;
                }
                xn->grad[i] += self.grad[i] * d;
            }
        });
}

template <typename T>
Tensor<T> tanh_t(const Tensor<T>& x) { return activation(x, Act::Tanh); }
template <typename T>
Tensor<T> sigmoid_t(const Tensor<T>& x) { return activation(x, Act::Sigmoid); }
template <typename T>
Tensor<T> elu_t(const Tensor<T>& x, T alpha = T(1)) { return activation(x, Act::Elu, alpha); }

// Row-wise softmax with max subtraction. Rejects NaN input.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    if (x.ndim() != 2) throw DimensionError("softmax_rows: expected matrix, got " + shape_str(x.shape()));
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<T> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        T mx = x.data()[i * c];
        for (std::size_t j = 0; j < c; ++j) {
            const T v = x.data()[i * c + j];
            if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
            mx = std::max(mx, v);
        }
        T sum = T(0);
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(x.data()[i * c + j] - mx);
            sum += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= sum;
    }
    auto xn = x.node();
    return Tensor<T>::make_op({r, c}, std::move(out), {xn},
                              [xn, r, c](typename Tensor<T>::Node& self) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < r; ++i) {
                                      T dot = T(0);
                                      for (std::size_t j = 0; j < c; ++j)
                                          dot += self.grad[i * c + j] * self.data[i * c + j];
                                      for (std::size_t j = 0; j < c; ++j)
                                          xn->grad[i * c + j] +=
                                              self.data[i * c + j] * (self.grad[i * c + j] - dot);
                                  }
                              });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    for (auto v : x.data()) acc += v;
    auto xn = x.node();
    return Tensor<T>::make_op({1}, {acc}, {xn}, [xn](typename Tensor<T>::Node& self) {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += self.grad[0];
    });
}

// Mean over rows: r×c -> 1×c.
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
    if (x.ndim() != 2) throw DimensionError("mean_rows: expected matrix");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<T> out(c, T(0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += x.data()[i * c + j];
    for (auto& v : out) v /= T(r);
    auto xn = x.node();
    return Tensor<T>::make_op({1, c}, std::move(out), {xn},
                              [xn, r, c](typename Tensor<T>::Node& self) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < r; ++i)
                                      for (std::size_t j = 0; j < c; ++j)
                                          xn->grad[i * c + j] += self.grad[j] / T(r);
                              });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    auto xn = x.node();
    return Tensor<T>::make_op(std::move(shape), x.data(), {xn},
                              [xn](typename Tensor<T>::Node& self) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      xn->grad[i] += self.grad[i];
                              });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
    if (x.ndim() != 2 || end > x.rows() || begin >= end)
        throw DimensionError("slice_rows: bad range");
    const std::size_t c = x.cols(), n = end - begin;
    std::vector<T> out(x.data().begin() + begin * c, x.data().begin() + end * c);
    auto xn = x.node();
    return Tensor<T>::make_op({n, c}, std::move(out), {xn},
                              [xn, begin, c](typename Tensor<T>::Node& self) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      xn->grad[begin * c + i] += self.grad[i];
                              });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    std::vector<std::shared_ptr<typename Tensor<T>::Node>> parents;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.cols() != c)
            throw DimensionError("concat_rows: column mismatch");
        r += p.rows();
        parents.push_back(p.node());
    }
    std::vector<T> out;
    out.reserve(r * c);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    auto parents_copy = parents;
    return Tensor<T>::make_op({r, c}, std::move(out), std::move(parents),
                              [parents_copy](typename Tensor<T>::Node& self) {
                                  std::size_t off = 0;
                                  for (const auto& p : parents_copy) {
                                      p->ensure_grad();
                                      for (std::size_t i = 0; i < p->data.size(); ++i)
                                          p->grad[i] += self.grad[off + i];
                                      off += p->data.size();
                                  }
                              });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    std::vector<std::shared_ptr<typename Tensor<T>::Node>> parents;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.rows() != r) throw DimensionError("concat_cols: row mismatch");
        widths.push_back(p.cols());
        c += p.cols();
        parents.push_back(p.node());
    }
    std::vector<T> out(r * c);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& pd = parts[k].data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
                out[i * c + off + j] = pd[i * widths[k] + j];
        off += widths[k];
    }
    auto parents_copy = parents;
    return Tensor<T>::make_op(
        {r, c}, std::move(out), std::move(parents),
        [parents_copy, widths, r, c](typename Tensor<T>::Node& self) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < parents_copy.size(); ++k) {
                auto& p = parents_copy[k];
                p->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j)
                        p->grad[i * widths[k] + j] += self.grad[i * c + off + j];
                off += widths[k];
            }
        });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Cross-correlation (no kernel flip). input: C×H×W, kernels: K×C×kh×kw,
// bias: length K (pass an invalid tensor for none).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t pad = 0) {
    if (input.ndim() != 3 || kernels.ndim() != 4 || input.extent(0) != kernels.extent(1))
        throw DimensionError("conv2d: expected C×H×W input and K×C×kh×kw kernels, got " +
                             shape_str(input.shape()) + " and " + shape_str(kernels.shape()));
    const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
    const std::size_t K = kernels.extent(0), kh = kernels.extent(2), kw = kernels.extent(3);
    if (kh > H + 2 * pad || kw > W + 2 * pad)
        throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                             " larger than padded input " + shape_str(input.shape()));
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);
    const bool has_bias = bias.valid();
    if (has_bias && bias.size() != K) throw DimensionError("conv2d: bias length != K");

    std::vector<T> out(K * Ho * Wo, T(0));
    const T* xd = input.data().data();
    const T* kd = kernels.data().data();
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                T acc = has_bias ? bias.data()[k] : T(0);
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
                        if (iy < 0 || iy >= std::ptrdiff_t(H)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
                            if (ix < 0 || ix >= std::ptrdiff_t(W)) continue;
                            acc += xd[(c * H + iy) * W + ix] *
                                   kd[((k * C + c) * kh + ky) * kw + kx];
                        }
                    }
                out[(k * Ho + oy) * Wo + ox] = acc;
            }

    auto xn = input.node();
    auto kn = kernels.node();
    std::vector<std::shared_ptr<typename Tensor<T>::Node>> parents{xn, kn};
    std::shared_ptr<typename Tensor<T>::Node> bn;
    if (has_bias) {
        bn = bias.node();
        parents.push_back(bn);
    }
    return Tensor<T>::make_op(
        {K, Ho, Wo}, std::move(out), std::move(parents),
        [xn, kn, bn, C, H, W, K, kh, kw, Ho, Wo, stride, pad](typename Tensor<T>::Node& self) {
            xn->ensure_grad();
            kn->ensure_grad();
            if (bn) bn->ensure_grad();
            const T* g = self.grad.data();
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t oy = 0; oy < Ho; ++oy)
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const T gv = g[(k * Ho + oy) * Wo + ox];
                        if (bn) bn->grad[k] += gv;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const std::ptrdiff_t iy =
                                    std::ptrdiff_t(oy * stride + ky) - std::ptrdiff_t(pad);
                                if (iy < 0 || iy >= std::ptrdiff_t(H)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const std::ptrdiff_t ix =
                                        std::ptrdiff_t(ox * stride + kx) - std::ptrdiff_t(pad);
                                    if (ix < 0 || ix >= std::ptrdiff_t(W)) continue;
                                    xn->grad[(c * H + iy) * W + ix] +=
                                        gv * kn->data[((k * C + c) * kh + ky) * kw + kx];
                                    kn->grad[((k * C + c) * kh + ky) * kw + kx] +=
                                        gv * xn->data[(c * H + iy) * W + ix];
                                }
                            }
                    }
        });
}

// 2×2 max pooling with stride 2 over C×H×W; H and W must be even.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
    if (input.ndim() != 3 || input.extent(1) % 2 != 0 || input.extent(2) % 2 != 0)
        throw DimensionError("maxpool2: expected C×H×W with even H, W, got " +
                             shape_str(input.shape()));
    const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
    const std::size_t Ho = H / 2, Wo = W / 2;
    std::vector<T> out(C * Ho * Wo);
    auto argmax = std::make_shared<std::vector<std::size_t>>(C * Ho * Wo);
    const T* xd = input.data().data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = (c * H + 2 * oy) * W + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (c * H + 2 * oy + dy) * W + 2 * ox + dx;
                        if (xd[idx] > xd[best]) best = idx;
                    }
                out[(c * Ho + oy) * Wo + ox] = xd[best];
                (*argmax)[(c * Ho + oy) * Wo + ox] = best;
            }
    auto xn = input.node();
    return Tensor<T>::make_op({C, Ho, Wo}, std::move(out), {xn},
                              [xn, argmax](typename Tensor<T>::Node& self) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      xn->grad[(*argmax)[i]] += self.grad[i];
                              });
}

// ---------------------------------------------------------------------------
// Row-wise normalization with learned gain/offset (length-c vectors).

template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& offset,
                          T eps = T(1e-5)) {
    if (x.ndim() != 2 || gain.size() != x.cols() || offset.size() != x.cols())
        throw DimensionError("layer_norm_rows: gain/offset must match column count");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<T> out(r * c);
    auto inv_std = std::make_shared<std::vector<T>>(r);
    auto normed = std::make_shared<std::vector<T>>(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        T mean = T(0);
        for (std::size_t j = 0; j < c; ++j) mean += x.data()[i * c + j];
        mean /= T(c);
        T var = T(0);
        for (std::size_t j = 0; j < c; ++j) {
            const T d = x.data()[i * c + j] - mean;
            var += d * d;
        }
        var /= T(c);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            const T y0 = (x.data()[i * c + j] - mean) * is;
            (*normed)[i * c + j] = y0;
            out[i * c + j] = y0 * gain.data()[j] + offset.data()[j];
        }
    }
    auto xn = x.node();
    auto gn = gain.node();
    auto on = offset.node();
    return Tensor<T>::make_op(
        {r, c}, std::move(out), {xn, gn, on},
        [xn, gn, on, inv_std, normed, r, c](typename Tensor<T>::Node& self) {
            xn->ensure_grad();
            gn->ensure_grad();
            on->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                T mean_gy = T(0), mean_gyy = T(0);
                for (std::size_t j = 0; j < c; ++j) {
                    const T gy = self.grad[i * c + j] * gn->data[j];
                    mean_gy += gy;
                    mean_gyy += gy * (*normed)[i * c + j];
                }
                mean_gy /= T(c);
                mean_gyy /= T(c);
                for (std::size_t j = 0; j < c; ++j) {
                    const T gy = self.grad[i * c + j] * gn->data[j];
                    xn->grad[i * c + j] +=
                        (gy - mean_gy - (*normed)[i * c + j] * mean_gyy) * (*inv_std)[i];
                    gn->grad[j] += self.grad[i * c + j] * (*normed)[i * c + j];
                    on->grad[j] += self.grad[i * c + j];
                }
            }
        });
}

// -log(p[label]) over a 1×C probability row, clamped at 1e-12.
template <typename T>
Tensor<T> neg_log_prob(const Tensor<T>& probs, std::size_t label) {
    if (probs.ndim() != 2 || probs.rows() != 1)
        throw DimensionError("neg_log_prob: expected 1×C row, got " + shape_str(probs.shape()));
    if (label >= probs.cols())
        throw ContractError("neg_log_prob: label " + std::to_string(label) + " >= " +
                            std::to_string(probs.cols()));
    const T clamp = T(1e-12);
    const T p = std::max(probs.data()[label], clamp);
    auto pn = probs.node();
    return Tensor<T>::make_op({1}, {-std::log(p)}, {pn},
                              [pn, label, clamp](typename Tensor<T>::Node& self) {
                                  pn->ensure_grad();
                                  const T p = std::max(pn->data[label], clamp);
                                  if (pn->data[label] > clamp)
                                      pn->grad[label] += self.grad[0] * (-T(1) / p);
                              });
}

}  // namespace sthar
