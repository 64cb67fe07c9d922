#pragma once

// Dense tensors with reverse-mode gradient accumulation.
//
// The operator set is deliberately closed: exactly the elementwise and
// structural ops the detection + contour-deformation model needs, each with a
// hand-written backward. No broadcasting engine. Scalar type is a template
// parameter; training code instantiates float, gradient checks instantiate
// double.

#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csnake/common.hpp"

namespace csnake {

template <class T>
class Tensor;

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw ContractViolation("tensor: negative extent in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

template <class T>
class Tensor : public std::enable_shared_from_this<Tensor<T>> {
public:
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;  // same length as data once touched by backward

    // graph edges; backward_fn reads this->grad and accumulates into parents
    std::vector<TensorPtr<T>> parents;
    std::function<void()> backward_fn;

    Tensor() = default;
    Tensor(Shape s, std::vector<T> values, bool rg = false)
        : shape(std::move(s)), data(std::move(values)), requires_grad(rg) {
        if (shape_numel(shape) != data.size())
            throw ContractViolation("tensor: shape " + shape_str(shape) + " does not match data length " +
                                    std::to_string(data.size()));
    }

    static TensorPtr<T> create(Shape s, std::vector<T> values, bool rg = false) {
        return std::make_shared<Tensor<T>>(std::move(s), std::move(values), rg);
    }
    static TensorPtr<T> zeros(Shape s, bool rg = false) {
        std::size_t n = shape_numel(s);
        return std::make_shared<Tensor<T>>(std::move(s), std::vector<T>(n, T(0)), rg);
    }
    static TensorPtr<T> full(Shape s, T v, bool rg = false) {
        std::size_t n = shape_numel(s);
        return std::make_shared<Tensor<T>>(std::move(s), std::vector<T>(n, v), rg);
    }
    static TensorPtr<T> scalar(T v, bool rg = false) {
        return std::make_shared<Tensor<T>>(Shape{}, std::vector<T>{v}, rg);
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    bool is_scalar() const { return data.size() == 1 && shape.empty(); }

    T value() const {
        if (data.size() != 1) throw ContractViolation("tensor: value() on non-scalar " + shape_str(shape));
        return data[0];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { grad.assign(data.size(), T(0)); }

    // row-major index helpers for the common ranks
    std::size_t idx2(int i, int j) const { return static_cast<std::size_t>(i) * shape[1] + j; }
    std::size_t idx3(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x;
    }
};

// Global autograd switch; inference paths disable recording via NoGradGuard.
inline bool& grad_recording_enabled() {
    static thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_recording_enabled()) { grad_recording_enabled() = false; }
    ~NoGradGuard() { grad_recording_enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

template <class T>
TensorPtr<T> make_node(Shape shape, std::vector<T> values, std::vector<TensorPtr<T>> parents) {
    auto out = Tensor<T>::create(std::move(shape), std::move(values));
    if (grad_recording_enabled()) {
        for (const auto& p : parents)
            if (p->requires_grad) out->requires_grad = true;
        out->parents = std::move(parents);
    }
    return out;
}

template <class T>
void require_same_shape(const TensorPtr<T>& a, const TensorPtr<T>& b, const char* op) {
    if (a->shape != b->shape)
        throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                                shape_str(b->shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward driver

// Populates gradients of every requires_grad ancestor of `loss`. Repeated
// calls accumulate; callers reset via zero_grad.
template <class T>
void backward(const TensorPtr<T>& loss) {
    if (!loss) throw ContractViolation("backward: null loss");
    if (loss->size() != 1) throw ContractViolation("backward: loss must be scalar, got " + shape_str(loss->shape));
    if (!loss->requires_grad) return;  // constant graph, nothing to do

    // iterative DFS topological order; the recorded graph is a DAG by
    // construction, so a node seen on the active stack means corruption
    std::vector<Tensor<T>*> order;
    std::unordered_map<Tensor<T>*, int> state;  // 0 new, 1 open, 2 done
    std::vector<std::pair<Tensor<T>*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    state[loss.get()] = 1;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor<T>* p = node->parents[next++].get();
            int& st = state[p];
            if (st == 1) throw InternalError("backward: cycle in recorded graph");
            if (st == 0 && p->requires_grad) {
                st = 1;
                stack.emplace_back(p, 0);
            }
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    // leaves accumulate across calls; interior nodes are scratch per call
    for (Tensor<T>* node : order) {
        if (node->parents.empty())
            node->ensure_grad();
        else
            node->zero_grad();
    }
    loss->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

// ---------------------------------------------------------------------------
// elementwise ops

template <class T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] + b->data[i];
    auto out = detail::make_node(a->shape, std::move(v), {a, b});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get(), *pb = b.get();
        out->backward_fn = [o, pa, pb] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] += o->grad[i];
            }
        };
    }
    return out;
}

template <class T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] - b->data[i];
    auto out = detail::make_node(a->shape, std::move(v), {a, b});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get(), *pb = b.get();
        out->backward_fn = [o, pa, pb] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] -= o->grad[i];
            }
        };
    }
    return out;
}

template <class T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] * b->data[i];
    auto out = detail::make_node(a->shape, std::move(v), {a, b});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get(), *pb = b.get();
        out->backward_fn = [o, pa, pb] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += pb->data[i] * o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] += pa->data[i] * o->grad[i];
            }
        };
    }
    return out;
}

template <class T>
TensorPtr<T> scale(const TensorPtr<T>& a, T s) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] * s;
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa, s] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += s * o->grad[i];
        };
    }
    return out;
}

template <class T>
TensorPtr<T> add_scalar(const TensorPtr<T>& a, T s) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] + s;
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i];
        };
    }
    return out;
}

// y = 1 - x, the complement used all over the focal loss
template <class T>
TensorPtr<T> one_minus(const TensorPtr<T>& a) {
    return add_scalar(scale(a, T(-1)), T(1));
}

template <class T>
TensorPtr<T> pow_scalar(const TensorPtr<T>& a, T p) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(a->data[i], p);
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa, p] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                pa->grad[i] += p * std::pow(pa->data[i], p - T(1)) * o->grad[i];
        };
    }
    return out;
}

template <class T>
TensorPtr<T> log_op(const TensorPtr<T>& a) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(a->data[i] > T(0)))
            throw ContractViolation("log: non-positive input at flat index " + std::to_string(i));
        v[i] = std::log(a->data[i]);
    }
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] / pa->data[i];
        };
    }
    return out;
}

template <class T>
TensorPtr<T> abs_op(const TensorPtr<T>& a) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(a->data[i]);
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                T s = pa->data[i] > T(0) ? T(1) : (pa->data[i] < T(0) ? T(-1) : T(0));
                pa->grad[i] += s * o->grad[i];
            }
        };
    }
    return out;
}

template <class T>
TensorPtr<T> relu(const TensorPtr<T>& a) {
    std::vector<T> v(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] > T(0) ? a->data[i] : T(0);
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                if (pa->data[i] > T(0)) pa->grad[i] += o->grad[i];
        };
    }
    return out;
}

// sigmoid clamped into [lo, hi]; keeps downstream logs finite. Gradient is
// zero where the clamp is active, matching a plain clamp.
template <class T>
TensorPtr<T> sigmoid_clamped(const TensorPtr<T>& a, T lo, T hi) {
    std::vector<T> v(a->size());
    std::vector<char> live(a->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        T s = T(1) / (T(1) + std::exp(-a->data[i]));
        live[i] = (s > lo && s < hi) ? 1 : 0;
        v[i] = std::min(hi, std::max(lo, s));
    }
    auto out = detail::make_node(a->shape, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa, live = std::move(live)] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                if (live[i]) pa->grad[i] += o->data[i] * (T(1) - o->data[i]) * o->grad[i];
        };
    }
    return out;
}

template <class T>
TensorPtr<T> sum(const TensorPtr<T>& a) {
    T acc = T(0);
    for (T v : a->data) acc += v;
    auto out = detail::make_node(Shape{}, std::vector<T>{acc}, {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa] {
            pa->ensure_grad();
            T g = o->grad[0];
            for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
        };
    }
    return out;
}

template <class T>
TensorPtr<T> mean(const TensorPtr<T>& a) {
    if (a->size() == 0) throw ContractViolation("mean: empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a->size()));
}

// ---------------------------------------------------------------------------
// structural ops

// Concatenate along axis 0; all inputs must share trailing extents.
template <class T>
TensorPtr<T> concat0(const std::vector<TensorPtr<T>>& xs) {
    if (xs.empty()) throw ContractViolation("concat0: no inputs");
    Shape inner(xs[0]->shape.begin() + 1, xs[0]->shape.end());
    std::size_t inner_n = shape_numel(inner);
    int total = 0;
    for (const auto& x : xs) {
        if (x->shape.empty()) throw ContractViolation("concat0: scalar input");
        Shape xi(x->shape.begin() + 1, x->shape.end());
        if (xi != inner) throw ContractViolation("concat0: trailing extents differ");
        total += x->shape[0];
    }
    Shape os = xs[0]->shape;
    os[0] = total;
    std::vector<T> v;
    v.reserve(static_cast<std::size_t>(total) * inner_n);
    for (const auto& x : xs) v.insert(v.end(), x->data.begin(), x->data.end());
    auto out = detail::make_node(std::move(os), std::move(v), xs);
    if (out->requires_grad) {
        Tensor<T>* o = out.get();
        std::vector<Tensor<T>*> raw;
        raw.reserve(xs.size());
        for (const auto& x : xs) raw.push_back(x.get());
        out->backward_fn = [o, raw] {
            std::size_t off = 0;
            for (Tensor<T>* p : raw) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += o->grad[off + i];
                }
                off += p->data.size();
            }
        };
    }
    return out;
}

// max over the last axis of a [C, N] tensor -> [C]
template <class T>
TensorPtr<T> rowmax(const TensorPtr<T>& a) {
    if (a->shape.size() != 2) throw ContractViolation("rowmax: expected rank-2 input");
    int c = a->shape[0], n = a->shape[1];
    if (n == 0) throw ContractViolation("rowmax: empty rows");
    std::vector<T> v(c);
    std::vector<int> arg(c);
    for (int i = 0; i < c; ++i) {
        const T* row = a->data.data() + static_cast<std::size_t>(i) * n;
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (row[j] > row[best]) best = j;
        v[i] = row[best];
        arg[i] = best;
    }
    auto out = detail::make_node(Shape{c}, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa, arg = std::move(arg), n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i * n + arg[i]] += o->grad[i];
        };
    }
    return out;
}

// broadcast a [C] vector to [C, n]
template <class T>
TensorPtr<T> broadcast_cols(const TensorPtr<T>& a, int n) {
    if (a->shape.size() != 1) throw ContractViolation("broadcast_cols: expected rank-1 input");
    int c = a->shape[0];
    std::vector<T> v(static_cast<std::size_t>(c) * n);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(i) * n + j] = a->data[i];
    auto out = detail::make_node(Shape{c, n}, std::move(v), {a});
    if (out->requires_grad) {
        Tensor<T>*o = out.get(), *pa = a.get();
        out->backward_fn = [o, pa, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < pa->grad.size(); ++i) {
                T acc = T(0);
                for (int j = 0; j < n; ++j) acc += o->grad[i * n + j];
                pa->grad[i] += acc;
            }
        };
    }
    return out;
}

}  // namespace csnake
