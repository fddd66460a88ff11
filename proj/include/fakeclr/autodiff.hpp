#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fakeclr/tensor.hpp"

namespace fakeclr {
namespace ad {

// Dynamic reverse-mode tape. Nodes own their forward value and gradient
// buffer; each op installs a closure that pulls the node's gradient back into
// its parents. Graphs are built per step and freed when the last Var drops.
struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    explicit Node(Tensor v) : value(std::move(v)), grad(value.size(), 0.0) {}
};

using Var = std::shared_ptr<Node>;

inline Var constant(Tensor v) { return std::make_shared<Node>(std::move(v)); }

inline Var leaf(Tensor v, bool requires_grad = true) {
    Var n = std::make_shared<Node>(std::move(v));
    n->requires_grad = requires_grad;
    return n;
}

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backprop) {
    Var n = std::make_shared<Node>(std::move(value));
    for (const Var& p : parents)
        if (p->requires_grad) { n->requires_grad = true; break; }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// Accumulate gradients from a scalar root through the tape.
inline void backward(const Var& root) {
    if (root->value.size() != 1)
        throw contract_violation("backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second)
                stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

// ---------------------------------------------------------------------------
// Primitive ops. Forward values come from the raw tensor kernels.
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    return make_op(fakeclr::add(a->value, b->value), {a, b}, [a, b](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (a->requires_grad) a->grad[i] += n.grad[i];
            if (b->requires_grad) b->grad[i] += n.grad[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    return make_op(fakeclr::sub(a->value, b->value), {a, b}, [a, b](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (a->requires_grad) a->grad[i] += n.grad[i];
            if (b->requires_grad) b->grad[i] -= n.grad[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    return make_op(fakeclr::mul(a->value, b->value), {a, b}, [a, b](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (a->requires_grad) a->grad[i] += n.grad[i] * b->value[i];
            if (b->requires_grad) b->grad[i] += n.grad[i] * a->value[i];
        }
    });
}

inline Var scale(const Var& a, double s) {
    return make_op(fakeclr::scale(a->value, s), {a}, [a, s](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += s * n.grad[i];
    });
}

inline Var matmul(const Var& a, const Var& b) {
    return make_op(fakeclr::matmul(a->value, b->value), {a, b}, [a, b](Node& n) {
        Tensor g(n.value.shape(), n.grad);
        if (a->requires_grad) {
            Tensor ga = fakeclr::matmul_nt(g, b->value);  // g[m,n] * B[k,n]^T
            for (std::size_t i = 0; i < ga.size(); ++i) a->grad[i] += ga[i];
        }
        if (b->requires_grad) {
            Tensor gb = fakeclr::matmul_tn(a->value, g);  // A[m,k]^T * g[m,n]
            for (std::size_t i = 0; i < gb.size(); ++i) b->grad[i] += gb[i];
        }
    });
}

// a[m,k] * b[n,k]^T
inline Var matmul_nt(const Var& a, const Var& b) {
    return make_op(fakeclr::matmul_nt(a->value, b->value), {a, b}, [a, b](Node& n) {
        Tensor g(n.value.shape(), n.grad);
        if (a->requires_grad) {
            Tensor ga = fakeclr::matmul(g, b->value);     // g[m,n] * B[n,k]
            for (std::size_t i = 0; i < ga.size(); ++i) a->grad[i] += ga[i];
        }
        if (b->requires_grad) {
            Tensor gb = fakeclr::matmul_tn(g, a->value);  // g[m,n]^T * A[m,k]
            for (std::size_t i = 0; i < gb.size(); ++i) b->grad[i] += gb[i];
        }
    });
}

inline Var add_rowvec(const Var& a, const Var& v) {
    return make_op(fakeclr::add_rowvec(a->value, v->value), {a, v}, [a, v](Node& n) {
        const std::size_t m = n.value.rows(), c = n.value.cols();
        if (a->requires_grad)
            for (std::size_t i = 0; i < m * c; ++i) a->grad[i] += n.grad[i];
        if (v->requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) v->grad[j] += n.grad[i * c + j];
    });
}

inline Var tanh_(const Var& a) {
    return make_op(fakeclr::tanh_map(a->value), {a}, [a](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            a->grad[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
    });
}

inline Var softplus_(const Var& a) {
    return make_op(fakeclr::softplus_map(a->value), {a}, [a](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-a->value[i]));
            a->grad[i] += n.grad[i] * sig;
        }
    });
}

inline Var sum(const Var& a) {
    return make_op(Tensor::scalar(fakeclr::sum_all(a->value)), {a}, [a](Node& n) {
        for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += n.grad[0];
    });
}

inline Var mean(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->value.size());
    return make_op(Tensor::scalar(fakeclr::sum_all(a->value) * inv), {a}, [a, inv](Node& n) {
        for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += n.grad[0] * inv;
    });
}

inline Var rows_dot(const Var& a, const Var& b) {
    return make_op(fakeclr::rows_dot(a->value, b->value), {a, b}, [a, b](Node& n) {
        const std::size_t m = a->value.rows(), c = a->value.cols();
        for (std::size_t i = 0; i < m; ++i) {
            const double g = n.grad[i];
            for (std::size_t j = 0; j < c; ++j) {
                if (a->requires_grad) a->grad[i * c + j] += g * b->value[i * c + j];
                if (b->requires_grad) b->grad[i * c + j] += g * a->value[i * c + j];
            }
        }
    });
}

inline Var row_l2_normalize(const Var& a) {
    return make_op(fakeclr::row_l2_normalize_map(a->value), {a}, [a](Node& n) {
        const std::size_t m = a->value.rows(), c = a->value.cols();
        for (std::size_t i = 0; i < m; ++i) {
            double norm2 = 0.0, ydotg = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                norm2 += a->value[i * c + j] * a->value[i * c + j];
                ydotg += n.value[i * c + j] * n.grad[i * c + j];
            }
            const double inv_norm = 1.0 / std::sqrt(norm2);
            for (std::size_t j = 0; j < c; ++j)
                a->grad[i * c + j] +=
                    (n.grad[i * c + j] - n.value[i * c + j] * ydotg) * inv_norm;
        }
    });
}

inline Var logsumexp_rows(const Var& a) {
    return make_op(fakeclr::logsumexp_rows_map(a->value), {a}, [a](Node& n) {
        const std::size_t m = a->value.rows(), c = a->value.cols();
        for (std::size_t i = 0; i < m; ++i) {
            const double g = n.grad[i];
            for (std::size_t j = 0; j < c; ++j)
                a->grad[i * c + j] += g * std::exp(a->value[i * c + j] - n.value[i]);
        }
    });
}

inline Var concat_cols(const Var& a, const Var& b) {
    return make_op(fakeclr::concat_cols(a->value, b->value), {a, b}, [a, b](Node& n) {
        const std::size_t m = a->value.rows(), na = a->value.cols(), nb = b->value.cols();
        for (std::size_t i = 0; i < m; ++i) {
            if (a->requires_grad)
                for (std::size_t j = 0; j < na; ++j)
                    a->grad[i * na + j] += n.grad[i * (na + nb) + j];
            if (b->requires_grad)
                for (std::size_t j = 0; j < nb; ++j)
                    b->grad[i * nb + j] += n.grad[i * (na + nb) + na + j];
        }
    });
}

inline Var reshape(const Var& a, std::vector<std::size_t> shape) {
    Tensor v(std::move(shape), a->value.values());
    return make_op(std::move(v), {a}, [a](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
    });
}

} // namespace ad
} // namespace fakeclr
