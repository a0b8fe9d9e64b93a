#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "corefsum/ops.hpp"
#include "corefsum/tensor.hpp"

namespace corefsum {

// Dynamic reverse-mode graph. Each forward op appends a node holding its
// output value and a closure that routes the incoming gradient to its
// parents. Graphs are rebuilt per forward pass; parameters persist outside
// the graph and collect gradients across passes.
class Node {
public:
    Tensor val;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Node&)> backprop;
    Parameter* param = nullptr;
    bool needs_grad = false;
};

using Value = std::shared_ptr<Node>;

inline void accumulate(Node& n, const Tensor& g) {
    if (!n.needs_grad) return;
    if (n.grad.empty()) n.grad = Tensor::zeros(n.val.shape());
    add_in_place(n.grad, g);
}

inline Value constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->needs_grad = false;
    return n;
}

inline Value leaf(Parameter& p) {
    auto n = std::make_shared<Node>();
    n->val = p.value;
    n->param = &p;
    n->needs_grad = true;
    return n;
}

inline Value make_op(Tensor val, std::vector<Value> parents,
                     std::function<void(const Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->needs_grad) {
            n->needs_grad = true;
            break;
        }
    }
    if (n->needs_grad) n->backprop = std::move(backprop);
    return n;
}

inline Value add(const Value& a, const Value& b) {
    return make_op(add(a->val, b->val), {a, b}, [](const Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad);
    });
}

// x [n x m] plus row vector b [m].
inline Value add_rows(const Value& x, const Value& b) {
    return make_op(add_rows(x->val, b->val), {x, b}, [](const Node& n) {
        accumulate(*n.parents[0], n.grad);
        if (n.parents[1]->needs_grad) {
            const std::size_t rows = n.grad.shape()[0], m = n.grad.shape()[1];
            Tensor gb({m});
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < m; ++j) gb.at(j) += n.grad.at(i * m + j);
            }
            accumulate(*n.parents[1], gb);
        }
    });
}

inline Value matmul(const Value& a, const Value& b) {
    return make_op(matmul(a->val, b->val), {a, b}, [](const Node& n) {
        if (n.parents[0]->needs_grad) {
            accumulate(*n.parents[0], matmul_nt(n.grad, n.parents[1]->val));
        }
        if (n.parents[1]->needs_grad) {
            accumulate(*n.parents[1], matmul_tn(n.parents[0]->val, n.grad));
        }
    });
}

// a [n x k] times b^T with b [m x k].
inline Value matmul_nt(const Value& a, const Value& b) {
    return make_op(matmul_nt(a->val, b->val), {a, b}, [](const Node& n) {
        if (n.parents[0]->needs_grad) {
            accumulate(*n.parents[0], matmul(n.grad, n.parents[1]->val));
        }
        if (n.parents[1]->needs_grad) {
            accumulate(*n.parents[1], matmul_tn(n.grad, n.parents[0]->val));
        }
    });
}

// Constant left factor: out = A x with no gradient into A.
inline Value matmul_const_left(const Tensor& a, const Value& x) {
    return make_op(matmul(a, x->val), {x}, [a](const Node& n) {
        accumulate(*n.parents[0], matmul_tn(a, n.grad));
    });
}

inline Value relu(const Value& x) {
    return make_op(relu(x->val), {x}, [](const Node& n) {
        Tensor g = n.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (n.val.at(i) <= 0.0) g.at(i) = 0.0;
        }
        accumulate(*n.parents[0], g);
    });
}

inline Value scale(const Value& x, double s) {
    return make_op(scale(x->val, s), {x}, [s](const Node& n) {
        accumulate(*n.parents[0], scale(n.grad, s));
    });
}

inline Value add_const(const Value& x, const Tensor& m) {
    return make_op(add(x->val, m), {x}, [](const Node& n) {
        accumulate(*n.parents[0], n.grad);
    });
}

inline Value linear(const Value& x, Parameter& w, Parameter& b) {
    return add_rows(matmul(x, leaf(w)), leaf(b));
}

inline Value layer_norm(const Value& x, const Value& gamma, const Value& beta,
                        double eps = 1e-5) {
    Tensor out = layer_norm(x->val, gamma->val, beta->val, eps);
    // Cache normalized rows and inverse stddevs for the backward pass.
    const std::size_t rows = x->val.shape()[0], m = x->val.shape()[1];
    auto xhat = std::make_shared<Tensor>(Tensor::zeros({rows, m}));
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = x->val.data() + i * m;
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += row[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < m; ++j) xhat->at(i * m + j) = (row[j] - mean) * inv;
    }
    return make_op(std::move(out), {x, gamma, beta}, [xhat, inv_std, rows, m](const Node& n) {
        const Tensor& g = n.grad;
        const Tensor& gam = n.parents[1]->val;
        if (n.parents[1]->needs_grad) {
            Tensor dgamma({m});
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    dgamma.at(j) += g.at(i * m + j) * xhat->at(i * m + j);
                }
            }
            accumulate(*n.parents[1], dgamma);
        }
        if (n.parents[2]->needs_grad) {
            Tensor dbeta({m});
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < m; ++j) dbeta.at(j) += g.at(i * m + j);
            }
            accumulate(*n.parents[2], dbeta);
        }
        if (n.parents[0]->needs_grad) {
            Tensor dx({rows, m});
            const double dm = static_cast<double>(m);
            for (std::size_t i = 0; i < rows; ++i) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const double dxh = g.at(i * m + j) * gam.at(j);
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat->at(i * m + j);
                }
                mean_dxhat /= dm;
                mean_dxhat_xhat /= dm;
                for (std::size_t j = 0; j < m; ++j) {
                    const double dxh = g.at(i * m + j) * gam.at(j);
                    dx.at(i * m + j) =
                        (*inv_std)[i] * (dxh - mean_dxhat - xhat->at(i * m + j) * mean_dxhat_xhat);
                }
            }
            accumulate(*n.parents[0], dx);
        }
    });
}

inline Value layer_norm(const Value& x, Parameter& gamma, Parameter& beta, double eps = 1e-5) {
    return layer_norm(x, leaf(gamma), leaf(beta), eps);
}

// LayerNorm without a learned affine part (gamma=1, beta=0).
inline Value layer_norm_plain(const Value& x, double eps = 1e-5) {
    const std::size_t m = x->val.shape()[1];
    return layer_norm(x, constant(Tensor::full({m}, 1.0)), constant(Tensor::zeros({m})), eps);
}

inline Value softmax_rows(const Value& x) {
    Tensor y = softmax_rows(x->val);
    return make_op(y, {x}, [](const Node& n) {
        const std::size_t rows = n.val.shape()[0], m = n.val.shape()[1];
        Tensor dx({rows, m});
        for (std::size_t i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                dot += n.grad.at(i * m + j) * n.val.at(i * m + j);
            }
            for (std::size_t j = 0; j < m; ++j) {
                dx.at(i * m + j) = n.val.at(i * m + j) * (n.grad.at(i * m + j) - dot);
            }
        }
        accumulate(*n.parents[0], dx);
    });
}

inline Value dropout(const Value& x, double p, RngState& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("dropout: p must be in [0, 1)");
    if (!training || p == 0.0) return x;
    auto mask = std::make_shared<Tensor>();
    Tensor y = dropout(x->val, p, rng, true, mask.get());
    return make_op(std::move(y), {x}, [mask](const Node& n) {
        accumulate(*n.parents[0], hadamard(n.grad, *mask));
    });
}

// out = lambda * a + (1 - lambda) * b with a scalar mixing weight. The
// endpoints reproduce a and b bitwise.
inline Value convex_mix(const Value& a, const Value& b, const Value& lambda) {
    if (lambda->val.size() != 1) throw ValidationError("convex_mix: lambda must be scalar");
    const double lam = lambda->val.at(0);
    require_same_shape(a->val, b->val, "convex_mix");
    Tensor out;
    if (lam == 1.0) {
        out = a->val;
    } else if (lam == 0.0) {
        out = b->val;
    } else {
        out = a->val;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.at(i) = lam * a->val.at(i) + (1.0 - lam) * b->val.at(i);
        }
    }
    return make_op(std::move(out), {a, b, lambda}, [lam](const Node& n) {
        if (n.parents[0]->needs_grad) accumulate(*n.parents[0], scale(n.grad, lam));
        if (n.parents[1]->needs_grad) accumulate(*n.parents[1], scale(n.grad, 1.0 - lam));
        if (n.parents[2]->needs_grad) {
            double d = 0.0;
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                d += n.grad.at(i) * (n.parents[0]->val.at(i) - n.parents[1]->val.at(i));
            }
            accumulate(*n.parents[2], Tensor::scalar(d));
        }
    });
}

// Row gather from an embedding parameter; gradient scatter-adds into it.
inline Value gather_rows(Parameter& table, const std::vector<int>& ids) {
    const std::size_t m = table.value.shape()[1];
    Tensor out({ids.size(), m});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= table.value.shape()[0]) {
            throw ValidationError("gather_rows: id out of range for " + table.name);
        }
        for (std::size_t j = 0; j < m; ++j) {
            out.at(i * m + j) = table.value(static_cast<std::size_t>(id), j);
        }
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->needs_grad = true;
    Parameter* tp = &table;
    n->backprop = [tp, ids, m](const Node& nn) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const std::size_t id = static_cast<std::size_t>(ids[i]);
            for (std::size_t j = 0; j < m; ++j) {
                tp->grad.at(id * m + j) += nn.grad.at(i * m + j);
            }
        }
    };
    return n;
}

inline Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ValidationError("concat_cols: no parts");
    const std::size_t rows = parts[0]->val.shape()[0];
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->val.shape()[0] != rows) throw ValidationError("concat_cols: row mismatch");
        total += p->val.shape()[1];
    }
    Tensor out({rows, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t m = p->val.shape()[1];
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) out.at(i * total + off + j) = p->val.at(i * m + j);
        }
        off += m;
    }
    return make_op(std::move(out), parts, [rows, total](const Node& n) {
        std::size_t off2 = 0;
        for (const auto& p : n.parents) {
            const std::size_t m = p->val.shape()[1];
            if (p->needs_grad) {
                Tensor g({rows, m});
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < m; ++j) {
                        g.at(i * m + j) = n.grad.at(i * total + off2 + j);
                    }
                }
                accumulate(*p, g);
            }
            off2 += m;
        }
    });
}

// Mean token-level cross entropy between logits [n x V] and target ids [n].
inline Value cross_entropy_mean(const Value& logits, const std::vector<int>& targets) {
    const std::size_t n = logits->val.shape()[0], v = logits->val.shape()[1];
    if (targets.size() != n) throw ValidationError("cross_entropy_mean: target length mismatch");
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= v) {
            throw ValidationError("cross_entropy_mean: target id out of range");
        }
    }
    const std::vector<double> lse = log_sum_exp_rows(logits->val);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss += lse[i] - logits->val(i, static_cast<std::size_t>(targets[i]));
    }
    loss /= static_cast<double>(n);
    return make_op(Tensor::scalar(loss), {logits}, [targets, n, v](const Node& nn) {
        const double g = nn.grad.at(0) / static_cast<double>(n);
        Tensor dx = softmax_rows(nn.parents[0]->val);
        for (std::size_t i = 0; i < n; ++i) {
            dx(i, static_cast<std::size_t>(targets[i])) -= 1.0;
        }
        accumulate(*nn.parents[0], scale(dx, g));
    });
}

// Scalar weighted sum: sum(w .* x). Handy as a surrogate loss in gradient checks.
inline Value weighted_sum(const Value& x, const Tensor& w) {
    require_same_shape(x->val, w, "weighted_sum");
    return make_op(Tensor::scalar(dot_flat(x->val, w)), {x}, [w](const Node& n) {
        accumulate(*n.parents[0], scale(w, n.grad.at(0)));
    });
}

// Reverse pass from a scalar root. Parameter gradients accumulate into their
// Parameter::grad tensors; the caller owns zeroing them between steps.
inline void backward(const Value& root, double seed_grad = 1.0) {
    if (root->val.size() != 1) throw ValidationError("backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* cur = stack.back().first;
        std::size_t idx = stack.back().second;
        if (idx < cur->parents.size()) {
            ++stack.back().second;
            Node* p = cur->parents[idx].get();
            if (p->needs_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(cur);
            stack.pop_back();
        }
    }
    root->grad = Tensor::full(root->val.shape(), seed_grad);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->needs_grad || n->grad.empty()) continue;
        if (n->backprop) n->backprop(*n);
        if (n->param) add_in_place(n->param->grad, n->grad);
    }
}

}  // namespace corefsum
