#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "corefsum/autodiff.hpp"
#include "corefsum/coref.hpp"
#include "corefsum/coref_matrix.hpp"
#include "corefsum/rng.hpp"

namespace corefsum {

// ---------------------------------------------------------------------------
// Coreference graph encoding (CGE) layer
// ---------------------------------------------------------------------------

struct CgeLayerParams {
    Parameter w0, b0, w1, b1, w2, b2;

    static CgeLayerParams init(const std::string& prefix, std::size_t d, RngState& rng) {
        CgeLayerParams p;
        p.w0 = make_uniform_parameter(prefix + ".w0", {d, d}, rng);
        p.b0 = make_uniform_parameter(prefix + ".b0", {d}, rng);
        p.w1 = make_uniform_parameter(prefix + ".w1", {d, d}, rng);
        p.b1 = make_uniform_parameter(prefix + ".b1", {d}, rng);
        p.w2 = make_uniform_parameter(prefix + ".w2", {d, d}, rng);
        p.b2 = make_uniform_parameter(prefix + ".b2", {d}, rng);
        return p;
    }

    std::vector<Parameter*> params() { return {&w0, &b0, &w1, &b1, &w2, &b2}; }
};

// Scalar mixing weight between contextual and coreference-aware states,
// clamped to [0, 1] after every optimizer step.
struct FusionWeight {
    Parameter lambda;
    bool trainable = true;

    static FusionWeight init(const std::string& name, double value, bool trainable) {
        FusionWeight f;
        f.lambda = Parameter(name, Tensor::scalar(value));
        f.trainable = trainable;
        return f;
    }

    double value() const { return lambda.value.at(0); }

    void clamp() {
        double& v = lambda.value.at(0);
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
    }
};

// Row-normalized neighborhood matrix of the coreference graph. Isolated
// nodes fall back to a self edge so the mean in the aggregation step is
// always defined.
inline Tensor neighbor_mean_matrix(const CorefGraph& g) {
    Tensor m({g.n, g.n});
    for (std::size_t i = 0; i < g.n; ++i) {
        std::size_t degree = 0;
        for (std::size_t j = 0; j < g.n; ++j) degree += g.edge(i, j) ? 1 : 0;
        if (degree == 0) {
            m(i, i) = 1.0;
        } else {
            const double w = 1.0 / static_cast<double>(degree);
            for (std::size_t j = 0; j < g.n; ++j) {
                if (g.edge(i, j)) m(i, j) = w;
            }
        }
    }
    return m;
}

// One CGE layer:
//   u = W1 ReLU(W0 h + b0) + b1
//   v = LayerNorm(h + Dropout(u))
//   w = ReLU(mean over neighbors of W2 v + b2)
//   h' = LayerNorm(Dropout(w) + v)
inline Value cge_forward(const Value& h, const CorefGraph& g, CgeLayerParams& p, RngState& rng,
                         bool training, double dropout_p = 0.1) {
    if (h->val.ndim() != 2 || h->val.shape()[0] != g.n) {
        throw ValidationError("cge_forward: hidden state rows " + h->val.shape_str() +
                              " do not match graph size " + std::to_string(g.n));
    }
    Value u = linear(relu(linear(h, p.w0, p.b0)), p.w1, p.b1);
    Value v = layer_norm_plain(add(h, dropout(u, dropout_p, rng, training)));
    Value agg = matmul_const_left(neighbor_mean_matrix(g), matmul(v, leaf(p.w2)));
    Value w = relu(add_rows(agg, leaf(p.b2)));
    return layer_norm_plain(add(dropout(w, dropout_p, rng, training), v));
}

// Stacked CGE layers followed by the lambda mix with the contextual states:
// returns lambda * H + (1 - lambda) * H^G.
inline Value cge_stack(const Value& h, const CorefGraph& g, std::vector<CgeLayerParams>& layers,
                       FusionWeight& fusion, RngState& rng, bool training,
                       double dropout_p = 0.1) {
    if (layers.empty()) throw ValidationError("cge_stack: needs at least one layer");
    Value hg = h;
    for (CgeLayerParams& layer : layers) {
        hg = cge_forward(hg, g, layer, rng, training, dropout_p);
    }
    Value lam = fusion.trainable ? leaf(fusion.lambda) : constant(fusion.lambda.value);
    return convex_mix(h, hg, lam);
}

// ---------------------------------------------------------------------------
// Coreference-guided attention
// ---------------------------------------------------------------------------

// For each token in a cluster, mixes its state with the uniform mean over the
// cluster's mention first tokens: h_i' = lambda h_i + (1 - lambda) a_i.
// Tokens outside every cluster pass through bitwise unchanged.
inline Value coref_attention_update(const Value& h, const CorefAnnotation& a,
                                    FusionWeight& fusion) {
    const std::size_t n = h->val.shape()[0];
    const std::size_t d = h->val.shape()[1];
    validate_annotation(a, n);
    const auto sets = cluster_first_token_sets(a);
    require_disjoint_first_tokens(sets, a.dialogue_id);
    if (sets.empty()) return h;

    Value lam_node = fusion.trainable ? leaf(fusion.lambda) : constant(fusion.lambda.value);
    const double lam = lam_node->val.at(0);

    Tensor out = h->val;
    auto means = std::make_shared<std::vector<Tensor>>();
    for (const auto& s : sets) {
        Tensor mean({d});
        for (std::size_t i : s) {
            for (std::size_t j = 0; j < d; ++j) mean.at(j) += h->val(i, j);
        }
        const double w = 1.0 / static_cast<double>(s.size());
        for (std::size_t j = 0; j < d; ++j) mean.at(j) *= w;
        if (lam != 1.0) {  // lambda = 1 leaves every row bitwise unchanged
            for (std::size_t i : s) {
                for (std::size_t j = 0; j < d; ++j) {
                    out(i, j) = lam * h->val(i, j) + (1.0 - lam) * mean.at(j);
                }
            }
        }
        means->push_back(std::move(mean));
    }

    return make_op(std::move(out), {h, lam_node}, [sets, means, lam, d](const Node& node) {
        const Node& hp = *node.parents[0];
        Node& lp = *node.parents[1];
        Tensor dh = node.grad;  // identity rows pass gradients straight through
        double dlam = 0.0;
        for (std::size_t si = 0; si < sets.size(); ++si) {
            const auto& s = sets[si];
            const double w = 1.0 / static_cast<double>(s.size());
            Tensor gsum({d});
            for (std::size_t i : s) {
                for (std::size_t j = 0; j < d; ++j) gsum.at(j) += node.grad(i, j);
            }
            for (std::size_t i : s) {
                for (std::size_t j = 0; j < d; ++j) {
                    dh(i, j) = lam * node.grad(i, j) + (1.0 - lam) * w * gsum.at(j);
                }
                if (lp.needs_grad) {
                    for (std::size_t j = 0; j < d; ++j) {
                        dlam += node.grad(i, j) * (hp.val(i, j) - (*means)[si].at(j));
                    }
                }
            }
        }
        accumulate(*node.parents[0], dh);
        if (lp.needs_grad) accumulate(lp, Tensor::scalar(dlam));
    });
}

// ---------------------------------------------------------------------------
// Multi-head self-attention with optional head replacement
// ---------------------------------------------------------------------------

struct MhaParams {
    std::size_t n_heads = 0;
    std::size_t d_k = 0;
    std::vector<Parameter> wq, bq, wk, bk, wv, bv;  // per head
    Parameter wo, bo;

    static MhaParams init(const std::string& prefix, std::size_t d, std::size_t n_heads,
                          RngState& rng) {
        if (n_heads == 0 || d % n_heads != 0) {
            throw ValidationError("mha: hidden size must be divisible by head count");
        }
        MhaParams p;
        p.n_heads = n_heads;
        p.d_k = d / n_heads;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            p.wq.push_back(make_uniform_parameter(hp + ".wq", {d, p.d_k}, rng));
            p.bq.push_back(make_uniform_parameter(hp + ".bq", {p.d_k}, rng));
            p.wk.push_back(make_uniform_parameter(hp + ".wk", {d, p.d_k}, rng));
            p.bk.push_back(make_uniform_parameter(hp + ".bk", {p.d_k}, rng));
            p.wv.push_back(make_uniform_parameter(hp + ".wv", {d, p.d_k}, rng));
            p.bv.push_back(make_uniform_parameter(hp + ".bv", {p.d_k}, rng));
        }
        p.wo = make_uniform_parameter(prefix + ".wo", {d, d}, rng);
        p.bo = make_uniform_parameter(prefix + ".bo", {d}, rng);
        return p;
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (std::size_t h = 0; h < n_heads; ++h) {
            out.push_back(&wq[h]);
            out.push_back(&bq[h]);
            out.push_back(&wk[h]);
            out.push_back(&bk[h]);
            out.push_back(&wv[h]);
            out.push_back(&bv[h]);
        }
        out.push_back(&wo);
        out.push_back(&bo);
        return out;
    }
};

using HeadReplacement = std::map<std::size_t, const CorefAttentionMatrix*>;

// Scaled dot-product attention per head, concatenated and projected. Replaced
// heads substitute their softmax weights with the coreference attention
// matrix; their value projection stays in place and keeps receiving gradient.
// capture_maps, when given, receives each head's effective attention weights.
inline Value multi_head_attention(const Value& xq, const Value& xkv, MhaParams& p,
                                  const Tensor* additive_mask = nullptr,
                                  const HeadReplacement& replace = {},
                                  std::vector<Tensor>* capture_maps = nullptr) {
    const std::size_t nq = xq->val.shape()[0];
    const std::size_t nk = xkv->val.shape()[0];
    for (const auto& [head, ac] : replace) {
        if (head >= p.n_heads) {
            throw ValidationError("head replacement: head index " + std::to_string(head) +
                                  " out of range");
        }
        if (ac->n != nq || nq != nk) {
            throw ValidationError("head replacement: A^c size " + std::to_string(ac->n) +
                                  " does not match sequence length " + std::to_string(nq));
        }
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    std::vector<Value> heads;
    heads.reserve(p.n_heads);
    for (std::size_t h = 0; h < p.n_heads; ++h) {
        Value vh = linear(xkv, p.wv[h], p.bv[h]);
        auto it = replace.find(h);
        if (it != replace.end()) {
            if (capture_maps) capture_maps->push_back(it->second->weights);
            heads.push_back(matmul_const_left(it->second->weights, vh));
            continue;
        }
        Value qh = linear(xq, p.wq[h], p.bq[h]);
        Value kh = linear(xkv, p.wk[h], p.bk[h]);
        Value scores = scale(matmul_nt(qh, kh), inv_sqrt_dk);
        if (additive_mask) scores = add_const(scores, *additive_mask);
        Value weights = softmax_rows(scores);
        if (capture_maps) capture_maps->push_back(weights->val);
        heads.push_back(matmul(weights, vh));
    }
    return add_rows(matmul(concat_cols(heads), leaf(p.wo)), leaf(p.bo));
}

// Self-attention entry point used by the encoder.
inline Value mha_forward(const Value& x, MhaParams& p, const HeadReplacement& replace = {},
                         std::vector<Tensor>* capture_maps = nullptr) {
    return multi_head_attention(x, x, p, nullptr, replace, capture_maps);
}

// ---------------------------------------------------------------------------
// Attention head probing
// ---------------------------------------------------------------------------

struct HeadSelection {
    std::vector<std::pair<std::size_t, std::size_t>> entries;  // (layer, head)

    void validate(std::size_t n_layers, std::size_t n_heads) const {
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& e : entries) {
            if (e.first >= n_layers || e.second >= n_heads) {
                throw ValidationError("head selection (" + std::to_string(e.first) + "," +
                                      std::to_string(e.second) + ") out of range");
            }
            if (!seen.insert(e).second) {
                throw ValidationError("head selection contains duplicates");
            }
        }
    }
};

struct ProbeLayerReport {
    std::size_t layer = 0;
    std::vector<double> ratios;  // win ratio per head, sums to 1
    std::size_t selected = 0;    // argmax ratio, ties to the lowest head
};

using ProbeReport = std::vector<ProbeLayerReport>;

inline double cosine_flat(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "cosine_flat");
    const double na = norm_flat(a), nb = norm_flat(b);
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine_flat: zero-norm matrix");
    return dot_flat(a, b) / (na * nb);
}

// Head with the highest cosine similarity to A^c; ties go to the lowest head
// index.
inline std::size_t probe_layer_winner(const std::vector<Tensor>& head_maps,
                                      const CorefAttentionMatrix& ac,
                                      double* best_cosine = nullptr) {
    if (head_maps.empty()) throw ValidationError("probe: no attention maps");
    std::size_t best = 0;
    double best_cos = cosine_flat(head_maps[0], ac.weights);
    for (std::size_t h = 1; h < head_maps.size(); ++h) {
        const double c = cosine_flat(head_maps[h], ac.weights);
        if (c > best_cos) {
            best_cos = c;
            best = h;
        }
    }
    if (best_cosine) *best_cosine = best_cos;
    return best;
}

// Per-layer winners for one sample's attention maps (maps[layer][head]).
inline std::vector<std::size_t> probe_heads(const std::vector<std::vector<Tensor>>& maps,
                                            const CorefAttentionMatrix& ac) {
    std::vector<std::size_t> winners;
    winners.reserve(maps.size());
    for (const auto& layer_maps : maps) winners.push_back(probe_layer_winner(layer_maps, ac));
    return winners;
}

// Aggregates per-sample winners into win ratios; each sample awards exactly
// one win per layer.
class ProbeAccumulator {
public:
    ProbeAccumulator(std::size_t n_layers, std::size_t n_heads)
        : counts_(n_layers, std::vector<std::size_t>(n_heads, 0)) {}

    void add_sample(const std::vector<std::size_t>& winners) {
        if (winners.size() != counts_.size()) {
            throw ValidationError("probe accumulator: layer count mismatch");
        }
        for (std::size_t l = 0; l < winners.size(); ++l) ++counts_[l][winners[l]];
        ++samples_;
    }

    std::size_t samples() const { return samples_; }

    ProbeReport report() const {
        if (samples_ == 0) throw ValidationError("probe accumulator: no samples");
        ProbeReport out;
        for (std::size_t l = 0; l < counts_.size(); ++l) {
            ProbeLayerReport r;
            r.layer = l;
            r.ratios.resize(counts_[l].size());
            for (std::size_t h = 0; h < counts_[l].size(); ++h) {
                r.ratios[h] = static_cast<double>(counts_[l][h]) / static_cast<double>(samples_);
            }
            r.selected = 0;
            for (std::size_t h = 1; h < r.ratios.size(); ++h) {
                if (r.ratios[h] > r.ratios[r.selected]) r.selected = h;
            }
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    std::vector<std::vector<std::size_t>> counts_;
    std::size_t samples_ = 0;
};

}  // namespace corefsum
