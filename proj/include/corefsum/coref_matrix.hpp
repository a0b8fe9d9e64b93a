#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "corefsum/coref.hpp"
#include "corefsum/errors.hpp"
#include "corefsum/tensor.hpp"

namespace corefsum {

// Symmetric binary adjacency over token positions; an edge links the first
// tokens of two mentions adjacent in their cluster's start order.
struct CorefGraph {
    std::size_t n = 0;
    std::vector<std::uint8_t> adjacency;  // n*n, row-major

    bool edge(std::size_t i, std::size_t j) const { return adjacency[i * n + j] != 0; }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) c += edge(i, j) ? 1 : 0;
        }
        return c;
    }

    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j) {
            if (edge(i, j)) out.push_back(j);
        }
        return out;
    }
};

// Row-stochastic attention matrix: cluster rows carry uniform 1/|C| weight
// over the cluster's first-token indices, uncovered rows are identity rows.
struct CorefAttentionMatrix {
    std::size_t n = 0;
    Tensor weights;  // n x n

    double at(std::size_t i, std::size_t j) const { return weights(i, j); }
};

// First-token index of every mention, per cluster, sorted ascending.
// Duplicate first tokens within a cluster collapse to one index.
inline std::vector<std::vector<std::size_t>> cluster_first_token_sets(const CorefAnnotation& a) {
    std::vector<std::vector<std::size_t>> out;
    for (const Cluster& c : a.clusters) {
        std::vector<std::size_t> firsts;
        for (const Span& s : c) firsts.push_back(first_token_index(s));
        std::sort(firsts.begin(), firsts.end());
        firsts.erase(std::unique(firsts.begin(), firsts.end()), firsts.end());
        out.push_back(std::move(firsts));
    }
    return out;
}

// Ensures no first-token index belongs to two clusters; required by the
// attention matrix and by the fusion mechanisms.
inline void require_disjoint_first_tokens(const std::vector<std::vector<std::size_t>>& sets,
                                          const std::string& dialogue_id) {
    std::set<std::size_t> seen;
    for (const auto& s : sets) {
        for (std::size_t i : s) {
            if (!seen.insert(i).second) {
                throw ValidationError("overlapping clusters in " + dialogue_id +
                                      ": first token " + std::to_string(i) +
                                      " appears in two clusters");
            }
        }
    }
}

inline CorefGraph build_coref_graph(const CorefAnnotation& a, std::size_t n) {
    validate_annotation(a, n);
    CorefGraph g;
    g.n = n;
    g.adjacency.assign(n * n, 0);
    for (const Cluster& c : a.clusters) {
        Cluster sorted = c;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            const std::size_t i = first_token_index(sorted[k]);
            const std::size_t j = first_token_index(sorted[k + 1]);
            if (i == j) {
                throw ValidationError("degenerate cluster in " + a.dialogue_id +
                                      ": two mentions share first token " + std::to_string(i));
            }
            g.adjacency[i * n + j] = 1;
            g.adjacency[j * n + i] = 1;
        }
    }
    return g;
}

inline CorefAttentionMatrix build_coref_attention(const CorefAnnotation& a, std::size_t n) {
    validate_annotation(a, n);
    const auto sets = cluster_first_token_sets(a);
    require_disjoint_first_tokens(sets, a.dialogue_id);

    CorefAttentionMatrix m;
    m.n = n;
    m.weights = Tensor({n, n});
    std::vector<bool> covered(n, false);
    for (const auto& s : sets) {
        const double w = 1.0 / static_cast<double>(s.size());
        for (std::size_t i : s) {
            covered[i] = true;
            for (std::size_t j : s) m.weights(i, j) = w;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!covered[i]) m.weights(i, i) = 1.0;
    }
    return m;
}

}  // namespace corefsum
