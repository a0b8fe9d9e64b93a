#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "corefsum/dialogue.hpp"
#include "corefsum/errors.hpp"

namespace corefsum {

using Cluster = std::vector<Span>;  // spans sorted by start index

struct CorefAnnotation {
    std::string dialogue_id;
    std::vector<Cluster> clusters;
};

struct EnsembleInput {
    std::vector<CorefAnnotation> annotations;  // same dialogue, several resolvers
    std::size_t min_votes = 2;
};

inline void validate_annotation(const CorefAnnotation& a, std::size_t n) {
    for (const Cluster& c : a.clusters) {
        for (const Span& s : c) {
            if (s.start > s.end || s.end >= n) {
                throw ValidationError("annotation " + a.dialogue_id + ": span [" +
                                      std::to_string(s.start) + "," + std::to_string(s.end) +
                                      "] out of range for " + std::to_string(n) + " tokens");
            }
        }
    }
}

// Sorts spans within clusters, dedupes identical spans, drops empty clusters,
// and orders clusters by their earliest span.
inline CorefAnnotation canonicalize(CorefAnnotation a) {
    for (Cluster& c : a.clusters) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    a.clusters.erase(std::remove_if(a.clusters.begin(), a.clusters.end(),
                                    [](const Cluster& c) { return c.empty(); }),
                     a.clusters.end());
    std::sort(a.clusters.begin(), a.clusters.end(),
              [](const Cluster& x, const Cluster& y) { return x.front() < y.front(); });
    return a;
}

inline std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Mention text over the flattened sequence, space-joined and lowercased.
// Underscores normalize to spaces so speaker tokens compare against their
// in-text multi-word forms.
inline std::string mention_text(const TokenSequence& ts, const Span& s) {
    std::string out;
    for (std::size_t i = s.start; i <= s.end; ++i) {
        if (i > s.start) out += " ";
        out += ts.tokens[i];
    }
    std::replace(out.begin(), out.end(), '_', ' ');
    return lowercase(out);
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

// Mention-pair voting: a span pair co-clustered in at least min_votes input
// annotations is kept, and output clusters are the connected components of
// the kept pairs.
inline CorefAnnotation ensemble_merge(const EnsembleInput& input) {
    if (input.annotations.empty()) throw ValidationError("ensemble_merge: no annotations");
    const std::string& id = input.annotations.front().dialogue_id;
    for (const CorefAnnotation& a : input.annotations) {
        if (a.dialogue_id != id) {
            throw ValidationError("ensemble_merge: mismatched dialogue ids '" + id + "' vs '" +
                                  a.dialogue_id + "'");
        }
    }
    if (input.min_votes < 1 || input.min_votes > input.annotations.size()) {
        throw ValidationError("ensemble_merge: min_votes out of range");
    }

    // A pair votes once per annotation, however many clusters repeat it.
    std::map<std::pair<Span, Span>, std::size_t> votes;
    for (const CorefAnnotation& a : input.annotations) {
        std::set<std::pair<Span, Span>> pairs;
        for (const Cluster& c : a.clusters) {
            Cluster sorted = c;
            std::sort(sorted.begin(), sorted.end());
            sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                for (std::size_t j = i + 1; j < sorted.size(); ++j) {
                    pairs.insert({sorted[i], sorted[j]});
                }
            }
        }
        for (const auto& pair : pairs) ++votes[pair];
    }

    std::map<Span, std::size_t> index_of;
    std::vector<Span> spans;
    auto intern = [&](const Span& s) {
        auto it = index_of.find(s);
        if (it != index_of.end()) return it->second;
        const std::size_t idx = spans.size();
        index_of.emplace(s, idx);
        spans.push_back(s);
        return idx;
    };

    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& [pair, n] : votes) {
        if (n >= input.min_votes) kept.emplace_back(intern(pair.first), intern(pair.second));
    }

    UnionFind uf(spans.size());
    for (const auto& [a, b] : kept) uf.unite(a, b);

    std::map<std::size_t, Cluster> components;
    for (std::size_t i = 0; i < spans.size(); ++i) components[uf.find(i)].push_back(spans[i]);

    CorefAnnotation out;
    out.dialogue_id = id;
    for (auto& [root, cluster] : components) {
        if (cluster.size() >= 2) out.clusters.push_back(std::move(cluster));
    }
    return canonicalize(std::move(out));
}

// Adds uncovered speaker tokens to the cluster that already mentions the
// speaker by name. Turns are processed in order and added spans count as
// mentions for later turns of the same speaker.
inline CorefAnnotation assign_speakers(const CorefAnnotation& a, const Dialogue& d) {
    const TokenSequence ts = flatten_dialogue(d);
    validate_annotation(a, ts.size());
    CorefAnnotation out = a;
    for (std::size_t p : ts.speaker_positions) {
        bool covered = false;
        for (const Cluster& c : out.clusters) {
            for (const Span& s : c) {
                if (s.start <= p && p <= s.end) {
                    covered = true;
                    break;
                }
            }
            if (covered) break;
        }
        if (covered) continue;

        const std::string name = mention_text(ts, Span{p, p});
        std::size_t best_cluster = out.clusters.size();
        std::size_t best_distance = 0;
        for (std::size_t ci = 0; ci < out.clusters.size(); ++ci) {
            for (const Span& s : out.clusters[ci]) {
                if (mention_text(ts, s) != name) continue;
                const std::size_t dist = s.start > p ? s.start - p : p - s.start;
                if (best_cluster == out.clusters.size() || dist < best_distance) {
                    best_cluster = ci;
                    best_distance = dist;
                }
            }
        }
        if (best_cluster < out.clusters.size()) {
            Cluster& c = out.clusters[best_cluster];
            c.insert(std::upper_bound(c.begin(), c.end(), Span{p, p}), Span{p, p});
        }
    }
    return out;
}

namespace detail {
inline CorefAnnotation collect_merged(CorefAnnotation a, UnionFind& uf) {
    std::map<std::size_t, Cluster> merged;
    for (std::size_t ci = 0; ci < a.clusters.size(); ++ci) {
        Cluster& dst = merged[uf.find(ci)];
        dst.insert(dst.end(), a.clusters[ci].begin(), a.clusters[ci].end());
    }
    a.clusters.clear();
    for (auto& [root, cluster] : merged) a.clusters.push_back(std::move(cluster));
    return a;
}
}  // namespace detail

// Merges clusters that present the same chain: either they share an
// identical span, or each holds a single-token mention of the same speaker
// name.
inline CorefAnnotation merge_clusters_with_texts(
    const CorefAnnotation& a, const TokenSequence& ts,
    const std::set<std::string>& speaker_names) {
    CorefAnnotation out = a;
    if (out.clusters.size() < 2) return canonicalize(std::move(out));
    UnionFind uf(out.clusters.size());

    // Rule 1: shared identical span.
    std::map<Span, std::size_t> span_owner;
    for (std::size_t ci = 0; ci < out.clusters.size(); ++ci) {
        for (const Span& s : out.clusters[ci]) {
            auto [it, inserted] = span_owner.emplace(s, ci);
            if (!inserted) uf.unite(it->second, ci);
        }
    }

    // Rule 2: both contain a single-token mention of the same speaker name.
    std::map<std::string, std::size_t> name_owner;
    for (std::size_t ci = 0; ci < out.clusters.size(); ++ci) {
        for (const Span& s : out.clusters[ci]) {
            if (s.start != s.end) continue;
            const std::string text = mention_text(ts, s);
            if (!speaker_names.count(text)) continue;
            auto [it, inserted] = name_owner.emplace(text, ci);
            if (!inserted) uf.unite(it->second, ci);
        }
    }
    return canonicalize(detail::collect_merged(std::move(out), uf));
}

inline std::set<std::string> dialogue_speaker_names(const Dialogue& d) {
    std::set<std::string> names;
    for (const Turn& t : d.turns) {
        std::string n = speaker_token(t.speaker);
        std::replace(n.begin(), n.end(), '_', ' ');
        names.insert(lowercase(n));
    }
    return names;
}

inline CorefAnnotation merge_clusters(const CorefAnnotation& a, const Dialogue& d) {
    const TokenSequence ts = flatten_dialogue(d);
    validate_annotation(a, ts.size());
    return merge_clusters_with_texts(a, ts, dialogue_speaker_names(d));
}

inline CorefAnnotation drop_singletons(CorefAnnotation a) {
    a.clusters.erase(std::remove_if(a.clusters.begin(), a.clusters.end(),
                                    [](const Cluster& c) { return c.size() < 2; }),
                     a.clusters.end());
    return a;
}

// Full cleanup in order: ensemble voting, speaker reassignment, same-chain
// merging; singleton clusters are only dropped at the very end.
inline CorefAnnotation postprocess(const EnsembleInput& inputs, const Dialogue& d) {
    CorefAnnotation merged = ensemble_merge(inputs);
    merged = assign_speakers(merged, d);
    merged = merge_clusters(merged, d);
    return drop_singletons(std::move(merged));
}

}  // namespace corefsum
