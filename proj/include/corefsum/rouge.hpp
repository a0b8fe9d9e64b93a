#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "corefsum/coref.hpp"  // lowercase()
#include "corefsum/dialogue.hpp"
#include "corefsum/errors.hpp"

namespace corefsum {

struct RougeScore {
    double f = 0.0;
    double p = 0.0;
    double r = 0.0;
};

inline RougeScore make_rouge(double p, double r) {
    RougeScore s;
    s.p = p;
    s.r = r;
    s.f = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    return s;
}

inline std::vector<std::string> lowercase_tokens(const std::vector<std::string>& toks) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(lowercase(t));
    return out;
}

// Clipped n-gram overlap ROUGE-n; tokens are lowercased before matching.
inline RougeScore rouge_n(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref, std::size_t n) {
    if (n < 1) throw ValidationError("rouge_n: n must be >= 1");
    const auto h = lowercase_tokens(hyp);
    const auto r = lowercase_tokens(ref);

    auto ngrams = [n](const std::vector<std::string>& toks) {
        std::map<std::string, std::size_t> counts;
        if (toks.size() < n) return counts;
        for (std::size_t i = 0; i + n <= toks.size(); ++i) {
            std::string key;
            for (std::size_t j = 0; j < n; ++j) {
                if (j) key += '\x1f';
                key += toks[i + j];
            }
            ++counts[key];
        }
        return counts;
    };

    const auto hc = ngrams(h);
    const auto rc = ngrams(r);
    std::size_t h_total = 0, r_total = 0, overlap = 0;
    for (const auto& [k, c] : hc) h_total += c;
    for (const auto& [k, c] : rc) r_total += c;
    for (const auto& [k, c] : hc) {
        auto it = rc.find(k);
        if (it != rc.end()) overlap += std::min(c, it->second);
    }
    const double prec = h_total ? static_cast<double>(overlap) / static_cast<double>(h_total) : 0.0;
    const double rec = r_total ? static_cast<double>(overlap) / static_cast<double>(r_total) : 0.0;
    return make_rouge(prec, rec);
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Sentence-level longest-common-subsequence ROUGE-L.
inline RougeScore rouge_l(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref) {
    const auto h = lowercase_tokens(hyp);
    const auto r = lowercase_tokens(ref);
    const std::size_t l = lcs_length(h, r);
    const double prec = h.empty() ? 0.0 : static_cast<double>(l) / static_cast<double>(h.size());
    const double rec = r.empty() ? 0.0 : static_cast<double>(l) / static_cast<double>(r.size());
    return make_rouge(prec, rec);
}

struct RougeReport {
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
};

using SummaryPair = std::pair<std::vector<std::string>, std::vector<std::string>>;  // hyp, ref

// Arithmetic mean of per-sample f, p and r for each metric.
inline RougeReport corpus_scores(const std::vector<SummaryPair>& pairs) {
    if (pairs.empty()) throw ValidationError("corpus_scores: no pairs");
    RougeReport report;
    auto accumulate_score = [](RougeScore& into, const RougeScore& s) {
        into.f += s.f;
        into.p += s.p;
        into.r += s.r;
    };
    for (const auto& [hyp, ref] : pairs) {
        accumulate_score(report.rouge1, rouge_n(hyp, ref, 1));
        accumulate_score(report.rouge2, rouge_n(hyp, ref, 2));
        accumulate_score(report.rougeL, rouge_l(hyp, ref));
    }
    const double n = static_cast<double>(pairs.size());
    for (RougeScore* s : {&report.rouge1, &report.rouge2, &report.rougeL}) {
        s->f /= n;
        s->p /= n;
        s->r /= n;
    }
    return report;
}

struct LengthStats {
    double mean = 0.0;
    double std_dev = 0.0;  // population standard deviation
};

inline LengthStats length_stats(const std::vector<std::string>& summaries) {
    if (summaries.empty()) throw ValidationError("length_stats: no summaries");
    std::vector<double> counts;
    counts.reserve(summaries.size());
    for (const auto& s : summaries) {
        counts.push_back(static_cast<double>(split_whitespace(s).size()));
    }
    LengthStats stats;
    for (double c : counts) stats.mean += c;
    stats.mean /= static_cast<double>(counts.size());
    double var = 0.0;
    for (double c : counts) var += (c - stats.mean) * (c - stats.mean);
    var /= static_cast<double>(counts.size());
    stats.std_dev = std::sqrt(var);
    return stats;
}

// "23.12 ± 12.20" style rendering used in the evaluation report.
inline std::string format_length_stats(const LengthStats& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", s.mean, s.std_dev);
    return std::string(buf);
}

}  // namespace corefsum
