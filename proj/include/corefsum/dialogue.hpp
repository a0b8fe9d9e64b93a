#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "corefsum/errors.hpp"

namespace corefsum {

struct Turn {
    std::string speaker;  // display name, no newlines
    std::string text;     // utterance body, may be empty
};

struct Dialogue {
    std::string id;
    std::vector<Turn> turns;
};

// Inclusive token span [start, end] over a flattened token sequence.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const Span&, const Span&) = default;
    friend auto operator<=>(const Span&, const Span&) = default;
};

// First sub-word token of a mention; with word-level tokens this is simply
// the span start.
inline std::size_t first_token_index(const Span& span) { return span.start; }

inline std::vector<std::string> split_whitespace(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// Multi-word speaker names collapse into one underscore-joined token so a
// turn's speaker always occupies exactly one position.
inline std::string speaker_token(const std::string& speaker) {
    std::vector<std::string> parts = split_whitespace(speaker);
    std::string joined;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) joined += "_";
        joined += parts[i];
    }
    return joined;
}

struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<std::size_t> turn_offsets;       // strictly increasing
    std::vector<std::size_t> speaker_positions;  // == turn_offsets per turn

    std::size_t size() const { return tokens.size(); }
};

// Flattens a dialogue as "Speaker : words..." per turn with whitespace
// tokenization; punctuation stays attached to its word.
inline TokenSequence flatten_dialogue(const Dialogue& d) {
    if (d.turns.empty()) throw ValidationError("empty dialogue");
    TokenSequence ts;
    for (const Turn& turn : d.turns) {
        if (turn.speaker.empty() || speaker_token(turn.speaker).empty()) {
            throw ValidationError("dialogue " + d.id + ": turn has empty speaker");
        }
        if (turn.speaker.find('\n') != std::string::npos) {
            throw ValidationError("dialogue " + d.id + ": speaker contains newline");
        }
        ts.turn_offsets.push_back(ts.tokens.size());
        ts.speaker_positions.push_back(ts.tokens.size());
        ts.tokens.push_back(speaker_token(turn.speaker));
        ts.tokens.push_back(":");
        for (std::string& w : split_whitespace(turn.text)) ts.tokens.push_back(std::move(w));
    }
    return ts;
}

// Inverse of flatten_dialogue for whitespace-normalized text: one
// "Speaker: words" line per turn, underscores in the speaker token mapped
// back to spaces.
inline std::vector<std::string> token_sequence_lines(const TokenSequence& ts) {
    std::vector<std::string> lines;
    for (std::size_t k = 0; k < ts.turn_offsets.size(); ++k) {
        const std::size_t begin = ts.turn_offsets[k];
        const std::size_t end =
            (k + 1 < ts.turn_offsets.size()) ? ts.turn_offsets[k + 1] : ts.tokens.size();
        std::string speaker = ts.tokens[begin];
        std::replace(speaker.begin(), speaker.end(), '_', ' ');
        std::string line = speaker + ":";
        for (std::size_t i = begin + 2; i < end; ++i) line += " " + ts.tokens[i];
        lines.push_back(std::move(line));
    }
    return lines;
}

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocabulary() {
        for (const char* tok : {"<pad>", "<bos>", "<eos>", "<unk>"}) add_token(tok);
    }

    int add_token(const std::string& tok) {
        auto it = id_of_.find(tok);
        if (it != id_of_.end()) return it->second;
        const int id = static_cast<int>(token_of_.size());
        id_of_.emplace(tok, id);
        token_of_.push_back(tok);
        return id;
    }

    int encode(const std::string& tok) const {
        auto it = id_of_.find(tok);
        return it == id_of_.end() ? kUnk : it->second;
    }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) ids.push_back(encode(t));
        return ids;
    }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= token_of_.size()) {
            throw ValidationError("vocabulary: id out of range");
        }
        return token_of_[static_cast<std::size_t>(id)];
    }

    std::size_t size() const { return token_of_.size(); }

    // Non-reserved tokens in id order, e.g. for checkpoint serialization.
    std::vector<std::string> payload_tokens() const {
        return std::vector<std::string>(token_of_.begin() + 4, token_of_.end());
    }

    // FNV-1a over tokens in id order; identifies the id assignment.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (const std::string& tok : token_of_) {
            for (unsigned char c : tok) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            h ^= 0x1F;  // token separator
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    std::map<std::string, int> id_of_;
    std::vector<std::string> token_of_;
};

// Frequency-thresholded vocabulary with deterministic id assignment:
// descending frequency, ties broken lexicographically. Corpus occurrences of
// the reserved token strings keep their reserved ids.
inline Vocabulary build_vocabulary(const std::vector<TokenSequence>& corpus,
                                   std::size_t min_count = 1) {
    if (min_count < 1) throw ValidationError("build_vocabulary: min_count must be >= 1");
    std::map<std::string, std::size_t> freq;
    for (const TokenSequence& ts : corpus) {
        for (const std::string& tok : ts.tokens) ++freq[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, count] : entries) {
        if (count >= min_count) v.add_token(tok);
    }
    return v;
}

}  // namespace corefsum
