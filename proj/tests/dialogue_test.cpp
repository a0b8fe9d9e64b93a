#include <gtest/gtest.h>

#include "corefsum/dialogue.hpp"
#include "corefsum/rng.hpp"

using namespace corefsum;

TEST(FlattenDialogue, SpeakerColonLayout) {
    Dialogue d{"d1", {{"Paul", "Do you know them?"}}};
    const TokenSequence ts = flatten_dialogue(d);
    const std::vector<std::string> expected{"Paul", ":", "Do", "you", "know", "them?"};
    EXPECT_EQ(ts.tokens, expected);
    EXPECT_EQ(ts.speaker_positions, (std::vector<std::size_t>{0}));
    EXPECT_EQ(ts.turn_offsets, (std::vector<std::size_t>{0}));
}

TEST(FlattenDialogue, EmptyTextTurn) {
    Dialogue d{"d2", {{"A", ""}, {"B", "hi"}}};
    const TokenSequence ts = flatten_dialogue(d);
    const std::vector<std::string> expected{"A", ":", "B", ":", "hi"};
    EXPECT_EQ(ts.tokens, expected);
    EXPECT_EQ(ts.turn_offsets, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(ts.speaker_positions, ts.turn_offsets);
}

TEST(FlattenDialogue, EmptyDialogueRejected) {
    Dialogue d{"d3", {}};
    try {
        flatten_dialogue(d);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "empty dialogue");
    }
}

TEST(FlattenDialogue, InvalidSpeakersRejected) {
    EXPECT_THROW(flatten_dialogue(Dialogue{"d", {{"", "hi"}}}), ValidationError);
    EXPECT_THROW(flatten_dialogue(Dialogue{"d", {{"A\nB", "hi"}}}), ValidationError);
    EXPECT_THROW(flatten_dialogue(Dialogue{"d", {{"   ", "hi"}}}), ValidationError);
}

TEST(FlattenDialogue, MultiWordSpeakerCollapses) {
    Dialogue d{"d4", {{"Derek McCarthy", "ok"}}};
    const TokenSequence ts = flatten_dialogue(d);
    EXPECT_EQ(ts.tokens[0], "Derek_McCarthy");
    EXPECT_EQ(ts.speaker_positions, (std::vector<std::size_t>{0}));
}

TEST(FlattenDialogue, Deterministic) {
    Dialogue d{"d5", {{"A", "x y"}, {"B", "z"}}};
    EXPECT_EQ(flatten_dialogue(d).tokens, flatten_dialogue(d).tokens);
}

TEST(FlattenDialogue, RoundTripLines) {
    RngState rng(7);
    const std::vector<std::string> names{"Amanda", "Paul", "Mary Jane"};
    const std::vector<std::string> words{"hi", "there!", "ok.", "sure,", "why?"};
    for (int trial = 0; trial < 50; ++trial) {
        Dialogue d;
        d.id = "t" + std::to_string(trial);
        const std::size_t turns = 1 + rng.next_below(5);
        std::vector<std::string> want_lines;
        for (std::size_t t = 0; t < turns; ++t) {
            Turn turn;
            turn.speaker = names[rng.next_below(names.size())];
            const std::size_t n_words = rng.next_below(4);
            for (std::size_t w = 0; w < n_words; ++w) {
                if (w) turn.text += " ";
                turn.text += words[rng.next_below(words.size())];
            }
            want_lines.push_back(turn.speaker + ":" +
                                 (turn.text.empty() ? "" : " " + turn.text));
            d.turns.push_back(std::move(turn));
        }
        EXPECT_EQ(token_sequence_lines(flatten_dialogue(d)), want_lines);
    }
}

TEST(Vocabulary, FrequencyOrderedIds) {
    TokenSequence ts;
    ts.tokens = {"a", "b", "a"};
    const Vocabulary v = build_vocabulary({ts}, 1);
    EXPECT_EQ(v.encode("a"), 4);
    EXPECT_EQ(v.encode("b"), 5);
}

TEST(Vocabulary, MinCountFiltersToUnk) {
    TokenSequence ts;
    ts.tokens = {"a", "b", "a"};
    const Vocabulary v = build_vocabulary({ts}, 2);
    EXPECT_EQ(v.encode("a"), 4);
    EXPECT_EQ(v.encode("b"), Vocabulary::kUnk);
    EXPECT_EQ(v.size(), 5u);
}

TEST(Vocabulary, EmptyCorpusReservedOnly) {
    const Vocabulary v = build_vocabulary({}, 1);
    EXPECT_EQ(v.size(), 4u);
    EXPECT_EQ(v.encode("<pad>"), Vocabulary::kPad);
    EXPECT_EQ(v.encode("<bos>"), Vocabulary::kBos);
    EXPECT_EQ(v.encode("<eos>"), Vocabulary::kEos);
    EXPECT_EQ(v.encode("<unk>"), Vocabulary::kUnk);
    EXPECT_EQ(v.encode("anything"), Vocabulary::kUnk);
}

TEST(Vocabulary, TieBreaksLexicographically) {
    TokenSequence ts;
    ts.tokens = {"zeta", "beta", "zeta", "beta", "alpha"};
    const Vocabulary v = build_vocabulary({ts}, 1);
    EXPECT_EQ(v.encode("beta"), 4);  // freq 2, before zeta
    EXPECT_EQ(v.encode("zeta"), 5);
    EXPECT_EQ(v.encode("alpha"), 6);
}

TEST(Vocabulary, StableAcrossRuns) {
    TokenSequence ts;
    ts.tokens = {"x", "y", "x", "z"};
    const Vocabulary a = build_vocabulary({ts}, 1);
    const Vocabulary b = build_vocabulary({ts}, 1);
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.payload_tokens(), b.payload_tokens());
}

TEST(SpanOps, FirstTokenIndex) {
    EXPECT_EQ(first_token_index(Span{3, 5}), 3u);
    EXPECT_EQ(first_token_index(Span{0, 0}), 0u);
    EXPECT_EQ(first_token_index(Span{7, 7}), 7u);
}
