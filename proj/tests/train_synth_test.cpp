#include <gtest/gtest.h>

#include <set>

#include "corefsum/checkpoint.hpp"
#include "corefsum/io.hpp"
#include "corefsum/synthetic.hpp"
#include "corefsum/train.hpp"

using namespace corefsum;

namespace {

ModelConfig small_model(Variant variant, std::uint64_t seed) {
    ModelConfig mc;
    mc.hidden = 16;
    mc.enc_layers = 1;
    mc.dec_layers = 1;
    mc.heads = 2;
    mc.ffn = 24;
    mc.max_len = 128;
    mc.dropout = 0.1;
    mc.seed = seed;
    mc.variant = variant;
    mc.cge_depth = 1;
    if (variant == Variant::headrep) mc.head_selection.entries = {{0, 0}};
    return mc;
}

}  // namespace

TEST(Synthetic, SingleSampleContract) {
    RngState rng(1);
    const auto samples = generate_samples(1, rng, "s-");
    ASSERT_EQ(samples.size(), 1u);
    const SyntheticSample& s = samples[0];

    bool has_multi_mention_cluster = false;
    for (const auto& c : s.coref.clusters) has_multi_mention_cluster |= c.size() >= 2;
    EXPECT_TRUE(has_multi_mention_cluster);
    EXPECT_NE(s.summary.find(s.actor), std::string::npos);

    // The actor appears in the dialogue text, alongside the distractor.
    const TokenSequence ts = flatten_dialogue(s.dialogue);
    const std::set<std::string> tokens(ts.tokens.begin(), ts.tokens.end());
    EXPECT_TRUE(tokens.count(s.actor));
    EXPECT_TRUE(tokens.count(s.distractor));
    validate_annotation(s.coref, ts.size());
}

TEST(Synthetic, DeterministicAcrossRuns) {
    const SyntheticCorpus a = generate_synthetic(50, 5, 5, 99);
    const SyntheticCorpus b = generate_synthetic(50, 5, 5, 99);
    ASSERT_EQ(a.train.size(), b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        EXPECT_EQ(dialogue_to_json_line(a.train[i].dialogue),
                  dialogue_to_json_line(b.train[i].dialogue));
        EXPECT_EQ(annotation_to_json_line(a.train[i].coref),
                  annotation_to_json_line(b.train[i].coref));
        EXPECT_EQ(a.train[i].summary, b.train[i].summary);
    }
}

TEST(Synthetic, SpansValidateAndClusterLinksPronoun) {
    RngState rng(7);
    const auto samples = generate_samples(200, rng, "s-");
    double turn_sum = 0.0, speaker_sum = 0.0;
    for (const SyntheticSample& s : samples) {
        const TokenSequence ts = flatten_dialogue(s.dialogue);
        validate_annotation(s.coref, ts.size());
        turn_sum += static_cast<double>(s.dialogue.turns.size());
        std::set<std::string> speakers;
        for (const Turn& t : s.dialogue.turns) speakers.insert(t.speaker);
        speaker_sum += static_cast<double>(speakers.size());

        // One cluster must link the actor mention to a pronoun token.
        bool found = false;
        for (const auto& c : s.coref.clusters) {
            bool has_actor = false, has_pronoun = false;
            for (const Span& sp : c) {
                const std::string& tok = ts.tokens[sp.start];
                if (tok == s.actor) has_actor = true;
                if (tok == "he" || tok == "she") has_pronoun = true;
            }
            found |= has_actor && has_pronoun;
        }
        EXPECT_TRUE(found) << s.dialogue.id;
    }
    // Loose scale targets: ~2.4 speakers, ~10 turns.
    EXPECT_NEAR(speaker_sum / 200.0, 2.4, 0.3);
    EXPECT_GT(turn_sum / 200.0, 8.0);
    EXPECT_LT(turn_sum / 200.0, 13.0);
}

TEST(Train, RejectsBadConfigs) {
    TrainingConfig tc;
    tc.epochs = 0;
    EXPECT_THROW(tc.validate(), ValidationError);
    TrainingConfig tc2;
    tc2.lr_backbone = 0.0;
    EXPECT_THROW(tc2.validate(), ValidationError);
    TrainingConfig tc3;
    tc3.selection_metric = "rouge9";
    EXPECT_THROW(tc3.validate(), ValidationError);

    TrainingConfig ok;
    EXPECT_THROW(train({}, {}, small_model(Variant::base, 1), ok), ValidationError);
}

TEST(Train, DeterministicCheckpointsByteForByte) {
    const SyntheticCorpus corpus = generate_synthetic(4, 2, 0, 31);
    TrainingConfig tc;
    tc.epochs = 2;
    tc.batch_size = 2;
    tc.lr_fusion = 1e-3;
    tc.lr_backbone = 1e-3;

    TrainResult a = train(to_labeled(corpus.train), to_labeled(corpus.val),
                          small_model(Variant::attn, 5), tc);
    TrainResult b = train(to_labeled(corpus.train), to_labeled(corpus.val),
                          small_model(Variant::attn, 5), tc);
    EXPECT_EQ(checkpoint_to_json(a.model), checkpoint_to_json(b.model));
    EXPECT_EQ(a.stats.epoch_loss, b.stats.epoch_loss);
    EXPECT_EQ(a.stats.val_rouge2_f, b.stats.val_rouge2_f);

    TrainResult c = train(to_labeled(corpus.train), to_labeled(corpus.val),
                          small_model(Variant::attn, 6), tc);
    EXPECT_NE(checkpoint_to_json(a.model), checkpoint_to_json(c.model));
}

TEST(Train, LossDecreasesOnTinyCorpus) {
    const SyntheticCorpus corpus = generate_synthetic(4, 0, 0, 77);
    TrainingConfig tc;
    tc.epochs = 8;
    tc.batch_size = 4;
    tc.lr_fusion = 3e-3;
    tc.lr_backbone = 3e-3;
    ModelConfig mc = small_model(Variant::base, 3);
    mc.dropout = 0.0;
    TrainResult r = train(to_labeled(corpus.train), {}, mc, tc);
    EXPECT_EQ(r.stats.best_epoch, 8u);  // no validation split: last epoch kept
    EXPECT_LT(r.stats.epoch_loss.back(), r.stats.epoch_loss.front());
}

TEST(Train, LambdaStaysClamped) {
    const SyntheticCorpus corpus = generate_synthetic(3, 0, 0, 13);
    TrainingConfig tc;
    tc.epochs = 3;
    tc.batch_size = 1;
    tc.lr_fusion = 0.8;  // force big lambda steps
    tc.lr_backbone = 1e-3;
    TrainResult r = train(to_labeled(corpus.train), {}, small_model(Variant::attn, 9), tc);
    EXPECT_GE(r.model.fusion.value(), 0.0);
    EXPECT_LE(r.model.fusion.value(), 1.0);
}

TEST(Train, NonFiniteLossAborts) {
    const SyntheticCorpus corpus = generate_synthetic(2, 0, 0, 17);
    TrainingConfig tc;
    tc.epochs = 4;
    tc.batch_size = 1;
    tc.lr_fusion = 1e200;  // numeric blow-up on purpose
    tc.lr_backbone = 1e200;
    try {
        train(to_labeled(corpus.train), {}, small_model(Variant::base, 11), tc);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
}
