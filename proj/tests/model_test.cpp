#include <gtest/gtest.h>

#include "corefsum/checkpoint.hpp"
#include "corefsum/gradcheck.hpp"
#include "corefsum/model.hpp"
#include "oracles.hpp"

using namespace corefsum;

namespace {

Vocabulary tiny_vocab() {
    Vocabulary v;
    for (const char* t : {"a", "b", "c", "d", "e", "f", "g", "h"}) v.add_token(t);
    return v;
}

ModelConfig tiny_config(Variant variant) {
    ModelConfig cfg;
    cfg.hidden = 16;
    cfg.enc_layers = 2;
    cfg.dec_layers = 2;
    cfg.heads = 2;
    cfg.ffn = 24;
    cfg.max_len = 32;
    cfg.dropout = 0.0;
    cfg.seed = 404;
    cfg.variant = variant;
    if (variant == Variant::headrep) {
        cfg.head_selection.entries = {{0, 1}, {1, 0}};
    }
    return cfg;
}

CorefAnnotation empty_ann() { return CorefAnnotation{"d", {}}; }

}  // namespace

TEST(Encode, EmptyClustersCollapseToBase) {
    const std::vector<int> ids{4, 5, 6, 7, 8, 4};
    SummarizerModel base = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    SummarizerModel attn = SummarizerModel::init(tiny_config(Variant::attn), tiny_vocab());
    SummarizerModel gnn = SummarizerModel::init(tiny_config(Variant::gnn), tiny_vocab());

    RngState r1(0), r2(0), r3(0);
    const Tensor base_h = base.encode(ids, empty_ann(), r1, false).hidden->val;
    const Tensor attn_h = attn.encode(ids, empty_ann(), r2, false).hidden->val;
    EXPECT_EQ(base_h.values(), attn_h.values());  // bitwise

    // gnn with lambda = 1 reduces to the base encoder output.
    gnn.fusion.lambda.value.at(0) = 1.0;
    const Tensor gnn_h = gnn.encode(ids, empty_ann(), r3, false).hidden->val;
    EXPECT_EQ(base_h.values(), gnn_h.values());
}

TEST(Encode, HeadrepIdentityOnSingleToken) {
    const std::vector<int> ids{5};
    SummarizerModel base = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    SummarizerModel rep = SummarizerModel::init(tiny_config(Variant::headrep), tiny_vocab());
    RngState r1(0), r2(0);
    const Tensor bh = base.encode(ids, empty_ann(), r1, false).hidden->val;
    const Tensor rh = rep.encode(ids, empty_ann(), r2, false).hidden->val;
    EXPECT_EQ(bh.values(), rh.values());
}

TEST(Encode, AttentionMapsExposedPerLayerAndHead) {
    const std::vector<int> ids{4, 5, 6};
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    RngState rng(0);
    const auto enc = m.encode(ids, empty_ann(), rng, false);
    ASSERT_EQ(enc.attention_maps.size(), 2u);
    for (const auto& layer : enc.attention_maps) {
        ASSERT_EQ(layer.size(), 2u);
        for (const Tensor& map : layer) {
            ASSERT_EQ(map.shape(), (std::vector<std::size_t>{3, 3}));
            for (std::size_t i = 0; i < 3; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < 3; ++j) sum += map(i, j);
                EXPECT_NEAR(sum, 1.0, 1e-12);
            }
        }
    }
}

TEST(Encode, OverlongInputRejected) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    std::vector<int> ids(m.config.max_len + 1, 4);
    RngState rng(0);
    EXPECT_THROW(m.encode(ids, empty_ann(), rng, false), ValidationError);
}

TEST(DecodeGreedy, RiggedLogitsEmitFixedSequence) {
    Vocabulary v;
    v.add_token("a");  // id 4
    v.add_token("b");  // id 5
    ModelConfig cfg = tiny_config(Variant::base);
    cfg.hidden = 4;
    cfg.heads = 2;
    cfg.ffn = 4;
    SummarizerModel m = SummarizerModel::init(cfg, v);

    // Zero every path except positions: the decoder state at position p stays
    // LayerNorm(pos_p), and out_w maps position k to the wanted token.
    for (Parameter* p : m.backbone_params()) {
        if (p->name.find("ln") != std::string::npos) continue;
        p->value = Tensor::zeros(p->value.shape());
    }
    for (std::size_t p = 0; p < cfg.max_len; ++p) {
        for (std::size_t j = 0; j < 4; ++j) m.pos_emb.value(p, j) = (p % 4 == j) ? 1.0 : 0.0;
    }
    m.out_w.value(0, 4) = 1.0;                  // position 0 -> "a"
    m.out_w.value(1, 5) = 1.0;                  // position 1 -> "b"
    m.out_w.value(2, Vocabulary::kEos) = 1.0;   // position 2 -> EOS

    RngState rng(0);
    const auto enc = m.encode({4, 5}, empty_ann(), rng, false);
    const std::vector<int> out = m.decode_greedy(enc.hidden, 10);
    EXPECT_EQ(out, (std::vector<int>{4, 5}));
}

TEST(DecodeGreedy, LengthCapAndDeterminism) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    RngState rng(0);
    const auto enc = m.encode({4, 5, 6}, empty_ann(), rng, false);
    const std::vector<int> one = m.decode_greedy(enc.hidden, 1);
    EXPECT_LE(one.size(), 1u);
    const std::vector<int> a = m.decode_greedy(enc.hidden, 8);
    const std::vector<int> b = m.decode_greedy(enc.hidden, 8);
    EXPECT_EQ(a, b);
}

TEST(Checkpoint, RoundTripReproducesEncodeBitwise) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::gnn), tiny_vocab());
    const std::string path = testing::TempDir() + "ckpt_roundtrip.json";
    save_checkpoint(m, path);
    SummarizerModel loaded = load_checkpoint(path);

    const std::vector<int> ids{4, 5, 6, 7};
    CorefAnnotation ann{"d", {{{0, 0}, {2, 2}}}};
    RngState r1(0), r2(0);
    EXPECT_EQ(m.encode(ids, ann, r1, false).hidden->val.values(),
              loaded.encode(ids, ann, r2, false).hidden->val.values());

    // Serialized form is stable under a save/load/save cycle.
    EXPECT_EQ(checkpoint_to_json(m), checkpoint_to_json(loaded));
}

TEST(Checkpoint, VocabularyHashMismatchRejected) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    json j = json::parse(checkpoint_to_json(m));
    j["meta"]["vocab"][0] = "tampered";
    try {
        checkpoint_from_json(j, "test");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("vocabulary hash mismatch"), std::string::npos);
    }
}

TEST(Checkpoint, MissingParameterRejected) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    json j = json::parse(checkpoint_to_json(m));
    j["params"].erase("out.b");
    EXPECT_THROW(checkpoint_from_json(j, "test"), ValidationError);
}

TEST(Summarize, UnkTokensStillTerminate) {
    SummarizerModel m = SummarizerModel::init(tiny_config(Variant::attn), tiny_vocab());
    Dialogue d{"d", {{"Zed", "totally unseen words here"}}};
    const std::string out = summarize(m, d);
    // Cap respected and detokenization yields vocabulary tokens only.
    EXPECT_LE(split_whitespace(out).size(), m.config.max_len);
}

TEST(Summarize, VariantCheckpointWithEmptyAnnotationMatchesBasePath) {
    SummarizerModel attn = SummarizerModel::init(tiny_config(Variant::attn), tiny_vocab());
    SummarizerModel base = SummarizerModel::init(tiny_config(Variant::base), tiny_vocab());
    Dialogue d{"d", {{"A", "a b c"}, {"B", "d e"}}};
    EXPECT_EQ(summarize(attn, d), summarize(base, d));
}

TEST(ModelConfig, ValidationErrors) {
    ModelConfig bad = tiny_config(Variant::base);
    bad.hidden = 10;
    bad.heads = 4;
    EXPECT_THROW(bad.validate(), ValidationError);

    ModelConfig rep = tiny_config(Variant::headrep);
    rep.head_selection.entries.clear();
    EXPECT_THROW(rep.validate(), ValidationError);

    ModelConfig oob = tiny_config(Variant::headrep);
    oob.head_selection.entries = {{9, 0}};
    EXPECT_THROW(oob.validate(), ValidationError);

    ModelConfig dup = tiny_config(Variant::headrep);
    dup.head_selection.entries = {{0, 1}, {0, 1}};
    EXPECT_THROW(dup.validate(), ValidationError);
}

TEST(EndToEnd, GradientCheckAllVariantsSmall) {
    // d=8, 2+2 layers, dropout off; finite differences over every parameter.
    Vocabulary v;
    for (const char* t : {"x", "y", "z"}) v.add_token(t);
    const std::vector<int> src{4, 5, 6, 4};
    const std::vector<int> tgt{5, 6};
    CorefAnnotation ann{"d", {{{0, 0}, {3, 3}}}};

    for (Variant variant : {Variant::base, Variant::gnn, Variant::attn, Variant::headrep}) {
        ModelConfig cfg;
        cfg.hidden = 8;
        cfg.enc_layers = 2;
        cfg.dec_layers = 2;
        cfg.heads = 2;
        cfg.ffn = 8;
        cfg.max_len = 16;
        cfg.dropout = 0.0;
        cfg.seed = 7;
        cfg.variant = variant;
        cfg.cge_depth = 1;
        if (variant == Variant::headrep) cfg.head_selection.entries = {{0, 0}, {1, 1}};
        SummarizerModel m = SummarizerModel::init(cfg, v);

        auto model = [&]() {
            RngState rng(0);
            return m.sample_loss(src, ann, tgt, rng, false);
        };
        std::vector<Parameter*> params = m.all_params();
        const GradCheckReport report = check_gradients(model, params);
        EXPECT_TRUE(report.passed) << variant_name(variant) << ": " << report.max_rel_error
                                   << " at " << report.worst;
    }
}
