#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "corefsum/autodiff.hpp"
#include "corefsum/coref.hpp"
#include "corefsum/coref_matrix.hpp"
#include "corefsum/dialogue.hpp"
#include "corefsum/fusion.hpp"
#include "corefsum/rng.hpp"

namespace corefsum {

enum class Variant { base, gnn, attn, headrep };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::gnn: return "gnn";
        case Variant::attn: return "attn";
        case Variant::headrep: return "headrep";
    }
    throw ValidationError("unknown variant");
}

inline Variant parse_variant(const std::string& s) {
    if (s == "base") return Variant::base;
    if (s == "gnn") return Variant::gnn;
    if (s == "attn") return Variant::attn;
    if (s == "headrep") return Variant::headrep;
    throw ValidationError("unknown variant '" + s + "' (expected base|gnn|attn|headrep)");
}

struct ModelConfig {
    std::size_t hidden = 64;
    std::size_t enc_layers = 2;
    std::size_t dec_layers = 2;
    std::size_t heads = 4;
    std::size_t ffn = 128;
    std::size_t max_len = 128;
    Variant variant = Variant::base;
    double lambda_init = 0.7;
    bool lambda_trainable = true;
    std::size_t cge_depth = 2;
    double dropout = 0.1;
    std::uint64_t seed = 42;
    HeadSelection head_selection;  // headrep only

    void validate() const {
        if (hidden == 0 || heads == 0 || hidden % heads != 0) {
            throw ValidationError("model config: hidden size must be divisible by head count");
        }
        if (enc_layers == 0 || dec_layers == 0) {
            throw ValidationError("model config: encoder and decoder need at least one layer");
        }
        if (max_len < 2) throw ValidationError("model config: max_len must be at least 2");
        if (dropout < 0.0 || dropout >= 1.0) {
            throw ValidationError("model config: dropout must be in [0, 1)");
        }
        if (lambda_init < 0.0 || lambda_init > 1.0) {
            throw ValidationError("model config: lambda must start in [0, 1]");
        }
        if (variant == Variant::gnn && cge_depth == 0) {
            throw ValidationError("model config: gnn variant needs cge_depth >= 1");
        }
        if (variant == Variant::headrep) {
            if (head_selection.entries.empty()) {
                throw ValidationError("model config: headrep variant needs selected heads");
            }
            head_selection.validate(enc_layers, heads);
        }
    }
};

struct EncoderLayer {
    MhaParams attn;
    Parameter ln1_g, ln1_b;
    Parameter ff_w1, ff_b1, ff_w2, ff_b2;
    Parameter ln2_g, ln2_b;
};

struct DecoderLayer {
    MhaParams self_attn;
    Parameter ln1_g, ln1_b;
    MhaParams cross_attn;
    Parameter ln2_g, ln2_b;
    Parameter ff_w1, ff_b1, ff_w2, ff_b2;
    Parameter ln3_g, ln3_b;
};

inline Parameter ln_gamma(const std::string& name, std::size_t d) {
    return Parameter(name, Tensor::full({d}, 1.0));
}

inline Parameter ln_beta(const std::string& name, std::size_t d) {
    return Parameter(name, Tensor::zeros({d}));
}

// Toy sequence-to-sequence transformer with an optional coreference fusion
// stage in the encoder: post-norm layers, learned positional embeddings,
// greedy decoding.
class SummarizerModel {
public:
    ModelConfig config;
    Vocabulary vocab;
    Parameter tok_emb;  // [V x d]
    Parameter pos_emb;  // [max_len x d]
    std::vector<EncoderLayer> encoder;
    std::vector<DecoderLayer> decoder;
    std::vector<CgeLayerParams> cge;
    FusionWeight fusion;
    Parameter out_w, out_b;

    static SummarizerModel init(ModelConfig cfg, Vocabulary vocabulary) {
        cfg.validate();
        SummarizerModel m;
        m.config = cfg;
        m.vocab = std::move(vocabulary);
        RngState rng(cfg.seed);
        const std::size_t d = cfg.hidden;
        const std::size_t v = m.vocab.size();
        m.tok_emb = make_uniform_parameter("tok_emb", {v, d}, rng);
        m.pos_emb = make_uniform_parameter("pos_emb", {cfg.max_len, d}, rng);
        for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
            const std::string p = "enc" + std::to_string(l);
            EncoderLayer layer;
            layer.attn = MhaParams::init(p + ".attn", d, cfg.heads, rng);
            layer.ln1_g = ln_gamma(p + ".ln1.g", d);
            layer.ln1_b = ln_beta(p + ".ln1.b", d);
            layer.ff_w1 = make_uniform_parameter(p + ".ff.w1", {d, cfg.ffn}, rng);
            layer.ff_b1 = make_uniform_parameter(p + ".ff.b1", {cfg.ffn}, rng);
            layer.ff_w2 = make_uniform_parameter(p + ".ff.w2", {cfg.ffn, d}, rng);
            layer.ff_b2 = make_uniform_parameter(p + ".ff.b2", {d}, rng);
            layer.ln2_g = ln_gamma(p + ".ln2.g", d);
            layer.ln2_b = ln_beta(p + ".ln2.b", d);
            m.encoder.push_back(std::move(layer));
        }
        if (cfg.variant == Variant::gnn) {
            for (std::size_t l = 0; l < cfg.cge_depth; ++l) {
                m.cge.push_back(CgeLayerParams::init("cge" + std::to_string(l), d, rng));
            }
        }
        m.fusion = FusionWeight::init("fusion.lambda", cfg.lambda_init, cfg.lambda_trainable);
        for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
            const std::string p = "dec" + std::to_string(l);
            DecoderLayer layer;
            layer.self_attn = MhaParams::init(p + ".self", d, cfg.heads, rng);
            layer.ln1_g = ln_gamma(p + ".ln1.g", d);
            layer.ln1_b = ln_beta(p + ".ln1.b", d);
            layer.cross_attn = MhaParams::init(p + ".cross", d, cfg.heads, rng);
            layer.ln2_g = ln_gamma(p + ".ln2.g", d);
            layer.ln2_b = ln_beta(p + ".ln2.b", d);
            layer.ff_w1 = make_uniform_parameter(p + ".ff.w1", {d, cfg.ffn}, rng);
            layer.ff_b1 = make_uniform_parameter(p + ".ff.b1", {cfg.ffn}, rng);
            layer.ff_w2 = make_uniform_parameter(p + ".ff.w2", {cfg.ffn, d}, rng);
            layer.ff_b2 = make_uniform_parameter(p + ".ff.b2", {d}, rng);
            layer.ln3_g = ln_gamma(p + ".ln3.g", d);
            layer.ln3_b = ln_beta(p + ".ln3.b", d);
            m.decoder.push_back(std::move(layer));
        }
        m.out_w = make_uniform_parameter("out.w", {d, v}, rng);
        m.out_b = make_uniform_parameter("out.b", {v}, rng);
        return m;
    }

    struct EncodeResult {
        Value hidden;                                   // [n x d]
        std::vector<std::vector<Tensor>> attention_maps;  // [layer][head], effective weights
    };

    // Runs the encoder and the variant's fusion stage. The annotation may be
    // empty; every fusion mechanism degenerates gracefully.
    EncodeResult encode(const std::vector<int>& ids, const CorefAnnotation& ann, RngState& rng,
                        bool training) {
        const std::size_t n = ids.size();
        if (n == 0) throw ValidationError("encode: empty input");
        if (n > config.max_len) {
            throw ValidationError("encode: input length " + std::to_string(n) +
                                  " exceeds max length " + std::to_string(config.max_len));
        }
        validate_annotation(ann, n);

        std::vector<int> positions(n);
        std::iota(positions.begin(), positions.end(), 0);
        Value x = add(gather_rows(tok_emb, ids), gather_rows(pos_emb, positions));
        x = dropout(x, config.dropout, rng, training);

        CorefAttentionMatrix ac;
        if (config.variant == Variant::headrep) ac = build_coref_attention(ann, n);

        EncodeResult result;
        result.attention_maps.resize(encoder.size());
        for (std::size_t l = 0; l < encoder.size(); ++l) {
            EncoderLayer& layer = encoder[l];
            HeadReplacement replace;
            if (config.variant == Variant::headrep) {
                for (const auto& [sel_layer, sel_head] : config.head_selection.entries) {
                    if (sel_layer == l) replace[sel_head] = &ac;
                }
            }
            Value attn_out = mha_forward(x, layer.attn, replace, &result.attention_maps[l]);
            x = layer_norm(add(x, dropout(attn_out, config.dropout, rng, training)),
                           layer.ln1_g, layer.ln1_b);
            Value ff = linear(relu(linear(x, layer.ff_w1, layer.ff_b1)), layer.ff_w2,
                              layer.ff_b2);
            x = layer_norm(add(x, dropout(ff, config.dropout, rng, training)), layer.ln2_g,
                           layer.ln2_b);
        }

        if (config.variant == Variant::gnn) {
            const CorefGraph g = build_coref_graph(ann, n);
            x = cge_stack(x, g, cge, fusion, rng, training, config.dropout);
        } else if (config.variant == Variant::attn) {
            x = coref_attention_update(x, ann, fusion);
        }
        result.hidden = x;
        return result;
    }

    // Teacher-forced decoder logits over the target prefix ids.
    Value decoder_logits(const Value& hidden, const std::vector<int>& dec_ids, RngState& rng,
                         bool training) {
        const std::size_t m = dec_ids.size();
        if (m == 0) throw ValidationError("decoder_logits: empty prefix");
        if (m > config.max_len) {
            throw ValidationError("decoder_logits: prefix length " + std::to_string(m) +
                                  " exceeds max length " + std::to_string(config.max_len));
        }
        std::vector<int> positions(m);
        std::iota(positions.begin(), positions.end(), 0);
        Value y = add(gather_rows(tok_emb, dec_ids), gather_rows(pos_emb, positions));
        y = dropout(y, config.dropout, rng, training);

        Tensor mask({m, m});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) mask(i, j) = -1e9;
        }

        for (DecoderLayer& layer : decoder) {
            Value self_out = multi_head_attention(y, y, layer.self_attn, &mask);
            y = layer_norm(add(y, dropout(self_out, config.dropout, rng, training)),
                           layer.ln1_g, layer.ln1_b);
            Value cross_out = multi_head_attention(y, hidden, layer.cross_attn, nullptr);
            y = layer_norm(add(y, dropout(cross_out, config.dropout, rng, training)),
                           layer.ln2_g, layer.ln2_b);
            Value ff = linear(relu(linear(y, layer.ff_w1, layer.ff_b1)), layer.ff_w2,
                              layer.ff_b2);
            y = layer_norm(add(y, dropout(ff, config.dropout, rng, training)), layer.ln3_g,
                           layer.ln3_b);
        }
        return add_rows(matmul(y, leaf(out_w)), leaf(out_b));
    }

    // Mean token cross entropy for one (dialogue, summary) pair under teacher
    // forcing: decoder input [BOS y1..yk], labels [y1..yk EOS].
    Value sample_loss(const std::vector<int>& src_ids, const CorefAnnotation& ann,
                      const std::vector<int>& target_ids, RngState& rng, bool training) {
        if (target_ids.size() + 1 > config.max_len) {
            throw ValidationError("sample_loss: target length " +
                                  std::to_string(target_ids.size()) + " exceeds max length");
        }
        std::vector<int> dec_input;
        dec_input.reserve(target_ids.size() + 1);
        dec_input.push_back(Vocabulary::kBos);
        dec_input.insert(dec_input.end(), target_ids.begin(), target_ids.end());
        std::vector<int> labels = target_ids;
        labels.push_back(Vocabulary::kEos);

        Value hidden = encode(src_ids, ann, rng, training).hidden;
        Value logits = decoder_logits(hidden, dec_input, rng, training);
        return cross_entropy_mean(logits, labels);
    }

    // Greedy argmax decoding; stops at EOS or after max_new_tokens. BOS and
    // EOS are not part of the returned ids.
    std::vector<int> decode_greedy(const Value& hidden, std::size_t max_new_tokens) {
        RngState rng(0);  // inference path draws nothing
        std::vector<int> ids{Vocabulary::kBos};
        std::vector<int> out;
        while (out.size() < max_new_tokens && ids.size() < config.max_len) {
            Value logits = decoder_logits(hidden, ids, rng, false);
            const std::size_t rows = logits->val.shape()[0];
            const std::size_t v = logits->val.shape()[1];
            const double* row = logits->val.data() + (rows - 1) * v;
            std::size_t best = 0;
            for (std::size_t j = 1; j < v; ++j) {
                if (row[j] > row[best]) best = j;
            }
            if (static_cast<int>(best) == Vocabulary::kEos) break;
            out.push_back(static_cast<int>(best));
            ids.push_back(static_cast<int>(best));
        }
        return out;
    }

    std::vector<Parameter*> backbone_params() {
        std::vector<Parameter*> out{&tok_emb, &pos_emb};
        for (EncoderLayer& l : encoder) {
            for (Parameter* p : l.attn.params()) out.push_back(p);
            for (Parameter* p : {&l.ln1_g, &l.ln1_b, &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2,
                                 &l.ln2_g, &l.ln2_b}) {
                out.push_back(p);
            }
        }
        for (DecoderLayer& l : decoder) {
            for (Parameter* p : l.self_attn.params()) out.push_back(p);
            out.push_back(&l.ln1_g);
            out.push_back(&l.ln1_b);
            for (Parameter* p : l.cross_attn.params()) out.push_back(p);
            for (Parameter* p : {&l.ln2_g, &l.ln2_b, &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2,
                                 &l.ln3_g, &l.ln3_b}) {
                out.push_back(p);
            }
        }
        out.push_back(&out_w);
        out.push_back(&out_b);
        return out;
    }

    // Fusion-side learning-rate group: CGE weights plus the trainable lambda.
    std::vector<Parameter*> fusion_params() {
        std::vector<Parameter*> out;
        for (CgeLayerParams& l : cge) {
            for (Parameter* p : l.params()) out.push_back(p);
        }
        if ((config.variant == Variant::gnn || config.variant == Variant::attn) &&
            fusion.trainable) {
            out.push_back(&fusion.lambda);
        }
        return out;
    }

    // Every parameter the checkpoint stores, trainable or not.
    std::vector<Parameter*> all_params() {
        std::vector<Parameter*> out = backbone_params();
        for (CgeLayerParams& l : cge) {
            for (Parameter* p : l.params()) out.push_back(p);
        }
        if (config.variant == Variant::gnn || config.variant == Variant::attn) {
            out.push_back(&fusion.lambda);
        }
        return out;
    }

    std::vector<Tensor> snapshot() {
        std::vector<Tensor> out;
        for (Parameter* p : all_params()) out.push_back(p->value);
        return out;
    }

    void restore(const std::vector<Tensor>& snap) {
        auto params = all_params();
        if (snap.size() != params.size()) {
            throw ValidationError("restore: snapshot size mismatch");
        }
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
    }
};

// Encode, greedily decode and detokenize one dialogue. The annotation may be
// empty; OOV tokens map to UNK.
inline std::string summarize(SummarizerModel& model, const Dialogue& d,
                             const CorefAnnotation& ann) {
    const TokenSequence ts = flatten_dialogue(d);
    const std::vector<int> ids = model.vocab.encode(ts.tokens);
    RngState rng(0);
    auto enc = model.encode(ids, ann, rng, false);
    const std::vector<int> out_ids = model.decode_greedy(enc.hidden, model.config.max_len);
    std::string text;
    for (std::size_t i = 0; i < out_ids.size(); ++i) {
        if (i) text += " ";
        text += model.vocab.token(out_ids[i]);
    }
    return text;
}

inline std::string summarize(SummarizerModel& model, const Dialogue& d) {
    return summarize(model, d, CorefAnnotation{d.id, {}});
}

}  // namespace corefsum
