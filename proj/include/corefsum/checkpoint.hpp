#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corefsum/io.hpp"
#include "corefsum/model.hpp"

namespace corefsum {

inline std::string u64_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

inline constexpr const char* kCheckpointFormat = "corefsum-checkpoint-v1";

// JSON checkpoint: parameter name -> {shape, data} plus a meta object with
// the variant, configuration, vocabulary and fusion settings. Doubles are
// serialized with shortest round-trip decimals, so save/load reproduces
// values bitwise and identical models serialize to identical bytes.
inline std::string checkpoint_to_json(SummarizerModel& model) {
    json meta;
    meta["variant"] = variant_name(model.config.variant);
    meta["vocab_hash"] = u64_hex(model.vocab.hash());
    meta["vocab"] = model.vocab.payload_tokens();
    if (model.config.variant == Variant::gnn || model.config.variant == Variant::attn) {
        meta["lambda"] = model.fusion.value();
    }
    if (model.config.variant == Variant::headrep) {
        json heads = json::array();
        for (const auto& [l, h] : model.config.head_selection.entries) {
            heads.push_back({l, h});
        }
        meta["selected_heads"] = heads;
    }
    json cfg;
    cfg["hidden"] = model.config.hidden;
    cfg["enc_layers"] = model.config.enc_layers;
    cfg["dec_layers"] = model.config.dec_layers;
    cfg["heads"] = model.config.heads;
    cfg["ffn"] = model.config.ffn;
    cfg["max_len"] = model.config.max_len;
    cfg["lambda_init"] = model.config.lambda_init;
    cfg["lambda_trainable"] = model.config.lambda_trainable;
    cfg["cge_depth"] = model.config.cge_depth;
    cfg["dropout"] = model.config.dropout;
    cfg["seed"] = model.config.seed;
    meta["config"] = cfg;

    json params;
    for (Parameter* p : model.all_params()) {
        params[p->name] = {{"shape", p->value.shape()}, {"data", p->value.values()}};
    }
    return json{{"format", kCheckpointFormat}, {"meta", meta}, {"params", params}}.dump();
}

inline void save_checkpoint(SummarizerModel& model, const std::string& path) {
    atomic_write_text(path, checkpoint_to_json(model));
}

inline SummarizerModel checkpoint_from_json(const json& j, const std::string& origin) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw ValidationError(origin + ": unsupported checkpoint format");
        }
        const json& meta = j.at("meta");
        const json& cfg = meta.at("config");

        ModelConfig config;
        config.hidden = cfg.at("hidden").get<std::size_t>();
        config.enc_layers = cfg.at("enc_layers").get<std::size_t>();
        config.dec_layers = cfg.at("dec_layers").get<std::size_t>();
        config.heads = cfg.at("heads").get<std::size_t>();
        config.ffn = cfg.at("ffn").get<std::size_t>();
        config.max_len = cfg.at("max_len").get<std::size_t>();
        config.lambda_init = cfg.at("lambda_init").get<double>();
        config.lambda_trainable = cfg.at("lambda_trainable").get<bool>();
        config.cge_depth = cfg.at("cge_depth").get<std::size_t>();
        config.dropout = cfg.at("dropout").get<double>();
        config.seed = cfg.at("seed").get<std::uint64_t>();
        config.variant = parse_variant(meta.at("variant").get<std::string>());
        if (meta.contains("selected_heads")) {
            for (const json& e : meta.at("selected_heads")) {
                config.head_selection.entries.emplace_back(e.at(0).get<std::size_t>(),
                                                           e.at(1).get<std::size_t>());
            }
        }

        Vocabulary vocab;
        for (const json& t : meta.at("vocab")) vocab.add_token(t.get<std::string>());
        if (u64_hex(vocab.hash()) != meta.at("vocab_hash").get<std::string>()) {
            throw ValidationError(origin + ": vocabulary hash mismatch");
        }

        SummarizerModel model = SummarizerModel::init(config, std::move(vocab));
        const json& params = j.at("params");
        for (Parameter* p : model.all_params()) {
            if (!params.contains(p->name)) {
                throw ValidationError(origin + ": missing parameter '" + p->name + "'");
            }
            const json& pj = params.at(p->name);
            const auto shape = pj.at("shape").get<std::vector<std::size_t>>();
            auto data = pj.at("data").get<std::vector<double>>();
            if (shape != p->value.shape()) {
                throw ValidationError(origin + ": shape mismatch for '" + p->name + "'");
            }
            p->value = Tensor(shape, std::move(data));
            p->zero_grad();
        }
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(origin + ": malformed checkpoint: " + e.what());
    }
}

inline SummarizerModel load_checkpoint(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    return checkpoint_from_json(j, path);
}

}  // namespace corefsum
