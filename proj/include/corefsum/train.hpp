#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "corefsum/checkpoint.hpp"
#include "corefsum/model.hpp"
#include "corefsum/optim.hpp"
#include "corefsum/rouge.hpp"
#include "corefsum/synthetic.hpp"

namespace corefsum {

struct TrainingConfig {
    std::size_t epochs = 20;
    double lr_fusion = 1e-3;    // CGE weights and lambda
    double lr_backbone = 2e-5;  // everything else
    std::size_t batch_size = 8;
    std::size_t vocab_min_count = 1;
    std::size_t gen_max_tokens = 32;  // greedy decode cap during validation
    std::string selection_metric = "rouge2";

    void validate() const {
        if (epochs < 1) throw ValidationError("training config: epochs must be >= 1");
        if (lr_fusion <= 0.0 || lr_backbone <= 0.0) {
            throw ValidationError("training config: learning rates must be positive");
        }
        if (batch_size < 1) throw ValidationError("training config: batch_size must be >= 1");
        if (selection_metric != "rouge2") {
            throw ValidationError("training config: unsupported selection metric '" +
                                  selection_metric + "'");
        }
    }
};

struct LabeledSample {
    Dialogue dialogue;
    CorefAnnotation coref;
    std::string summary;
};

inline LabeledSample to_labeled(const SyntheticSample& s) {
    return LabeledSample{s.dialogue, s.coref, s.summary};
}

inline std::vector<LabeledSample> to_labeled(const std::vector<SyntheticSample>& v) {
    std::vector<LabeledSample> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(to_labeled(s));
    return out;
}

struct TrainStats {
    std::vector<double> epoch_loss;    // mean token cross entropy per epoch
    std::vector<double> val_rouge2_f;  // empty when there is no validation split
    std::size_t best_epoch = 0;        // 1-based
};

struct TrainResult {
    SummarizerModel model;
    TrainStats stats;
};

namespace detail {

struct PreparedSample {
    std::vector<int> src_ids;
    CorefAnnotation coref;
    std::vector<int> target_ids;
    std::vector<std::string> ref_tokens;
    std::string dialogue_id;
};

inline PreparedSample prepare_sample(const LabeledSample& s, const Vocabulary& vocab,
                                     const ModelConfig& mc) {
    PreparedSample p;
    const TokenSequence ts = flatten_dialogue(s.dialogue);
    if (ts.size() > mc.max_len) {
        throw ValidationError("dialogue " + s.dialogue.id + ": length " +
                              std::to_string(ts.size()) + " exceeds max length " +
                              std::to_string(mc.max_len));
    }
    validate_annotation(s.coref, ts.size());
    p.src_ids = vocab.encode(ts.tokens);
    p.coref = s.coref;
    p.ref_tokens = split_whitespace(s.summary);
    if (p.ref_tokens.size() + 1 > mc.max_len) {
        throw ValidationError("dialogue " + s.dialogue.id + ": summary too long");
    }
    p.target_ids = vocab.encode(p.ref_tokens);
    p.dialogue_id = s.dialogue.id;
    return p;
}

}  // namespace detail

// Mean validation ROUGE-2 F of greedy decodes against the references.
inline double validation_rouge2(SummarizerModel& model,
                                const std::vector<detail::PreparedSample>& val,
                                std::size_t gen_max_tokens) {
    double sum = 0.0;
    RngState rng(0);
    for (const auto& s : val) {
        auto enc = model.encode(s.src_ids, s.coref, rng, false);
        const std::vector<int> out_ids = model.decode_greedy(enc.hidden, gen_max_tokens);
        std::vector<std::string> hyp;
        hyp.reserve(out_ids.size());
        for (int id : out_ids) hyp.push_back(model.vocab.token(id));
        sum += rouge_n(hyp, s.ref_tokens, 2).f;
    }
    return val.empty() ? 0.0 : sum / static_cast<double>(val.size());
}

// Teacher-forced training with two Adam learning-rate groups (fusion vs
// backbone). After every epoch the validation split is decoded greedily and
// the checkpoint with the best ROUGE-2 F is kept; without a validation split
// the final epoch wins. Fully deterministic for a fixed seed.
inline TrainResult train(const std::vector<LabeledSample>& train_split,
                         const std::vector<LabeledSample>& val_split, const ModelConfig& mc,
                         const TrainingConfig& tc) {
    mc.validate();
    tc.validate();
    if (train_split.empty()) throw ValidationError("train: empty training split");

    std::vector<TokenSequence> vocab_corpus;
    for (const LabeledSample& s : train_split) {
        vocab_corpus.push_back(flatten_dialogue(s.dialogue));
        TokenSequence summary_ts;
        summary_ts.tokens = split_whitespace(s.summary);
        vocab_corpus.push_back(std::move(summary_ts));
    }
    const Vocabulary vocab = build_vocabulary(vocab_corpus, tc.vocab_min_count);

    SummarizerModel model = SummarizerModel::init(mc, vocab);

    std::vector<detail::PreparedSample> train_data, val_data;
    for (const auto& s : train_split) train_data.push_back(detail::prepare_sample(s, vocab, mc));
    for (const auto& s : val_split) val_data.push_back(detail::prepare_sample(s, vocab, mc));

    Adam opt;
    opt.add_group(model.fusion_params(), tc.lr_fusion);
    opt.add_group(model.backbone_params(), tc.lr_backbone);

    RngState rng(mc.seed ^ 0xD1B54A32D192ED03ULL);
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainStats stats;
    std::vector<Tensor> best_snapshot = model.snapshot();
    double best_metric = -1.0;
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        // Fisher-Yates over the sample order, seeded by the training stream.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            const std::size_t batch_end = std::min(cursor + tc.batch_size, order.size());
            const double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
            for (std::size_t k = cursor; k < batch_end; ++k) {
                const detail::PreparedSample& s = train_data[order[k]];
                Value loss = model.sample_loss(s.src_ids, s.coref, s.target_ids, rng, true);
                const double value = loss->val.at(0);
                if (!std::isfinite(value)) {
                    throw NumericError("train: non-finite loss at epoch " +
                                       std::to_string(epoch) + ", dialogue " + s.dialogue_id);
                }
                loss_sum += value;
                backward(loss, inv_batch);
            }
            opt.step();
            model.fusion.clamp();
            opt.zero_grad();
            cursor = batch_end;
        }
        stats.epoch_loss.push_back(loss_sum / static_cast<double>(train_data.size()));

        if (!val_data.empty()) {
            const double metric = validation_rouge2(model, val_data, tc.gen_max_tokens);
            stats.val_rouge2_f.push_back(metric);
            if (metric > best_metric) {
                best_metric = metric;
                best_snapshot = model.snapshot();
                best_epoch = epoch;
            }
        } else {
            best_snapshot = model.snapshot();
            best_epoch = epoch;
        }
    }

    model.restore(best_snapshot);
    stats.best_epoch = best_epoch;
    return TrainResult{std::move(model), std::move(stats)};
}

}  // namespace corefsum
