#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corefsum/checkpoint.hpp"
#include "corefsum/coref.hpp"
#include "corefsum/coref_matrix.hpp"
#include "corefsum/io.hpp"
#include "corefsum/model.hpp"
#include "corefsum/parallel.hpp"
#include "corefsum/rouge.hpp"
#include "corefsum/synthetic.hpp"
#include "corefsum/train.hpp"

namespace corefsum::cli {

struct CommandResult {
    int exit_code = 0;
    std::vector<std::string> artifacts;
    std::string summary;
};

namespace detail {

inline std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        const long long x = std::stoll(v);
        if (x < 0) throw ValidationError("config: " + key + " must be non-negative");
        return static_cast<std::size_t>(x);
    } catch (const std::logic_error&) {
        throw ValidationError("config: invalid integer for " + key + ": '" + v + "'");
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (const std::logic_error&) {
        throw ValidationError("config: invalid number for " + key + ": '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config: invalid boolean for " + key + ": '" + v + "'");
}

// Flat key=value config covering both the model and the training setup.
inline void apply_config(const std::map<std::string, std::string>& kv, ModelConfig& mc,
                         TrainingConfig& tc) {
    for (const auto& [key, v] : kv) {
        if (key == "hidden") mc.hidden = to_size(key, v);
        else if (key == "enc_layers") mc.enc_layers = to_size(key, v);
        else if (key == "dec_layers") mc.dec_layers = to_size(key, v);
        else if (key == "heads") mc.heads = to_size(key, v);
        else if (key == "ffn") mc.ffn = to_size(key, v);
        else if (key == "max_len") mc.max_len = to_size(key, v);
        else if (key == "lambda_init") mc.lambda_init = to_double(key, v);
        else if (key == "lambda_trainable") mc.lambda_trainable = to_bool(key, v);
        else if (key == "cge_depth") mc.cge_depth = to_size(key, v);
        else if (key == "dropout") mc.dropout = to_double(key, v);
        else if (key == "seed") mc.seed = static_cast<std::uint64_t>(to_size(key, v));
        else if (key == "epochs") tc.epochs = to_size(key, v);
        else if (key == "lr_fusion") tc.lr_fusion = to_double(key, v);
        else if (key == "lr_backbone") tc.lr_backbone = to_double(key, v);
        else if (key == "batch_size") tc.batch_size = to_size(key, v);
        else if (key == "vocab_min_count") tc.vocab_min_count = to_size(key, v);
        else if (key == "gen_max_tokens") tc.gen_max_tokens = to_size(key, v);
        else if (key == "selection_metric") tc.selection_metric = v;
        else throw ValidationError("config: unknown key '" + key + "'");
    }
}

inline HeadSelection parse_heads_flag(const std::string& arg) {
    HeadSelection sel;
    std::size_t pos = 0;
    while (pos < arg.size()) {
        const std::size_t comma = arg.find(',', pos);
        const std::string item =
            arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw UsageError("--heads expects layer:head pairs, got '" + item + "'");
        }
        try {
            sel.entries.emplace_back(static_cast<std::size_t>(std::stoull(item.substr(0, colon))),
                                     static_cast<std::size_t>(std::stoull(item.substr(colon + 1))));
        } catch (const std::logic_error&) {
            throw UsageError("--heads expects layer:head pairs, got '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (sel.entries.empty()) throw UsageError("--heads is empty");
    return sel;
}

inline HeadSelection read_probe_report(const std::string& path) {
    HeadSelection sel;
    std::size_t lineno = 0;
    for (const std::string& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_json_line(path, lineno, line);
        try {
            sel.entries.emplace_back(j.at("layer").get<std::size_t>(),
                                     j.at("selected").get<std::size_t>());
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": malformed probe report: " + e.what());
        }
    }
    if (sel.entries.empty()) throw ValidationError(path + ": probe report has no layers");
    return sel;
}

inline std::map<std::string, CorefAnnotation> annotations_by_id(
    const std::vector<CorefAnnotation>& as, const std::string& path) {
    std::map<std::string, CorefAnnotation> out;
    for (const CorefAnnotation& a : as) {
        if (!out.emplace(a.dialogue_id, a).second) {
            throw ValidationError(path + ": duplicate annotation for dialogue '" +
                                  a.dialogue_id + "'");
        }
    }
    return out;
}

inline std::vector<LabeledSample> load_split(const std::string& dir, const std::string& split) {
    const std::string dpath = dir + "/" + split + ".dialogues.jsonl";
    const std::string cpath = dir + "/" + split + ".coref.jsonl";
    const std::string spath = dir + "/" + split + ".summaries.txt";
    const std::vector<Dialogue> dialogues = read_dialogues_jsonl(dpath);
    const auto anns = annotations_by_id(read_annotations_jsonl(cpath), cpath);
    const std::vector<std::string> summaries = read_lines(spath);
    if (summaries.size() != dialogues.size()) {
        throw ValidationError(spath + ": " + std::to_string(summaries.size()) +
                              " summaries for " + std::to_string(dialogues.size()) +
                              " dialogues");
    }
    std::vector<LabeledSample> out;
    out.reserve(dialogues.size());
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
        auto it = anns.find(dialogues[i].id);
        if (it == anns.end()) {
            throw ValidationError(cpath + ": no annotation for dialogue '" + dialogues[i].id +
                                  "'");
        }
        out.push_back(LabeledSample{dialogues[i], it->second, summaries[i]});
    }
    return out;
}

inline json rouge_score_json(const RougeScore& s) {
    return json{{"f", s.f}, {"p", s.p}, {"r", s.r}};
}

}  // namespace detail

// Dispatches one subcommand. Errors print to stderr; the exit code encodes
// the failure class (1 usage, 2 I/O, 3 validation, 4 numeric).
inline CommandResult run(const std::vector<std::string>& args) {
    CLI::App app{"coreference-aware dialogue summarization toolkit"};
    app.name("corefsum");
    app.require_subcommand(1);

    // postprocess
    auto* pp = app.add_subcommand("postprocess",
                                  "ensemble-merge, speaker-assign and chain-merge coreference "
                                  "annotations");
    std::vector<std::string> pp_inputs;
    std::string pp_dialogues, pp_out;
    std::size_t pp_min_votes = 2;
    pp->add_option("--inputs", pp_inputs, "annotation JSONL files, one per resolver")
        ->required()
        ->expected(1, -1);
    pp->add_option("--dialogues", pp_dialogues, "dialogue JSONL file")->required();
    pp->add_option("--min-votes", pp_min_votes, "votes needed to keep a mention pair")
        ->capture_default_str();
    pp->add_option("--out", pp_out, "output annotation JSONL file")->required();

    // graph
    auto* gr = app.add_subcommand("graph",
                                  "dump coreference graphs and attention matrices as JSON");
    std::string gr_dialogues, gr_coref, gr_out;
    gr->add_option("--dialogues", gr_dialogues, "dialogue JSONL file")->required();
    gr->add_option("--coref", gr_coref, "annotation JSONL file")->required();
    gr->add_option("--out", gr_out, "output JSONL file")->required();

    // gen-data
    auto* gd = app.add_subcommand("gen-data", "generate a synthetic coreference-dependent corpus");
    std::string gd_out;
    std::size_t gd_train = 200, gd_val = 30, gd_test = 30;
    std::uint64_t gd_seed = 42;
    gd->add_option("--out", gd_out, "output directory")->required();
    gd->add_option("--train", gd_train, "training samples")->capture_default_str();
    gd->add_option("--val", gd_val, "validation samples")->capture_default_str();
    gd->add_option("--test", gd_test, "test samples")->capture_default_str();
    gd->add_option("--seed", gd_seed, "generator seed")->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "train a summarizer variant");
    std::string tr_variant, tr_data, tr_config, tr_out, tr_heads, tr_probe_report;
    std::int64_t tr_seed = -1;
    tr->add_option("--variant", tr_variant, "base|gnn|attn|headrep")->required();
    tr->add_option("--data", tr_data, "corpus directory from gen-data")->required();
    tr->add_option("--config", tr_config, "key=value training config file");
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--seed", tr_seed, "seed override");
    tr->add_option("--heads", tr_heads, "headrep: layer:head pairs, e.g. 0:1,1:2");
    tr->add_option("--probe-report", tr_probe_report, "headrep: probe report JSONL");

    // summarize
    auto* su = app.add_subcommand("summarize", "generate summaries with a trained checkpoint");
    std::string su_ckpt, su_dialogues, su_coref, su_out;
    su->add_option("--ckpt", su_ckpt, "checkpoint path")->required();
    su->add_option("--dialogues", su_dialogues, "dialogue JSONL file")->required();
    su->add_option("--coref", su_coref, "annotation JSONL file (optional)");
    su->add_option("--out", su_out, "output text file, one summary per line")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score hypotheses against references with ROUGE");
    std::string ev_hyp, ev_ref, ev_out;
    ev->add_option("--hyp", ev_hyp, "hypothesis file, one summary per line")->required();
    ev->add_option("--ref", ev_ref, "reference file, one summary per line")->required();
    ev->add_option("--out", ev_out, "report JSON path (stdout when omitted)");

    // probe
    auto* pr = app.add_subcommand("probe", "rank attention heads by similarity to A^c");
    std::string pr_ckpt, pr_dialogues, pr_coref, pr_out;
    pr->add_option("--ckpt", pr_ckpt, "checkpoint path")->required();
    pr->add_option("--dialogues", pr_dialogues, "dialogue JSONL file")->required();
    pr->add_option("--coref", pr_coref, "annotation JSONL file")->required();
    pr->add_option("--out", pr_out, "probe report JSONL path")->required();

    std::vector<const char*> argv;
    argv.push_back("corefsum");
    for (const std::string& a : args) argv.push_back(a.c_str());

    CommandResult result;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        result.exit_code = app.exit(e, std::cout, std::cerr);
        return result;
    } catch (const CLI::Success& e) {
        result.exit_code = app.exit(e, std::cout, std::cerr);
        return result;
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cout, std::cerr);
        result.exit_code = 1;
        return result;
    }

    try {
        if (*pp) {
            const std::vector<Dialogue> dialogues = read_dialogues_jsonl(pp_dialogues);
            std::vector<std::map<std::string, CorefAnnotation>> inputs;
            for (const std::string& path : pp_inputs) {
                inputs.push_back(detail::annotations_by_id(read_annotations_jsonl(path), path));
            }
            std::vector<CorefAnnotation> merged(dialogues.size());
            parallel_for(dialogues.size(), [&](std::size_t i) {
                const Dialogue& d = dialogues[i];
                EnsembleInput input;
                input.min_votes = pp_min_votes;
                for (std::size_t f = 0; f < inputs.size(); ++f) {
                    auto it = inputs[f].find(d.id);
                    if (it == inputs[f].end()) {
                        throw ValidationError(pp_inputs[f] + ": no annotation for dialogue '" +
                                              d.id + "'");
                    }
                    input.annotations.push_back(it->second);
                }
                merged[i] = postprocess(input, d);
            });
            write_annotations_jsonl(pp_out, merged);
            result.artifacts.push_back(pp_out);
            result.summary = "postprocessed " + std::to_string(dialogues.size()) +
                             " dialogues -> " + pp_out;
        } else if (*gr) {
            const std::vector<Dialogue> dialogues = read_dialogues_jsonl(gr_dialogues);
            const auto anns = detail::annotations_by_id(read_annotations_jsonl(gr_coref), gr_coref);
            std::string content;
            for (const Dialogue& d : dialogues) {
                auto it = anns.find(d.id);
                if (it == anns.end()) {
                    throw ValidationError(gr_coref + ": no annotation for dialogue '" + d.id +
                                          "'");
                }
                const std::size_t n = flatten_dialogue(d).size();
                const CorefGraph g = build_coref_graph(it->second, n);
                const CorefAttentionMatrix ac = build_coref_attention(it->second, n);
                json adjacency = json::array();
                json attention = json::array();
                for (std::size_t i = 0; i < n; ++i) {
                    json arow = json::array(), wrow = json::array();
                    for (std::size_t j = 0; j < n; ++j) {
                        arow.push_back(static_cast<int>(g.adjacency[i * n + j]));
                        wrow.push_back(ac.weights(i, j));
                    }
                    adjacency.push_back(std::move(arow));
                    attention.push_back(std::move(wrow));
                }
                content += json{{"dialogue_id", d.id},
                                {"n", n},
                                {"adjacency", adjacency},
                                {"attention", attention}}
                               .dump() +
                           "\n";
            }
            atomic_write_text(gr_out, content);
            result.artifacts.push_back(gr_out);
            result.summary = "dumped " + std::to_string(dialogues.size()) + " graphs -> " + gr_out;
        } else if (*gd) {
            const SyntheticCorpus corpus = generate_synthetic(gd_train, gd_val, gd_test, gd_seed);
            auto write_split = [&](const std::string& split,
                                   const std::vector<SyntheticSample>& samples) {
                std::vector<Dialogue> ds;
                std::vector<CorefAnnotation> as;
                std::string summaries;
                for (const SyntheticSample& s : samples) {
                    ds.push_back(s.dialogue);
                    as.push_back(s.coref);
                    summaries += s.summary + "\n";
                }
                const std::string base = gd_out + "/" + split;
                write_dialogues_jsonl(base + ".dialogues.jsonl", ds);
                write_annotations_jsonl(base + ".coref.jsonl", as);
                atomic_write_text(base + ".summaries.txt", summaries);
                result.artifacts.push_back(base + ".dialogues.jsonl");
                result.artifacts.push_back(base + ".coref.jsonl");
                result.artifacts.push_back(base + ".summaries.txt");
            };
            write_split("train", corpus.train);
            write_split("val", corpus.val);
            write_split("test", corpus.test);
            result.summary = "generated " + std::to_string(gd_train) + "/" +
                             std::to_string(gd_val) + "/" + std::to_string(gd_test) +
                             " samples -> " + gd_out;
        } else if (*tr) {
            ModelConfig mc;
            TrainingConfig tc;
            if (!tr_config.empty()) detail::apply_config(parse_config_file(tr_config), mc, tc);
            mc.variant = parse_variant(tr_variant);
            if (tr_seed >= 0) mc.seed = static_cast<std::uint64_t>(tr_seed);
            if (mc.variant == Variant::headrep) {
                if (!tr_heads.empty() && !tr_probe_report.empty()) {
                    throw UsageError("give either --heads or --probe-report, not both");
                }
                if (tr_heads.empty() && tr_probe_report.empty()) {
                    throw UsageError("headrep variant needs --heads or --probe-report");
                }
                mc.head_selection = tr_heads.empty() ? detail::read_probe_report(tr_probe_report)
                                                     : detail::parse_heads_flag(tr_heads);
            }
            const std::vector<LabeledSample> train_split = detail::load_split(tr_data, "train");
            const std::vector<LabeledSample> val_split = detail::load_split(tr_data, "val");
            TrainResult trained = train(train_split, val_split, mc, tc);
            save_checkpoint(trained.model, tr_out);
            result.artifacts.push_back(tr_out);
            char line[256];
            std::snprintf(line, sizeof(line),
                          "trained variant=%s epochs=%zu best_epoch=%zu final_loss=%.4f "
                          "val_rouge2=%.4f -> %s",
                          tr_variant.c_str(), tc.epochs, trained.stats.best_epoch,
                          trained.stats.epoch_loss.back(),
                          trained.stats.val_rouge2_f.empty()
                              ? 0.0
                              : trained.stats.val_rouge2_f[trained.stats.best_epoch - 1],
                          tr_out.c_str());
            result.summary = line;
        } else if (*su) {
            SummarizerModel model = load_checkpoint(su_ckpt);
            const std::vector<Dialogue> dialogues = read_dialogues_jsonl(su_dialogues);
            std::map<std::string, CorefAnnotation> anns;
            if (!su_coref.empty()) {
                anns = detail::annotations_by_id(read_annotations_jsonl(su_coref), su_coref);
            }
            std::string content;
            for (const Dialogue& d : dialogues) {
                CorefAnnotation ann{d.id, {}};
                auto it = anns.find(d.id);
                if (it != anns.end()) ann = it->second;
                content += summarize(model, d, ann) + "\n";
            }
            atomic_write_text(su_out, content);
            result.artifacts.push_back(su_out);
            result.summary = "summarized " + std::to_string(dialogues.size()) +
                             " dialogues -> " + su_out;
        } else if (*ev) {
            const std::vector<std::string> hyp_lines = read_lines(ev_hyp);
            const std::vector<std::string> ref_lines = read_lines(ev_ref);
            if (hyp_lines.size() != ref_lines.size()) {
                throw ValidationError("evaluate: " + std::to_string(hyp_lines.size()) +
                                      " hypotheses vs " + std::to_string(ref_lines.size()) +
                                      " references");
            }
            if (hyp_lines.empty()) throw ValidationError("evaluate: empty input");
            std::vector<SummaryPair> pairs(hyp_lines.size());
            parallel_for(hyp_lines.size(), [&](std::size_t i) {
                pairs[i] = {split_whitespace(hyp_lines[i]), split_whitespace(ref_lines[i])};
            });
            const RougeReport report = corpus_scores(pairs);
            const LengthStats hyp_stats = length_stats(hyp_lines);
            const LengthStats ref_stats = length_stats(ref_lines);
            const json out = {
                {"count", hyp_lines.size()},
                {"rouge1", detail::rouge_score_json(report.rouge1)},
                {"rouge2", detail::rouge_score_json(report.rouge2)},
                {"rougeL", detail::rouge_score_json(report.rougeL)},
                {"hyp_length",
                 {{"mean", hyp_stats.mean},
                  {"std", hyp_stats.std_dev},
                  {"formatted", format_length_stats(hyp_stats)}}},
                {"ref_length",
                 {{"mean", ref_stats.mean},
                  {"std", ref_stats.std_dev},
                  {"formatted", format_length_stats(ref_stats)}}}};
            if (ev_out.empty()) {
                result.summary = out.dump();
            } else {
                atomic_write_text(ev_out, out.dump() + "\n");
                result.artifacts.push_back(ev_out);
                result.summary = "evaluated " + std::to_string(hyp_lines.size()) + " pairs -> " +
                                 ev_out;
            }
        } else if (*pr) {
            SummarizerModel model = load_checkpoint(pr_ckpt);
            const std::vector<Dialogue> dialogues = read_dialogues_jsonl(pr_dialogues);
            const auto anns = detail::annotations_by_id(read_annotations_jsonl(pr_coref), pr_coref);
            std::vector<std::vector<std::size_t>> winners(dialogues.size());
            parallel_for(dialogues.size(), [&](std::size_t i) {
                const Dialogue& d = dialogues[i];
                auto it = anns.find(d.id);
                if (it == anns.end()) {
                    throw ValidationError(pr_coref + ": no annotation for dialogue '" + d.id +
                                          "'");
                }
                const TokenSequence ts = flatten_dialogue(d);
                const std::vector<int> ids = model.vocab.encode(ts.tokens);
                const CorefAttentionMatrix ac = build_coref_attention(it->second, ids.size());
                RngState rng(0);
                auto enc = model.encode(ids, it->second, rng, false);
                winners[i] = probe_heads(enc.attention_maps, ac);
            });
            ProbeAccumulator acc(model.config.enc_layers, model.config.heads);
            for (const auto& w : winners) acc.add_sample(w);
            std::string content;
            for (const ProbeLayerReport& r : acc.report()) {
                content += json{{"layer", r.layer}, {"ratios", r.ratios}, {"selected", r.selected}}
                               .dump() +
                           "\n";
            }
            atomic_write_text(pr_out, content);
            result.artifacts.push_back(pr_out);
            result.summary = "probed " + std::to_string(dialogues.size()) + " samples -> " +
                             pr_out;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        result.exit_code = e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        result.exit_code = 1;
    }
    return result;
}

}  // namespace corefsum::cli
