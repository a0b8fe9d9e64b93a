#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corefsum/coref.hpp"
#include "corefsum/dialogue.hpp"
#include "corefsum/rng.hpp"

namespace corefsum {

struct SyntheticSample {
    Dialogue dialogue;
    CorefAnnotation coref;  // gold clusters over the flattened sequence
    std::string summary;
    std::string actor;       // the name the summary must resolve
    std::string distractor;  // the same-gender alternative
};

struct SyntheticCorpus {
    std::vector<SyntheticSample> train, val, test;
};

namespace synth {

// Candidate pools are same-gender pairs so the pronoun never disambiguates
// on its own; speakers come from a disjoint pool so speaker tokens cannot
// stand in for the actor.
inline const std::vector<std::string>& female_names() {
    static const std::vector<std::string> v{"Anna", "Clara", "Lucy", "Sarah"};
    return v;
}

inline const std::vector<std::string>& male_names() {
    static const std::vector<std::string> v{"Paul", "Peter", "Tom", "Mark"};
    return v;
}

inline const std::vector<std::string>& speaker_pool() {
    static const std::vector<std::string> v{"Megan", "Josh", "Amanda", "Derek", "Hannah",
                                            "Ivan"};
    return v;
}

inline const std::vector<std::string>& task_phrases() {
    static const std::vector<std::string> v{"bring the cake",   "book the tickets",
                                            "walk the dog",     "fix the car",
                                            "send the invites", "call the vendor"};
    return v;
}

inline const std::vector<std::string>& greetings() {
    static const std::vector<std::string> v{"hi !", "hey there !", "hello !",
                                            "good morning !"};
    return v;
}

inline const std::vector<std::string>& fillers() {
    static const std::vector<std::string> v{
        "how was your weekend ?",        "did you watch the game ?",
        "the weather is lovely today .", "we should meet more often .",
        "i am running late again .",     "that sounds like a plan ."};
    return v;
}

inline const std::vector<std::string>& acks() {
    static const std::vector<std::string> v{"great .", "sounds good .", "perfect .",
                                            "awesome ."};
    return v;
}

inline const std::vector<std::string>& closings() {
    static const std::vector<std::string> v{"see you later .", "talk soon .", "bye !"};
    return v;
}

inline const std::string& pick(const std::vector<std::string>& pool, RngState& rng) {
    return pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
}

// Two distinct draws from one pool.
inline std::pair<std::string, std::string> pick_two(const std::vector<std::string>& pool,
                                                    RngState& rng) {
    const std::size_t a = static_cast<std::size_t>(rng.next_below(pool.size()));
    std::size_t b = static_cast<std::size_t>(rng.next_below(pool.size() - 1));
    if (b >= a) ++b;
    return {pool[a], pool[b]};
}

}  // namespace synth

// Generates templated dialogues whose summaries name an actor that is only
// identifiable by resolving a pronoun chain: two same-gender names are
// introduced, a later commitment turn uses "he"/"she", and the gold cluster
// links the pronoun to the intended name. Dialogues come in minimal pairs
// sharing the exact same text but opposite antecedents, so the actor is
// provably ambiguous from the words alone and only the annotation resolves
// it. Scale loosely follows small chat corpora: two to three speakers,
// around ten turns.
inline std::vector<SyntheticSample> generate_samples(std::size_t n, RngState& rng,
                                                     const std::string& id_prefix) {
    std::vector<SyntheticSample> out;
    out.reserve(n);
    while (out.size() < n) {
        // One skeleton per pair: everything but the antecedent choice.
        const std::size_t n_speakers = rng.bernoulli(0.4) ? 3 : 2;
        std::vector<std::string> speakers;
        {
            auto [s0, s1] = synth::pick_two(synth::speaker_pool(), rng);
            speakers = {s0, s1};
            if (n_speakers == 3) {
                std::string s2 = synth::pick(synth::speaker_pool(), rng);
                while (s2 == s0 || s2 == s1) s2 = synth::pick(synth::speaker_pool(), rng);
                speakers.push_back(s2);
            }
        }

        const bool female = rng.bernoulli(0.5);
        auto [first_name, second_name] =
            synth::pick_two(female ? synth::female_names() : synth::male_names(), rng);
        const std::string subject_pronoun = female ? "she" : "he";
        const std::string task = synth::pick(synth::task_phrases(), rng);

        std::size_t speaker_cursor = 0;
        auto next_speaker = [&]() -> const std::string& {
            const std::string& s = speakers[speaker_cursor % speakers.size()];
            ++speaker_cursor;
            return s;
        };

        // (turn index, word index within the turn text) markers, converted to
        // flat token positions once all turns exist.
        struct Marker {
            std::size_t turn;
            std::size_t word;
        };
        Marker first_name_mark{}, second_name_mark{}, pronoun_mark{}, extra_pronoun_mark{};
        Marker narrator_mark{};
        bool has_extra_pronoun = false;

        std::vector<Turn> turns;
        turns.push_back({next_speaker(), synth::pick(synth::greetings(), rng)});
        if (rng.bernoulli(0.5)) {
            turns.push_back({next_speaker(), synth::pick(synth::greetings(), rng)});
        }

        // Introduction turn: the narrator mentions both candidates.
        {
            narrator_mark = {turns.size(), 0};
            first_name_mark = {turns.size(), 2};
            second_name_mark = {turns.size(), 4};
            turns.push_back({speakers[0],
                             "i met " + first_name + " and " + second_name + " today ."});
        }

        const std::size_t n_fillers = 1 + static_cast<std::size_t>(rng.next_below(3));
        for (std::size_t f = 0; f < n_fillers; ++f) {
            turns.push_back({next_speaker(), synth::pick(synth::fillers(), rng)});
        }

        turns.push_back({next_speaker(), "so who will " + task + " ?"});
        pronoun_mark = {turns.size(), 0};
        turns.push_back({speakers[0], subject_pronoun + " will " + task + " ."});
        turns.push_back({next_speaker(), synth::pick(synth::acks(), rng)});
        if (rng.bernoulli(0.5)) {
            has_extra_pronoun = true;
            extra_pronoun_mark = {turns.size(), 0};
            turns.push_back({next_speaker(), subject_pronoun + " seems very excited ."});
        }
        if (rng.bernoulli(0.5)) {
            turns.push_back({next_speaker(), synth::pick(synth::fillers(), rng)});
        }
        turns.push_back({next_speaker(), synth::pick(synth::closings(), rng)});

        // Both pair members share the turns; positions are identical.
        Dialogue proto;
        proto.id = "proto";
        proto.turns = turns;
        const TokenSequence ts = flatten_dialogue(proto);
        auto flat = [&](const Marker& m) { return ts.turn_offsets[m.turn] + 2 + m.word; };

        for (const bool first_is_actor : {true, false}) {
            if (out.size() == n) break;
            SyntheticSample sample;
            sample.dialogue.id = id_prefix + std::to_string(out.size());
            sample.dialogue.turns = turns;
            sample.actor = first_is_actor ? first_name : second_name;
            sample.distractor = first_is_actor ? second_name : first_name;
            sample.summary = sample.actor + " will " + task + " .";

            sample.coref.dialogue_id = sample.dialogue.id;
            Cluster actor_cluster;
            const Marker& actor_mark = first_is_actor ? first_name_mark : second_name_mark;
            actor_cluster.push_back(Span{flat(actor_mark), flat(actor_mark)});
            actor_cluster.push_back(Span{flat(pronoun_mark), flat(pronoun_mark)});
            if (has_extra_pronoun) {
                actor_cluster.push_back(
                    Span{flat(extra_pronoun_mark), flat(extra_pronoun_mark)});
            }
            Cluster narrator_cluster;
            narrator_cluster.push_back(
                Span{ts.turn_offsets[narrator_mark.turn], ts.turn_offsets[narrator_mark.turn]});
            narrator_cluster.push_back(Span{flat(narrator_mark), flat(narrator_mark)});
            sample.coref.clusters.push_back(std::move(actor_cluster));
            sample.coref.clusters.push_back(std::move(narrator_cluster));
            sample.coref = canonicalize(std::move(sample.coref));
            validate_annotation(sample.coref, ts.size());
            out.push_back(std::move(sample));
        }
    }
    return out;
}

inline SyntheticCorpus generate_synthetic(std::size_t n_train, std::size_t n_val,
                                          std::size_t n_test, std::uint64_t seed) {
    if (n_train < 1) throw ValidationError("generate_synthetic: need at least one sample");
    RngState rng(seed);
    SyntheticCorpus corpus;
    corpus.train = generate_samples(n_train, rng, "train-");
    corpus.val = generate_samples(n_val, rng, "val-");
    corpus.test = generate_samples(n_test, rng, "test-");
    return corpus;
}

}  // namespace corefsum
