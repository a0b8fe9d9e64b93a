#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corefsum/coref.hpp"
#include "corefsum/dialogue.hpp"
#include "corefsum/errors.hpp"

namespace corefsum {

using json = nlohmann::json;

// Writes via a sibling temp file plus rename so readers never observe a
// partial file.
inline void atomic_write_text(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline json parse_json_line(const std::string& path, std::size_t lineno,
                            const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid JSON: " +
                              e.what());
    }
}

// Dialogue JSONL: {"id": "...", "turns": [{"speaker": "...", "text": "..."}]}
inline std::vector<Dialogue> read_dialogues_jsonl(const std::string& path) {
    std::vector<Dialogue> out;
    std::size_t lineno = 0;
    for (const std::string& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_json_line(path, lineno, line);
        try {
            Dialogue d;
            d.id = j.at("id").get<std::string>();
            for (const json& tj : j.at("turns")) {
                Turn t;
                t.speaker = tj.at("speaker").get<std::string>();
                t.text = tj.at("text").get<std::string>();
                d.turns.push_back(std::move(t));
            }
            out.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": malformed dialogue: " + e.what());
        }
    }
    return out;
}

inline std::string dialogue_to_json_line(const Dialogue& d) {
    json turns = json::array();
    for (const Turn& t : d.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
    return json{{"id", d.id}, {"turns", turns}}.dump();
}

inline void write_dialogues_jsonl(const std::string& path, const std::vector<Dialogue>& ds) {
    std::string content;
    for (const Dialogue& d : ds) content += dialogue_to_json_line(d) + "\n";
    atomic_write_text(path, content);
}

// Coref JSONL: {"dialogue_id": "...", "clusters": [[[s,e],...],...]} with
// inclusive token indices into the flattened sequence.
inline std::vector<CorefAnnotation> read_annotations_jsonl(const std::string& path) {
    std::vector<CorefAnnotation> out;
    std::size_t lineno = 0;
    for (const std::string& line : read_lines(path)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_json_line(path, lineno, line);
        try {
            CorefAnnotation a;
            a.dialogue_id = j.at("dialogue_id").get<std::string>();
            for (const json& cj : j.at("clusters")) {
                Cluster c;
                for (const json& sj : cj) {
                    if (!sj.is_array() || sj.size() != 2) {
                        throw ValidationError(path + ":" + std::to_string(lineno) +
                                              ": span must be a [start, end] pair");
                    }
                    const long long s = sj[0].get<long long>();
                    const long long e = sj[1].get<long long>();
                    if (s < 0 || e < s) {
                        throw ValidationError(path + ":" + std::to_string(lineno) +
                                              ": invalid span [" + std::to_string(s) + "," +
                                              std::to_string(e) + "]");
                    }
                    c.push_back(Span{static_cast<std::size_t>(s), static_cast<std::size_t>(e)});
                }
                a.clusters.push_back(std::move(c));
            }
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": malformed annotation: " + e.what());
        }
    }
    return out;
}

inline std::string annotation_to_json_line(const CorefAnnotation& a) {
    json clusters = json::array();
    for (const Cluster& c : a.clusters) {
        json cj = json::array();
        for (const Span& s : c) cj.push_back({s.start, s.end});
        clusters.push_back(std::move(cj));
    }
    return json{{"dialogue_id", a.dialogue_id}, {"clusters", clusters}}.dump();
}

inline void write_annotations_jsonl(const std::string& path,
                                    const std::vector<CorefAnnotation>& as) {
    std::string content;
    for (const CorefAnnotation& a : as) content += annotation_to_json_line(a) + "\n";
    atomic_write_text(path, content);
}

// Flat key=value configuration file; '#' starts a comment line.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::map<std::string, std::string> out;
    std::size_t lineno = 0;
    for (std::string line : read_lines(path)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string trimmed;
        {
            std::size_t b = line.find_first_not_of(" \t");
            std::size_t e = line.find_last_not_of(" \t");
            if (b != std::string::npos) trimmed = line.substr(b, e - b + 1);
        }
        if (trimmed.empty()) continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
        }
        auto strip = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        const std::string key = strip(trimmed.substr(0, eq));
        const std::string value = strip(trimmed.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

}  // namespace corefsum
