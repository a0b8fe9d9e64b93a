#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "corefsum/cli.hpp"

using namespace corefsum;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path p = fs::path(testing::TempDir()) / ("corefsum_" + tag + "_" +
                                                       std::to_string(counter++));
    fs::create_directories(p);
    return p.string();
}

cli::CommandResult run_cli(std::vector<std::string> args) { return cli::run(std::move(args)); }

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run_cli({"--help"}).exit_code, 0);
    for (const char* sub : {"postprocess", "graph", "probe", "train", "summarize", "evaluate",
                            "gen-data"}) {
        EXPECT_EQ(run_cli({sub, "--help"}).exit_code, 0) << sub;
    }
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run_cli({}).exit_code, 1);
    EXPECT_EQ(run_cli({"frobnicate"}).exit_code, 1);
    EXPECT_EQ(run_cli({"evaluate", "--nope", "x"}).exit_code, 1);
    EXPECT_EQ(run_cli({"evaluate", "--hyp", "a.txt"}).exit_code, 1);  // missing --ref
}

TEST(Cli, MissingFileIsIoError) {
    const std::string dir = fresh_dir("io");
    EXPECT_EQ(run_cli({"evaluate", "--hyp", dir + "/absent.txt", "--ref", dir + "/absent.txt"})
                  .exit_code,
              2);
}

TEST(Cli, InvalidJsonlIsValidationError) {
    const std::string dir = fresh_dir("badjson");
    write_file(dir + "/d.jsonl", "{\"id\": \"x\", \"turns\": [\n");
    write_file(dir + "/c.jsonl", "{\"dialogue_id\": \"x\", \"clusters\": []}\n");
    const auto r = run_cli({"graph", "--dialogues", dir + "/d.jsonl", "--coref", dir + "/c.jsonl",
                            "--out", dir + "/g.jsonl"});
    EXPECT_EQ(r.exit_code, 3);
}

TEST(Cli, EvaluateIdenticalFilesScoreOne) {
    const std::string dir = fresh_dir("eval");
    write_file(dir + "/h.txt", "Anna will bring the cake .\nPaul will fix the car .\n");
    write_file(dir + "/r.txt", "Anna will bring the cake .\nPaul will fix the car .\n");
    const auto r = run_cli({"evaluate", "--hyp", dir + "/h.txt", "--ref", dir + "/r.txt"});
    EXPECT_EQ(r.exit_code, 0);
    const json report = json::parse(r.summary);
    EXPECT_DOUBLE_EQ(report["rouge1"]["f"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(report["rouge2"]["f"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(report["rougeL"]["f"].get<double>(), 1.0);
    EXPECT_EQ(report["count"].get<std::size_t>(), 2u);
}

TEST(Cli, EvaluateMismatchedLineCounts) {
    const std::string dir = fresh_dir("evalbad");
    write_file(dir + "/h.txt", "a\n");
    write_file(dir + "/r.txt", "a\nb\n");
    EXPECT_EQ(run_cli({"evaluate", "--hyp", dir + "/h.txt", "--ref", dir + "/r.txt"}).exit_code,
              3);
}

TEST(Cli, PostprocessPipeline) {
    const std::string dir = fresh_dir("pp");
    const Dialogue d{"d0", {{"Paul", "i met Paul ,"}, {"Amanda", "Paul waved"}}};
    write_dialogues_jsonl(dir + "/d.jsonl", {d});
    const CorefAnnotation ann{"d0", {{{4, 4}, {5, 5}}, {{8, 8}, {9, 9}}}};
    write_annotations_jsonl(dir + "/a.jsonl", {ann});
    write_annotations_jsonl(dir + "/b.jsonl", {ann});
    write_annotations_jsonl(dir + "/c.jsonl", {CorefAnnotation{"d0", {}}});

    const auto r = run_cli({"postprocess", "--inputs", dir + "/a.jsonl", dir + "/b.jsonl",
                            dir + "/c.jsonl", "--dialogues", dir + "/d.jsonl", "--min-votes",
                            "2", "--out", dir + "/merged.jsonl"});
    ASSERT_EQ(r.exit_code, 0);
    const auto merged = read_annotations_jsonl(dir + "/merged.jsonl");
    ASSERT_EQ(merged.size(), 1u);
    ASSERT_EQ(merged[0].clusters.size(), 1u);
    EXPECT_EQ(merged[0].clusters[0],
              (Cluster{{0, 0}, {4, 4}, {5, 5}, {8, 8}, {9, 9}}));
}

TEST(Cli, GraphDump) {
    const std::string dir = fresh_dir("graph");
    const Dialogue d{"d0", {{"A", "x y z w v u"}}};  // 8 tokens flattened
    write_dialogues_jsonl(dir + "/d.jsonl", {d});
    write_annotations_jsonl(dir + "/c.jsonl",
                            {CorefAnnotation{"d0", {{{1, 1}, {3, 3}, {7, 7}}, {{2, 2}, {5, 5}}}}});
    const auto r = run_cli({"graph", "--dialogues", dir + "/d.jsonl", "--coref", dir + "/c.jsonl",
                            "--out", dir + "/g.jsonl"});
    ASSERT_EQ(r.exit_code, 0);
    const auto lines = read_lines(dir + "/g.jsonl");
    ASSERT_EQ(lines.size(), 1u);
    const json j = json::parse(lines[0]);
    EXPECT_EQ(j["n"].get<std::size_t>(), 8u);
    EXPECT_EQ(j["adjacency"][1][3].get<int>(), 1);
    EXPECT_EQ(j["adjacency"][3][7].get<int>(), 1);
    EXPECT_EQ(j["adjacency"][2][5].get<int>(), 1);
    EXPECT_EQ(j["adjacency"][0][1].get<int>(), 0);
    EXPECT_DOUBLE_EQ(j["attention"][1][1].get<double>(), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(j["attention"][4][4].get<double>(), 1.0);
}

TEST(Cli, GenDataTrainSummarizeProbeFlow) {
    const std::string dir = fresh_dir("flow");
    ASSERT_EQ(run_cli({"gen-data", "--out", dir + "/corpus", "--train", "6", "--val", "2",
                       "--test", "2", "--seed", "5"})
                  .exit_code,
              0);
    for (const char* split : {"train", "val", "test"}) {
        EXPECT_TRUE(fs::exists(dir + "/corpus/" + split + ".dialogues.jsonl"));
        EXPECT_TRUE(fs::exists(dir + "/corpus/" + split + ".coref.jsonl"));
        EXPECT_TRUE(fs::exists(dir + "/corpus/" + split + ".summaries.txt"));
    }

    write_file(dir + "/train.cfg",
               "epochs=1\nbatch_size=2\nhidden=16\nenc_layers=1\ndec_layers=1\nheads=2\n"
               "ffn=16\nmax_len=128\ndropout=0.0\nlr_fusion=1e-3\nlr_backbone=1e-3\nseed=3\n");

    ASSERT_EQ(run_cli({"train", "--variant", "base", "--data", dir + "/corpus", "--config",
                       dir + "/train.cfg", "--out", dir + "/base.json"})
                  .exit_code,
              0);
    ASSERT_TRUE(fs::exists(dir + "/base.json"));

    // Determinism at the CLI level: identical invocations, identical bytes.
    ASSERT_EQ(run_cli({"train", "--variant", "base", "--data", dir + "/corpus", "--config",
                       dir + "/train.cfg", "--out", dir + "/base2.json"})
                  .exit_code,
              0);
    EXPECT_EQ(read_text_file(dir + "/base.json"), read_text_file(dir + "/base2.json"));

    ASSERT_EQ(run_cli({"summarize", "--ckpt", dir + "/base.json", "--dialogues",
                       dir + "/corpus/test.dialogues.jsonl", "--coref",
                       dir + "/corpus/test.coref.jsonl", "--out", dir + "/hyp.txt"})
                  .exit_code,
              0);
    EXPECT_EQ(read_lines(dir + "/hyp.txt").size(), 2u);

    ASSERT_EQ(run_cli({"probe", "--ckpt", dir + "/base.json", "--dialogues",
                       dir + "/corpus/val.dialogues.jsonl", "--coref",
                       dir + "/corpus/val.coref.jsonl", "--out", dir + "/probe.jsonl"})
                  .exit_code,
              0);
    const auto probe_lines = read_lines(dir + "/probe.jsonl");
    ASSERT_EQ(probe_lines.size(), 1u);  // one encoder layer
    const json pr = json::parse(probe_lines[0]);
    EXPECT_EQ(pr["ratios"].size(), 2u);
    double ratio_sum = 0.0;
    for (const auto& x : pr["ratios"]) ratio_sum += x.get<double>();
    EXPECT_NEAR(ratio_sum, 1.0, 1e-12);

    // headrep training driven by the probe report.
    EXPECT_EQ(run_cli({"train", "--variant", "headrep", "--data", dir + "/corpus", "--config",
                       dir + "/train.cfg", "--probe-report", dir + "/probe.jsonl", "--out",
                       dir + "/rep.json"})
                  .exit_code,
              0);
}

TEST(Cli, HeadrepRequiresHeadSource) {
    const std::string dir = fresh_dir("rep");
    EXPECT_EQ(run_cli({"train", "--variant", "headrep", "--data", dir, "--out", dir + "/x.json"})
                  .exit_code,
              1);
}

TEST(Cli, UnknownConfigKeyRejected) {
    const std::string dir = fresh_dir("cfg");
    write_file(dir + "/bad.cfg", "warp_speed=9\n");
    ASSERT_EQ(run_cli({"gen-data", "--out", dir + "/c", "--train", "2", "--val", "1", "--test",
                       "1"})
                  .exit_code,
              0);
    EXPECT_EQ(run_cli({"train", "--variant", "base", "--data", dir + "/c", "--config",
                       dir + "/bad.cfg", "--out", dir + "/x.json"})
                  .exit_code,
              3);
}
