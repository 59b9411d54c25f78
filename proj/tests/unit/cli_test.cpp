#include "procinv/codec.hpp"
#include "procinv/config.hpp"
#include "procinv/schema_json.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace procinv;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        m_dir = fs::temp_directory_path() / ("procinv_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(m_dir);
        fs::create_directories(m_dir);
    }
    void TearDown() override { fs::remove_all(m_dir); }

    struct Result {
        int status;
        std::string out;
        std::string err;
    };

    Result run(const std::string &args) const {
        const fs::path out = m_dir / "stdout.txt", err = m_dir / "stderr.txt";
        const std::string cmd = "cd " + m_dir.string() + " && " + PROCINV_CLI_PATH + " " + args + " >" +
                                out.string() + " 2>" + err.string();
        const int raw = std::system(cmd.c_str());
        return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read(out), read(err)};
    }

    static std::string read(const fs::path &p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    fs::path path(const std::string &name) const { return m_dir / name; }

    fs::path m_dir;
};

std::map<std::string, std::string> files_of(const fs::path &dir) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::directory_iterator(dir)) {
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        out[e.path().filename().string()] = s.str();
    }
    return out;
}

std::string line_after(const std::string &text, const std::string &key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " ", 0) == 0) {
            return line.substr(key.size() + 1);
        }
    }
    return "";
}

} // namespace

TEST_F(CliTest, GenDatasetIsByteIdenticalAcrossRuns) {
    const Result a = run("gen-dataset --n 12 --seed 7 --records-per-shard 5 --out a");
    const Result b = run("gen-dataset --n 12 --seed 7 --records-per-shard 5 --out b");
    ASSERT_EQ(a.status, 0) << a.err;
    ASSERT_EQ(b.status, 0) << b.err;
    const auto fa = files_of(path("a"));
    const auto fb = files_of(path("b"));
    EXPECT_EQ(fa.size(), 5U); // three shards, manifest, vocabulary
    EXPECT_EQ(fa, fb);
    const auto manifest = nlohmann::json::parse(fa.at("manifest.json"));
    EXPECT_EQ(manifest.at("record_count"), 12);
    EXPECT_EQ(manifest.at("augmented_count"), 6);
    const auto vocab = nlohmann::json::parse(fa.at("vocabulary.json"));
    EXPECT_EQ(vocab.at("vocab_size"), 3435);
}

TEST_F(CliTest, ResolvedConfigIsPrintedWithItsHash) {
    {
        std::ofstream cfg(path("cfg.json"));
        cfg << R"({"seed": 5, "catalog": {"size": 32}, "render": {"density": 10}})";
    }
    const Result r = run("sample-building --config cfg.json --seed 9 --out b.json");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto resolved = nlohmann::json::parse(line_after(r.out, "config"));
    EXPECT_EQ(resolved.at("seed"), 9);                // flag beats file
    EXPECT_EQ(resolved.at("catalog").at("size"), 32); // file beats default
    EXPECT_EQ(resolved.at("render").at("density"), 10);
    EXPECT_EQ(resolved.at("catalog").at("seed"), 0);
    EXPECT_EQ(line_after(r.out, "config_hash"), config_hash(resolved));

    // Replaying the printed config reproduces the output.
    {
        std::ofstream replay(path("replay.json"));
        nlohmann::json again = resolved;
        again["output"] = "b2.json";
        replay << again.dump();
    }
    ASSERT_EQ(run("sample-building --config replay.json").status, 0);
    EXPECT_EQ(read(path("b.json")), read(path("b2.json")));
}

TEST_F(CliTest, EncodeDecodeRoundTrip) {
    ASSERT_EQ(run("sample-building --seed 11 --out b.json").status, 0);
    for (const std::string tokens : {"t.bin", "t.json"}) {
        ASSERT_EQ(run("encode --building b.json --out " + tokens).status, 0);
        const Result d = run("decode --tokens " + tokens + " --out back.json");
        ASSERT_EQ(d.status, 0) << d.err;
        EXPECT_EQ(load_building_json(path("back.json").string()), load_building_json(path("b.json").string()));
    }
    std::ifstream bin(path("t.bin"), std::ios::binary);
    const TokenSequence from_bin = read_token_sequence(bin);
    EXPECT_EQ(from_bin, load_json_file(path("t.json").string()).get<TokenSequence>());
}

TEST_F(CliTest, EvalSelfGivesPerfectScores) {
    const Result r = run("eval --pairs self --n 6 --seed 3 --out metrics");
    ASSERT_EQ(r.status, 0) << r.err;
    for (const char *row : {"Accuracy number of storeys", "Accuracy number of facades", "Accuracy storeys structure",
                            "Assets: precision", "Assets: recall", "IoU Material Variations"}) {
        EXPECT_NE(r.out.find(row), std::string::npos) << row;
    }
    std::istringstream in(r.out);
    std::string line;
    int perfect = 0;
    while (std::getline(in, line)) {
        if (line.find("100.0%") != std::string::npos) {
            ++perfect;
        }
        if (line.rfind("L2 HSV Color Distance", 0) == 0) {
            EXPECT_NE(line.find("0.000"), std::string::npos);
        }
    }
    EXPECT_EQ(perfect, 6);
    const std::string csv = read(path("metrics/table.csv"));
    EXPECT_NE(csv.find("storey_count_accuracy,1"), std::string::npos) << csv;
}

TEST_F(CliTest, RenderPerturbAndExport) {
    ASSERT_EQ(run("sample-building --seed 2 --out b.json").status, 0);
    ASSERT_EQ(run("render --building b.json --out c.ply --density 5 --noise 0").status, 0);
    for (const std::string kind : {"drop-random", "drop-center", "split", "dropout"}) {
        const Result r = run("perturb --in c.ply --out p.ply --kind " + kind);
        EXPECT_EQ(r.status, 0) << kind << r.err;
    }
    ASSERT_EQ(run("export-obj --building b.json --out b.obj").status, 0);
    EXPECT_EQ(read(path("b.obj")).rfind("v ", 0), 0U);
}

TEST_F(CliTest, RolloutWithBuiltinAndBridgePolicies) {
    const Result u = run("rollout --policy uniform --count 4 --seed 1 --out u");
    ASSERT_EQ(u.status, 0) << u.err;
    const auto summary = load_json_file(path("u/rollouts.json").string());
    EXPECT_EQ(summary.size(), 4U);
    EXPECT_EQ(summary[2].at("seed"), 3);

    ASSERT_EQ(run("sample-building --seed 4 --out b.json --tokens-out t.bin").status, 0);
    const Result o = run(std::string("rollout --policy bridge --mode greedy --bridge-cmd '") +
                         PROCINV_FAKE_POLICY_PATH + " --oracle t.bin' --out o");
    ASSERT_EQ(o.status, 0) << o.err;
    EXPECT_EQ(load_building_json(path("o/rollout-00000.json").string()), load_building_json(path("b.json").string()));

    const Result f = run(std::string("rollout --policy bridge --bridge-cmd '") + PROCINV_FAKE_POLICY_PATH +
                         " --fault garbage' --out f");
    EXPECT_NE(f.status, 0);
    EXPECT_EQ(nlohmann::json::parse(f.err).at("error"), "policy");
}

TEST_F(CliTest, ErrorsAreSingleLineJsonRecords) {
    const struct {
        std::string args;
        std::string kind;
    } cases[] = {
        {"decode --tokens missing.bin --out x.json", "io"},
        {"rollout --policy telepathy --out r", "config"},
        {"gen-dataset --n 5 --holdout 2 --out d", "config"},
        {"render --out c.ply", "config"},
        {"sample-building --bogus-flag", "usage"},
    };
    for (const auto &c : cases) {
        const Result r = run(c.args);
        EXPECT_NE(r.status, 0) << c.args;
        ASSERT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
        const auto record = nlohmann::json::parse(r.err);
        EXPECT_EQ(record.at("error"), c.kind) << c.args;
        EXPECT_TRUE(record.at("message").is_string());
    }
    {
        std::ofstream bad(path("bad.bin"), std::ios::binary);
        write_token_sequence(bad, TokenSequence{3432, 3432});
    }
    const Result r = run("decode --tokens bad.bin --out x.json");
    EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "parse");
}
