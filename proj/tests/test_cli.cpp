#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = ARCHSEARCH_CLI;
const std::string kGolden = std::string(ARCHSEARCH_TEST_DATA) + "/golden";

struct Out {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Out run(const std::string& args, const fs::path& dir) {
    const auto o = dir / "stdout.txt";
    const auto e = dir / "stderr.txt";
    const std::string cmd = "'" + kCli + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Out r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

// synth + ingest once for the whole suite
const fs::path& workspace() {
    static const fs::path dir = [] {
        auto d = fixtures::scratch("cli");
        const auto s = run("synth --out '" + (d / "corpus").string() + "'", d);
        EXPECT_EQ(s.code, 0) << s.err;
        const auto i = run("ingest --input '" + (d / "corpus" / "records.jsonl").string() + "' --index '" +
                               (d / "index").string() + "'",
                           d);
        EXPECT_EQ(i.code, 0) << i.err;
        return d;
    }();
    return dir;
}

}  // namespace

TEST(Cli, HelpIsZero) {
    const auto d = fixtures::scratch("cli_help");
    EXPECT_EQ(run("--help", d).code, 0);
}

TEST(Cli, UsageErrorIsOne) {
    const auto d = fixtures::scratch("cli_usage");
    EXPECT_EQ(run("search --no-such-flag", d).code, 1);
    EXPECT_EQ(run("frobnicate", d).code, 1);
}

TEST(Cli, MissingIndexIsTwo) {
    const auto d = fixtures::scratch("cli_missing");
    const auto r = run("search --index /nonexistent/idx --query pump", d);
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UnreachableEncoderIsThree) {
    const auto d = fixtures::scratch("cli_transport");
    {
        std::ofstream cfg(d / "engine.json");
        cfg << json{{"encoder_endpoint", "http://127.0.0.1:9"}, {"service_timeout_ms", 500}}.dump();
    }
    const auto r = run("ingest --input '" + (workspace() / "corpus" / "records.jsonl").string() + "' --index '" +
                           (d / "idx").string() + "' --config '" + (d / "engine.json").string() + "'",
                       d);
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, EmptyIngestWarns) {
    const auto d = fixtures::scratch("cli_empty");
    { std::ofstream(d / "empty.jsonl"); }
    const auto r =
        run("ingest --input '" + (d / "empty.jsonl").string() + "' --index '" + (d / "idx").string() + "'", d);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos) << r.err;
}

TEST(Cli, SearchRespectsK) {
    const auto& w = workspace();
    const auto r = run("search --index '" + (w / "index").string() + "' --query 'pump drawing' --k 3 --format json --no-timings", w);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_LE(j["results"].size(), 3u);
    EXPECT_GT(j["results"].size(), 0u);
    const auto again = run("search --index '" + (w / "index").string() + "' --query 'pump drawing' --k 3 --format json --no-timings", w);
    EXPECT_EQ(r.out, again.out);
}

TEST(Cli, EvalMatchesGoldenBytes) {
    const auto d = fixtures::scratch("cli_eval");
    const auto r = run("eval --run hybrid='" + kGolden + "/hybrid.jsonl' --run sparse='" + kGolden +
                           "/sparse.jsonl' --judgments '" + kGolden + "/judgments.jsonl' --docs '" + kGolden +
                           "/docs.jsonl' --queries '" + kGolden + "/queries.jsonl' --format json",
                       d);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, slurp(kGolden + "/expected_report.json"));
}

TEST(Cli, StubArenaDeterministic) {
    const auto& w = workspace();
    const std::string idx = (w / "index").string();
    const std::string q = (w / "corpus" / "queries.jsonl").string();
    std::ofstream(w / "sparse.json") << json{{"lambda", 1.0}}.dump();
    const auto hybrid = run("search --index '" + idx + "' --queries '" + q + "' --k 3 --system-id hybrid --run-out '" +
                                (w / "hybrid.run").string() + "'",
                            w);
    ASSERT_EQ(hybrid.code, 0) << hybrid.err;
    const auto sparse =
        run("search --index '" + idx + "' --queries '" + q + "' --k 3 --system-id sparse --run-out '" +
                (w / "sparse.run").string() + "' --params '" + (w / "sparse.json").string() + "'",
            w);
    ASSERT_EQ(sparse.code, 0) << sparse.err;
    const std::string arena = "judge arena --index '" + idx + "' --queries '" + q + "' --focal hybrid='" +
                              (w / "hybrid.run").string() + "' --run sparse='" + (w / "sparse.run").string() +
                              "' --stub --seed 3";
    const auto a = run(arena + " --out '" + (w / "a1.json").string() + "'", w);
    ASSERT_EQ(a.code, 0) << a.err;
    const auto b = run(arena + " --out '" + (w / "a2.json").string() + "'", w);
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(w / "a1.json"), slurp(w / "a2.json"));
}
