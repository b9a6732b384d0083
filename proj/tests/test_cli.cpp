#include "doctest.h"

#include <sstream>

#include <json.hpp>

#include "qexp/app.hpp"
#include "test_support.hpp"

using namespace qexp;
using qexp::testing::read_text;
using qexp::testing::TempDir;
using qexp::testing::write_text;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

/// Small corpus, index, queries and qrels in a temp dir.
struct Workspace {
    TempDir dir;
    std::string corpus = (dir / "corpus.jsonl").string();
    std::string index = (dir / "index.txt").string();
    std::string queries = (dir / "queries.tsv").string();
    std::string qrels = (dir / "qrels.txt").string();
    std::string out = (dir / "out").string();

    Workspace()
    {
        write_text(corpus,
                   "{\"id\": \"d1\", \"contents\": \"river bank erosion after floods\"}\n"
                   "{\"id\": \"d2\", \"contents\": \"bank loans and interest rates\"}\n"
                   "{\"id\": \"d3\", \"contents\": \"flood plains and river deltas\"}\n"
                   "{\"id\": \"d4\", \"contents\": \"sediment carried by river water\"}\n");
        write_text(queries, "2\triver flood\n10\tbank rates\n");
        write_text(qrels, "2 0 d3 2\n2 0 d1 1\n10 0 d2 1\n");
        auto r = cli({"index", "--corpus", corpus, "--index", index});
        REQUIRE(r.code == 0);
    }

    std::vector<std::string> run_args(const std::string& tag) const
    {
        return {"run", "--corpus", corpus, "--index", index, "--queries", queries, "--output-dir", out, "--tag", tag,
                "--mock", "echo_terms", "--seed", "7"};
    }
};

std::vector<nlohmann::json> jsonl(const std::string& text)
{
    std::vector<nlohmann::json> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        rows.push_back(nlohmann::json::parse(line));
    }
    return rows;
}

}  // namespace

TEST_CASE("index subcommand")
{
    TempDir dir;
    write_text(dir / "c.tsv", "a\tapple pie\nb\tberry tart\nc\tapple tart crumble\n");
    auto r = cli({"index", "--corpus", (dir / "c.tsv").string(), "--format", "tsv", "--index",
                  (dir / "i.txt").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("doc_count=3") != std::string::npos);
    CHECK(r.out.find("term_count=5") != std::string::npos);

    r = cli({"index", "--corpus", (dir / "c.tsv").string(), "--format", "tsv", "--index", (dir / "i.txt").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("--force") != std::string::npos);
    r = cli({"index", "--corpus", (dir / "c.tsv").string(), "--format", "tsv", "--index", (dir / "i.txt").string(),
             "--force"});
    CHECK(r.code == 0);

    r = cli({"index", "--corpus", (dir / "missing.jsonl").string(), "--index", (dir / "j.txt").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("missing.jsonl") != std::string::npos);

    r = cli({"index", "--corpus", (dir / "c.tsv").string()});
    CHECK(r.code != 0);
}

TEST_CASE("run subcommand writes run, trace and metadata")
{
    Workspace ws;
    auto args = ws.run_args("full");
    args.insert(args.end(), {"--qrels", ws.qrels});
    auto r = cli(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("12 generation calls") != std::string::npos);

    auto run = read_text(ws.out + "/full.run");
    // numeric qids sort numerically
    CHECK(run.rfind("2 Q0 ", 0) == 0);
    CHECK(run.find("10 Q0 d2 1 ") != std::string::npos);

    auto trace = jsonl(read_text(ws.out + "/full.trace.jsonl"));
    CHECK(trace.size() == 6);
    CHECK(trace[0]["query_id"] == "2");
    CHECK(trace[0]["round"] == 0);

    auto meta = nlohmann::json::parse(read_text(ws.out + "/full.meta.json"));
    CHECK(meta["generation_calls"] == 12);
    CHECK(meta["generation_calls_per_query"]["10"] == 6);
    CHECK(meta["backend"] == "mock:echo_terms");
    CHECK(meta["partial"] == false);
    CHECK(meta["prompt_template_sha1"].get<std::string>().size() == 40);
    CHECK(meta["config"]["pipeline"]["rounds"] == 3);
    CHECK(meta.contains("metrics"));
}

TEST_CASE("parallel mode trace has one record per query")
{
    Workspace ws;
    auto args = ws.run_args("par");
    args.insert(args.end(), {"--mode", "parallel"});
    REQUIRE(cli(args).code == 0);
    auto trace = jsonl(read_text(ws.out + "/par.trace.jsonl"));
    REQUIRE(trace.size() == 2);
    for (const auto& rec : trace) {
        CHECK(rec["expansion_count"] == 1);
    }
    auto meta = nlohmann::json::parse(read_text(ws.out + "/par.meta.json"));
    CHECK(meta["generation_calls"] == 12);
}

TEST_CASE("same seed gives byte-identical outputs")
{
    Workspace ws;
    auto a = ws.run_args("a");
    a.insert(a.end(), {"--parallelism", "2"});
    REQUIRE(cli(a).code == 0);
    REQUIRE(cli(ws.run_args("b")).code == 0);
    auto run_a = read_text(ws.out + "/a.run");
    auto run_b = read_text(ws.out + "/b.run");
    // Only the tag column differs.
    std::string::size_type pos = 0;
    while ((pos = run_a.find(" a\n", pos)) != std::string::npos) {
        run_a.replace(pos, 3, " b\n");
    }
    CHECK(run_a == run_b);
    CHECK(read_text(ws.out + "/a.trace.jsonl") == read_text(ws.out + "/b.trace.jsonl"));
}

TEST_CASE("failed queries leave a partial marker")
{
    Workspace ws;
    auto args = ws.run_args("bad");
    args.insert(args.end(), {"--mock", "fixed_text", "--mock-text", "<think>never ends", "-q"});
    auto r = cli(args);
    CHECK(r.code == 3);
    CHECK(std::filesystem::exists(ws.out + "/bad.PARTIAL"));
    auto meta = nlohmann::json::parse(read_text(ws.out + "/bad.meta.json"));
    CHECK(meta["partial"] == true);
    CHECK(meta["failed"].size() == 2);

    // A later successful run with the same tag clears the marker.
    REQUIRE(cli(ws.run_args("bad")).code == 0);
    CHECK_FALSE(std::filesystem::exists(ws.out + "/bad.PARTIAL"));
}

TEST_CASE("run input errors")
{
    Workspace ws;
    auto args = ws.run_args("x");
    args[2] = ws.dir.path().string() + "/nope.jsonl";
    auto r = cli(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("nope.jsonl") != std::string::npos);

    write_text(ws.dir / "q2.tsv", "1\tfine\n1\tdupe\n");
    args = ws.run_args("x");
    args[6] = (ws.dir / "q2.tsv").string();
    r = cli(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("q2.tsv:2") != std::string::npos);

    args = ws.run_args("x");
    args.insert(args.end(), {"--mode", "sideways"});
    CHECK(cli(args).code != 0);
}

TEST_CASE("eval subcommand")
{
    TempDir dir;
    write_text(dir / "qrels", "1 0 d1 1\n1 0 d2 2\n");
    write_text(dir / "ideal.run", "1 Q0 d2 1 2.0 t\n1 Q0 d1 2 1.0 t\n");
    auto r = cli({"eval", "--run", (dir / "ideal.run").string(), "--qrels", (dir / "qrels").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("1.0000  1.0000  1.0000") != std::string::npos);
    auto j = nlohmann::json::parse(read_text(dir / "ideal.run.eval.json"));
    CHECK(j["mean"]["ndcg_cut_10"] == 1.0);
    CHECK(j["gain"] == "exponential");

    write_text(dir / "bad.run", "1 Q0 d2 1 2.0 t\n1 Q0 d1 2\n");
    r = cli({"eval", "--run", (dir / "bad.run").string(), "--qrels", (dir / "qrels").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("bad.run:2:") != std::string::npos);
}

TEST_CASE("ablate subcommand")
{
    Workspace ws;
    auto args = ws.run_args("unused");
    args[0] = "ablate";
    args.insert(args.end(), {"--qrels", ws.qrels, "--domain", "toy"});
    auto r = cli(args);
    REQUIRE(r.code == 0);
    auto summary = read_text(ws.out + "/ablation_summary.tsv");
    // 3 grid cells, interaction_c2/c4, parallel_c1..c6
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 3 + 2 + 6);
    for (const char* cell : {"full", "accum_only", "filter_only", "interaction_c2", "interaction_c4", "parallel_c1",
                             "parallel_c6"}) {
        CAPTURE(cell);
        CHECK(summary.find(std::string("toy\t") + cell + "\t") != std::string::npos);
        CHECK(std::filesystem::exists(ws.out + "/toy." + cell + ".run"));
    }
    auto meta = nlohmann::json::parse(read_text(ws.out + "/toy.parallel_c5.meta.json"));
    CHECK(meta["generation_calls"] == 10);

    // A second domain adds rows; rerunning a cell replaces its row.
    args = ws.run_args("unused");
    args[0] = "ablate";
    args.insert(args.end(), {"--domain", "other", "--cells", "accum_only"});
    REQUIRE(cli(args).code == 0);
    args = ws.run_args("unused");
    args[0] = "ablate";
    args.insert(args.end(), {"--domain", "toy", "--cells", "full,accum_only"});
    REQUIRE(cli(args).code == 0);
    summary = read_text(ws.out + "/ablation_summary.tsv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 11 + 1);

    args.back() = "bogus";
    CHECK(cli(args).code == 1);
}

TEST_CASE("config file supplies defaults that flags override")
{
    Workspace ws;
    write_text(ws.dir / "cfg.toml", "[run]\nrounds = 1\nsamples = 3\nmock = \"echo_terms\"\n");
    auto args = ws.run_args("cfg");
    args.insert(args.begin(), {"--config", (ws.dir / "cfg.toml").string()});
    REQUIRE(cli(args).code == 0);
    auto meta = nlohmann::json::parse(read_text(ws.out + "/cfg.meta.json"));
    CHECK(meta["config"]["pipeline"]["rounds"] == 1);
    CHECK(meta["generation_calls"] == 6);

    args.insert(args.end(), {"--rounds", "2", "--tag", "cfg2"});
    REQUIRE(cli(args).code == 0);
    meta = nlohmann::json::parse(read_text(ws.out + "/cfg2.meta.json"));
    CHECK(meta["config"]["pipeline"]["rounds"] == 2);
    CHECK(meta["config"]["pipeline"]["samples_per_round"] == 3);
}

TEST_CASE("help and unknown subcommands")
{
    auto r = cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("ablate") != std::string::npos);
    CHECK(cli({"frobnicate"}).code != 0);
    CHECK(cli({}).code != 0);
}
