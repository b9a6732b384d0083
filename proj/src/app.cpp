#include "qexp/app.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qexp/chat_backend.hpp"
#include "qexp/eval.hpp"
#include "qexp/util.hpp"

namespace qexp {

namespace {

namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitPartial = 3;

bool qid_less(const std::string& a, const std::string& b)
{
    auto numeric = [](const std::string& s) {
        return !s.empty() && s.size() < 19 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (numeric(a) && numeric(b)) {
        auto x = std::stoull(a);
        auto y = std::stoull(b);
        if (x != y) {
            return x < y;
        }
    }
    return a < b;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

void require_path(const fs::path& path, const char* what)
{
    if (path.empty()) {
        throw std::invalid_argument(std::string(what) + " path is required");
    }
    if (!fs::exists(path)) {
        throw std::invalid_argument(std::string(what) + " not found: " + path.string());
    }
}

struct RunOutputs {
    fs::path run;
    fs::path trace;
    fs::path meta;
    fs::path partial_marker;
    std::uint64_t generation_calls = 0;
    std::optional<EvalReport> report;
    bool partial = false;
};

RunOutputs execute_run(const RunConfig& cfg,
                       const Corpus& corpus,
                       const PostingIndex& index,
                       const std::vector<Query>& queries,
                       const std::optional<Qrels>& qrels,
                       std::ostream& out)
{
    fs::create_directories(cfg.output_dir);
    RunOutputs outputs;
    outputs.run = cfg.output_dir / (cfg.tag + ".run");
    outputs.trace = cfg.output_dir / (cfg.tag + ".trace.jsonl");
    outputs.meta = cfg.output_dir / (cfg.tag + ".meta.json");
    outputs.partial_marker = cfg.output_dir / (cfg.tag + ".PARTIAL");
    fs::remove(outputs.partial_marker);

    std::shared_ptr<TraceLog> generation_log;
    if (cfg.log_generations) {
        auto log_path = cfg.output_dir / (cfg.tag + ".generations.jsonl");
        fs::remove(log_path);
        generation_log = std::make_shared<TraceLog>(log_path);
    }
    auto backend = make_backend(cfg.backend);
    ExpansionClient client(backend, generation_log);
    RetrievalContext ctx{index, corpus, client};

    auto outcomes = run_batch(queries, ctx, cfg.pipeline, cfg.seed, cfg.parallelism);

    std::string run_text;
    std::string trace_text;
    RunFile run_file;
    nlohmann::json failed = nlohmann::json::array();
    nlohmann::json per_query_calls = nlohmann::json::object();
    for (const auto& o : outcomes) {
        if (!o.result) {
            failed.push_back({{"qid", o.qid}, {"error", o.error}});
            continue;
        }
        std::vector<RunEntry> ranking;
        for (const auto& hit : o.result->final_hits) {
            ranking.push_back(RunEntry{hit.doc_id, hit.score});
        }
        run_text += format_run_lines(o.qid, ranking, cfg.tag);
        run_file.queries[o.qid] = std::move(ranking);
        for (const auto& record : o.result->trace) {
            trace_text += to_json(record, o.qid).dump();
            trace_text += '\n';
        }
        outputs.generation_calls += o.result->generation_calls;
        per_query_calls[o.qid] = o.result->generation_calls;
    }
    write_file(outputs.run, run_text);
    write_file(outputs.trace, trace_text);
    outputs.partial = !failed.empty();

    nlohmann::json meta = {
        {"tag", cfg.tag},
        {"config", cfg.to_json()},
        {"backend", backend->identity()},
        {"prompt_template_sha1", git_blob_sha1(prompt_template())},
        {"prompt_framing", "single user message, no system role"},
        {"generation_calls", outputs.generation_calls},
        {"generation_calls_per_query", per_query_calls},
        {"backend_requests", client.requests()},
        {"prefill_fallbacks", client.prefill_fallbacks()},
        {"prefill_deviation", client.prefill_fallbacks() > 0},
        {"queries", queries.size()},
        {"completed", queries.size() - failed.size()},
        {"partial", outputs.partial},
        {"failed", failed},
        {"index", {{"doc_count", index.doc_count()},
                   {"term_count", index.term_count()},
                   {"k1", index.params().k1},
                   {"b", index.params().b}}},
    };
    if (qrels && !run_file.queries.empty()) {
        try {
            EvalOptions options;
            options.binary_threshold = cfg.binary_threshold;
            outputs.report = evaluate_run(run_file, *qrels, options);
            meta["metrics"] = outputs.report->to_json()["mean"];
        } catch (const std::invalid_argument& e) {
            log_warning(std::string("skipping evaluation: ") + e.what());
        }
    }
    write_file(outputs.meta, meta.dump(2) + "\n");
    if (outputs.partial) {
        write_file(outputs.partial_marker,
                   "incomplete run: " + std::to_string(failed.size()) + " queries failed\n" + failed.dump(2) + "\n");
    }
    out << "wrote " << outputs.run.string() << " (" << run_file.queries.size() << " queries, "
        << outputs.generation_calls << " generation calls)\n";
    return outputs;
}

struct LoadedInputs {
    Corpus corpus;
    PostingIndex index;
    std::vector<Query> queries;
    std::optional<Qrels> qrels;
};

LoadedInputs load_inputs(const RunConfig& cfg)
{
    cfg.validate();
    LoadedInputs in;
    in.corpus = ingest_corpus(cfg.corpus, cfg.corpus_format);
    in.index = PostingIndex::load(cfg.index);
    if (in.index.doc_count() != in.corpus.doc_count()) {
        throw std::invalid_argument("index " + cfg.index.string() + " has " + std::to_string(in.index.doc_count())
                                    + " documents but corpus has " + std::to_string(in.corpus.doc_count()));
    }
    in.queries = read_queries(cfg.queries);
    if (!cfg.qrels.empty()) {
        in.qrels = read_qrels(cfg.qrels);
    }
    return in;
}

int cmd_index(const fs::path& corpus_path,
              CorpusFormat format,
              const fs::path& index_path,
              const Bm25Params& params,
              bool force,
              std::ostream& out)
{
    if (index_path.empty()) {
        throw std::invalid_argument("index path is required");
    }
    if (fs::exists(index_path) && !force) {
        throw std::invalid_argument("refusing to overwrite existing index " + index_path.string()
                                    + " (pass --force to rebuild)");
    }
    Corpus corpus = ingest_corpus(corpus_path, format);
    PostingIndex index = build_index(corpus, params);
    if (index_path.has_parent_path()) {
        fs::create_directories(index_path.parent_path());
    }
    index.save(index_path);
    out << "doc_count=" << index.doc_count() << '\n'
        << "term_count=" << index.term_count() << '\n'
        << "avg_doc_length=" << std::setprecision(6) << index.avg_doc_length() << '\n'
        << "index=" << index_path.string() << '\n';
    return 0;
}

int cmd_run(const RunConfig& cfg, std::ostream& out)
{
    auto in = load_inputs(cfg);
    auto outputs = execute_run(cfg, in.corpus, in.index, in.queries, in.qrels, out);
    if (outputs.report) {
        out << outputs.report->to_table();
    }
    return outputs.partial ? kExitPartial : 0;
}

int cmd_eval(const fs::path& run_path,
             const fs::path& qrels_path,
             const EvalOptions& options,
             fs::path json_path,
             std::ostream& out)
{
    RunFile run = read_run(run_path);
    Qrels qrels = read_qrels(qrels_path);
    EvalReport report = evaluate_run(run, qrels, options);
    out << report.to_table();
    if (json_path.empty()) {
        json_path = run_path;
        json_path += ".eval.json";
    }
    auto j = report.to_json();
    j["binary_threshold"] = options.binary_threshold;
    j["gain"] = to_string(options.gain);
    write_file(json_path, j.dump(2) + "\n");
    return 0;
}

struct Cell {
    std::string name;
    std::string group;
    PipelineConfig config;
};

std::vector<Cell> ablation_cells(const PipelineConfig& base, const std::set<std::string>& wanted)
{
    std::vector<Cell> cells;
    auto want = [&](const std::string& group) { return wanted.empty() || wanted.contains(group); };
    auto with = [&](bool accumulate, bool filter) {
        PipelineConfig c = base;
        c.mode = ScalingMode::interaction;
        c.accumulation_enabled = accumulate;
        c.filter_enabled = filter;
        return c;
    };
    if (want("full")) {
        cells.push_back({"full", "full", with(true, true)});
    }
    if (want("accum_only")) {
        cells.push_back({"accum_only", "accum_only", with(true, false)});
    }
    if (want("filter_only")) {
        cells.push_back({"filter_only", "filter_only", with(false, true)});
    }
    if (want("interaction")) {
        for (int r = 1; r < base.rounds; ++r) {
            PipelineConfig c = with(true, true);
            c.rounds = r;
            cells.push_back({"interaction_c" + std::to_string(r * base.samples_per_round), "interaction", c});
        }
    }
    if (want("parallel")) {
        // One sample per "round" so every call count up to the budget appears.
        for (int calls = 1; calls <= base.rounds * base.samples_per_round; ++calls) {
            PipelineConfig c = base;
            c.mode = ScalingMode::parallel;
            c.rounds = calls;
            c.samples_per_round = 1;
            cells.push_back({"parallel_c" + std::to_string(calls), "parallel", c});
        }
    }
    return cells;
}

std::string fmt_metric(const std::optional<EvalReport>& report, double EvalReport::*field)
{
    if (!report) {
        return "-";
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << (*report).*field;
    return os.str();
}

int cmd_ablate(const RunConfig& base, const std::vector<std::string>& cell_names, std::string domain, std::ostream& out)
{
    static const std::set<std::string> kKnown = {"full", "accum_only", "filter_only", "interaction", "parallel"};
    std::set<std::string> wanted;
    for (const auto& c : cell_names) {
        if (!kKnown.contains(c)) {
            throw std::invalid_argument("unknown ablation cell: " + c);
        }
        wanted.insert(c);
    }
    auto in = load_inputs(base);
    if (domain.empty()) {
        domain = base.queries.stem().string();
    }

    const std::string header = "domain\tcell\tmode\taccumulation\tfilter\trounds\tsamples\tgeneration_calls\tmap\tndcg_cut_10\trecall_1000\trun";
    std::vector<std::string> rows;
    bool partial = false;
    for (const auto& cell : ablation_cells(base.pipeline, wanted)) {
        RunConfig cfg = base;
        cfg.pipeline = cell.config;
        cfg.tag = domain + "." + cell.name;
        auto outputs = execute_run(cfg, in.corpus, in.index, in.queries, in.qrels, out);
        partial = partial || outputs.partial;
        std::ostringstream row;
        row << domain << '\t' << cell.name << '\t' << to_string(cell.config.mode) << '\t'
            << (cell.config.accumulation_enabled ? "yes" : "no") << '\t' << (cell.config.filter_enabled ? "yes" : "no")
            << '\t' << cell.config.rounds << '\t' << cell.config.samples_per_round << '\t' << outputs.generation_calls
            << '\t' << fmt_metric(outputs.report, &EvalReport::mean_map) << '\t'
            << fmt_metric(outputs.report, &EvalReport::mean_ndcg10) << '\t'
            << fmt_metric(outputs.report, &EvalReport::mean_recall1000) << '\t' << outputs.run.filename().string();
        rows.push_back(row.str());
    }

    // Rows from other domains (or cells not rerun) survive; reruns replace.
    const fs::path summary = base.output_dir / "ablation_summary.tsv";
    std::vector<std::string> kept;
    if (std::ifstream existing{summary}) {
        std::string line;
        std::getline(existing, line);
        while (std::getline(existing, line)) {
            auto fields = split_whitespace(line);
            bool replaced = false;
            for (const auto& r : rows) {
                auto rf = split_whitespace(r);
                if (fields.size() > 1 && fields[0] == rf[0] && fields[1] == rf[1]) {
                    replaced = true;
                }
            }
            if (!replaced && !line.empty()) {
                kept.push_back(line);
            }
        }
    }
    kept.insert(kept.end(), rows.begin(), rows.end());
    std::string text = header + "\n";
    for (const auto& r : kept) {
        text += r + "\n";
    }
    write_file(summary, text);

    out << "\nablation summary (" << summary.string() << ")\n";
    out << std::left << std::setw(18) << "cell" << std::setw(13) << "mode" << std::setw(7) << "accum" << std::setw(8)
        << "filter" << std::setw(7) << "calls" << "nDCG@10\n";
    for (const auto& r : rows) {
        auto f = split_whitespace(r);
        out << std::left << std::setw(18) << f[1] << std::setw(13) << f[2] << std::setw(7) << f[3] << std::setw(8)
            << f[4] << std::setw(7) << f[7] << f[9] << '\n';
    }
    return partial ? kExitPartial : 0;
}

void add_run_options(CLI::App& cmd, RunConfig& cfg, std::string& format, std::string& mode, std::string& thinking,
                     bool& no_accumulation, bool& no_filter)
{
    cmd.add_option("--corpus", cfg.corpus, "Corpus file")->required();
    cmd.add_option("--format", format, "Corpus format")->check(CLI::IsMember({"jsonl", "tsv"}));
    cmd.add_option("--index", cfg.index, "Index file written by `qexp index`")->required();
    cmd.add_option("--queries", cfg.queries, "Queries TSV: qid<TAB>text")->required();
    cmd.add_option("--qrels", cfg.qrels, "Optional qrels; runs are evaluated when given");
    cmd.add_option("--output-dir", cfg.output_dir, "Directory for run, trace and metadata files");
    cmd.add_option("--tag", cfg.tag, "Run tag (file stem and TREC run tag)");
    cmd.add_option("--threshold", cfg.binary_threshold, "Minimum relevant grade for mAP/recall");

    cmd.add_option("--base-url", cfg.backend.base_url, "Chat-completions base URL");
    cmd.add_option("--model", cfg.backend.model, "Generator model name");
    cmd.add_option("--api-key-env", cfg.backend.api_key_env, "Environment variable holding the API key");
    cmd.add_option("--mock", cfg.backend.mock, "Use a deterministic mock backend")
        ->check(CLI::IsMember({"none", "echo_terms", "fixed_text"}));
    cmd.add_option("--mock-text", cfg.backend.mock_text, "Answer text for --mock fixed_text");
    cmd.add_option("--rps", cfg.backend.requests_per_second, "Request rate limit (0 = unlimited)");
    cmd.add_option("--max-attempts", cfg.backend.max_attempts, "Attempts per request on transient failure");
    cmd.add_option("--backoff-ms", cfg.backend.initial_backoff_ms, "Initial retry backoff");

    auto& p = cfg.pipeline;
    cmd.add_option("--rounds", p.rounds, "Interaction rounds")->check(CLI::NonNegativeNumber);
    cmd.add_option("--top-k", p.top_k_feedback, "Feedback documents per round")->check(CLI::PositiveNumber);
    cmd.add_option("--truncate", p.prompt_doc_truncation, "Tokens kept per feedback document")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--samples", p.samples_per_round, "Generations per round")->check(CLI::PositiveNumber);
    cmd.add_option("--lambda", p.lambda, "Query repetition divisor")->check(CLI::PositiveNumber);
    cmd.add_option("--mode", mode, "Scaling mode")->check(CLI::IsMember({"interaction", "parallel"}));
    cmd.add_flag("--no-accumulation", no_accumulation, "Keep only the latest expansion segment");
    cmd.add_flag("--no-filter", no_filter, "Disable redundancy filtering");
    cmd.add_option("--depth", p.retrieval_depth, "Retrieval depth")->check(CLI::PositiveNumber);
    cmd.add_option("--temperature", p.generation.temperature, "Sampling temperature");
    cmd.add_option("--max-tokens", p.generation.max_output_tokens, "Generation token limit");
    cmd.add_option("--thinking", thinking, "Thinking mode")
        ->check(CLI::IsMember({"think", "no_think_prefill", "base_model"}));
    cmd.add_option("--seed", cfg.seed, "Random seed");
    cmd.add_option("--parallelism", cfg.parallelism, "Queries processed concurrently")->check(CLI::PositiveNumber);
    cmd.add_flag("--log-generations", cfg.log_generations, "Write every request/response pair to JSONL");
}

void finish_run_options(RunConfig& cfg, const std::string& format, const std::string& mode,
                        const std::string& thinking, bool no_accumulation, bool no_filter)
{
    cfg.corpus_format = parse_corpus_format(format);
    cfg.pipeline.mode = parse_scaling_mode(mode);
    cfg.pipeline.generation.thinking_mode = parse_thinking_mode(thinking);
    cfg.pipeline.accumulation_enabled = !no_accumulation;
    cfg.pipeline.filter_enabled = !no_filter;
}

}  // namespace

std::vector<Query> read_queries(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::invalid_argument("cannot open queries file: " + path.string());
    }
    std::vector<Query> queries;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || trim(std::string_view(line).substr(tab + 1)).empty()) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected qid<TAB>text");
        }
        Query q{line.substr(0, tab), std::string(trim(std::string_view(line).substr(tab + 1)))};
        if (!seen.insert(q.qid).second) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": duplicate query id " + q.qid);
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

void RunConfig::validate() const
{
    require_path(corpus, "corpus");
    require_path(index, "index");
    require_path(queries, "queries");
    if (!qrels.empty()) {
        require_path(qrels, "qrels");
    }
    if (parallelism < 1) {
        throw std::invalid_argument("parallelism must be at least 1");
    }
    if (tag.empty() || tag.find_first_of(" \t\n/") != std::string::npos) {
        throw std::invalid_argument("run tag must be non-empty without whitespace or '/'");
    }
    pipeline.validate();
}

nlohmann::json RunConfig::to_json() const
{
    const auto& p = pipeline;
    return {
        {"corpus", corpus.string()},
        {"corpus_format", to_string(corpus_format)},
        {"index", index.string()},
        {"queries", queries.string()},
        {"qrels", qrels.string()},
        {"output_dir", output_dir.string()},
        {"tag", tag},
        {"seed", seed},
        {"parallelism", parallelism},
        {"binary_threshold", binary_threshold},
        {"backend",
         {{"base_url", backend.base_url},
          {"model", backend.model},
          {"api_key_env", backend.api_key_env},
          {"mock", backend.mock},
          {"mock_text", backend.mock_text},
          {"requests_per_second", backend.requests_per_second},
          {"max_attempts", backend.max_attempts},
          {"initial_backoff_ms", backend.initial_backoff_ms}}},
        {"pipeline",
         {{"rounds", p.rounds},
          {"top_k_feedback", p.top_k_feedback},
          {"prompt_doc_truncation", p.prompt_doc_truncation},
          {"samples_per_round", p.samples_per_round},
          {"lambda", p.lambda},
          {"mode", to_string(p.mode)},
          {"accumulation_enabled", p.accumulation_enabled},
          {"filter_enabled", p.filter_enabled},
          {"retrieval_depth", p.retrieval_depth},
          {"temperature", p.generation.temperature},
          {"max_output_tokens", p.generation.max_output_tokens},
          {"thinking_mode", to_string(p.generation.thinking_mode)}}},
    };
}

std::shared_ptr<ExpansionBackend> make_backend(const BackendSettings& settings)
{
    if (settings.mock != "none") {
        return std::make_shared<MockBackend>(parse_mock_mode(settings.mock), settings.mock_text);
    }
    ChatBackendConfig config;
    config.base_url = settings.base_url;
    config.model = settings.model;
    if (!settings.api_key_env.empty()) {
        if (const char* key = std::getenv(settings.api_key_env.c_str())) {
            config.api_key = key;
        }
    }
    config.requests_per_second = settings.requests_per_second;
    config.retry.max_attempts = settings.max_attempts;
    config.retry.initial_backoff = std::chrono::milliseconds(settings.initial_backoff_ms);
    return std::make_shared<ChatCompletionsBackend>(std::move(config));
}

std::vector<QueryOutcome> run_batch(const std::vector<Query>& queries,
                                    RetrievalContext ctx,
                                    const PipelineConfig& config,
                                    std::uint64_t seed,
                                    int parallelism)
{
    std::vector<QueryOutcome> outcomes(queries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < queries.size(); i = next++) {
            auto& o = outcomes[i];
            o.qid = queries[i].qid;
            try {
                o.result = run_pipeline(queries[i].text, ctx, config, seed ^ fnv1a64(queries[i].qid));
            } catch (const std::exception& e) {
                o.error = e.what();
                log_warning("query " + o.qid + " failed: " + e.what());
            }
        }
    };
    const auto n_workers = static_cast<std::size_t>(std::max(1, parallelism));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(n_workers, queries.size()); ++w) {
            pool.emplace_back(worker);
        }
    }
    std::stable_sort(outcomes.begin(), outcomes.end(),
                     [](const QueryOutcome& a, const QueryOutcome& b) { return qid_less(a.qid, b.qid); });
    return outcomes;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Iterative LLM query expansion over a BM25 index"};
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
    app.require_subcommand(1);
    app.fallthrough();
    // Repeated options: the last occurrence wins.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    bool quiet = false;
    bool verbose = false;
    app.add_flag("-q,--quiet", quiet, "Suppress warnings");
    app.add_flag("-v,--verbose", verbose, "Print progress information");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build a BM25 index from a corpus");
    fs::path index_corpus;
    fs::path index_out;
    std::string index_format = "jsonl";
    Bm25Params bm25;
    bool force = false;
    index_cmd->add_option("--corpus", index_corpus, "Corpus file")->required();
    index_cmd->add_option("--format", index_format, "Corpus format")->check(CLI::IsMember({"jsonl", "tsv"}));
    index_cmd->add_option("--index", index_out, "Output index file")->required();
    index_cmd->add_option("--k1", bm25.k1, "BM25 k1");
    index_cmd->add_option("--b", bm25.b, "BM25 b");
    index_cmd->add_flag("--force", force, "Overwrite an existing index");

    // run / ablate
    RunConfig run_cfg;
    std::string run_format = "jsonl";
    std::string run_mode = "interaction";
    std::string run_thinking = "think";
    bool run_no_accum = false;
    bool run_no_filter = false;
    auto* run_cmd = app.add_subcommand("run", "Run query expansion and retrieval for a query set");
    add_run_options(*run_cmd, run_cfg, run_format, run_mode, run_thinking, run_no_accum, run_no_filter);

    RunConfig abl_cfg;
    std::string abl_format = "jsonl";
    std::string abl_mode = "interaction";
    std::string abl_thinking = "think";
    bool abl_no_accum = false;
    bool abl_no_filter = false;
    std::vector<std::string> cells;
    std::string domain;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the accumulation/filter grid and both scaling modes");
    add_run_options(*ablate_cmd, abl_cfg, abl_format, abl_mode, abl_thinking, abl_no_accum, abl_no_filter);
    ablate_cmd->add_option("--cells", cells, "Subset of: full, accum_only, filter_only, interaction, parallel")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    ablate_cmd->add_option("--domain", domain, "Domain label for the summary table (default: queries file stem)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score a TREC run against qrels");
    fs::path eval_run;
    fs::path eval_qrels;
    fs::path eval_json;
    EvalOptions eval_options;
    std::string gain = "exponential";
    eval_cmd->add_option("--run", eval_run, "TREC run file")->required();
    eval_cmd->add_option("--qrels", eval_qrels, "TREC qrels file")->required();
    eval_cmd->add_option("--threshold", eval_options.binary_threshold, "Minimum relevant grade for mAP/recall");
    eval_cmd->add_option("--gain", gain, "nDCG gain: exponential (2^g-1) or linear (trec_eval)")
        ->check(CLI::IsMember({"exponential", "exp", "linear"}));
    eval_cmd->add_option("--json", eval_json, "JSON output path (default: <run>.eval.json)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    set_log_level(quiet ? LogLevel::quiet : verbose ? LogLevel::info : LogLevel::warning);

    try {
        if (*index_cmd) {
            return cmd_index(index_corpus, parse_corpus_format(index_format), index_out, bm25, force, out);
        }
        if (*run_cmd) {
            finish_run_options(run_cfg, run_format, run_mode, run_thinking, run_no_accum, run_no_filter);
            return cmd_run(run_cfg, out);
        }
        if (*ablate_cmd) {
            finish_run_options(abl_cfg, abl_format, abl_mode, abl_thinking, abl_no_accum, abl_no_filter);
            return cmd_ablate(abl_cfg, cells, domain, out);
        }
        if (*eval_cmd) {
            eval_options.gain = parse_gain(gain);
            return cmd_eval(eval_run, eval_qrels, eval_options, eval_json, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace qexp
