// Serial reference vs OpenMP kernels on a synthetic Zipf corpus.

#include <map>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "qexp/index.hpp"

namespace {

std::string word(std::size_t i)
{
    return "t" + std::to_string(i) + "x";
}

const qexp::Corpus& corpus_of(std::size_t n_docs)
{
    static std::map<std::size_t, qexp::Corpus> cache;
    auto it = cache.find(n_docs);
    if (it != cache.end()) {
        return it->second;
    }
    std::mt19937_64 rng(n_docs);
    std::vector<double> weights;
    for (std::size_t r = 1; r <= 20000; ++r) {
        weights.push_back(1.0 / static_cast<double>(r));
    }
    std::discrete_distribution<std::size_t> zipf(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> length(20, 120);
    std::vector<qexp::Document> docs;
    docs.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::string text;
        for (std::size_t i = length(rng); i > 0; --i) {
            text += word(zipf(rng));
            text += ' ';
        }
        docs.push_back({"doc" + std::to_string(d), std::move(text)});
    }
    return cache.emplace(n_docs, qexp::Corpus(std::move(docs))).first->second;
}

// Long queries, like expanded ones: a repeated seed query plus expansion text.
std::vector<std::string> queries()
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> term(0, 5000);
    std::vector<std::string> out;
    for (int q = 0; q < 16; ++q) {
        std::string text;
        for (int i = 0; i < 200; ++i) {
            text += word(term(rng)) + " ";
        }
        out.push_back(std::move(text));
    }
    return out;
}

void BM_BuildSerial(benchmark::State& state)
{
    const auto& corpus = corpus_of(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(qexp::serial::build_index(corpus));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BuildParallel(benchmark::State& state)
{
    const auto& corpus = corpus_of(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(qexp::build_index(corpus));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Search>
void search_bench(benchmark::State& state)
{
    const auto& corpus = corpus_of(static_cast<std::size_t>(state.range(0)));
    static std::map<std::size_t, qexp::PostingIndex> indexes;
    auto [it, fresh] = indexes.try_emplace(corpus.doc_count());
    if (fresh) {
        it->second = qexp::build_index(corpus);
    }
    const auto qs = queries();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(Search(it->second, qs[i++ % qs.size()], 1000));
    }
    state.SetItemsProcessed(state.iterations());
}

void BM_SearchSerial(benchmark::State& state)
{
    search_bench<qexp::serial::search_topk>(state);
}

void BM_SearchParallel(benchmark::State& state)
{
    search_bench<qexp::search_topk>(state);
}

}  // namespace

BENCHMARK(BM_BuildSerial)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildParallel)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SearchSerial)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SearchParallel)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
