#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "reclink/rng.hpp"
#include "reclink/vecindex.hpp"

namespace {

std::vector<std::pair<std::string, std::vector<float>>> random_corpus(
    std::size_t n, std::size_t dim, std::uint64_t seed) {
    reclink::Rng rng(seed);
    std::vector<std::pair<std::string, std::vector<float>>> corpus(n);
    for (std::size_t i = 0; i < n; ++i) {
        corpus[i].first = std::to_string(i);
        std::vector<float> v(dim);
        for (float& x : v) x = static_cast<float>(rng.gaussian());
        corpus[i].second = reclink::index::l2_normalize(v);
    }
    return corpus;
}

void BM_SearchTopK(benchmark::State& state) {
    const std::size_t dim = 128;
    const auto corpus = random_corpus(static_cast<std::size_t>(state.range(0)),
                                      dim, 11);
    const auto idx = reclink::index::FlatIndex::build(corpus);
    const auto queries = random_corpus(64, dim, 12);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            idx.search(queries[i & 63].second, static_cast<std::size_t>(10)));
        ++i;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(BM_SearchTopK)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_BatchTop1(benchmark::State& state) {
    const std::size_t dim = 512;
    const auto corpus = random_corpus(10000, dim, 21);
    const auto idx = reclink::index::FlatIndex::build(corpus);
    std::vector<std::vector<float>> queries;
    for (const auto& [id, v] : random_corpus(512, dim, 22))
        queries.push_back(v);
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(idx.search_top1_batch(queries, threads));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(queries.size()) * 10000);
}
BENCHMARK(BM_BatchTop1)->Arg(1)->Arg(2)->Arg(8)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
