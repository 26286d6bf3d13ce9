#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "reclink/rng.hpp"
#include "reclink/strmetrics.hpp"
#include "reclink/utf8.hpp"

namespace {

std::vector<std::string> random_strings(std::size_t n, std::size_t max_len,
                                        bool ascii_only, std::uint64_t seed) {
    reclink::Rng rng(seed);
    const std::u32string ascii = U"abcdefghijklmnopqrstuvwxyz0123456789";
    const std::u32string mixed = ascii + U"株式会社製紙東京永水菓薬";
    const std::u32string& alphabet = ascii_only ? ascii : mixed;
    std::vector<std::string> out(n);
    for (std::string& s : out) {
        const std::size_t len = rng.uniform_int(max_len + 1);
        for (std::size_t i = 0; i < len; ++i)
            reclink::utf8_append(s, alphabet[rng.uniform_int(alphabet.size())]);
    }
    return out;
}

void BM_LevenshteinAscii(benchmark::State& state) {
    const auto strings =
        random_strings(1024, static_cast<std::size_t>(state.range(0)), true, 1);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(reclink::str::levenshtein(
            strings[i & 1023], strings[(i + 511) & 1023]));
        ++i;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LevenshteinAscii)->Arg(10)->Arg(20)->Arg(40);

void BM_LevenshteinUnicode(benchmark::State& state) {
    const auto strings =
        random_strings(1024, static_cast<std::size_t>(state.range(0)), false, 2);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(reclink::str::levenshtein(
            strings[i & 1023], strings[(i + 511) & 1023]));
        ++i;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LevenshteinUnicode)->Arg(10)->Arg(20)->Arg(40);

void BM_NGramCosine(benchmark::State& state) {
    const auto strings = random_strings(1024, 20, false, 3);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(reclink::str::ngram_cosine(
            strings[i & 1023], strings[(i + 511) & 1023], 3,
            reclink::str::Unit::kCharacter));
        ++i;
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_NGramCosine);

}  // namespace

BENCHMARK_MAIN();
