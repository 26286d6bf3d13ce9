#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "reclink/record.hpp"

namespace reclink::str {

/// Minimal number of insertions/deletions/substitutions between two
/// unicode strings, computed over code points. Uses the Myers bit-parallel
/// kernel when the shorter string fits in a machine word, a two-row DP
/// otherwise; both return the same values.
std::size_t levenshtein(std::string_view a, std::string_view b);
std::size_t levenshtein(const std::vector<char32_t>& a,
                        const std::vector<char32_t>& b);

enum class Unit { kCharacter, kStroke };

/// Per-character stroke/radical decomposition. Characters absent from the
/// table decompose to themselves.
class DecompositionTable {
public:
    DecompositionTable() = default;

    /// TSV: column 1 the character, column 2 space-separated stroke tokens.
    static DecompositionTable load(const std::filesystem::path& path);

    void add(char32_t ch, std::vector<std::string> strokes);
    const std::vector<std::string>* find(char32_t ch) const;
    std::size_t size() const { return table_.size(); }

private:
    std::unordered_map<char32_t, std::vector<std::string>> table_;
};

/// Sparse n-gram count vector with its cached Euclidean norm.
struct NGramProfile {
    std::map<std::string, int> counts;
    double norm = 0.0;

    bool empty() const { return counts.empty(); }
};

/// Decomposes `s` into units (code points, or stroke tokens through the
/// table) and counts contiguous length-n unit substrings. Strings shorter
/// than n units yield the whole sequence as a single gram.
NGramProfile ngram_profile(std::string_view s, std::size_t n, Unit unit,
                           const DecompositionTable* table = nullptr);

double cosine(const NGramProfile& a, const NGramProfile& b);

/// dot(counts_a, counts_b) / (norm_a * norm_b); 0 if either profile is empty.
double ngram_cosine(std::string_view a, std::string_view b, std::size_t n,
                    Unit unit, const DecompositionTable* table = nullptr);

enum class Metric { kLevenshtein, kNGramCosine };

struct StringMatchParams {
    Metric metric = Metric::kLevenshtein;
    std::size_t n = 3;
    Unit unit = Unit::kCharacter;
    const DecompositionTable* table = nullptr;
};

struct StringMatch {
    std::string query_id;
    std::string target_id;
    double score;  // edit distance or cosine similarity, per metric
};

/// Best target per query: minimal edit distance or maximal cosine, ties
/// broken by lexicographically smallest target_id.
std::vector<StringMatch> stringmatch_link(const std::vector<Record>& queries,
                                          const std::vector<Record>& targets,
                                          const StringMatchParams& params);

}  // namespace reclink::str
