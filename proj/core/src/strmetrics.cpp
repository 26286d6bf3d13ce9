#include "reclink/strmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "reclink/io.hpp"
#include "reclink/utf8.hpp"

namespace reclink::str {

namespace {

// Myers (1999) bit-parallel edit distance, pattern length <= 64.
// peq(c) carries a 1 for each pattern position equal to c.
template <typename Peq>
std::size_t myers(const std::vector<char32_t>& pattern,
                  const std::vector<char32_t>& text, const Peq& peq) {
    const std::size_t m = pattern.size();
    std::uint64_t vp = ~0ULL;
    std::uint64_t vn = 0;
    std::size_t score = m;
    const std::uint64_t high = 1ULL << (m - 1);

    for (char32_t c : text) {
        const std::uint64_t eq = peq(c);
        const std::uint64_t xv = eq | vn;
        const std::uint64_t xh = (((eq & vp) + vp) ^ vp) | eq;
        std::uint64_t hp = vn | ~(xh | vp);
        std::uint64_t hn = xh & vp;
        if (hp & high) ++score;
        if (hn & high) --score;
        hp = (hp << 1) | 1;
        hn <<= 1;
        vp = hn | ~(xv | hp);
        vn = xv & hp;
    }
    return score;
}

std::size_t levenshtein_dp_rows(const std::vector<char32_t>& a,
                                const std::vector<char32_t>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::size_t levenshtein(const std::vector<char32_t>& a,
                        const std::vector<char32_t>& b) {
    const auto& shorter = a.size() <= b.size() ? a : b;
    const auto& longer = a.size() <= b.size() ? b : a;
    if (shorter.empty()) return longer.size();
    if (shorter.size() > 64) return levenshtein_dp_rows(shorter, longer);

    bool ascii = true;
    for (char32_t c : shorter)
        if (c >= 128) {
            ascii = false;
            break;
        }
    if (ascii) {
        std::uint64_t table[128] = {};
        for (std::size_t i = 0; i < shorter.size(); ++i)
            table[shorter[i]] |= 1ULL << i;
        return myers(shorter, longer, [&](char32_t c) {
            return c < 128 ? table[c] : 0ULL;
        });
    }
    // Small pattern: a linear scan over (char, mask) pairs beats hashing.
    std::vector<std::pair<char32_t, std::uint64_t>> peq;
    peq.reserve(shorter.size());
    for (std::size_t i = 0; i < shorter.size(); ++i) {
        bool found = false;
        for (auto& [ch, mask] : peq)
            if (ch == shorter[i]) {
                mask |= 1ULL << i;
                found = true;
                break;
            }
        if (!found) peq.emplace_back(shorter[i], 1ULL << i);
    }
    return myers(shorter, longer, [&](char32_t c) -> std::uint64_t {
        for (const auto& [ch, mask] : peq)
            if (ch == c) return mask;
        return 0;
    });
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    return levenshtein(utf8_decode(a), utf8_decode(b));
}

DecompositionTable DecompositionTable::load(const std::filesystem::path& path) {
    DecompositionTable table;
    for (const auto& row : read_tsv(path)) {
        if (row.size() < 2)
            throw std::runtime_error("decomposition table row needs 2 columns");
        const auto cps = utf8_decode(row[0]);
        if (cps.size() != 1)
            throw std::runtime_error("decomposition key must be one character: " +
                                     row[0]);
        std::vector<std::string> strokes;
        std::size_t start = 0;
        const std::string& col = row[1];
        while (start < col.size()) {
            const std::size_t sp = col.find(' ', start);
            const std::size_t end = sp == std::string::npos ? col.size() : sp;
            if (end > start) strokes.push_back(col.substr(start, end - start));
            start = end + 1;
        }
        table.add(cps[0], std::move(strokes));
    }
    return table;
}

void DecompositionTable::add(char32_t ch, std::vector<std::string> strokes) {
    if (strokes.empty())
        throw std::invalid_argument("stroke sequence must be nonempty");
    table_[ch] = std::move(strokes);
}

const std::vector<std::string>* DecompositionTable::find(char32_t ch) const {
    const auto it = table_.find(ch);
    return it == table_.end() ? nullptr : &it->second;
}

namespace {

std::vector<std::string> decompose(std::string_view s, Unit unit,
                                   const DecompositionTable* table) {
    std::vector<std::string> units;
    for (char32_t cp : utf8_decode(s)) {
        if (unit == Unit::kStroke) {
            if (const auto* strokes = table->find(cp)) {
                units.insert(units.end(), strokes->begin(), strokes->end());
                continue;
            }
        }
        std::string u;
        utf8_append(u, cp);
        units.push_back(std::move(u));
    }
    return units;
}

std::string join_gram(const std::vector<std::string>& units, std::size_t begin,
                      std::size_t len) {
    std::string gram;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) gram.push_back('\x1f');
        gram += units[begin + i];
    }
    return gram;
}

}  // namespace

NGramProfile ngram_profile(std::string_view s, std::size_t n, Unit unit,
                           const DecompositionTable* table) {
    if (n == 0) throw std::invalid_argument("n must be positive");
    if (unit == Unit::kStroke && !table)
        throw std::invalid_argument("stroke unit requires a decomposition table");

    const auto units = decompose(s, unit, table);
    NGramProfile profile;
    if (units.empty()) return profile;
    if (units.size() < n) {
        profile.counts[join_gram(units, 0, units.size())] = 1;
    } else {
        for (std::size_t i = 0; i + n <= units.size(); ++i)
            ++profile.counts[join_gram(units, i, n)];
    }
    double sq = 0.0;
    for (const auto& [gram, count] : profile.counts)
        sq += static_cast<double>(count) * count;
    profile.norm = std::sqrt(sq);
    return profile;
}

double cosine(const NGramProfile& a, const NGramProfile& b) {
    if (a.empty() || b.empty()) return 0.0;
    const NGramProfile& small = a.counts.size() <= b.counts.size() ? a : b;
    const NGramProfile& large = a.counts.size() <= b.counts.size() ? b : a;
    double dot = 0.0;
    for (const auto& [gram, count] : small.counts) {
        const auto it = large.counts.find(gram);
        if (it != large.counts.end())
            dot += static_cast<double>(count) * it->second;
    }
    return dot / (a.norm * b.norm);
}

double ngram_cosine(std::string_view a, std::string_view b, std::size_t n,
                    Unit unit, const DecompositionTable* table) {
    return cosine(ngram_profile(a, n, unit, table),
                  ngram_profile(b, n, unit, table));
}

std::vector<StringMatch> stringmatch_link(const std::vector<Record>& queries,
                                          const std::vector<Record>& targets,
                                          const StringMatchParams& params) {
    if (targets.empty()) throw std::invalid_argument("empty target set");

    std::vector<NGramProfile> target_profiles;
    std::vector<std::vector<char32_t>> target_cps;
    if (params.metric == Metric::kNGramCosine) {
        target_profiles.reserve(targets.size());
        for (const Record& t : targets)
            target_profiles.push_back(
                ngram_profile(t.text, params.n, params.unit, params.table));
    } else {
        target_cps.reserve(targets.size());
        for (const Record& t : targets)
            target_cps.push_back(utf8_decode(t.text));
    }

    std::vector<StringMatch> out;
    out.reserve(queries.size());
    for (const Record& q : queries) {
        const auto q_cps = utf8_decode(q.text);
        const NGramProfile q_profile =
            params.metric == Metric::kNGramCosine
                ? ngram_profile(q.text, params.n, params.unit, params.table)
                : NGramProfile{};

        std::size_t best = 0;
        double best_score = 0.0;
        bool have = false;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const double score =
                params.metric == Metric::kLevenshtein
                    ? static_cast<double>(levenshtein(q_cps, target_cps[i]))
                    : cosine(q_profile, target_profiles[i]);
            const bool better =
                params.metric == Metric::kLevenshtein ? score < best_score
                                                      : score > best_score;
            const bool tie_wins = score == best_score &&
                                  targets[i].id < targets[best].id;
            if (!have || better || tie_wins) {
                best = i;
                best_score = score;
                have = true;
            }
        }
        out.push_back({q.id, targets[best].id, best_score});
    }
    return out;
}

}  // namespace reclink::str
