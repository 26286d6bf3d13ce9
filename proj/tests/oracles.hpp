// Independent reference implementations used only by tests. These stay
// deliberately naive so they can check the optimized library paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "reclink/utf8.hpp"

namespace oracles {

/// Full quadratic dynamic-programming edit distance over code points.
inline std::size_t levenshtein_dp(std::string_view a_utf8, std::string_view b_utf8) {
    const auto a = reclink::utf8_decode(a_utf8);
    const auto b = reclink::utf8_decode(b_utf8);
    std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                            std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] +
                                    (a[i - 1] == b[j - 1] ? 0u : 1u)});
    return d[a.size()][b.size()];
}

/// Full-scan top-k by inner product on pre-normalized rows; ties broken
/// by smaller row index via a total sort.
inline std::vector<std::pair<std::size_t, float>> knn_full_scan(
    const std::vector<std::vector<float>>& rows, const std::vector<float>& query,
    std::size_t k) {
    std::vector<std::pair<std::size_t, float>> scored;
    scored.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        float s = 0;
        for (std::size_t t = 0; t < query.size(); ++t) s += rows[i][t] * query[t];
        scored.emplace_back(i, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    scored.resize(std::min(k, scored.size()));
    return scored;
}

/// Central finite differences of f over x, step h.
template <typename F>
std::vector<double> finite_diff(F&& f, std::vector<double>& x, double h = 1e-5) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double max_rel_error(const std::vector<double>& got,
                            const std::vector<double>& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max({std::abs(got[i]), std::abs(want[i]), 1e-6});
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    }
    return worst;
}

}  // namespace oracles
