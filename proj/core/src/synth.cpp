#include "reclink/synth.hpp"

#include <stdexcept>
#include <unordered_set>

#include "reclink/io.hpp"
#include "reclink/rng.hpp"
#include "reclink/utf8.hpp"

namespace reclink::synth {

void NoiseChannel::validate() const {
    for (double p : {p_sub, p_del, p_ins})
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument("channel probability out of [0,1]");
    for (const auto& [ch, confusables] : substitution_table) {
        if (confusables.empty())
            throw std::invalid_argument("empty confusable list");
        for (const auto& [other, weight] : confusables)
            if (weight <= 0.0)
                throw std::invalid_argument("confusable weight must be positive");
    }
    if (p_ins > 0.0 && insertion_alphabet.empty())
        throw std::invalid_argument("p_ins > 0 requires an insertion alphabet");
}

NoiseChannel NoiseChannel::with_default_confusables() {
    NoiseChannel channel;
    channel.substitution_table[U'永'] = {{U'水', 1.0}};  // 永 -> 水
    channel.substitution_table[U'水'] = {{U'永', 1.0}};  // 水 -> 永
    channel.substitution_table[U'菓'] = {{U'薬', 1.0}};  // 菓 -> 薬
    channel.substitution_table[U'薬'] = {{U'菓', 1.0}};  // 薬 -> 菓
    return channel;
}

void NoiseChannel::load_confusables(const std::filesystem::path& tsv_path) {
    for (const auto& row : read_tsv(tsv_path)) {
        if (row.size() < 3)
            throw std::runtime_error("confusable table row needs 3 columns");
        const auto from = utf8_decode(row[0]);
        const auto to = utf8_decode(row[1]);
        if (from.size() != 1 || to.size() != 1)
            throw std::runtime_error("confusables must be single characters");
        const double weight = std::stod(row[2]);
        if (weight <= 0.0)
            throw std::runtime_error("confusable weight must be positive");
        substitution_table[from[0]].emplace_back(to[0], weight);
    }
}

std::string ocr_noise(std::string_view s, const NoiseChannel& channel,
                      std::uint64_t seed) {
    channel.validate();
    Rng rng(seed);
    std::vector<char32_t> out;
    const auto cps = utf8_decode(s);
    out.reserve(cps.size());

    const auto maybe_insert = [&] {
        if (channel.p_ins > 0.0 && rng.uniform() < channel.p_ins)
            out.push_back(channel.insertion_alphabet[rng.uniform_int(
                channel.insertion_alphabet.size())]);
    };

    for (char32_t cp : cps) {
        maybe_insert();
        if (channel.p_del > 0.0 && rng.uniform() < channel.p_del) continue;
        if (channel.p_sub > 0.0 && rng.uniform() < channel.p_sub) {
            const auto it = channel.substitution_table.find(cp);
            if (it != channel.substitution_table.end()) {
                double total = 0.0;
                for (const auto& [other, weight] : it->second) total += weight;
                double draw = rng.uniform() * total;
                char32_t chosen = it->second.back().first;
                for (const auto& [other, weight] : it->second) {
                    if (draw < weight) {
                        chosen = other;
                        break;
                    }
                    draw -= weight;
                }
                out.push_back(chosen);
                continue;
            }
        }
        out.push_back(cp);
    }
    maybe_insert();
    return utf8_encode(out);
}

std::vector<double> visual_proxy(std::string_view s, std::size_t d_in,
                                 double aug_strength, std::uint64_t projection_seed,
                                 std::uint64_t noise_seed) {
    if (d_in == 0) throw std::invalid_argument("d_in must be positive");
    if (aug_strength < 0.0)
        throw std::invalid_argument("aug_strength must be >= 0");

    std::vector<double> out(d_in, 0.0);
    const auto cps = utf8_decode(s);
    // Each bigram contributes a fixed Gaussian direction keyed by
    // (gram bytes, projection seed); views of one string share it.
    std::string gram;
    const auto add_gram = [&](char32_t a, char32_t b) {
        gram.clear();
        utf8_append(gram, a);
        utf8_append(gram, b);
        Rng g(Rng::derive(projection_seed, fnv1a64(gram.data(), gram.size())));
        for (double& x : out) x += g.gaussian();
    };
    if (cps.size() == 1) {
        add_gram(cps[0], cps[0]);
    } else {
        for (std::size_t i = 0; i + 1 < cps.size(); ++i)
            add_gram(cps[i], cps[i + 1]);
    }
    if (aug_strength > 0.0) {
        Rng n(noise_seed);
        for (double& x : out) x += aug_strength * n.gaussian();
    }
    return out;
}

std::vector<SynthRecord> generate_synthetic_dataset(
    const std::vector<std::string>& words, int views_per_label,
    const NoiseChannel& channel, std::size_t d_in, double aug_strength,
    const SynthSeeds& seeds) {
    if (views_per_label < 1)
        throw std::invalid_argument("views_per_label must be >= 1");
    std::unordered_set<std::string_view> seen;
    for (const std::string& w : words)
        if (!seen.insert(w).second)
            throw std::invalid_argument("duplicate word: " + w);

    std::vector<SynthRecord> records;
    records.reserve(words.size());
    for (std::size_t w = 0; w < words.size(); ++w) {
        SynthRecord record;
        record.label = "w" + std::to_string(w);
        record.clean = words[w];
        for (int v = 0; v < views_per_label; ++v) {
            const std::uint64_t stream =
                w * static_cast<std::uint64_t>(views_per_label) + v;
            SynthView view;
            view.noisy_text =
                ocr_noise(record.clean, channel, Rng::derive(seeds.master, stream));
            view.visual = visual_proxy(record.clean, d_in, aug_strength,
                                       seeds.projection,
                                       Rng::derive(seeds.augment, stream));
            record.views.push_back(std::move(view));
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace reclink::synth
