#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace reclink::synth {

/// Per-character OCR error channel: weighted confusable substitutions,
/// deletions, and insertions from a fixed alphabet.
struct NoiseChannel {
    std::unordered_map<char32_t, std::vector<std::pair<char32_t, double>>>
        substitution_table;
    double p_sub = 0.0;
    double p_del = 0.0;
    double p_ins = 0.0;
    std::u32string insertion_alphabet;

    void validate() const;

    /// Confusable pairs seen in practice (e.g. visually similar kanji),
    /// extendable from a TSV (char, confusable, weight).
    static NoiseChannel with_default_confusables();
    void load_confusables(const std::filesystem::path& tsv_path);
};

/// Applies the channel once. Per input character: substitute with p_sub
/// (confusable chosen by weight), delete with p_del; insert an alphabet
/// character between positions with p_ins. Deterministic given seed.
std::string ocr_noise(std::string_view s, const NoiseChannel& channel,
                      std::uint64_t seed);

/// Deterministic stand-in for image rendering + vision features: a seeded
/// random projection of the clean string's character-bigram counts into
/// d_in dimensions, plus Gaussian noise scaled by aug_strength. Views of
/// the same string share the projection and differ only in the noise.
std::vector<double> visual_proxy(std::string_view s, std::size_t d_in,
                                 double aug_strength, std::uint64_t projection_seed,
                                 std::uint64_t noise_seed);

struct SynthView {
    std::string noisy_text;
    std::vector<double> visual;
};

struct SynthRecord {
    std::string label;
    std::string clean;
    std::vector<SynthView> views;
};

struct SynthSeeds {
    std::uint64_t master = 0;      // drives per-word text noise
    std::uint64_t projection = 1;  // shared across all views
    std::uint64_t augment = 2;     // drives per-view proxy noise
};

/// One SynthRecord per word with m views each, fully deterministic from
/// the seeds; per-word streams are derived so output is independent of
/// scheduling. Throws on duplicate words.
std::vector<SynthRecord> generate_synthetic_dataset(
    const std::vector<std::string>& words, int views_per_label,
    const NoiseChannel& channel, std::size_t d_in, double aug_strength,
    const SynthSeeds& seeds);

}  // namespace reclink::synth
