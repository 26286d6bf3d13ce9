#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "reclink/record.hpp"

namespace reclink {

// -- JSONL -------------------------------------------------------------

/// Reads records from JSON-lines: one object per line with keys `id`,
/// `text`, optional `vec`, `block`, `label`. Throws on malformed input.
std::vector<Record> read_records_jsonl(const std::filesystem::path& path);
void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<Record>& records);

/// Ground truth JSONL: {"query_id": ..., "target_ids": [...]}.
GroundTruth read_ground_truth_jsonl(const std::filesystem::path& path);
void write_ground_truth_jsonl(const std::filesystem::path& path,
                              const GroundTruth& truth);

// -- Binary vector file (VEC1) ------------------------------------------

/// Magic "VEC1", u32 count, u32 dim (little endian), then count*dim
/// float32 values. Ids live in a sidecar text file, one per line.
void write_vec_file(const std::filesystem::path& path,
                    const std::vector<std::vector<float>>& vectors);
std::vector<std::vector<float>> read_vec_file(const std::filesystem::path& path);

void write_ids_file(const std::filesystem::path& path,
                    const std::vector<std::string>& ids);
std::vector<std::string> read_ids_file(const std::filesystem::path& path);

// -- Text tables ---------------------------------------------------------

/// TSV rows as raw column vectors (UTF-8, '\t' separated, no quoting).
std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path);

/// Word list: one word per line, blank lines skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

// -- Atomic write ----------------------------------------------------------

/// Writes `content` to `path` via a temp file + rename, so a crashed run
/// never leaves a partial artifact.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Stable 64-bit digest of a file's bytes, for run manifests.
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace reclink
