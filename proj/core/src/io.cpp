#include "reclink/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "reclink/rng.hpp"

namespace reclink {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::string read_all(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | static_cast<unsigned char>(s[off + i]);
    return v;
}

void put_f32(std::string& out, float f) {
    std::uint32_t v;
    static_assert(sizeof(v) == sizeof(f));
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

float get_f32(const std::string& s, std::size_t off) {
    const std::uint32_t v = get_u32(s, off);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

std::vector<Record> read_records_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<Record> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": " + e.what());
        }
        Record r;
        r.id = j.at("id").get<std::string>();
        r.text = j.value("text", std::string{});
        if (j.contains("vec")) r.vec = j["vec"].get<std::vector<float>>();
        if (j.contains("block")) r.block = j["block"].get<std::string>();
        if (j.contains("label")) r.label = j["label"].get<std::string>();
        records.push_back(std::move(r));
    }
    return records;
}

void write_records_jsonl(const std::filesystem::path& path,
                         const std::vector<Record>& records) {
    std::string out;
    for (const Record& r : records) {
        json j;
        j["id"] = r.id;
        j["text"] = r.text;
        if (r.vec) j["vec"] = *r.vec;
        if (r.block) j["block"] = *r.block;
        if (r.label) j["label"] = *r.label;
        out += j.dump();
        out += '\n';
    }
    atomic_write(path, out);
}

GroundTruth read_ground_truth_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    GroundTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        auto& set = truth[j.at("query_id").get<std::string>()];
        for (const auto& t : j.at("target_ids"))
            set.insert(t.get<std::string>());
    }
    return truth;
}

void write_ground_truth_jsonl(const std::filesystem::path& path,
                              const GroundTruth& truth) {
    std::string out;
    for (const auto& [qid, tids] : truth) {
        json j;
        j["query_id"] = qid;
        j["target_ids"] = tids;
        out += j.dump();
        out += '\n';
    }
    atomic_write(path, out);
}

void write_vec_file(const std::filesystem::path& path,
                    const std::vector<std::vector<float>>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("empty corpus");
    const std::size_t dim = vectors.front().size();
    std::string out;
    out.reserve(12 + vectors.size() * dim * 4);
    out += "VEC1";
    put_u32(out, static_cast<std::uint32_t>(vectors.size()));
    put_u32(out, static_cast<std::uint32_t>(dim));
    for (const auto& v : vectors) {
        if (v.size() != dim) throw std::invalid_argument("dimension mismatch");
        for (float f : v) put_f32(out, f);
    }
    atomic_write(path, out);
}

std::vector<std::vector<float>> read_vec_file(const std::filesystem::path& path) {
    const std::string raw = read_all(path);
    if (raw.size() < 12 || raw.compare(0, 4, "VEC1") != 0)
        throw std::runtime_error(path.string() + ": not a VEC1 file");
    const std::uint32_t count = get_u32(raw, 4);
    const std::uint32_t dim = get_u32(raw, 8);
    if (raw.size() != 12 + std::size_t{count} * dim * 4)
        throw std::runtime_error(path.string() + ": truncated VEC1 file");
    std::vector<std::vector<float>> vectors(count, std::vector<float>(dim));
    std::size_t off = 12;
    for (auto& v : vectors)
        for (float& f : v) {
            f = get_f32(raw, off);
            off += 4;
        }
    return vectors;
}

void write_ids_file(const std::filesystem::path& path,
                    const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        out += id;
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<std::string> read_ids_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) ids.push_back(line);
    if (!ids.empty() && ids.back().empty()) ids.pop_back();
    return ids;
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        rows.push_back(std::move(cols));
    }
    return rows;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) words.push_back(line);
    return words;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::uint64_t file_digest(const std::filesystem::path& path) {
    const std::string raw = read_all(path);
    return fnv1a64(raw.data(), raw.size());
}

}  // namespace reclink
