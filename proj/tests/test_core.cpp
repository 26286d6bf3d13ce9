#include <doctest.h>

#include <filesystem>

#include "reclink/io.hpp"
#include "reclink/record.hpp"

using namespace reclink;

namespace {

Record rec(std::string id, std::string text) {
    Record r;
    r.id = std::move(id);
    r.text = std::move(text);
    return r;
}

std::set<std::string> make_labels(std::size_t n) {
    std::set<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.insert("c" + std::to_string(i));
    return labels;
}

}  // namespace

TEST_CASE("validate_dataset reports duplicate ids") {
    const std::vector<Record> records = {rec("a", "x"), rec("a", "y")};
    const auto report = validate_dataset(records, 4);
    CHECK_FALSE(report.ok);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0] == "duplicate id a");
}

TEST_CASE("validate_dataset reports dimension violations") {
    Record r = rec("a", "x");
    r.vec = std::vector<float>(511, 0.5f);
    const auto report = validate_dataset({r}, 512);
    CHECK_FALSE(report.ok);
    CHECK(report.violations.size() == 1);
}

TEST_CASE("validate_dataset accepts a well-formed set") {
    const std::vector<Record> records = {rec("a", "x"), rec("b", "y"),
                                         rec("c", "z")};
    CHECK(validate_dataset(records, 4).ok);
}

TEST_CASE("validate_dataset flags text-less records without embeddings") {
    const auto report = validate_dataset({rec("a", "")}, 4);
    CHECK_FALSE(report.ok);
}

TEST_CASE("validate_dataset is order-insensitive") {
    std::vector<Record> records = {rec("a", "x"), rec("a", "y"), rec("b", "")};
    auto a = validate_dataset(records, 4);
    std::swap(records[0], records[2]);
    auto b = validate_dataset(records, 4);
    CHECK(a.violations.size() == b.violations.size());
    CHECK_FALSE(a.ok);
    CHECK_FALSE(b.ok);
}

TEST_CASE("split_by_class reproduces the 1286 -> 772/257/257 allocation") {
    const auto split = split_by_class(make_labels(1286), {}, 0);
    CHECK(split.train.size() == 772);
    CHECK(split.val.size() == 257);
    CHECK(split.test.size() == 257);
}

TEST_CASE("split_by_class splits 10 labels 6/2/2") {
    const auto split = split_by_class(make_labels(10), {}, 7);
    CHECK(split.train.size() == 6);
    CHECK(split.val.size() == 2);
    CHECK(split.test.size() == 2);
}

TEST_CASE("split_by_class is deterministic and partitions exactly") {
    const auto labels = make_labels(53);
    const auto a = split_by_class(labels, {}, 42);
    const auto b = split_by_class(labels, {}, 42);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);

    std::set<std::string> all;
    all.insert(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all == labels);
    CHECK(a.train.size() + a.val.size() + a.test.size() == labels.size());
}

TEST_CASE("split_by_class rejects fewer than 3 labels") {
    CHECK_THROWS_WITH(split_by_class(make_labels(2), {}, 0),
                      doctest::Contains("insufficient classes"));
}

TEST_CASE("records round-trip through JSONL") {
    const auto path = std::filesystem::temp_directory_path() / "rl_records.jsonl";
    Record a = rec("a", "alpha");
    a.vec = std::vector<float>{1.0f, 2.5f};
    a.block = "east";
    a.label = "c1";
    const std::vector<Record> records = {a, rec("b", "beta")};
    write_records_jsonl(path, records);
    const auto back = read_records_jsonl(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a");
    CHECK(back[0].text == "alpha");
    CHECK(back[0].vec == a.vec);
    CHECK(back[0].block == a.block);
    CHECK(back[0].label == a.label);
    CHECK_FALSE(back[1].vec.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("ground truth round-trips, empty sets preserved") {
    const auto path = std::filesystem::temp_directory_path() / "rl_truth.jsonl";
    GroundTruth truth;
    truth["q1"] = {"t1", "t2"};
    truth["q2"] = {};
    write_ground_truth_jsonl(path, truth);
    CHECK(read_ground_truth_jsonl(path) == truth);
    std::filesystem::remove(path);
}

TEST_CASE("VEC1 file round-trips") {
    const auto path = std::filesystem::temp_directory_path() / "rl_test.vec";
    const std::vector<std::vector<float>> vecs = {{1, 2, 3}, {4, 5, 6}};
    write_vec_file(path, vecs);
    CHECK(read_vec_file(path) == vecs);
    std::filesystem::remove(path);
}

TEST_CASE("hyperparameter validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    CHECK_NOTHROW(hp.validate(true));  // 153 % (3*3) == 0
    hp.batch_size = 100;
    CHECK_THROWS(hp.validate(true));
    hp.batch_size = 153;
    hp.temp = 0.0;
    CHECK_THROWS(hp.validate());
}
