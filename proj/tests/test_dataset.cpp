#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "swinforge/dataset.hpp"
#include "swinforge/synthgen.hpp"

namespace fs = std::filesystem;
using namespace swinforge;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::multiset<std::string> membership(const DatasetManifest& m, Split s) {
    std::multiset<std::string> out;
    for (const auto& r : m.records)
        if (r.split == s) out.insert(r.path);
    return out;
}

}  // namespace

TEST_CASE("flat layout splits 120 per class into 90/10/20") {
    TempDir dir("swinforge_ds_flat");
    synth_dataset_flat(dir.path.string(), 120, 7, 8);
    SplitRatios ratios;  // 0.75 / 0.0833... / 0.1666...
    auto m = build_manifest(dir.path.string(), ratios, 42);

    for (int label : {0, 1}) {
        CHECK(m.count(Split::train, label) == 90);
        CHECK(m.count(Split::val, label) == 10);
        CHECK(m.count(Split::test, label) == 20);
    }
}

TEST_CASE("manifest build is deterministic in the seed") {
    TempDir dir("swinforge_ds_det");
    synth_dataset_flat(dir.path.string(), 30, 1, 8);
    SplitRatios ratios;
    auto a = build_manifest(dir.path.string(), ratios, 7);
    auto b = build_manifest(dir.path.string(), ratios, 7);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].path == b.records[i].path);
        CHECK(a.records[i].label == b.records[i].label);
        CHECK(a.records[i].split == b.records[i].split);
    }

    auto c = build_manifest(dir.path.string(), ratios, 8);
    // same counts, different membership
    for (Split s : {Split::train, Split::val, Split::test}) {
        CHECK(a.split_size(s) == c.split_size(s));
    }
    bool differs = false;
    auto ma = membership(a, Split::train), mc = membership(c, Split::train);
    differs = ma != mc;
    CHECK(differs);
}

TEST_CASE("splits are disjoint and stratified") {
    TempDir dir("swinforge_ds_disjoint");
    synth_dataset_flat(dir.path.string(), 53, 3, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 5);

    std::set<std::string> seen;
    for (const auto& r : m.records) {
        CHECK(seen.insert(r.path).second);  // no record in two splits
    }
    for (Split s : {Split::train, Split::val, Split::test}) {
        CHECK(std::abs(m.count(s, 0) - m.count(s, 1)) <= 1);
    }
}

TEST_CASE("cifake layout honors predefined train/test folders") {
    TempDir dir("swinforge_ds_cifake");
    synth_dataset_cifake(dir.path.string(), 40, 12, 3, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 11);

    // entire test folder -> test split
    for (int label : {0, 1}) CHECK(m.count(Split::test, label) == 12);
    // train folder carved 0.9 / 0.1
    for (int label : {0, 1}) {
        CHECK(m.count(Split::train, label) == 36);
        CHECK(m.count(Split::val, label) == 4);
    }
    for (const auto& r : m.records) {
        if (r.split == Split::test) CHECK(r.path.rfind("test/", 0) == 0);
        else CHECK(r.path.rfind("train/", 0) == 0);
    }
}

TEST_CASE("missing class directory and empty dataset are ingestion errors") {
    TempDir dir("swinforge_ds_missing");
    fs::create_directories(dir.path / "FAKE");
    CHECK_THROWS_AS(build_manifest(dir.path.string(), SplitRatios{}, 1), DataError);
    fs::create_directories(dir.path / "REAL");
    CHECK_THROWS_AS(build_manifest(dir.path.string(), SplitRatios{}, 1), DataError);
}

TEST_CASE("manifest serialization round-trips losslessly") {
    TempDir dir("swinforge_ds_roundtrip");
    synth_dataset_flat(dir.path.string(), 24, 9, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 99);
    auto p1 = dir.path / "m1.txt";
    auto p2 = dir.path / "m2.txt";
    m.save(p1.string());
    auto loaded = DatasetManifest::load(p1.string());
    CHECK(loaded.seed == m.seed);
    CHECK(loaded.root == m.root);
    REQUIRE(loaded.records.size() == m.records.size());
    loaded.save(p2.string());
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("corrupted manifest header counts are rejected") {
    TempDir dir("swinforge_ds_badcounts");
    synth_dataset_flat(dir.path.string(), 12, 1, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 1);
    auto p = dir.path / "m.txt";
    m.save(p.string());
    auto text = read_file(p);
    // drop the last record line
    text.erase(text.rfind('\n', text.size() - 2) + 1);
    std::ofstream(p, std::ios::binary) << text;
    CHECK_THROWS_AS(DatasetManifest::load(p.string()), DataError);
}

TEST_CASE("batch iteration visits every record exactly once with expected batch sizes") {
    TempDir dir("swinforge_ds_batches");
    synth_dataset_flat(dir.path.string(), 60, 2, 8);
    // 100 train records via ratios 100/10/10
    SplitRatios ratios{100.0 / 120.0, 10.0 / 120.0, 10.0 / 120.0};
    auto m = build_manifest(dir.path.string(), ratios, 3);
    REQUIRE(m.split_size(Split::train) == 100);

    Preprocessing prep;
    prep.target_size = 8;
    BatchStream stream(m, Split::train, 32, 777, prep);
    std::vector<int64_t> sizes;
    std::multiset<int64_t> labels_seen;
    while (auto b = stream.next()) {
        sizes.push_back(b->size);
        CHECK(b->inputs.size() == static_cast<size_t>(b->size) * 3 * 8 * 8);
        for (auto l : b->labels) labels_seen.insert(l);
    }
    CHECK(sizes == std::vector<int64_t>({32, 32, 32, 4}));

    std::multiset<int64_t> expected;
    for (const auto& r : m.records)
        if (r.split == Split::train) expected.insert(r.label);
    CHECK(labels_seen == expected);
}

TEST_CASE("epoch seeds change order but not membership") {
    TempDir dir("swinforge_ds_epochs");
    synth_dataset_flat(dir.path.string(), 30, 4, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 3);
    Preprocessing prep;
    prep.target_size = 8;

    BatchStream s1(m, Split::train, 8, mix_seed(5, 0), prep);
    BatchStream s2(m, Split::train, 8, mix_seed(5, 1), prep);
    BatchStream s1again(m, Split::train, 8, mix_seed(5, 0), prep);

    CHECK(s1.order() != s2.order());
    CHECK(s1.order() == s1again.order());
    auto sorted1 = s1.order(), sorted2 = s2.order();
    std::sort(sorted1.begin(), sorted1.end());
    std::sort(sorted2.begin(), sorted2.end());
    CHECK(sorted1 == sorted2);
}

TEST_CASE("corrupt image aborts by default and skips when configured") {
    TempDir dir("swinforge_ds_corrupt");
    synth_dataset_flat(dir.path.string(), 6, 8, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{0.5, 0.0, 0.5}, 3);
    // corrupt one train file
    std::string victim;
    for (const auto& r : m.records)
        if (r.split == Split::train) { victim = r.path; break; }
    REQUIRE(!victim.empty());
    std::ofstream(fs::path(m.root) / victim, std::ios::binary) << "garbage";

    Preprocessing prep;
    prep.target_size = 8;
    {
        BatchStream stream(m, Split::train, 4, 1, prep);
        CHECK_THROWS_AS(
            while (stream.next()) {
            },
            DataError);
    }
    {
        Preprocessing lax = prep;
        lax.abort_on_bad = false;
        BatchStream stream(m, Split::train, 4, 1, lax);
        int64_t total = 0;
        while (auto b = stream.next()) total += b->size;
        CHECK(total == m.split_size(Split::train) - 1);
    }
}

TEST_CASE("cache files are preferred and produce identical tensors") {
    TempDir dir("swinforge_ds_cache");
    synth_dataset_flat(dir.path.string(), 4, 2, 8);
    auto m = build_manifest(dir.path.string(), SplitRatios{}, 3);
    Preprocessing direct;
    direct.target_size = 8;

    TempDir cache("swinforge_ds_cache_files");
    for (const auto& r : m.records) {
        auto t = load_sample(m, r, direct);
        auto out = cache.path / (r.path + ".swft");
        fs::create_directories(out.parent_path());
        write_tensor_cache(out.string(), 8, 8, t);
    }
    Preprocessing cached = direct;
    cached.cache_dir = cache.path.string();
    for (const auto& r : m.records) {
        CHECK(load_sample(m, r, cached) == load_sample(m, r, direct));
    }
    // cache must actually be used: poison the source image, cached load still works
    std::ofstream(fs::path(m.root) / m.records[0].path, std::ios::binary) << "garbage";
    CHECK_NOTHROW(load_sample(m, m.records[0], cached));
    CHECK_THROWS_AS(load_sample(m, m.records[0], direct), DataError);
}
