#pragma once

// CIFAKE-style two-class image folder ingestion: seeded stratified splits,
// a line-oriented manifest format, and shuffled mini-batch iteration with the
// colorframe preprocessing applied per sample.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swinforge/colorframe.hpp"
#include "swinforge/common.hpp"

namespace swinforge {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split split_from_string(const std::string& s);

// Labels are fixed project-wide: Fake = 0 (the CGI detection target),
// Real = 1.
inline constexpr int kLabelFake = 0;
inline constexpr int kLabelReal = 1;

struct SampleRecord {
    std::string path;  // relative to the manifest root
    int label = 0;
    Split split = Split::train;
};

struct SplitRatios {
    double train = 0.75;
    double val = 1.0 / 12.0;
    double test = 1.0 / 6.0;
};

struct DatasetManifest {
    std::string root;
    uint64_t seed = 0;
    std::vector<SampleRecord> records;

    int64_t count(Split split, int label) const;
    int64_t split_size(Split split) const;
    std::vector<int64_t> indices_of(Split split) const;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Scans `root` and builds a per-class stratified split. Two layouts are
// accepted:
//   <root>/{train,test}/{FAKE,REAL}/*.png  — the CIFAKE layout; the test
//       folder becomes the test split and train is carved into train/val
//       with the (train, val) ratio pair renormalized.
//   <root>/{FAKE,REAL}/*.png               — flat; full three-way split.
// Classes are balanced by trimming to the smaller class before slicing, so
// every split is balanced within +/-1.
DatasetManifest build_manifest(const std::string& root, const SplitRatios& ratios,
                               uint64_t seed);

struct Preprocessing {
    ColorFrame frame = ColorFrame::rgb;
    int target_size = 32;
    NormalizationSpec norm;
    std::string cache_dir;     // when set, <cache_dir>/<rel>.swft is preferred
    bool abort_on_bad = true;  // false: skip unreadable files with a warning
};

struct Batch {
    int64_t size = 0;
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> inputs;  // [size, 3, height, width]
    std::vector<int64_t> labels;
};

// Visits every record of the split exactly once per pass. The order is a
// pure function of epoch_seed when shuffled, manifest order otherwise.
class BatchStream {
public:
    BatchStream(const DatasetManifest& manifest, Split split, int64_t batch_size,
                uint64_t epoch_seed, const Preprocessing& prep, bool shuffle = true);

    std::optional<Batch> next();

    // Sample order for this pass (indices into manifest.records).
    const std::vector<int64_t>& order() const { return order_; }

private:
    const DatasetManifest& manifest_;
    Preprocessing prep_;
    std::vector<int64_t> order_;
    int64_t batch_size_;
    size_t pos_ = 0;
};

// Loads and preprocesses one sample (cache file when available, PNG decode
// otherwise).
std::vector<float> load_sample(const DatasetManifest& manifest, const SampleRecord& rec,
                               const Preprocessing& prep);

}  // namespace swinforge
