#include "swinforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "swinforge/image_io.hpp"

namespace fs = std::filesystem;

namespace swinforge {

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

int64_t DatasetManifest::count(Split split, int label) const {
    int64_t n = 0;
    for (const auto& r : records)
        if (r.split == split && r.label == label) ++n;
    return n;
}

int64_t DatasetManifest::split_size(Split split) const {
    int64_t n = 0;
    for (const auto& r : records)
        if (r.split == split) ++n;
    return n;
}

std::vector<int64_t> DatasetManifest::indices_of(Split split) const {
    std::vector<int64_t> idx;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) idx.push_back(static_cast<int64_t>(i));
    return idx;
}

namespace {

const char* class_dir_name(int label) { return label == kLabelFake ? "FAKE" : "REAL"; }

std::vector<std::string> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw DataError("missing class directory: " + dir.string());
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no PNG images in " + dir.string());
    return files;
}

std::string relative_to(const std::string& path, const std::string& root) {
    return fs::relative(fs::path(path), fs::path(root)).generic_string();
}

std::string counts_field(const DatasetManifest& m) {
    std::ostringstream os;
    bool first = true;
    for (Split s : {Split::train, Split::val, Split::test}) {
        if (!first) os << ";";
        first = false;
        os << to_string(s) << ":" << m.count(s, kLabelFake) << "/" << m.count(s, kLabelReal);
    }
    return os.str();
}

}  // namespace

DatasetManifest build_manifest(const std::string& root, const SplitRatios& ratios,
                               uint64_t seed) {
    if (!(ratios.train > 0) || ratios.val < 0 || !(ratios.test > 0))
        throw ConfigError("split ratios must be positive (val may be zero)");
    DatasetManifest m;
    m.root = fs::absolute(root).lexically_normal().string();
    m.seed = seed;

    const bool cifake_layout =
        fs::is_directory(fs::path(root) / "train") && fs::is_directory(fs::path(root) / "test");

    // Listed per class, shuffled with a per-class seed, trimmed to the
    // smaller class, then prefix-sliced into splits.
    std::array<std::vector<std::string>, 2> train_pool, test_pool;
    for (int label : {kLabelFake, kLabelReal}) {
        if (cifake_layout) {
            train_pool[label] = list_images(fs::path(root) / "train" / class_dir_name(label));
            test_pool[label] = list_images(fs::path(root) / "test" / class_dir_name(label));
        } else {
            train_pool[label] = list_images(fs::path(root) / class_dir_name(label));
        }
        Rng rng(mix_seed(seed, static_cast<uint64_t>(label)));
        rng.shuffle(train_pool[label]);
        if (cifake_layout) {
            Rng rng2(mix_seed(seed, 16 + static_cast<uint64_t>(label)));
            rng2.shuffle(test_pool[label]);
        }
    }
    size_t n_train = std::min(train_pool[0].size(), train_pool[1].size());
    size_t n_test = std::min(test_pool[0].size(), test_pool[1].size());

    const double rsum = ratios.train + ratios.val + ratios.test;
    for (int label : {kLabelFake, kLabelReal}) {
        auto& pool = train_pool[label];
        pool.resize(n_train);
        size_t b1, b2;
        if (cifake_layout) {
            // only train/val carved here; the test folder is authoritative
            double frac = ratios.train / (ratios.train + ratios.val);
            b1 = static_cast<size_t>(std::llround(frac * static_cast<double>(n_train)));
            b2 = n_train;
        } else {
            b1 = static_cast<size_t>(
                std::llround(ratios.train / rsum * static_cast<double>(n_train)));
            b2 = static_cast<size_t>(std::llround((ratios.train + ratios.val) / rsum *
                                                  static_cast<double>(n_train)));
        }
        b1 = std::min(b1, n_train);
        b2 = std::min(std::max(b2, b1), n_train);
        for (size_t i = 0; i < pool.size(); ++i) {
            SampleRecord rec;
            rec.path = relative_to(pool[i], m.root);
            rec.label = label;
            rec.split = i < b1 ? Split::train : (i < b2 ? Split::val : Split::test);
            m.records.push_back(std::move(rec));
        }
        if (cifake_layout) {
            auto& tpool = test_pool[label];
            tpool.resize(n_test);
            for (const auto& p : tpool)
                m.records.push_back({relative_to(p, m.root), label, Split::test});
        }
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open manifest for writing: " + path);
    f << "swinforge-manifest v1 seed=" << seed << " root=" << root
      << " counts=" << counts_field(*this) << "\n";
    for (const auto& r : records) {
        if (r.path.find('\t') != std::string::npos || r.path.find('\n') != std::string::npos)
            throw DataError("path contains tab or newline, cannot serialize: " + r.path);
        f << r.path << "\t" << r.label << "\t" << to_string(r.split) << "\n";
    }
    if (!f) throw DataError("failed writing manifest: " + path);
}

static DatasetManifest load_manifest_stream(std::istream& in, const std::string& path) {
    DatasetManifest m;
    std::string header;
    if (!std::getline(in, header) || header.rfind("swinforge-manifest v1 ", 0) != 0)
        throw DataError("not a swinforge manifest: " + path);
    std::string counts;
    {
        std::istringstream hs(header);
        std::string tok;
        while (hs >> tok) {
            if (tok.rfind("seed=", 0) == 0) m.seed = std::stoull(tok.substr(5));
            else if (tok.rfind("root=", 0) == 0) m.root = tok.substr(5);
            else if (tok.rfind("counts=", 0) == 0) counts = tok.substr(7);
        }
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw DataError("malformed manifest record: " + line);
        SampleRecord rec;
        rec.path = line.substr(0, t1);
        rec.label = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        if (rec.label != kLabelFake && rec.label != kLabelReal)
            throw DataError("manifest label must be 0 or 1: " + line);
        rec.split = split_from_string(line.substr(t2 + 1));
        m.records.push_back(std::move(rec));
    }
    if (!counts.empty() && counts != counts_field(m))
        throw DataError("manifest header counts do not match records: " + path);
    return m;
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open manifest: " + path);
    return load_manifest_stream(f, path);
}

std::vector<float> load_sample(const DatasetManifest& manifest, const SampleRecord& rec,
                               const Preprocessing& prep) {
    if (!prep.cache_dir.empty()) {
        fs::path cache = fs::path(prep.cache_dir) / (rec.path + ".swft");
        if (fs::exists(cache))
            return read_tensor_cache(cache.string(), prep.target_size, prep.target_size);
    }
    fs::path full = fs::path(manifest.root) / rec.path;
    RgbImage img = read_png_rgb8(full.string());
    return preprocess(img, prep.frame, prep.target_size, prep.norm);
}

BatchStream::BatchStream(const DatasetManifest& manifest, Split split, int64_t batch_size,
                         uint64_t epoch_seed, const Preprocessing& prep, bool shuffle)
    : manifest_(manifest), prep_(prep), batch_size_(batch_size) {
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    order_ = manifest.indices_of(split);
    if (order_.empty())
        throw DataError("split '" + to_string(split) + "' is empty");
    if (shuffle) {
        Rng rng(epoch_seed);
        rng.shuffle(order_);
    }
}

std::optional<Batch> BatchStream::next() {
    const int64_t side = prep_.target_size;
    const int64_t sample_len = 3 * side * side;
    Batch batch;
    batch.height = side;
    batch.width = side;
    while (pos_ < order_.size() && batch.size < batch_size_) {
        const SampleRecord& rec = manifest_.records[static_cast<size_t>(order_[pos_])];
        ++pos_;
        std::vector<float> sample;
        try {
            sample = load_sample(manifest_, rec, prep_);
        } catch (const DataError& e) {
            if (prep_.abort_on_bad) throw;
            std::cerr << "warning: skipping unreadable sample: " << e.what() << "\n";
            continue;
        }
        if (static_cast<int64_t>(sample.size()) != sample_len)
            throw DataError("sample tensor size mismatch for " + rec.path);
        batch.inputs.insert(batch.inputs.end(), sample.begin(), sample.end());
        batch.labels.push_back(rec.label);
        ++batch.size;
    }
    if (batch.size == 0) return std::nullopt;
    return batch;
}

}  // namespace swinforge
