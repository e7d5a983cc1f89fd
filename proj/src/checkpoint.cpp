#include "swinforge/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace swinforge {

namespace {

constexpr char kMagic[8] = {'S', 'W', 'N', 'F', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    put<uint32_t>(f, 1);
    put<uint32_t>(f, 0);
    put<uint64_t>(f, ckpt.config.size());
    f.write(ckpt.config.data(), static_cast<std::streamsize>(ckpt.config.size()));
    put<uint64_t>(f, ckpt.tensors.size());
    uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        put<uint32_t>(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint32_t>(f, static_cast<uint32_t>(t.dtype));
        put<uint32_t>(f, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) put<uint64_t>(f, static_cast<uint64_t>(d));
        put<uint64_t>(f, offset);
        put<uint64_t>(f, t.bytes.size());
        offset += t.bytes.size();
    }
    put<uint64_t>(f, offset);
    for (const auto& [name, t] : ckpt.tensors)
        f.write(reinterpret_cast<const char*>(t.bytes.data()),
                static_cast<std::streamsize>(t.bytes.size()));
    if (!f) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a swinforge checkpoint: " + path);
    uint32_t version = get<uint32_t>(f, path);
    if (version != 1)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " +
                        path);
    get<uint32_t>(f, path);  // reserved
    uint64_t cfg_len = get<uint64_t>(f, path);
    Checkpoint ckpt;
    ckpt.config.resize(cfg_len);
    f.read(ckpt.config.data(), static_cast<std::streamsize>(cfg_len));
    if (!f) throw DataError("truncated checkpoint: " + path);

    uint64_t count = get<uint64_t>(f, path);
    struct Entry {
        std::string name;
        CheckpointDtype dtype;
        std::vector<int64_t> shape;
        uint64_t offset, bytes;
    };
    std::vector<Entry> entries;
    entries.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Entry e;
        uint32_t name_len = get<uint32_t>(f, path);
        e.name.resize(name_len);
        f.read(e.name.data(), name_len);
        uint32_t dtype = get<uint32_t>(f, path);
        if (dtype > 1) throw DataError("unknown tensor dtype in checkpoint: " + path);
        e.dtype = static_cast<CheckpointDtype>(dtype);
        uint32_t rank = get<uint32_t>(f, path);
        for (uint32_t r = 0; r < rank; ++r)
            e.shape.push_back(static_cast<int64_t>(get<uint64_t>(f, path)));
        e.offset = get<uint64_t>(f, path);
        e.bytes = get<uint64_t>(f, path);
        entries.push_back(std::move(e));
    }
    uint64_t payload_total = get<uint64_t>(f, path);
    std::vector<uint8_t> payload(payload_total);
    f.read(reinterpret_cast<char*>(payload.data()),
           static_cast<std::streamsize>(payload_total));
    if (!f) throw DataError("truncated checkpoint payload: " + path);

    for (auto& e : entries) {
        if (e.offset + e.bytes > payload_total)
            throw DataError("checkpoint tensor extends past payload: " + path);
        CheckpointTensor t;
        t.dtype = e.dtype;
        t.shape = std::move(e.shape);
        size_t elem = t.dtype == CheckpointDtype::f32 ? 4 : 8;
        if (e.bytes != elem * static_cast<uint64_t>(shape_numel(t.shape)))
            throw DataError("checkpoint tensor byte count does not match shape: " + path);
        t.bytes.assign(payload.begin() + static_cast<ptrdiff_t>(e.offset),
                       payload.begin() + static_cast<ptrdiff_t>(e.offset + e.bytes));
        ckpt.tensors.emplace_back(std::move(e.name), std::move(t));
    }
    return ckpt;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace swinforge
