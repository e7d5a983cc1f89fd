#include "swinforge/colorframe.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace swinforge {

YcbcrImage rgb_to_ycbcr(const RgbImage& img) {
    YcbcrImage out;
    out.width = img.width;
    out.height = img.height;
    out.pixels.resize(img.pixels.size());
    const auto& m = kYcbcrMatrix;
    const int64_t n = img.pixel_count();
    for (int64_t i = 0; i < n; ++i) {
        const double r = img.pixels[3 * i];
        const double g = img.pixels[3 * i + 1];
        const double b = img.pixels[3 * i + 2];
        out.pixels[3 * i] = m[0] * r + m[1] * g + m[2] * b + kYcbcrOffset[0];
        out.pixels[3 * i + 1] = m[3] * r + m[4] * g + m[5] * b + kYcbcrOffset[1];
        out.pixels[3 * i + 2] = m[6] * r + m[7] * g + m[8] * b + kYcbcrOffset[2];
    }
    return out;
}

ChannelImage normalize(const ChannelImage& img, const NormalizationSpec& spec) {
    spec.validate();
    ChannelImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.data.size());
    const int64_t plane = static_cast<int64_t>(img.width) * img.height;
    for (int c = 0; c < 3; ++c) {
        const double mean = spec.mean[c];
        const double inv_std = 1.0 / spec.std[c];
        for (int64_t i = 0; i < plane; ++i)
            out.data[c * plane + i] = (img.data[c * plane + i] - mean) * inv_std;
    }
    return out;
}

ChannelImage resize_bilinear(const ChannelImage& img, int target_h, int target_w) {
    if (target_h <= 0 || target_w <= 0)
        throw ConfigError("resize target must be positive");
    if (target_h == img.height && target_w == img.width) return img;

    ChannelImage out;
    out.width = target_w;
    out.height = target_h;
    out.data.resize(static_cast<size_t>(3) * target_h * target_w);
    const int64_t src_plane = static_cast<int64_t>(img.width) * img.height;
    const int64_t dst_plane = static_cast<int64_t>(target_w) * target_h;
    const double sy = static_cast<double>(img.height) / target_h;
    const double sx = static_cast<double>(img.width) / target_w;
    for (int y = 0; y < target_h; ++y) {
        // pixel centers at (i + 0.5) / n
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::min(std::max(y0, 0), img.height - 1);
        int y1c = std::min(std::max(y0 + 1, 0), img.height - 1);
        for (int x = 0; x < target_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::min(std::max(x0, 0), img.width - 1);
            int x1c = std::min(std::max(x0 + 1, 0), img.width - 1);
            for (int c = 0; c < 3; ++c) {
                const double* p = img.data.data() + c * src_plane;
                double top = p[y0c * img.width + x0c] * (1 - wx) + p[y0c * img.width + x1c] * wx;
                double bot = p[y1c * img.width + x0c] * (1 - wx) + p[y1c * img.width + x1c] * wx;
                out.data[c * dst_plane + y * target_w + x] = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

std::vector<float> preprocess(const RgbImage& img, ColorFrame frame, int target_size,
                              const NormalizationSpec& spec) {
    const int64_t plane = img.pixel_count();
    ChannelImage ch;
    ch.width = img.width;
    ch.height = img.height;
    ch.data.resize(static_cast<size_t>(3) * plane);
    if (frame == ColorFrame::ycbcr) {
        YcbcrImage conv = rgb_to_ycbcr(img);
        for (int64_t i = 0; i < plane; ++i)
            for (int c = 0; c < 3; ++c)
                ch.data[c * plane + i] = conv.pixels[3 * i + c] / 255.0;
    } else {
        for (int64_t i = 0; i < plane; ++i)
            for (int c = 0; c < 3; ++c)
                ch.data[c * plane + i] = img.pixels[3 * i + c] / 255.0;
    }
    ChannelImage resized = resize_bilinear(ch, target_size, target_size);
    ChannelImage normed = normalize(resized, spec);
    std::vector<float> out(normed.data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(normed.data[i]);
    return out;
}

void write_tensor_cache(const std::string& path, int height, int width,
                        const std::vector<float>& data) {
    if (static_cast<int64_t>(data.size()) != static_cast<int64_t>(3) * height * width)
        throw ContractError("tensor cache payload size does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open cache file for writing: " + path);
    uint32_t header[4] = {kTensorCacheMagic, kTensorCacheF32, static_cast<uint32_t>(height),
                          static_cast<uint32_t>(width)};
    f.write(reinterpret_cast<const char*>(header), sizeof(header));
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f) throw DataError("failed writing cache file: " + path);
}

std::vector<float> read_tensor_cache(const std::string& path, int expect_h, int expect_w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open cache file: " + path);
    uint32_t header[4];
    f.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!f || header[0] != kTensorCacheMagic)
        throw DataError("bad cache file magic: " + path);
    if (header[1] != kTensorCacheF32)
        throw DataError("unsupported cache dtype code in " + path);
    if (static_cast<int>(header[2]) != expect_h || static_cast<int>(header[3]) != expect_w)
        throw ConfigError("cache tensor is " + std::to_string(header[2]) + "x" +
                          std::to_string(header[3]) + " but the model expects " +
                          std::to_string(expect_h) + "x" + std::to_string(expect_w) + ": " +
                          path);
    std::vector<float> data(static_cast<size_t>(3) * header[2] * header[3]);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f) throw DataError("truncated cache file: " + path);
    return data;
}

}  // namespace swinforge
