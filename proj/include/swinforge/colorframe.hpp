#pragma once

// Color frame preprocessing: exact RGB -> YCbCr conversion and the fixed
// decode -> convert -> scale -> resize -> normalize pipeline that feeds the
// classifier.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swinforge/common.hpp"

namespace swinforge {

enum class ColorFrame { rgb, ycbcr };

inline std::string to_string(ColorFrame f) { return f == ColorFrame::rgb ? "rgb" : "ycbcr"; }

inline ColorFrame color_frame_from_string(const std::string& s) {
    if (s == "rgb") return ColorFrame::rgb;
    if (s == "ycbcr") return ColorFrame::ycbcr;
    throw ConfigError("unknown color frame '" + s + "' (expected rgb or ycbcr)");
}

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // interleaved R,G,B per pixel

    int64_t pixel_count() const { return static_cast<int64_t>(width) * height; }
};

struct YcbcrImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // interleaved Y,Cb,Cr; real-valued, unclamped
};

// Conversion matrix, row major. These coefficients differ slightly from the
// BT.601 standard; a test pins them so they cannot drift.
inline constexpr std::array<double, 9> kYcbcrMatrix = {
    0.300, 0.586, 0.113,    //
    -0.168, -0.328, 0.496,  //
    0.496, -0.414, -0.082,  //
};
inline constexpr std::array<double, 3> kYcbcrOffset = {0.0, 128.0, 128.0};

// [Y,Cb,Cr]^T = M [R,G,B]^T + [0,128,128]^T, per pixel, no rounding or
// clamping.
YcbcrImage rgb_to_ycbcr(const RgbImage& img);

struct NormalizationSpec {
    std::array<double, 3> mean = {0.485, 0.456, 0.406};
    std::array<double, 3> std = {0.229, 0.224, 0.225};

    void validate() const {
        for (double s : std)
            if (!(s > 0)) throw ConfigError("normalization std must be strictly positive");
    }
};

// Planar channel-major float image, the working representation between
// pipeline stages: data[c*h*w + y*w + x].
struct ChannelImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // 3 planes
};

// output[c] = (input[c] - mean[c]) / std[c]; input expected unit-scaled.
ChannelImage normalize(const ChannelImage& img, const NormalizationSpec& spec);

// Bilinear resize with half-pixel centers (align_corners = false); edge
// samples clamp.
ChannelImage resize_bilinear(const ChannelImage& img, int target_h, int target_w);

// Full pipeline: (optional rgb_to_ycbcr) -> /255 -> resize -> normalize.
// Returns float32 planar data ready for the model, [3, target, target].
std::vector<float> preprocess(const RgbImage& img, ColorFrame frame, int target_size,
                              const NormalizationSpec& spec);

// Preprocessed-tensor cache files: 16-byte header (magic, dtype code, height,
// width; all little-endian u32) followed by 3*h*w float32 values.
inline constexpr uint32_t kTensorCacheMagic = 0x54465753;  // "SWFT"
inline constexpr uint32_t kTensorCacheF32 = 0;

void write_tensor_cache(const std::string& path, int height, int width,
                        const std::vector<float>& data);
std::vector<float> read_tensor_cache(const std::string& path, int expect_h, int expect_w);

}  // namespace swinforge
