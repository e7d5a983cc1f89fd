#include "swinforge/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "swinforge/common.hpp"
#include "swinforge/image_io.hpp"

namespace fs = std::filesystem;

namespace swinforge {

namespace {

uint8_t to_byte(double v) {
    double x = std::round(v * 255.0);
    return static_cast<uint8_t>(std::clamp(x, 0.0, 255.0));
}

// Low-resolution noise grid bilinearly upsampled to size x size; values
// roughly in [-1, 1].
std::vector<double> smooth_field(Rng& rng, int size, int grid) {
    std::vector<double> coarse(static_cast<size_t>(grid) * grid);
    for (auto& v : coarse) v = rng.uniform() * 2.0 - 1.0;
    std::vector<double> out(static_cast<size_t>(size) * size);
    for (int y = 0; y < size; ++y) {
        double fy = (y + 0.5) * grid / size - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, grid - 1), y1c = std::clamp(y0 + 1, 0, grid - 1);
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) * grid / size - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, grid - 1), x1c = std::clamp(x0 + 1, 0, grid - 1);
            double top = coarse[y0c * grid + x0c] * (1 - wx) + coarse[y0c * grid + x1c] * wx;
            double bot = coarse[y1c * grid + x0c] * (1 - wx) + coarse[y1c * grid + x1c] * wx;
            out[y * size + x] = top * (1 - wy) + bot * wy;
        }
    }
    return out;
}

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    double c = v * s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    double m = v - c;
    return {r + m, g + m, b + m};
}

}  // namespace

RgbImage synth_real_image(uint64_t seed, int size) {
    Rng rng(mix_seed(seed, 0xADE));
    // Shared luminance structure plus weakly-correlated chroma fields.
    auto lum = smooth_field(rng, size, 4);
    auto detail = smooth_field(rng, size, 8);
    auto chroma_u = smooth_field(rng, size, 3);
    auto chroma_v = smooth_field(rng, size, 3);
    double exposure = 0.35 + 0.35 * rng.uniform();
    double contrast = 0.25 + 0.25 * rng.uniform();
    double chroma_amt = 0.04 + 0.05 * rng.uniform();
    double noise_amt = 0.025 + 0.03 * rng.uniform();

    RgbImage img;
    img.width = size;
    img.height = size;
    img.pixels.resize(static_cast<size_t>(3) * size * size);
    for (int i = 0; i < size * size; ++i) {
        double l = exposure + contrast * (0.8 * lum[i] + 0.35 * detail[i]);
        double u = chroma_amt * chroma_u[i];
        double v = chroma_amt * chroma_v[i];
        // Muted, correlated channels with independent sensor noise.
        double r = l + 1.1 * u + 0.3 * v + noise_amt * rng.normal();
        double g = l - 0.4 * u + 0.4 * v + noise_amt * rng.normal();
        double b = l - 0.7 * u - 0.7 * v + noise_amt * rng.normal();
        img.pixels[3 * i] = to_byte(r);
        img.pixels[3 * i + 1] = to_byte(g);
        img.pixels[3 * i + 2] = to_byte(b);
    }
    return img;
}

RgbImage synth_fake_image(uint64_t seed, int size) {
    Rng rng(mix_seed(seed, 0xC61));
    // Saturated gradient background.
    double hue1 = rng.uniform(), hue2 = rng.uniform();
    Rgb c1 = hsv_to_rgb(hue1, 0.75 + 0.25 * rng.uniform(), 0.55 + 0.4 * rng.uniform());
    Rgb c2 = hsv_to_rgb(hue2, 0.75 + 0.25 * rng.uniform(), 0.35 + 0.4 * rng.uniform());
    bool diagonal = rng.below(2) == 0;

    std::vector<Rgb> canvas(static_cast<size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double t = diagonal ? (x + y) / (2.0 * (size - 1)) : y / (size - 1.0);
            canvas[y * size + x] = {c1.r + (c2.r - c1.r) * t, c1.g + (c2.g - c1.g) * t,
                                    c1.b + (c2.b - c1.b) * t};
        }

    // Flat-shaded primitives with crisp edges.
    int shapes = 2 + static_cast<int>(rng.below(4));
    for (int s = 0; s < shapes; ++s) {
        Rgb fill = hsv_to_rgb(rng.uniform(), 0.8 + 0.2 * rng.uniform(),
                              0.45 + 0.5 * rng.uniform());
        if (rng.below(2) == 0) {
            int w = 4 + static_cast<int>(rng.below(static_cast<uint64_t>(size / 2)));
            int h = 4 + static_cast<int>(rng.below(static_cast<uint64_t>(size / 2)));
            int x0 = static_cast<int>(rng.below(static_cast<uint64_t>(size - 2)));
            int y0 = static_cast<int>(rng.below(static_cast<uint64_t>(size - 2)));
            for (int y = y0; y < std::min(y0 + h, size); ++y)
                for (int x = x0; x < std::min(x0 + w, size); ++x) canvas[y * size + x] = fill;
        } else {
            int cx = static_cast<int>(rng.below(static_cast<uint64_t>(size)));
            int cy = static_cast<int>(rng.below(static_cast<uint64_t>(size)));
            int rad = 3 + static_cast<int>(rng.below(static_cast<uint64_t>(size / 3)));
            for (int y = std::max(0, cy - rad); y < std::min(size, cy + rad + 1); ++y)
                for (int x = std::max(0, cx - rad); x < std::min(size, cx + rad + 1); ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad)
                        canvas[y * size + x] = fill;
        }
    }

    // Channel banding: quantize to 32 levels, a rendering-pipeline tell.
    RgbImage img;
    img.width = size;
    img.height = size;
    img.pixels.resize(static_cast<size_t>(3) * size * size);
    auto quant = [](double v) {
        double q = std::round(std::clamp(v, 0.0, 1.0) * 31.0) / 31.0;
        return to_byte(q);
    };
    for (int i = 0; i < size * size; ++i) {
        img.pixels[3 * i] = quant(canvas[i].r);
        img.pixels[3 * i + 1] = quant(canvas[i].g);
        img.pixels[3 * i + 2] = quant(canvas[i].b);
    }
    return img;
}

namespace {

void write_class_folder(const fs::path& dir, bool fake, int count, uint64_t seed, int size,
                        uint64_t stream) {
    fs::create_directories(dir);
    const char* prefix = fake ? "fake" : "real";
    for (int i = 0; i < count; ++i) {
        uint64_t s = mix_seed(seed, stream * 1000003ULL + static_cast<uint64_t>(i));
        RgbImage img = fake ? synth_fake_image(s, size) : synth_real_image(s, size);
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%05d.png", prefix, i);
        write_png_rgb8((dir / name).string(), img);
    }
}

}  // namespace

void synth_dataset_cifake(const std::string& root, int train_per_class, int test_per_class,
                          uint64_t seed, int size) {
    fs::path r(root);
    write_class_folder(r / "train" / "FAKE", true, train_per_class, seed, size, 1);
    write_class_folder(r / "train" / "REAL", false, train_per_class, seed, size, 2);
    write_class_folder(r / "test" / "FAKE", true, test_per_class, seed, size, 3);
    write_class_folder(r / "test" / "REAL", false, test_per_class, seed, size, 4);
}

void synth_dataset_flat(const std::string& root, int per_class, uint64_t seed, int size) {
    fs::path r(root);
    write_class_folder(r / "FAKE", true, per_class, seed, size, 1);
    write_class_folder(r / "REAL", false, per_class, seed, size, 2);
}

}  // namespace swinforge
