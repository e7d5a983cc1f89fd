#pragma once

// Windowed-attention image classifier: patch embedding, stages of
// window / shifted-window attention blocks with patch merging between
// stages, and a two-class head. Scalar type is templated; training uses
// float, gradient checks instantiate double.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "swinforge/checkpoint.hpp"
#include "swinforge/common.hpp"
#include "swinforge/tensor.hpp"

namespace swinforge {

struct SwinConfig {
    int64_t input_size = 32;
    int64_t patch_size = 2;
    int64_t embed_dim = 24;
    std::vector<int64_t> depths{2, 2};
    std::vector<int64_t> num_heads{2, 2};
    int64_t window_size = 4;
    double mlp_ratio = 4.0;
    int64_t num_classes = 2;
    bool rel_pos_bias = true;

    int64_t num_stages() const { return static_cast<int64_t>(depths.size()); }
    int64_t stage_dim(int64_t s) const { return embed_dim << s; }
    int64_t stage_side(int64_t s) const { return (input_size / patch_size) >> s; }
    int64_t final_dim() const { return stage_dim(num_stages() - 1); }
    int64_t mlp_hidden(int64_t s) const {
        return static_cast<int64_t>(std::llround(mlp_ratio * static_cast<double>(stage_dim(s))));
    }
    // Odd blocks shift by floor(M/2); a stage whose map is a single window
    // has nothing to shift across and uses 0.
    int64_t block_shift(int64_t stage, int64_t block) const {
        if (block % 2 == 0 || stage_side(stage) <= window_size) return 0;
        return window_size / 2;
    }

    void validate() const {
        if (num_classes != 2) throw ConfigError("num_classes must be 2");
        if (depths.empty() || depths.size() != num_heads.size())
            throw ConfigError("depths and heads lists must be the same nonempty size");
        if (input_size <= 0 || patch_size <= 0 || embed_dim <= 0 || window_size <= 0)
            throw ConfigError("config extents must be positive");
        if (!(mlp_ratio > 0)) throw ConfigError("mlp_ratio must be positive");
        if (input_size % patch_size != 0)
            throw ConfigError("input_size " + std::to_string(input_size) +
                              " not divisible by patch_size " + std::to_string(patch_size));
        for (int64_t s = 0; s < num_stages(); ++s) {
            if (depths[s] <= 0 || num_heads[s] <= 0)
                throw ConfigError("stage depth and head counts must be positive");
            int64_t side = stage_side(s);
            if (side <= 0 || side % window_size != 0)
                throw ConfigError("stage " + std::to_string(s) + " feature side " +
                                  std::to_string(side) + " not divisible by window_size " +
                                  std::to_string(window_size));
            if (stage_dim(s) % num_heads[s] != 0)
                throw ConfigError("stage " + std::to_string(s) + " dim " +
                                  std::to_string(stage_dim(s)) + " not divisible by " +
                                  std::to_string(num_heads[s]) + " heads");
            if (s + 1 < num_stages() && side % 2 != 0)
                throw ConfigError("stage " + std::to_string(s) + " feature side " +
                                  std::to_string(side) + " must be even before merging");
        }
    }

    static SwinConfig tiny() { return SwinConfig{}; }

    static SwinConfig paper_scale() {
        SwinConfig c;
        c.input_size = 224;
        c.patch_size = 4;
        c.embed_dim = 96;
        c.depths = {2, 2, 6, 2};
        c.num_heads = {3, 6, 12, 24};
        c.window_size = 7;
        return c;
    }

    static SwinConfig preset(const std::string& name) {
        if (name == "tiny") return tiny();
        if (name == "paper") return paper_scale();
        throw ConfigError("unknown preset '" + name + "' (expected tiny or paper)");
    }

    std::string to_kv() const {
        std::ostringstream os;
        os << "input_size=" << input_size << "\npatch_size=" << patch_size
           << "\nembed_dim=" << embed_dim << "\ndepths=" << join(depths)
           << "\nnum_heads=" << join(num_heads) << "\nwindow_size=" << window_size
           << "\nmlp_ratio=" << mlp_ratio << "\nnum_classes=" << num_classes
           << "\nrel_pos_bias=" << (rel_pos_bias ? 1 : 0) << "\n";
        return os.str();
    }

    static SwinConfig from_kv(const std::map<std::string, std::string>& kv) {
        SwinConfig c;
        auto need = [&](const std::string& k) {
            auto it = kv.find(k);
            if (it == kv.end()) throw ConfigError("checkpoint config missing key " + k);
            return it->second;
        };
        c.input_size = std::stoll(need("input_size"));
        c.patch_size = std::stoll(need("patch_size"));
        c.embed_dim = std::stoll(need("embed_dim"));
        c.depths = split_list(need("depths"));
        c.num_heads = split_list(need("num_heads"));
        c.window_size = std::stoll(need("window_size"));
        c.mlp_ratio = std::stod(need("mlp_ratio"));
        c.num_classes = std::stoll(need("num_classes"));
        c.rel_pos_bias = need("rel_pos_bias") != "0";
        c.validate();
        return c;
    }

private:
    static std::string join(const std::vector<int64_t>& v) {
        std::ostringstream os;
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) os << ",";
            os << v[i];
        }
        return os.str();
    }
    static std::vector<int64_t> split_list(const std::string& s) {
        std::vector<int64_t> out;
        std::istringstream is(s);
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(std::stoll(tok));
        return out;
    }
};

// ---- window index helpers (host side) -------------------------------------

// For each window and slot, the (row, col) it reads from an side x side map.
inline std::vector<std::pair<int64_t, int64_t>> window_slot_origin(int64_t side, int64_t m) {
    std::vector<std::pair<int64_t, int64_t>> out;
    int64_t nw = side / m;
    for (int64_t wy = 0; wy < nw; ++wy)
        for (int64_t wx = 0; wx < nw; ++wx)
            for (int64_t iy = 0; iy < m; ++iy)
                for (int64_t ix = 0; ix < m; ++ix)
                    out.emplace_back(wy * m + iy, wx * m + ix);
    return out;
}

// Region labels for the shifted-window mask: the map splits at side-M and
// side-shift along both axes into 3x3 blocks; attention may not cross labels.
inline std::vector<int> shift_region_ids(int64_t side, int64_t m, int64_t shift) {
    std::vector<int> ids(static_cast<size_t>(side) * side);
    auto band = [&](int64_t v) { return v < side - m ? 0 : (v < side - shift ? 1 : 2); };
    for (int64_t y = 0; y < side; ++y)
        for (int64_t x = 0; x < side; ++x)
            ids[y * side + x] = band(y) * 3 + band(x);
    return ids;
}

// Flat [m^2 * m^2] table of relative-coordinate indices into a (2m-1)^2 bias
// table.
inline std::vector<int64_t> relative_position_index(int64_t m) {
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(m * m * m * m));
    for (int64_t i = 0; i < m * m; ++i)
        for (int64_t j = 0; j < m * m; ++j) {
            int64_t dy = i / m - j / m + m - 1;
            int64_t dx = i % m - j % m + m - 1;
            idx.push_back(dy * (2 * m - 1) + dx);
        }
    return idx;
}

// Additive attention mask [nW, heads, m^2, m^2] with 0 on same-region pairs
// and -1e9 across regions, for a map cyclically shifted by (-shift, -shift).
template <typename S>
ag::Tensor<S> build_shift_mask(int64_t side, int64_t m, int64_t shift, int64_t heads) {
    auto ids = shift_region_ids(side, m, shift);
    auto origin = window_slot_origin(side, m);
    int64_t nw = (side / m) * (side / m);
    int64_t mm = m * m;
    std::vector<S> mask(static_cast<size_t>(nw * heads * mm * mm), S(0));
    for (int64_t w = 0; w < nw; ++w) {
        for (int64_t i = 0; i < mm; ++i) {
            auto [yi, xi] = origin[w * mm + i];
            int idi = ids[yi * side + xi];
            for (int64_t j = 0; j < mm; ++j) {
                auto [yj, xj] = origin[w * mm + j];
                if (idi != ids[yj * side + xj]) {
                    for (int64_t h = 0; h < heads; ++h)
                        mask[((w * heads + h) * mm + i) * mm + j] = S(-1e9);
                }
            }
        }
    }
    return ag::Tensor<S>::from_vector({nw, heads, mm, mm}, std::move(mask), false);
}

// ---- parameters -------------------------------------------------------------

template <typename S>
struct BlockParams {
    ag::Tensor<S> norm1_gain, norm1_bias;
    ag::Tensor<S> q_weight, q_bias, k_weight, k_bias, v_weight, v_bias;
    ag::Tensor<S> proj_weight, proj_bias;
    ag::Tensor<S> rel_bias;  // [(2M-1)^2, heads]; undefined when disabled
    ag::Tensor<S> norm2_gain, norm2_bias;
    ag::Tensor<S> fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

template <typename S>
struct StageParams {
    std::vector<BlockParams<S>> blocks;
    // merge present on all stages but the last
    ag::Tensor<S> merge_norm_gain, merge_norm_bias, merge_weight;
};

template <typename S>
struct ModelParams {
    SwinConfig config;
    ag::Tensor<S> patch_weight, patch_bias, patch_norm_gain, patch_norm_bias;
    std::vector<StageParams<S>> stages;
    ag::Tensor<S> head_norm_gain, head_norm_bias, head_weight, head_bias;

    // Weight matrices from a truncated normal (sigma 0.02), biases and the
    // relative-position tables zero, norm gains one.
    static ModelParams init(const SwinConfig& config, uint64_t seed) {
        Rng rng(seed);
        auto weight = [&](std::vector<int64_t> shape) {
            std::vector<S> data(static_cast<size_t>(shape_numel(shape)));
            for (auto& v : data) v = static_cast<S>(rng.truncated_normal(0.02));
            return ag::Tensor<S>::from_vector(std::move(shape), std::move(data), true);
        };
        auto zeros = [](std::vector<int64_t> shape) {
            return ag::Tensor<S>::zeros(std::move(shape), true);
        };
        auto ones = [](std::vector<int64_t> shape) {
            return ag::Tensor<S>::full(std::move(shape), S(1), true);
        };
        return build(config, weight, zeros, ones);
    }

    static ModelParams zeros(const SwinConfig& config) {
        auto z = [](std::vector<int64_t> shape) {
            return ag::Tensor<S>::zeros(std::move(shape), true);
        };
        return build(config, z, z, z);
    }

    // Stable enumeration used by the optimizer and the checkpoint format.
    void for_each(const std::function<void(const std::string&, ag::Tensor<S>&)>& fn) {
        fn("patch_embed.proj.weight", patch_weight);
        fn("patch_embed.proj.bias", patch_bias);
        fn("patch_embed.norm.gain", patch_norm_gain);
        fn("patch_embed.norm.bias", patch_norm_bias);
        for (size_t s = 0; s < stages.size(); ++s) {
            for (size_t b = 0; b < stages[s].blocks.size(); ++b) {
                auto& blk = stages[s].blocks[b];
                std::string p = "stages." + std::to_string(s) + ".blocks." + std::to_string(b);
                fn(p + ".norm1.gain", blk.norm1_gain);
                fn(p + ".norm1.bias", blk.norm1_bias);
                fn(p + ".attn.q.weight", blk.q_weight);
                fn(p + ".attn.q.bias", blk.q_bias);
                fn(p + ".attn.k.weight", blk.k_weight);
                fn(p + ".attn.k.bias", blk.k_bias);
                fn(p + ".attn.v.weight", blk.v_weight);
                fn(p + ".attn.v.bias", blk.v_bias);
                fn(p + ".attn.proj.weight", blk.proj_weight);
                fn(p + ".attn.proj.bias", blk.proj_bias);
                if (config.rel_pos_bias) fn(p + ".attn.rel_bias", blk.rel_bias);
                fn(p + ".norm2.gain", blk.norm2_gain);
                fn(p + ".norm2.bias", blk.norm2_bias);
                fn(p + ".mlp.fc1.weight", blk.fc1_weight);
                fn(p + ".mlp.fc1.bias", blk.fc1_bias);
                fn(p + ".mlp.fc2.weight", blk.fc2_weight);
                fn(p + ".mlp.fc2.bias", blk.fc2_bias);
            }
            if (s + 1 < stages.size()) {
                std::string p = "stages." + std::to_string(s) + ".merge";
                fn(p + ".norm.gain", stages[s].merge_norm_gain);
                fn(p + ".norm.bias", stages[s].merge_norm_bias);
                fn(p + ".reduce.weight", stages[s].merge_weight);
            }
        }
        fn("head.norm.gain", head_norm_gain);
        fn("head.norm.bias", head_norm_bias);
        fn("head.weight", head_weight);
        fn("head.bias", head_bias);
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for_each([&](const std::string&, ag::Tensor<S>& t) { n += t.numel(); });
        return n;
    }

    void zero_grads() {
        for_each([](const std::string&, ag::Tensor<S>& t) { t.zero_grad(); });
    }

private:
    template <typename W, typename Z, typename O>
    static ModelParams build(const SwinConfig& config, W weight, Z zeros, O ones) {
        config.validate();
        ModelParams p;
        p.config = config;
        const int64_t c0 = config.embed_dim;
        const int64_t patch_in = 3 * config.patch_size * config.patch_size;
        p.patch_weight = weight({patch_in, c0});
        p.patch_bias = zeros({c0});
        p.patch_norm_gain = ones({c0});
        p.patch_norm_bias = zeros({c0});
        const int64_t m = config.window_size;
        const int64_t bias_rows = (2 * m - 1) * (2 * m - 1);
        for (int64_t s = 0; s < config.num_stages(); ++s) {
            StageParams<S> stage;
            const int64_t c = config.stage_dim(s);
            const int64_t hidden = config.mlp_hidden(s);
            for (int64_t b = 0; b < config.depths[s]; ++b) {
                BlockParams<S> blk;
                blk.norm1_gain = ones({c});
                blk.norm1_bias = zeros({c});
                blk.q_weight = weight({c, c});
                blk.q_bias = zeros({c});
                blk.k_weight = weight({c, c});
                blk.k_bias = zeros({c});
                blk.v_weight = weight({c, c});
                blk.v_bias = zeros({c});
                blk.proj_weight = weight({c, c});
                blk.proj_bias = zeros({c});
                if (config.rel_pos_bias) blk.rel_bias = zeros({bias_rows, config.num_heads[s]});
                blk.norm2_gain = ones({c});
                blk.norm2_bias = zeros({c});
                blk.fc1_weight = weight({c, hidden});
                blk.fc1_bias = zeros({hidden});
                blk.fc2_weight = weight({hidden, c});
                blk.fc2_bias = zeros({c});
                stage.blocks.push_back(std::move(blk));
            }
            if (s + 1 < config.num_stages()) {
                stage.merge_norm_gain = ones({4 * c});
                stage.merge_norm_bias = zeros({4 * c});
                stage.merge_weight = weight({4 * c, 2 * c});
            }
            p.stages.push_back(std::move(stage));
        }
        const int64_t cf = config.final_dim();
        p.head_norm_gain = ones({cf});
        p.head_norm_bias = zeros({cf});
        p.head_weight = weight({cf, config.num_classes});
        p.head_bias = zeros({config.num_classes});
        return p;
    }
};

// ---- forward ----------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

template <typename S>
struct AttentionInputs {
    ag::Tensor<S> q, k, v;  // [windows*batch, heads, M^2, k_v]
};

template <typename S>
ag::Tensor<S> patch_embed(ag::Tape<S>& tape, const ag::Tensor<S>& x,
                          const ModelParams<S>& params) {
    const auto& cfg = params.config;
    const auto& sx = x.shape();
    if (sx.size() != 4 || sx[1] != 3 || sx[2] != cfg.input_size || sx[3] != cfg.input_size)
        throw ShapeError("patch_embed expects [B,3," + std::to_string(cfg.input_size) + "," +
                         std::to_string(cfg.input_size) + "], got " + format_shape(sx));
    const int64_t b = sx[0], p = cfg.patch_size, g = cfg.input_size / p;
    auto t = tape.reshape(x, {b, 3, g, p, g, p});
    t = tape.permute(t, {0, 2, 4, 1, 3, 5});            // [B, g, g, 3, p, p]
    t = tape.reshape(t, {b * g * g, 3 * p * p});
    t = tape.add_suffix(tape.matmul(t, params.patch_weight), params.patch_bias);
    t = tape.reshape(t, {b, g * g, cfg.embed_dim});
    return tape.layer_norm(t, params.patch_norm_gain, params.patch_norm_bias,
                           S(kLayerNormEps));
}

template <typename S>
ag::Tensor<S> window_partition(ag::Tape<S>& tape, const ag::Tensor<S>& x, int64_t m) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] % m != 0 || s[2] % m != 0)
        throw ShapeError("window_partition expects [B,Hf,Wf,C] with Hf,Wf divisible by " +
                         std::to_string(m) + ", got " + format_shape(s));
    const int64_t b = s[0], hf = s[1], wf = s[2], c = s[3];
    auto t = tape.reshape(x, {b, hf / m, m, wf / m, m, c});
    t = tape.permute(t, {0, 1, 3, 2, 4, 5});
    return tape.reshape(t, {b * (hf / m) * (wf / m), m * m, c});
}

template <typename S>
ag::Tensor<S> window_reverse(ag::Tape<S>& tape, const ag::Tensor<S>& windows, int64_t b,
                             int64_t hf, int64_t wf, int64_t m) {
    const int64_t c = windows.shape()[2];
    auto t = tape.reshape(windows, {b, hf / m, wf / m, m, m, c});
    t = tape.permute(t, {0, 1, 3, 2, 4, 5});
    return tape.reshape(t, {b, hf, wf, c});
}

// softmax((Q K^T) / sqrt(k_v) + bias + mask) V per head and window. bias is
// [heads, M^2, M^2] (optional), mask is [nW, heads, M^2, M^2] (optional,
// additive with -1e9 across regions). attn_probs_out, when given, receives
// the post-softmax attention.
template <typename S>
ag::Tensor<S> windowed_attention(ag::Tape<S>& tape, const AttentionInputs<S>& in,
                                 std::type_identity_t<const ag::Tensor<S>*> bias,
                                 std::type_identity_t<const ag::Tensor<S>*> mask,
                                 std::type_identity_t<ag::Tensor<S>*> attn_probs_out =
                                     nullptr) {
    const auto& sq = in.q.shape();
    if (sq.size() != 4)
        throw ShapeError("attention inputs must be [BW, heads, M^2, k_v], got " +
                         format_shape(sq));
    const int64_t bw = sq[0], heads = sq[1], mm = sq[2], kv = sq[3];
    auto q = tape.scale(in.q, S(1.0 / std::sqrt(static_cast<double>(kv))));
    auto scores = tape.matmul(q, tape.permute(in.k, {0, 1, 3, 2}));  // [BW, h, M^2, M^2]
    if (bias) scores = tape.add_suffix(scores, *bias);
    if (mask) {
        const int64_t nw = mask->shape()[0];
        if (bw % nw != 0)
            throw ShapeError("mask window count " + std::to_string(nw) +
                             " does not divide batch of windows " + std::to_string(bw));
        scores = tape.reshape(scores, {bw / nw, nw, heads, mm, mm});
        scores = tape.add_suffix(scores, *mask);
        scores = tape.reshape(scores, {bw, heads, mm, mm});
    }
    auto probs = tape.softmax(scores, 3);
    if (attn_probs_out) *attn_probs_out = probs;
    auto out = tape.matmul(probs, in.v);               // [BW, h, M^2, kv]
    out = tape.permute(out, {0, 2, 1, 3});             // [BW, M^2, h, kv]
    return tape.reshape(out, {bw, mm, heads * kv});
}

// One transformer block: pre-norm windowed attention with optional cyclic
// shift and residual, then pre-norm MLP with residual. x is [B, N, C] with
// N = side^2.
template <typename S>
ag::Tensor<S> swin_block(ag::Tape<S>& tape, const ag::Tensor<S>& x, const BlockParams<S>& bp,
                         int64_t side, int64_t heads, int64_t m, int64_t shift,
                         std::type_identity_t<const ag::Tensor<S>*> mask, bool use_rel_bias,
                         std::type_identity_t<ag::Tensor<S>*> attn_probs_out = nullptr) {
    const int64_t b = x.shape()[0], n = x.shape()[1], c = x.shape()[2];
    if (n != side * side)
        throw ShapeError("token count " + std::to_string(n) + " does not match side " +
                         std::to_string(side));
    const int64_t kv = c / heads;

    auto h = tape.layer_norm(x, bp.norm1_gain, bp.norm1_bias, S(kLayerNormEps));
    auto spatial = tape.reshape(h, {b, side, side, c});
    if (shift > 0) spatial = tape.roll(spatial, {-shift, -shift}, {1, 2});
    auto windows = window_partition(tape, spatial, m);  // [BW, M^2, C]
    const int64_t bw = windows.shape()[0], mm = m * m;

    auto flat = tape.reshape(windows, {bw * mm, c});
    auto heads_view = [&](const ag::Tensor<S>& w, const ag::Tensor<S>& bias) {
        auto y = tape.add_suffix(tape.matmul(flat, w), bias);
        y = tape.reshape(y, {bw, mm, heads, kv});
        return tape.permute(y, {0, 2, 1, 3});  // [BW, heads, M^2, kv]
    };
    AttentionInputs<S> attn_in{heads_view(bp.q_weight, bp.q_bias),
                               heads_view(bp.k_weight, bp.k_bias),
                               heads_view(bp.v_weight, bp.v_bias)};

    ag::Tensor<S> bias_full;
    if (use_rel_bias) {
        auto gathered = tape.gather_rows(bp.rel_bias, relative_position_index(m));
        bias_full = tape.permute(tape.reshape(gathered, {mm, mm, heads}), {2, 0, 1});
    }
    auto att = windowed_attention(tape, attn_in, use_rel_bias ? &bias_full : nullptr, mask,
                                  attn_probs_out);       // [BW, M^2, C]
    auto proj = tape.add_suffix(tape.matmul(tape.reshape(att, {bw * mm, c}), bp.proj_weight),
                                bp.proj_bias);
    auto merged = window_reverse(tape, tape.reshape(proj, {bw, mm, c}), b, side, side, m);
    if (shift > 0) merged = tape.roll(merged, {shift, shift}, {1, 2});
    auto x1 = tape.add(x, tape.reshape(merged, {b, n, c}));

    auto h2 = tape.layer_norm(x1, bp.norm2_gain, bp.norm2_bias, S(kLayerNormEps));
    auto flat2 = tape.reshape(h2, {b * n, c});
    auto hidden = tape.gelu(tape.add_suffix(tape.matmul(flat2, bp.fc1_weight), bp.fc1_bias));
    auto mlp = tape.add_suffix(tape.matmul(hidden, bp.fc2_weight), bp.fc2_bias);
    return tape.add(x1, tape.reshape(mlp, {b, n, c}));
}

// Concatenates each 2x2 token neighborhood (row-major within the
// neighborhood), layer-norms the 4C vector and reduces it to 2C.
template <typename S>
ag::Tensor<S> patch_merging(ag::Tape<S>& tape, const ag::Tensor<S>& x, int64_t side,
                            const StageParams<S>& stage) {
    const int64_t b = x.shape()[0], c = x.shape()[2];
    if (side % 2 != 0)
        throw ShapeError("patch merging requires an even feature side, got " +
                         std::to_string(side));
    auto t = tape.reshape(x, {b, side / 2, 2, side / 2, 2, c});
    t = tape.permute(t, {0, 1, 3, 2, 4, 5});  // [B, s/2, s/2, 2, 2, C]
    t = tape.reshape(t, {b, (side / 2) * (side / 2), 4 * c});
    t = tape.layer_norm(t, stage.merge_norm_gain, stage.merge_norm_bias, S(kLayerNormEps));
    auto flat = tape.reshape(t, {b * (side / 2) * (side / 2), 4 * c});
    auto reduced = tape.matmul(flat, stage.merge_weight);
    return tape.reshape(reduced, {b, (side / 2) * (side / 2), 2 * c});
}

// Pooled pre-head representation: stages -> final norm -> mean over tokens.
template <typename S>
ag::Tensor<S> extract_features(ag::Tape<S>& tape, const ag::Tensor<S>& x,
                               const ModelParams<S>& params) {
    const auto& cfg = params.config;
    auto tokens = patch_embed(tape, x, params);
    for (int64_t s = 0; s < cfg.num_stages(); ++s) {
        const int64_t side = cfg.stage_side(s);
        ag::Tensor<S> mask;
        for (int64_t blk = 0; blk < cfg.depths[s]; ++blk) {
            const int64_t shift = cfg.block_shift(s, blk);
            if (shift > 0 && !mask.defined())
                mask = build_shift_mask<S>(side, cfg.window_size, shift, cfg.num_heads[s]);
            try {
                tokens = swin_block(tape, tokens, params.stages[s].blocks[blk], side,
                                    cfg.num_heads[s], cfg.window_size, shift,
                                    shift > 0 ? &mask : nullptr, cfg.rel_pos_bias);
            } catch (const NumericError& e) {
                throw NumericError("stage " + std::to_string(s) + " block " +
                                   std::to_string(blk) + ": " + e.what());
            }
        }
        if (s + 1 < cfg.num_stages())
            tokens = patch_merging(tape, tokens, side, params.stages[s]);
    }
    auto normed = tape.layer_norm(tokens, params.head_norm_gain, params.head_norm_bias,
                                  S(kLayerNormEps));
    return tape.mean_axis(normed, 1);  // [B, C_final]
}

template <typename S>
ag::Tensor<S> apply_head(ag::Tape<S>& tape, const ag::Tensor<S>& features,
                         const ModelParams<S>& params) {
    return tape.add_suffix(tape.matmul(features, params.head_weight), params.head_bias);
}

// Raw logits [B, 2]; probabilities only appear inside the loss and at
// inference.
template <typename S>
ag::Tensor<S> forward(ag::Tape<S>& tape, const ag::Tensor<S>& x, const ModelParams<S>& params) {
    return apply_head(tape, extract_features(tape, x, params), params);
}

// ---- checkpoint bridge -------------------------------------------------------

template <typename S>
void save_model(const std::string& path, ModelParams<S>& params,
                const std::string& extra_config = "") {
    Checkpoint ckpt;
    ckpt.config = params.config.to_kv() + extra_config;
    params.for_each([&](const std::string& name, ag::Tensor<S>& t) {
        CheckpointTensor ct;
        ct.dtype = sizeof(S) == 4 ? CheckpointDtype::f32 : CheckpointDtype::f64;
        ct.shape = t.shape();
        ct.bytes.resize(t.numel() * sizeof(S));
        std::memcpy(ct.bytes.data(), t.data().data(), ct.bytes.size());
        ckpt.tensors.emplace_back(name, std::move(ct));
    });
    save_checkpoint(path, ckpt);
}

template <typename S>
ModelParams<S> load_model(const Checkpoint& ckpt) {
    SwinConfig cfg = SwinConfig::from_kv(parse_kv(ckpt.config));
    ModelParams<S> params = ModelParams<S>::zeros(cfg);
    params.for_each([&](const std::string& name, ag::Tensor<S>& t) {
        const CheckpointTensor* ct = ckpt.find(name);
        if (!ct) throw ConfigError("checkpoint is missing tensor " + name);
        if (ct->shape != t.shape())
            throw ConfigError("checkpoint tensor " + name + " has shape " +
                              format_shape(ct->shape) + " but the model expects " +
                              format_shape(t.shape()));
        auto data = t.mutable_data();
        if (ct->dtype == CheckpointDtype::f32) {
            const float* src = reinterpret_cast<const float*>(ct->bytes.data());
            for (int64_t i = 0; i < t.numel(); ++i) data[i] = static_cast<S>(src[i]);
        } else {
            const double* src = reinterpret_cast<const double*>(ct->bytes.data());
            for (int64_t i = 0; i < t.numel(); ++i) data[i] = static_cast<S>(src[i]);
        }
    });
    return params;
}

template <typename S>
ModelParams<S> load_model(const std::string& path) {
    return load_model<S>(load_checkpoint(path));
}

}  // namespace swinforge
