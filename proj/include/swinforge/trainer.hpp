#pragma once

// Training and evaluation: cross-entropy loss on the tape, bias-corrected
// Adam, the epoch loop with CSV logging and checkpointing, and a
// no-mutation evaluate pass that also yields class-1 scores for ROC.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "swinforge/common.hpp"
#include "swinforge/dataset.hpp"
#include "swinforge/swin.hpp"
#include "swinforge/tensor.hpp"

namespace swinforge {

enum class Precision { f32, f64 };

inline Precision precision_from_string(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw ConfigError("unknown precision '" + s + "' (expected f32 or f64)");
}

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t batch_size = 32;
    int64_t epochs = 5;
    uint64_t seed = 0;
    Precision precision = Precision::f32;

    void validate() const {
        if (!(learning_rate > 0) || !(eps > 0)) throw ConfigError("lr and eps must be positive");
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
            throw ConfigError("adam betas must lie in (0, 1)");
        if (batch_size <= 0) throw ConfigError("batch size must be positive");
        if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    }
};

// L = -(1/N) sum_i sum_j t_ij log p_ij with p = softmax(logits), t one-hot,
// evaluated through the log-sum-exp-stable log_softmax.
template <typename S>
ag::Tensor<S> cross_entropy_loss(ag::Tape<S>& tape, const ag::Tensor<S>& logits,
                                 const std::vector<int64_t>& labels) {
    const auto& shape = logits.shape();
    if (shape.size() != 2)
        throw ContractError("cross_entropy_loss expects [N, C] logits, got " +
                            format_shape(shape));
    const int64_t n = shape[0], c = shape[1];
    if (static_cast<int64_t>(labels.size()) != n)
        throw ContractError("cross_entropy_loss: " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(n) + " rows");
    std::vector<S> onehot(static_cast<size_t>(n * c), S(0));
    for (int64_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            throw ContractError("label " + std::to_string(labels[i]) + " out of range [0, " +
                                std::to_string(c) + ")");
        onehot[i * c + labels[i]] = S(1);
    }
    auto t = ag::Tensor<S>::from_vector({n, c}, std::move(onehot), false);
    auto picked = tape.sum_axis(tape.mul(tape.log_softmax(logits, 1), t), 1);  // [N]
    return tape.scale(tape.mean_all(picked), S(-1));
}

template <typename S>
struct AdamState {
    std::vector<std::vector<S>> m, v;
    int64_t t = 0;

    static AdamState init(ModelParams<S>& params) {
        AdamState state;
        params.for_each([&](const std::string&, ag::Tensor<S>& p) {
            state.m.emplace_back(static_cast<size_t>(p.numel()), S(0));
            state.v.emplace_back(static_cast<size_t>(p.numel()), S(0));
        });
        return state;
    }
};

// Standard bias-corrected Adam. All gradients are validated before any
// parameter is touched; a non-finite gradient aborts the step with
// parameters and state unchanged.
template <typename S>
void adam_step(ModelParams<S>& params, AdamState<S>& state, const TrainConfig& cfg) {
    std::vector<ag::Tensor<S>> tensors;
    params.for_each([&](const std::string& name, ag::Tensor<S>& p) {
        if (!p.requires_grad())
            throw ContractError("parameter without gradient slot: " + name);
        tensors.push_back(p);
    });
    if (tensors.size() != state.m.size())
        throw ContractError("optimizer state does not match parameter list");
    for (auto& p : tensors)
        for (S g : p.grad())
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient; step aborted, parameters unchanged");

    state.t += 1;
    const S lr = static_cast<S>(cfg.learning_rate);
    const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
    const S eps = static_cast<S>(cfg.eps);
    const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(state.t)));
    const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(state.t)));
    for (size_t i = 0; i < tensors.size(); ++i) {
        auto data = tensors[i].mutable_data();
        auto grad = tensors[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < m.size(); ++j) {
            const S g = grad[j];
            m[j] = b1 * m[j] + (S(1) - b1) * g;
            v[j] = b2 * v[j] + (S(1) - b2) * g * g;
            const S mhat = m[j] / bc1;
            const S vhat = v[j] / bc2;
            data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename S>
ag::Tensor<S> batch_to_tensor(const Batch& b) {
    std::vector<S> data(b.inputs.begin(), b.inputs.end());
    return ag::Tensor<S>::from_vector({b.size, 3, b.height, b.width}, std::move(data), false);
}

struct EpochLog {
    int64_t epoch = 0;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
    double seconds = 0;
};

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
    std::vector<int> predictions;      // argmax, ties toward class 0
    std::vector<int> labels;
    std::vector<double> scores;        // class-1 softmax probability
};

namespace detail_train {

// class-1 probability from a logit pair, stable for large margins
inline double class1_prob(double l0, double l1) {
    double m = std::max(l0, l1);
    double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    return e1 / (e0 + e1);
}

}  // namespace detail_train

// Full pass over a split in manifest order; no parameter mutation.
template <typename S>
EvalResult evaluate(const ModelParams<S>& params, const DatasetManifest& manifest, Split split,
                    const Preprocessing& prep, int64_t batch_size) {
    EvalResult res;
    double loss_weighted = 0;
    int64_t total = 0, correct = 0;
    BatchStream stream(manifest, split, batch_size, 0, prep, /*shuffle=*/false);
    while (auto batch = stream.next()) {
        ag::Tape<S> tape(false);
        auto x = batch_to_tensor<S>(*batch);
        auto logits = forward(tape, x, params);
        auto loss = cross_entropy_loss(tape, logits, batch->labels);
        loss_weighted += static_cast<double>(loss.item()) * static_cast<double>(batch->size);
        for (int64_t i = 0; i < batch->size; ++i) {
            double l0 = logits.data()[i * 2], l1 = logits.data()[i * 2 + 1];
            int pred = l1 > l0 ? 1 : 0;
            res.predictions.push_back(pred);
            res.labels.push_back(static_cast<int>(batch->labels[i]));
            res.scores.push_back(detail_train::class1_prob(l0, l1));
            if (pred == batch->labels[i]) ++correct;
        }
        total += batch->size;
    }
    res.loss = loss_weighted / static_cast<double>(total);
    res.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    return res;
}

struct TrainResult {
    std::vector<EpochLog> logs;
    std::string last_checkpoint;
    std::string best_checkpoint;
    double best_val_accuracy = -1;
};

// Epoch loop: shuffled batches, forward/backward/Adam per batch, per-epoch
// validation, CSV row per (epoch, split) flushed immediately, last and
// best-validation checkpoints. Deterministic for a fixed seed; in
// deterministic mode the seconds column is recorded as 0 so logs are
// byte-reproducible.
template <typename S>
TrainResult train(ModelParams<S>& params, const DatasetManifest& manifest,
                  const Preprocessing& prep, const TrainConfig& cfg,
                  const std::string& run_dir, const std::string& extra_ckpt_config = "") {
    cfg.validate();
    if (manifest.split_size(Split::train) == 0) throw DataError("train split is empty");
    if (manifest.split_size(Split::val) == 0) throw DataError("val split is empty");
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);

    TrainResult result;
    AdamState<S> state = AdamState<S>::init(params);

    std::ofstream csv(fs::path(run_dir) / "epochs.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write epoch log in " + run_dir);
    csv << "epoch,split,loss,accuracy,seconds\n";
    csv.flush();
    auto csv_row = [&](int64_t epoch, const char* split, double loss, double acc,
                       double seconds) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%lld,%s,%.6f,%.6f,%.3f\n",
                      static_cast<long long>(epoch), split, loss, acc, seconds);
        csv << buf;
        csv.flush();
    };

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double loss_weighted = 0;
        int64_t total = 0, correct = 0;

        BatchStream stream(manifest, Split::train, cfg.batch_size,
                           mix_seed(cfg.seed, static_cast<uint64_t>(epoch)), prep);
        while (auto batch = stream.next()) {
            params.zero_grads();
            ag::Tape<S> tape;
            auto x = batch_to_tensor<S>(*batch);
            auto logits = forward(tape, x, params);
            auto loss = cross_entropy_loss(tape, logits, batch->labels);
            loss_weighted +=
                static_cast<double>(loss.item()) * static_cast<double>(batch->size);
            for (int64_t i = 0; i < batch->size; ++i) {
                int pred = logits.data()[i * 2 + 1] > logits.data()[i * 2] ? 1 : 0;
                if (pred == batch->labels[i]) ++correct;
            }
            total += batch->size;
            tape.backward(loss);
            adam_step(params, state, cfg);
        }

        EvalResult val = evaluate(params, manifest, Split::val, prep, cfg.batch_size);

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_weighted / static_cast<double>(total);
        log.train_acc = static_cast<double>(correct) / static_cast<double>(total);
        log.val_loss = val.loss;
        log.val_acc = val.accuracy;
        log.seconds = deterministic_mode()
                          ? 0.0
                          : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                          start)
                                .count();
        csv_row(epoch, "train", log.train_loss, log.train_acc, log.seconds);
        csv_row(epoch, "val", log.val_loss, log.val_acc, log.seconds);
        result.logs.push_back(log);

        result.last_checkpoint = (fs::path(run_dir) / "last.ckpt").string();
        save_model(result.last_checkpoint, params, extra_ckpt_config);
        if (val.accuracy > result.best_val_accuracy) {
            result.best_val_accuracy = val.accuracy;
            result.best_checkpoint = (fs::path(run_dir) / "best.ckpt").string();
            save_model(result.best_checkpoint, params, extra_ckpt_config);
        }
    }
    return result;
}

}  // namespace swinforge
