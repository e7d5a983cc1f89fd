#pragma once

// Finite-difference gradient oracle for the autodiff engine. Independent of
// the backward path it checks: it only perturbs tensor data and re-evaluates
// the forward closure.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "swinforge/tensor.hpp"

namespace gradcheck {

using swinforge::ag::Tensor;

struct Result {
    double max_rel_err = 0.0;
    int64_t checked = 0;
    std::string worst;
};

// forward() must rebuild the graph from current tensor values and return the
// scalar loss value. Central differences with step h; relative error uses
// max(1, |analytic|, |numeric|) as the scale.
inline Result check(const std::function<double()>& forward,
                    const std::function<void()>& backward,
                    std::vector<Tensor<double>> inputs, double h = 1e-5) {
    forward();
    backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& t : inputs)
        analytic.emplace_back(t.grad().begin(), t.grad().end());

    Result res;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        auto data = t.mutable_data();
        for (int64_t i = 0; i < t.numel(); ++i) {
            double orig = data[i];
            data[i] = orig + h;
            double fp = forward();
            data[i] = orig - h;
            double fm = forward();
            data[i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double a = analytic[ti][static_cast<size_t>(i)];
            double scale = std::max({1.0, std::abs(a), std::abs(numeric)});
            double rel = std::abs(a - numeric) / scale;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "tensor " + std::to_string(ti) + " elem " + std::to_string(i) +
                            " analytic " + std::to_string(a) + " numeric " +
                            std::to_string(numeric);
            }
            ++res.checked;
        }
    }
    return res;
}

// Convenience wrapper: loss_fn builds a fresh tape over `inputs` (marked
// requires_grad) and returns the scalar loss tensor.
inline Result check_op(
    const std::function<Tensor<double>(swinforge::ag::Tape<double>&)>& loss_fn,
    const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
    auto forward = [&]() {
        swinforge::ag::Tape<double> tape(false);
        return loss_fn(tape).item();
    };
    auto backward = [&]() {
        for (auto t : inputs) t.zero_grad();
        swinforge::ag::Tape<double> tape(true);
        auto loss = loss_fn(tape);
        tape.backward(loss);
    };
    return check(forward, backward, inputs, h);
}

inline Tensor<double> random_tensor(std::vector<int64_t> shape, swinforge::Rng& rng,
                                    double scale = 1.0, bool requires_grad = true) {
    std::vector<double> data(static_cast<size_t>(swinforge::shape_numel(shape)));
    for (auto& v : data) v = rng.normal() * scale;
    return Tensor<double>::from_vector(std::move(shape), std::move(data), requires_grad);
}

}  // namespace gradcheck
