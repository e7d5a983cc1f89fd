#pragma once

// Exact O(N^2) t-SNE over extracted features: Gaussian conditional
// affinities with per-row bandwidth found by perplexity bisection,
// symmetrization, Student-t low-dimensional affinities, and momentum
// gradient descent on the KL divergence with early exaggeration.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swinforge/common.hpp"

namespace swinforge {

struct TsneConfig {
    double perplexity = 30.0;
    int output_dim = 2;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch_iter = 250;
    uint64_t seed = 0;

    void validate(int64_t n) const;
};

// Order-independent sum: terms are pre-rounded to a power-of-two quantum
// sized so that accumulation is exact, then a second fold captures the
// residuals. The result is bitwise identical under any permutation of the
// terms, which is what makes the embedding permutation-equivariant.
double stable_sum(std::span<const double> terms);

// Row-normalized Gaussian affinities [n, n]; row i's bandwidth is bisected
// (<= 64 steps) until 2^H(row) matches the perplexity within 1e-4. Diagonal
// is zero.
std::vector<double> conditional_affinities(const std::vector<double>& x, int64_t n, int64_t d,
                                           double perplexity);

// P = (Pc + Pc^T) / 2n; symmetric, sums to 1.
std::vector<double> symmetrize(const std::vector<double>& p_conditional, int64_t n);

// Student-t affinities over ordered pairs; zero diagonal, sums to 1.
std::vector<double> low_dim_affinities(const std::vector<double>& y, int64_t n);

// sum_{i != j} p log(p/q) with 0 log(0/q) = 0.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, int64_t n);

// Analytic gradient of kl_divergence(P, Q(Y)) with respect to Y:
// grad_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) (1 + |y_i - y_j|^2)^-1.
std::vector<double> tsne_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                  int64_t n);

struct TsneResult {
    std::vector<double> y;          // [n, 2]
    std::vector<double> kl_trace;   // KL vs the unexaggerated P, per iteration
};

// y0, when provided, overrides the seeded Gaussian(sigma = 1e-4) init; the
// tests use it to verify permutation equivariance.
TsneResult tsne_run(const std::vector<double>& x, int64_t n, int64_t d, const TsneConfig& cfg,
                    const std::optional<std::vector<double>>& y0 = std::nullopt);

}  // namespace swinforge
