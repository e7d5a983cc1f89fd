#include "swinforge/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace swinforge {

void TsneConfig::validate(int64_t n) const {
    if (output_dim != 2) throw ConfigError("t-SNE output_dim must be 2");
    if (!(perplexity > 0)) throw ConfigError("perplexity must be positive");
    if (perplexity >= static_cast<double>(n))
        throw ConfigError("perplexity " + std::to_string(perplexity) +
                          " must be smaller than the number of points " + std::to_string(n));
    if (iterations <= 0 || !(learning_rate > 0) || !(early_exaggeration > 0))
        throw ConfigError("t-SNE iterations, learning rate and exaggeration must be positive");
    if (exaggeration_iters < 0 || momentum_switch_iter < 0)
        throw ConfigError("t-SNE phase boundaries must be nonnegative");
    if (!(momentum_initial >= 0) || !(momentum_final >= 0) || momentum_initial >= 1 ||
        momentum_final >= 1)
        throw ConfigError("t-SNE momentum must lie in [0, 1)");
}

double stable_sum(std::span<const double> terms) {
    const size_t n = terms.size();
    if (n == 0) return 0.0;
    double mx = 0.0;
    for (double t : terms) mx = std::max(mx, std::abs(t));
    if (mx == 0.0) return 0.0;
    if (!std::isfinite(mx)) throw NumericError("stable_sum over non-finite terms");

    // Quantum q1 = 2^(e - 51) with 2^e >= (n+1) * mx, so partial sums of
    // rounded terms stay exactly representable multiples of q1.
    const int e = std::ilogb(static_cast<double>(n + 1)) + std::ilogb(mx) + 2;
    const double fold1 = std::ldexp(0x1.8p52, e - 51);  // 1.5 * 2^52 * q1
    // Residuals are bounded by q1/2 = 2^(e-52); second fold at their quantum.
    const int e2 = std::ilogb(static_cast<double>(n + 1)) + (e - 52) + 2;
    const double fold2 = std::ldexp(0x1.8p52, e2 - 51);

    double hi = 0.0, lo = 0.0;
    for (double t : terms) {
        double h = (t + fold1) - fold1;  // t rounded to a multiple of q1
        double r = t - h;                // exact
        hi += h;                         // exact accumulation
        lo += (r + fold2) - fold2;       // exact accumulation at the residual quantum
    }
    return hi + lo;
}

namespace {

// Squared Euclidean distances between rows of x; diagonal zero. Computed
// per-pair in fixed dimension order, so entries are bitwise stable under
// row permutation.
std::vector<double> pairwise_sqdist(const std::vector<double>& x, int64_t n, int64_t d) {
    std::vector<double> dist(static_cast<size_t>(n) * n, 0.0);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double acc = 0;
            const double* xi = x.data() + i * d;
            const double* xj = x.data() + j * d;
            for (int64_t k = 0; k < d; ++k) {
                double diff = xi[k] - xj[k];
                acc += diff * diff;
            }
            dist[i * n + j] = acc;
        }
    }
    return dist;
}

}  // namespace

std::vector<double> conditional_affinities(const std::vector<double>& x, int64_t n, int64_t d,
                                           double perplexity) {
    if (n < 2) throw ContractError("conditional_affinities requires at least 2 points");
    if (static_cast<int64_t>(x.size()) != n * d)
        throw ShapeError("feature matrix size does not match n*d");
    auto dist = pairwise_sqdist(x, n, d);

    std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
    std::vector<double> row(static_cast<size_t>(n));
    std::vector<double> weighted(static_cast<size_t>(n));
    const double tol = 1e-4;

    for (int64_t i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_min = -std::numeric_limits<double>::infinity();
        double beta_max = std::numeric_limits<double>::infinity();
        bool converged = false;
        double sum_p = 0.0;

        for (int step = 0; step < 64; ++step) {
            for (int64_t j = 0; j < n; ++j) {
                row[j] = (j == i) ? 0.0 : std::exp(-beta * dist[i * n + j]);
                weighted[j] = row[j] * dist[i * n + j];
            }
            sum_p = stable_sum(row);
            double perp_hat;
            if (sum_p <= 0.0) {
                perp_hat = 0.0;  // bandwidth too small, every neighbor underflowed
            } else {
                double h = std::log(sum_p) + beta * stable_sum(weighted) / sum_p;  // nats
                perp_hat = std::exp(h);
            }
            if (std::abs(perp_hat - perplexity) <= tol) {
                converged = true;
                break;
            }
            if (perp_hat > perplexity) {
                beta_min = beta;
                beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
            } else {
                beta_max = beta;
                beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
            }
        }
        if (!converged)
            throw NumericError("perplexity bisection failed to converge for row " +
                               std::to_string(i) + " (degenerate distances?)");
        const double inv = 1.0 / sum_p;
        for (int64_t j = 0; j < n; ++j) p[i * n + j] = row[j] * inv;
    }
    return p;
}

std::vector<double> symmetrize(const std::vector<double>& p_conditional, int64_t n) {
    if (static_cast<int64_t>(p_conditional.size()) != n * n)
        throw ShapeError("symmetrize: matrix is not n x n");
    std::vector<double> p(static_cast<size_t>(n) * n);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j)
            p[i * n + j] = (p_conditional[i * n + j] + p_conditional[j * n + i]) * scale;
    return p;
}

std::vector<double> low_dim_affinities(const std::vector<double>& y, int64_t n) {
    if (static_cast<int64_t>(y.size()) != n * 2)
        throw ShapeError("low_dim_affinities: embedding is not n x 2");
    std::vector<double> w(static_cast<size_t>(n) * n, 0.0);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dx = y[i * 2] - y[j * 2];
            double dy = y[i * 2 + 1] - y[j * 2 + 1];
            w[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    double z = stable_sum(w);
    if (!(z > 0)) throw NumericError("low_dim_affinities: degenerate normalization");
    const double inv = 1.0 / z;
    std::vector<double> q(w);
    for (auto& v : q) v *= inv;
    return q;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, int64_t n) {
    if (p.size() != q.size() || static_cast<int64_t>(p.size()) != n * n)
        throw ShapeError("kl_divergence: shape mismatch");
    std::vector<double> terms(p.size(), 0.0);
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            if (!(q[i] > 0.0))
                throw NumericError("kl_divergence: q is zero where p is positive");
            terms[i] = p[i] * std::log(p[i] / q[i]);
        }
    }
    return stable_sum(terms);
}

std::vector<double> tsne_gradient(const std::vector<double>& p, const std::vector<double>& y,
                                  int64_t n) {
    auto q = low_dim_affinities(y, n);
    std::vector<double> grad(static_cast<size_t>(n) * 2, 0.0);
    std::vector<double> terms(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        for (int dim = 0; dim < 2; ++dim) {
            for (int64_t j = 0; j < n; ++j) {
                if (i == j) {
                    terms[j] = 0.0;
                    continue;
                }
                double dx = y[i * 2] - y[j * 2];
                double dy = y[i * 2 + 1] - y[j * 2 + 1];
                double w = 1.0 / (1.0 + dx * dx + dy * dy);
                double diff = (dim == 0) ? dx : dy;
                terms[j] = (p[i * n + j] - q[i * n + j]) * diff * w;
            }
            grad[i * 2 + dim] = 4.0 * stable_sum(terms);
        }
    }
    return grad;
}

TsneResult tsne_run(const std::vector<double>& x, int64_t n, int64_t d, const TsneConfig& cfg,
                    const std::optional<std::vector<double>>& y0) {
    cfg.validate(n);
    if (static_cast<int64_t>(x.size()) != n * d)
        throw ShapeError("tsne_run: feature matrix size does not match n*d");

    auto p_true = symmetrize(conditional_affinities(x, n, d, cfg.perplexity), n);
    std::vector<double> p = p_true;
    for (auto& v : p) v *= cfg.early_exaggeration;

    TsneResult res;
    if (y0) {
        if (static_cast<int64_t>(y0->size()) != n * 2)
            throw ShapeError("tsne_run: initial embedding is not n x 2");
        res.y = *y0;
    } else {
        res.y.resize(static_cast<size_t>(n) * 2);
        Rng rng(cfg.seed);
        for (auto& v : res.y) v = rng.normal() * 1e-4;
    }

    std::vector<double> velocity(static_cast<size_t>(n) * 2, 0.0);
    res.kl_trace.reserve(cfg.iterations);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        if (iter == cfg.exaggeration_iters) p = p_true;
        const double momentum =
            iter < cfg.momentum_switch_iter ? cfg.momentum_initial : cfg.momentum_final;

        auto grad = tsne_gradient(p, res.y, n);
        for (size_t i = 0; i < velocity.size(); ++i) {
            velocity[i] = momentum * velocity[i] - cfg.learning_rate * grad[i];
            res.y[i] += velocity[i];
        }
        for (double v : res.y) {
            if (!std::isfinite(v))
                throw NumericError("t-SNE embedding diverged at iteration " +
                                   std::to_string(iter) + " (" +
                                   std::to_string(res.kl_trace.size()) +
                                   " KL trace entries completed)");
        }
        res.kl_trace.push_back(kl_divergence(p_true, low_dim_affinities(res.y, n), n));
    }
    return res;
}

}  // namespace swinforge
