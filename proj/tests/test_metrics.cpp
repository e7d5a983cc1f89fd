#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "swinforge/common.hpp"
#include "swinforge/metrics.hpp"

using namespace swinforge;

namespace {

// Independent AUC oracle: P(score+ > score-) + 0.5 P(score+ = score-) over
// all positive-negative pairs, as an exact integer ratio.
double pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    int64_t num = 0, pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        ++pos;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) num += 2;
            else if (scores[i] == scores[j]) num += 1;
        }
    }
    for (int l : labels)
        if (l == 0) ++neg;
    return static_cast<double>(num) / (2.0 * static_cast<double>(pos) *
                                       static_cast<double>(neg));
}

}  // namespace

TEST_CASE("confusion counts") {
    std::vector<int> labels{1, 0, 0, 1};
    CHECK(confusion(labels, labels).fp == 0);
    CHECK(confusion(labels, labels).fn == 0);

    std::vector<int> inverted{0, 1, 1, 0};
    auto cm = confusion(inverted, labels);
    CHECK(cm.tp == 0);
    CHECK(cm.tn == 0);

    auto hand = confusion({1, 0, 1, 1}, {1, 0, 0, 1}, /*positive=*/1);
    CHECK(hand.tp == 2);
    CHECK(hand.fp == 1);
    CHECK(hand.tn == 1);
    CHECK(hand.fn == 0);

    CHECK_THROWS_AS(confusion({1, 0}, {1}), ContractError);
    CHECK_THROWS_AS(confusion({2, 0}, {1, 0}), ContractError);
}

TEST_CASE("prf1 values") {
    auto perfect = prf1(confusion({1, 0, 1}, {1, 0, 1}));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    ConfusionMatrix cm{2, 1, 1, 0};
    auto r = prf1(cm);
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(0.8));

    // all-negative predictions: precision undefined -> 0 with flag
    auto deg = prf1(confusion({0, 0}, {1, 0}));
    CHECK(deg.precision == 0.0);
    CHECK_FALSE(deg.precision_defined);
    CHECK_FALSE(deg.f1_defined);
}

TEST_CASE("reported F1 is the harmonic mean of reported precision and recall") {
    // internal consistency of the published comparison row
    double p = 97.15, r = 97.60;
    double f1 = 2.0 * p * r / (p + r);
    CHECK(std::abs(f1 - 97.37) <= 0.01);
    CHECK(f1 == doctest::Approx(97.374).epsilon(1e-4));
}

TEST_CASE("roc_auc basic cases") {
    // perfectly separated
    auto perfect = roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(perfect.auc == 1.0);

    // hand case: pairs (0.9>0.8), (0.9>0.6), (0.7<0.8), (0.7>0.6) -> 3/4
    auto hand = roc_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0});
    CHECK(hand.auc == doctest::Approx(0.75));
    CHECK(hand.auc == pair_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}));

    CHECK_THROWS_AS(roc_auc({0.5, 0.4}, {1, 1}), ContractError);
}

TEST_CASE("roc curve starts at (0,0), ends at (1,1), tpr nondecreasing") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + static_cast<int>(rng.below(60));
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            scores.push_back(std::round(rng.uniform() * 8) / 8.0);  // force ties
            labels.push_back(static_cast<int>(rng.below(2)));
        }
        labels[0] = 1;
        labels[n - 1] = 0;  // both classes present
        auto curve = roc_auc(scores, labels);
        CHECK(curve.points.front() == std::pair<double, double>(0.0, 0.0));
        CHECK(curve.points.back() == std::pair<double, double>(1.0, 1.0));
        for (size_t i = 1; i < curve.points.size(); ++i) {
            CHECK(curve.points[i].first >= curve.points[i - 1].first);
            CHECK(curve.points[i].second >= curve.points[i - 1].second);
        }
    }
}

TEST_CASE("trapezoidal AUC equals the pair-counting estimator exactly") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + static_cast<int>(rng.below(199));
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            // quantized scores so ties occur often
            scores.push_back(std::round(rng.uniform() * 16) / 16.0);
            labels.push_back(static_cast<int>(rng.below(2)));
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        auto curve = roc_auc(scores, labels);
        CHECK(curve.auc == pair_auc(scores, labels));  // bitwise
    }
}

TEST_CASE("shuffled labels give AUC near one half") {
    Rng rng(23);
    const int n = 10000;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = static_cast<int>(rng.below(2));
    }
    auto curve = roc_auc(scores, labels);
    CHECK(std::abs(curve.auc - 0.5) <= 0.02);
}

TEST_CASE("metrics are invariant under simultaneous permutation") {
    Rng rng(31);
    int n = 64;
    std::vector<double> scores(n);
    std::vector<int> labels(n), preds(n);
    for (int i = 0; i < n; ++i) {
        scores[i] = std::round(rng.uniform() * 10) / 10.0;
        labels[i] = static_cast<int>(rng.below(2));
        preds[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    Rng prng(77);
    prng.shuffle(perm);

    std::vector<double> s2(n);
    std::vector<int> l2(n), p2(n);
    for (int i = 0; i < n; ++i) {
        s2[i] = scores[perm[i]];
        l2[i] = labels[perm[i]];
        p2[i] = preds[perm[i]];
    }
    auto a = prf1(confusion(preds, labels));
    auto b = prf1(confusion(p2, l2));
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
    CHECK(a.f1 == b.f1);
    CHECK(roc_auc(scores, labels).auc == roc_auc(s2, l2).auc);

    CHECK(a.accuracy >= 0.0);
    CHECK(a.accuracy <= 1.0);
    CHECK(a.f1 >= 0.0);
    CHECK(a.f1 <= 1.0);
}
