#pragma once

// Binary classification metrics: confusion counts, accuracy/precision/
// recall/F1, and ROC with trapezoidal AUC. The positive class defaults to
// Fake (label 0) at the call sites in the CLI; these functions take labels
// already expressed as 1 = positive.

#include <cstdint>
#include <utility>
#include <vector>

#include "swinforge/common.hpp"

namespace swinforge {

struct ConfusionMatrix {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    int64_t total() const { return tp + fp + tn + fn; }
};

// preds/labels are 0/1 vectors; `positive` selects which label counts as
// positive.
ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int positive = 1);

struct Prf1 {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    // A zero-denominator metric is reported as 0 with its flag cleared.
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;
};

Prf1 prf1(const ConfusionMatrix& cm);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), fpr nondecreasing
    double auc = 0;
};

// Threshold sweep over distinct scores in descending order; tied scores are
// grouped at one threshold, which makes the trapezoidal AUC equal the
// positive-negative pair-counting estimator exactly (both are evaluated as
// exact integer ratios). labels: 1 = positive; scores: higher = more
// positive.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace swinforge
