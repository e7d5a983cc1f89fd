#include "swinforge/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace swinforge {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int positive) {
    if (preds.size() != labels.size())
        throw ContractError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
    if (preds.empty()) throw ContractError("confusion: empty input");
    ConfusionMatrix cm;
    for (size_t i = 0; i < preds.size(); ++i) {
        if ((preds[i] != 0 && preds[i] != 1) || (labels[i] != 0 && labels[i] != 1))
            throw ContractError("confusion: predictions and labels must be binary");
        const bool pred_pos = preds[i] == positive;
        const bool actual_pos = labels[i] == positive;
        if (pred_pos && actual_pos) ++cm.tp;
        else if (pred_pos && !actual_pos) ++cm.fp;
        else if (!pred_pos && actual_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Prf1 prf1(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw ContractError("prf1: empty confusion matrix");
    Prf1 out;
    out.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp > 0) {
        out.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    } else {
        out.precision_defined = false;
    }
    if (cm.tp + cm.fn > 0) {
        out.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    } else {
        out.recall_defined = false;
    }
    if (out.precision_defined && out.recall_defined && out.precision + out.recall > 0) {
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    } else {
        out.f1_defined = false;
    }
    return out;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(labels.size()) + " labels");
    if (scores.empty()) throw ContractError("roc_auc: empty input");
    int64_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ContractError("roc_auc: labels must be binary");
        if (l == 1) ++pos;
        else ++neg;
    }
    if (pos == 0 || neg == 0)
        throw ContractError("roc_auc: curve undefined with a single class present");

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    // AUC accumulated exactly: sum of dFP * (TP_before + TP_after) over
    // threshold groups, divided by 2 * P * N at the end.
    int64_t auc_num = 0;
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < idx.size()) {
        // group all samples tied at this score
        size_t j = i;
        int64_t dtp = 0, dfp = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1) ++dtp;
            else ++dfp;
            ++j;
        }
        auc_num += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                                  static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    curve.auc = static_cast<double>(auc_num) / (2.0 * static_cast<double>(pos) *
                                                static_cast<double>(neg));
    return curve;
}

}  // namespace swinforge
