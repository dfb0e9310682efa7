#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "edl/data.hpp"
#include "edl/model.hpp"
#include "edl/risk_matrix.hpp"

namespace edl {

double accuracy(std::span<const int> preds, std::span<const int> labels);

// Mean of R[label][pred] over the samples; labels and preds are global ids.
double avg_cost(std::span<const int> preds, std::span<const int> labels, const RiskMatrix& r);

// Area under the empirical CDF of the entropies over [0, ln K], divided by
// ln K. Equals 1 - mean(entropy)/ln K; near 1 means confident.
double norm_entropy_auc(std::span<const double> entropies, int k);

struct RocPr {
    double roc_auc;
    double pr_auc;
};

// Discriminating correct from incorrect predictions by uncertainty.
// Positive class = correct, score = -uncertainty (low uncertainty should
// indicate correct); ROC by rank statistic with tie averaging, PR by step
// integration. Both classes must be present.
RocPr roc_pr_auc(std::span<const double> uncertainty, const std::vector<bool>& correct);
// Same but scored with raw +uncertainty, for comparability with reports
// that use the unflipped orientation.
RocPr roc_pr_auc_raw(std::span<const double> uncertainty, const std::vector<bool>& correct);

struct EvalRecord {
    std::int64_t index;
    int label;  // global id
    int pred;   // global id
    double entropy;
    double cost;
    bool correct;
};

struct EvalReport {
    std::string dataset;
    std::int64_t n = 0;
    double accuracy = 0.0;
    std::optional<double> avg_cost;
    std::optional<double> entropy_auc_correct;
    std::optional<double> entropy_auc_incorrect;
    std::optional<double> entropy_auc_ood;
    std::optional<double> roc_auc;
    std::optional<double> pr_auc;
    std::optional<double> roc_auc_raw_entropy;
    std::optional<double> pr_auc_raw_entropy;
    std::vector<EvalRecord> records;

    std::string to_json() const;
    // header: index,label,pred,entropy,cost,correct
    void write_records_csv(std::ostream& out) const;
};

// Per-sample predictions of a frozen model over a dataset: argmax of the
// predictive distribution (ties toward the lowest index) plus its entropy.
struct Predictions {
    std::vector<int> pred_local;
    std::vector<int> pred_global;
    std::vector<double> entropy;
};
Predictions predict(const EvidenceModel& model, const Dataset& data);

// Full evaluation: accuracy, cost (when a matrix is given), per-split
// normalized entropy AUCs, and uncertainty ROC/PR.
EvalReport evaluate(const EvidenceModel& model, const Dataset& data, const RiskMatrix* r,
                    const Dataset* ood);

// Joint evaluation of two classifiers over disjoint label sets on data
// labelled with global ids. EDL pairs fuse by evidence concatenation;
// softmax pairs fuse by logit concatenation.
EvalReport evaluate_fused(const EvidenceModel& a, const EvidenceModel& b, const Dataset& data,
                          const RiskMatrix* r);

}  // namespace edl
