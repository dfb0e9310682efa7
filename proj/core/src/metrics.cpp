#include "edl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "edl/errors.hpp"

namespace edl {

double accuracy(std::span<const int> preds, std::span<const int> labels) {
    if (preds.empty() || preds.size() != labels.size()) {
        throw ConfigError("accuracy: need equal-length non-empty prediction and label lists");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double avg_cost(std::span<const int> preds, std::span<const int> labels, const RiskMatrix& r) {
    if (preds.empty() || preds.size() != labels.size()) {
        throw ConfigError("avg_cost: need equal-length non-empty prediction and label lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= r.k() || preds[i] < 0 || preds[i] >= r.k()) {
            throw ConfigError("avg_cost: class id outside the " + std::to_string(r.k()) + "x" +
                              std::to_string(r.k()) + " risk matrix");
        }
        total += r.cost(labels[i], preds[i]);
    }
    return total / static_cast<double>(preds.size());
}

double norm_entropy_auc(std::span<const double> entropies, int k) {
    if (entropies.empty()) throw ConfigError("norm_entropy_auc: empty entropy list");
    if (k < 2) throw ConfigError("norm_entropy_auc: K must be >= 2");
    const double max_h = std::log(static_cast<double>(k));
    const double tol = 1e-9 * std::max(1.0, max_h);
    double mean = 0.0;
    for (double h : entropies) {
        if (h < -tol || h > max_h + tol) {
            throw ConfigError("norm_entropy_auc: entropy " + std::to_string(h) +
                              " outside [0, ln K] for K=" + std::to_string(k));
        }
        mean += std::clamp(h, 0.0, max_h);
    }
    mean /= static_cast<double>(entropies.size());
    // area under the empirical CDF on [0, max_h] is max_h - mean
    return 1.0 - mean / max_h;
}

namespace {

RocPr roc_pr_from_scores(std::span<const double> scores, const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::size_t npos = 0;
    for (bool b : positive) npos += b ? 1 : 0;
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) {
        throw ConfigError("roc_pr_auc: both classes must be present");
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    // ROC AUC as the rank statistic, ties resolved with average ranks.
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (positive[idx[t]]) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double roc = (rank_sum_pos - static_cast<double>(npos) * (npos + 1) / 2.0) /
                       (static_cast<double>(npos) * static_cast<double>(nneg));

    // PR AUC by step integration over descending score thresholds; tied
    // scores enter together.
    double pr = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = n; i > 0;) {
        std::size_t j = i;
        while (j > 0 && scores[idx[j - 1]] == scores[idx[i - 1]]) --j;
        for (std::size_t t = j; t < i; ++t) {
            if (positive[idx[t]]) {
                ++tp;
            } else {
                ++fp;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(npos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        pr += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return {roc, pr};
}

}  // namespace

RocPr roc_pr_auc(std::span<const double> uncertainty, const std::vector<bool>& correct) {
    std::vector<double> neg(uncertainty.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -uncertainty[i];
    return roc_pr_from_scores(neg, correct);
}

RocPr roc_pr_auc_raw(std::span<const double> uncertainty, const std::vector<bool>& correct) {
    return roc_pr_from_scores(uncertainty, correct);
}

namespace {

nlohmann::json optional_field(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["n"] = n;
    j["accuracy"] = accuracy;
    if (avg_cost) j["avg_cost"] = *avg_cost;
    nlohmann::json auc;
    if (entropy_auc_correct) auc["correct"] = *entropy_auc_correct;
    if (entropy_auc_incorrect) auc["incorrect"] = *entropy_auc_incorrect;
    if (entropy_auc_ood) auc["ood"] = *entropy_auc_ood;
    j["entropy_auc"] = auc;
    if (roc_auc) j["roc_auc"] = *roc_auc;
    if (pr_auc) j["pr_auc"] = *pr_auc;
    if (roc_auc_raw_entropy) j["roc_auc_raw_entropy"] = *roc_auc_raw_entropy;
    if (pr_auc_raw_entropy) j["pr_auc_raw_entropy"] = *pr_auc_raw_entropy;
    return j.dump(2);
}

void EvalReport::write_records_csv(std::ostream& out) const {
    out << "index,label,pred,entropy,cost,correct\n";
    char buf[64];
    for (const auto& rec : records) {
        out << rec.index << ',' << rec.label << ',' << rec.pred << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", rec.entropy);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", rec.cost);
        out << buf << ',' << (rec.correct ? 1 : 0) << '\n';
    }
}

Predictions predict(const EvidenceModel& model, const Dataset& data) {
    if (data.flat_dim() != model.flat_dim()) {
        throw ConfigError("predict: dataset samples " + shape_str(data.sample_shape) +
                          " do not match model input " + shape_str(model.sample_shape()));
    }
    Predictions out;
    const std::int64_t n = data.n();
    out.pred_local.reserve(static_cast<std::size_t>(n));
    out.pred_global.reserve(static_cast<std::size_t>(n));
    out.entropy.reserve(static_cast<std::size_t>(n));
    const double max_h = std::log(static_cast<double>(model.k()));
    constexpr std::int64_t kChunk = 256;
    for (std::int64_t start = 0; start < n; start += kChunk) {
        const std::int64_t stop = std::min(n, start + kChunk);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        const Tensor probs = model.predictive(data.batch(idx));
        const auto pv = probs.values();
        const int k = model.k();
        for (std::int64_t r = 0; r < stop - start; ++r) {
            int best = 0;
            double h = 0.0;
            for (int j = 0; j < k; ++j) {
                const double p = pv[static_cast<std::size_t>(r * k + j)];
                if (p > pv[static_cast<std::size_t>(r * k + best)]) best = j;
                if (p > 0.0) h -= p * std::log(p);
            }
            out.pred_local.push_back(best);
            out.pred_global.push_back(model.labels[static_cast<std::size_t>(best)]);
            out.entropy.push_back(std::clamp(h, 0.0, max_h));
        }
    }
    return out;
}

namespace {

EvalReport finalize_report(const std::string& name, const std::vector<int>& pred_global,
                           const std::vector<int>& label_global,
                           const std::vector<double>& entropy, int k, const RiskMatrix* r,
                           const std::vector<double>* ood_entropy) {
    EvalReport report;
    report.dataset = name;
    report.n = static_cast<std::int64_t>(label_global.size());
    report.accuracy = accuracy(pred_global, label_global);
    if (r) report.avg_cost = avg_cost(pred_global, label_global, *r);

    std::vector<double> h_correct, h_incorrect;
    std::vector<bool> correct(label_global.size());
    for (std::size_t i = 0; i < label_global.size(); ++i) {
        correct[i] = pred_global[i] == label_global[i];
        (correct[i] ? h_correct : h_incorrect).push_back(entropy[i]);
    }
    if (!h_correct.empty()) report.entropy_auc_correct = norm_entropy_auc(h_correct, k);
    if (!h_incorrect.empty()) report.entropy_auc_incorrect = norm_entropy_auc(h_incorrect, k);
    if (ood_entropy && !ood_entropy->empty()) {
        report.entropy_auc_ood = norm_entropy_auc(*ood_entropy, k);
    }
    if (!h_correct.empty() && !h_incorrect.empty()) {
        const RocPr main = roc_pr_auc(entropy, correct);
        report.roc_auc = main.roc_auc;
        report.pr_auc = main.pr_auc;
        const RocPr raw = roc_pr_auc_raw(entropy, correct);
        report.roc_auc_raw_entropy = raw.roc_auc;
        report.pr_auc_raw_entropy = raw.pr_auc;
    }
    report.records.reserve(label_global.size());
    for (std::size_t i = 0; i < label_global.size(); ++i) {
        report.records.push_back({static_cast<std::int64_t>(i), label_global[i], pred_global[i],
                                  entropy[i],
                                  r ? r->cost(label_global[i], pred_global[i]) : 0.0,
                                  static_cast<bool>(correct[i])});
    }
    return report;
}

std::vector<int> to_global(const std::vector<int>& local, const std::vector<int>& ids) {
    std::vector<int> out(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
        out[i] = ids[static_cast<std::size_t>(local[i])];
    }
    return out;
}

}  // namespace

EvalReport evaluate(const EvidenceModel& model, const Dataset& data, const RiskMatrix* r,
                    const Dataset* ood) {
    const Predictions preds = predict(model, data);
    const std::vector<int> label_global = to_global(data.labels, data.label_ids);
    std::vector<double> ood_entropy;
    if (ood) {
        ood_entropy = predict(model, *ood).entropy;
    }
    return finalize_report(data.name, preds.pred_global, label_global, preds.entropy, model.k(), r,
                           ood ? &ood_entropy : nullptr);
}

EvalReport evaluate_fused(const EvidenceModel& a, const EvidenceModel& b, const Dataset& data,
                          const RiskMatrix* r) {
    std::unordered_set<int> seen(a.labels.begin(), a.labels.end());
    for (int lab : b.labels) {
        if (seen.count(lab)) {
            throw DataError("evaluate_fused: label sets overlap at class " + std::to_string(lab));
        }
    }
    const bool a_softmax = a.mode == TrainMode::Softmax;
    const bool b_softmax = b.mode == TrainMode::Softmax;
    if (a_softmax != b_softmax) {
        throw ConfigError("evaluate_fused: cannot mix a softmax model with an evidential one");
    }
    if (data.flat_dim() != a.flat_dim() || data.flat_dim() != b.flat_dim()) {
        throw ConfigError("evaluate_fused: dataset samples do not match the models' inputs");
    }

    std::vector<int> fused_labels = a.labels;
    fused_labels.insert(fused_labels.end(), b.labels.begin(), b.labels.end());
    const int k = static_cast<int>(fused_labels.size());
    const double max_h = std::log(static_cast<double>(k));

    const std::int64_t n = data.n();
    std::vector<int> pred_global;
    std::vector<double> entropy;
    pred_global.reserve(static_cast<std::size_t>(n));
    entropy.reserve(static_cast<std::size_t>(n));

    constexpr std::int64_t kChunk = 256;
    for (std::int64_t start = 0; start < n; start += kChunk) {
        const std::int64_t stop = std::min(n, start + kChunk);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(stop - start));
        for (std::int64_t i = start; i < stop; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        const Tensor batch = data.batch(idx);
        const ModelOutput oa = a.forward(batch);
        const ModelOutput ob = b.forward(batch);
        const std::int64_t rows = stop - start;
        std::vector<double> fused(static_cast<std::size_t>(rows) * static_cast<std::size_t>(k));
        if (a_softmax) {
            // logit concatenation, joint softmax
            const auto la = oa.logits.values();
            const auto lb = ob.logits.values();
            const int ka = a.k(), kb = b.k();
            for (std::int64_t row = 0; row < rows; ++row) {
                double mx = la[static_cast<std::size_t>(row * ka)];
                for (int j = 0; j < ka; ++j) {
                    mx = std::max(mx, la[static_cast<std::size_t>(row * ka + j)]);
                }
                for (int j = 0; j < kb; ++j) {
                    mx = std::max(mx, lb[static_cast<std::size_t>(row * kb + j)]);
                }
                double denom = 0.0;
                for (int j = 0; j < ka; ++j) {
                    const double e = std::exp(la[static_cast<std::size_t>(row * ka + j)] - mx);
                    fused[static_cast<std::size_t>(row * k + j)] = e;
                    denom += e;
                }
                for (int j = 0; j < kb; ++j) {
                    const double e = std::exp(lb[static_cast<std::size_t>(row * kb + j)] - mx);
                    fused[static_cast<std::size_t>(row * k + ka + j)] = e;
                    denom += e;
                }
                for (int j = 0; j < k; ++j) fused[static_cast<std::size_t>(row * k + j)] /= denom;
            }
        } else {
            // evidence concatenation: Dir(alpha_a ++ alpha_b), probabilities
            // from the fused mean
            const Tensor ca = a.evidence_of(oa);
            const Tensor cb = b.evidence_of(ob);
            const auto va = ca.values();
            const auto vb = cb.values();
            const int ka = a.k(), kb = b.k();
            for (std::int64_t row = 0; row < rows; ++row) {
                double total = 0.0;
                for (int j = 0; j < ka; ++j) {
                    const double al = va[static_cast<std::size_t>(row * ka + j)] + 1.0;
                    fused[static_cast<std::size_t>(row * k + j)] = al;
                    total += al;
                }
                for (int j = 0; j < kb; ++j) {
                    const double al = vb[static_cast<std::size_t>(row * kb + j)] + 1.0;
                    fused[static_cast<std::size_t>(row * k + ka + j)] = al;
                    total += al;
                }
                for (int j = 0; j < k; ++j) fused[static_cast<std::size_t>(row * k + j)] /= total;
            }
        }
        for (std::int64_t row = 0; row < rows; ++row) {
            int best = 0;
            double h = 0.0;
            for (int j = 0; j < k; ++j) {
                const double p = fused[static_cast<std::size_t>(row * k + j)];
                if (p > fused[static_cast<std::size_t>(row * k + best)]) best = j;
                if (p > 0.0) h -= p * std::log(p);
            }
            pred_global.push_back(fused_labels[static_cast<std::size_t>(best)]);
            entropy.push_back(std::clamp(h, 0.0, max_h));
        }
    }

    const std::vector<int> label_global = to_global(data.labels, data.label_ids);
    EvalReport report = finalize_report(data.name + "/fused", pred_global, label_global, entropy,
                                        k, r, nullptr);
    return report;
}

}  // namespace edl
