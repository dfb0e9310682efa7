#include "edl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "edl/adam.hpp"
#include "edl/errors.hpp"
#include "edl/metrics.hpp"
#include "edl/risk.hpp"

namespace edl {

void write_train_log_csv(const TrainLog& log, std::ostream& out) {
    out << "epoch,loss,lambda,acc,cost\n";
    char buf[64];
    for (const auto& row : log) {
        out << row.epoch << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.loss);
        out << buf << ',';
        if (row.lambda) {
            std::snprintf(buf, sizeof(buf), "%.17g", *row.lambda);
            out << buf;
        }
        out << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.acc);
        out << buf << ',';
        if (row.cost) {
            std::snprintf(buf, sizeof(buf), "%.17g", *row.cost);
            out << buf;
        }
        out << '\n';
    }
}

EvidenceModel make_model(const BackboneSpec& spec, const Dataset& data, Activation act,
                         std::uint64_t seed) {
    EvidenceModel model(spec, data.sample_shape, data.k, act, seed);
    model.labels = data.label_ids;
    return model;
}

namespace {

struct EpochStats {
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    double cost_sum = 0.0;
    std::int64_t seen = 0;
};

// Tallies batch predictions from concentrations or probabilities [B,K].
void tally(EpochStats& stats, const Tensor& scores, const std::vector<int>& labels,
           const RiskMatrix* costs, const std::vector<int>& label_ids) {
    const std::int64_t b = scores.dim(0);
    const int k = static_cast<int>(scores.dim(1));
    const auto v = scores.values();
    for (std::int64_t i = 0; i < b; ++i) {
        int best = 0;
        for (int j = 1; j < k; ++j) {
            if (v[static_cast<std::size_t>(i * k + j)] > v[static_cast<std::size_t>(i * k + best)]) {
                best = j;
            }
        }
        const int y = labels[static_cast<std::size_t>(i)];
        stats.correct += best == y ? 1 : 0;
        if (costs) {
            stats.cost_sum += costs->cost(label_ids[static_cast<std::size_t>(y)],
                                          label_ids[static_cast<std::size_t>(best)]);
        }
        ++stats.seen;
    }
}

std::vector<int> batch_labels(const Dataset& data, std::span<const std::int64_t> idx) {
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        labels[i] = data.labels[static_cast<std::size_t>(idx[i])];
    }
    return labels;
}

void check_dataset(const EvidenceModel& model, const Dataset& data, const char* op) {
    if (data.n() == 0) throw ConfigError(std::string(op) + ": empty dataset");
    if (data.flat_dim() != model.flat_dim()) {
        throw ConfigError(std::string(op) + ": dataset samples " + shape_str(data.sample_shape) +
                          " do not match model input " + shape_str(model.sample_shape()));
    }
    if (data.k != model.k()) {
        throw ConfigError(std::string(op) + ": dataset has K=" + std::to_string(data.k) +
                          ", model has K=" + std::to_string(model.k()));
    }
}

// Shared minibatch loop. build_loss(batch, labels, stats) must return the
// scalar loss node and tally predictions.
template <typename BuildLoss>
TrainLog run_epochs(EvidenceModel& model, const Dataset& data, const TrainOptions& opts,
                    bool edl_lambda, BuildLoss build_loss) {
    if (opts.epochs < 0) throw ConfigError("train: negative epoch count");
    if (opts.batch_size < 1) throw ConfigError("train: batch size must be positive");
    Rng shuffle_rng(opts.seed);
    AdamState adam(opts.lr);
    auto trainables = model.trainable_tensors();
    if (trainables.empty()) throw ConfigError("train: no trainable parameters");

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.n()));
    for (std::int64_t i = 0; i < data.n(); ++i) order[static_cast<std::size_t>(i)] = i;

    TrainLog log;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochStats stats;
        AnnealSchedule sched{opts.anneal_horizon, epoch};
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opts.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
            const std::span<const std::int64_t> idx(order.data() + start, stop - start);
            const std::vector<int> labels = batch_labels(data, idx);
            const Tensor loss = build_loss(data.batch(idx), labels, sched, stats);
            stats.loss_sum += loss.item();
            backward(loss);
            adam.step(trainables);
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.loss = stats.loss_sum / static_cast<double>(stats.seen);
        if (edl_lambda) row.lambda = anneal(sched);
        row.acc = static_cast<double>(stats.correct) / static_cast<double>(stats.seen);
        if (opts.log_costs) row.cost = stats.cost_sum / static_cast<double>(stats.seen);
        log.push_back(row);
        ++model.epochs_trained;
    }
    return log;
}

}  // namespace

TrainLog pretrain_softmax(EvidenceModel& model, const Dataset& data, const TrainOptions& opts) {
    check_dataset(model, data, "pretrain_softmax");
    model.mode = TrainMode::Softmax;
    return run_epochs(model, data, opts, false,
                      [&](const Tensor& x, const std::vector<int>& labels, const AnnealSchedule&,
                          EpochStats& stats) {
                          const ModelOutput out = model.forward(x);
                          const Tensor probs = softmax(out.logits);
                          tally(stats, probs, labels, opts.log_costs, data.label_ids);
                          return -1.0 * sum(log(gather_rows(probs, labels)));
                      });
}

TrainLog train_edl(EvidenceModel& model, const Dataset& data, const TrainOptions& opts) {
    check_dataset(model, data, "train_edl");
    model.mode = TrainMode::Edl;
    model.activation = opts.act;
    return run_epochs(model, data, opts, true,
                      [&](const Tensor& x, const std::vector<int>& labels,
                          const AnnealSchedule& sched, EpochStats& stats) {
                          const ModelOutput out = model.forward(x);
                          const Tensor alphas = evidence(out.logits,
                                                         {model.activation, model.clamp}) + 1.0;
                          tally(stats, alphas, labels, opts.log_costs, data.label_ids);
                          return edl_total_loss(alphas, labels, sched);
                      });
}

TrainLog finetune_edl(EvidenceModel& model, const Dataset& data, const TrainOptions& opts) {
    check_dataset(model, data, "finetune_edl");
    if (model.mode != TrainMode::Softmax) {
        throw ConfigError("finetune_edl: expected a softmax-pretrained model, got mode=" +
                          to_string(model.mode));
    }
    // same parameters, new objective; the annealing clock restarts at 1
    return train_edl(model, data, opts);
}

TrainLog train_risk(EvidenceModel& model, const Dataset& data, const RiskMatrix& r,
                    TrainMode risk_mode, const TrainOptions& opts) {
    check_dataset(model, data, "train_risk");
    if (r.k() != model.k()) {
        throw ConfigError("train_risk: risk matrix K=" + std::to_string(r.k()) +
                          " does not match model K=" + std::to_string(model.k()));
    }
    if (opts.kappa < 0.0) throw ConfigError("train_risk: kappa must be non-negative");

    if (risk_mode == TrainMode::RiskEdl) {
        if (!model.has_head()) model.attach_head(opts.head_init, opts.seed);
        model.unfreeze_all();
        model.mode = TrainMode::RiskEdl;
        model.activation = opts.act;
        return run_epochs(model, data, opts, true,
                          [&](const Tensor& x, const std::vector<int>& labels,
                              const AnnealSchedule& sched, EpochStats& stats) {
                              const ModelOutput out = model.forward(x);
                              const Tensor c = model.evidence_of(out);
                              const Tensor gamma = model.gamma_of(out);
                              tally(stats, c + gamma, labels, opts.log_costs, data.label_ids);
                              return edl_total_loss(c + 1.0, labels, sched) +
                                     risk_edl_penalty_batch(c, gamma, labels, r, opts.kappa);
                          });
    }

    if (risk_mode != TrainMode::EdlP && risk_mode != TrainMode::EdlPg) {
        throw ConfigError("train_risk: mode must be risk-edl, edl-p or edl-pg");
    }
    if (model.mode == TrainMode::Softmax) {
        throw ConfigError("train_risk: modes edl-p and edl-pg need a trained evidential model, "
                          "got mode=softmax");
    }
    if (!model.has_head()) model.attach_head(opts.head_init, opts.seed);
    model.freeze_all_but_head();
    const std::string frozen_before = model.checksum(false);

    TrainLog log;
    if (risk_mode == TrainMode::EdlP) {
        model.mode = TrainMode::EdlP;
        log = run_epochs(model, data, opts, false,
                         [&](const Tensor& x, const std::vector<int>& labels,
                             const AnnealSchedule&, EpochStats& stats) {
                             const ModelOutput out = model.forward(x);
                             const Tensor c = model.evidence_of(out);
                             const Tensor gamma = model.gamma_of(out);
                             tally(stats, c + gamma, labels, opts.log_costs, data.label_ids);
                             return expected_risk_batch(c, gamma, labels, r);
                         });
    } else {
        model.mode = TrainMode::EdlPg;
        Rng rng(opts.seed);
        for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
            const std::vector<PgStep> steps = pg_epoch(model, data, r, opts.lr, rng);
            double cost_sum = 0.0;
            for (const auto& s : steps) cost_sum += s.cost;
            TrainLogRow row;
            row.epoch = epoch;
            row.loss = cost_sum / static_cast<double>(steps.size());  // mean sampled cost
            const Predictions preds = predict(model, data);
            std::int64_t correct = 0;
            double decide_cost = 0.0;
            for (std::int64_t i = 0; i < data.n(); ++i) {
                const int y = data.labels[static_cast<std::size_t>(i)];
                correct += preds.pred_local[static_cast<std::size_t>(i)] == y ? 1 : 0;
                if (opts.log_costs) {
                    decide_cost += opts.log_costs->cost(
                        data.label_ids[static_cast<std::size_t>(y)],
                        preds.pred_global[static_cast<std::size_t>(i)]);
                }
            }
            row.acc = static_cast<double>(correct) / static_cast<double>(data.n());
            if (opts.log_costs) row.cost = decide_cost / static_cast<double>(data.n());
            log.push_back(row);
            ++model.epochs_trained;
        }
    }

    if (model.checksum(false) != frozen_before) {
        throw NumericalError("train_risk: frozen parameters changed during head training");
    }
    model.unfreeze_all();
    return log;
}

}  // namespace edl
