#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "edl/data.hpp"
#include "edl/edl_loss.hpp"
#include "edl/model.hpp"
#include "edl/risk_matrix.hpp"

namespace edl {

struct TrainOptions {
    int epochs = 20;
    double lr = 1e-3;
    int batch_size = 64;
    std::uint64_t seed = 1;
    Activation act = Activation::Softplus;
    double anneal_horizon = 10.0;
    double kappa = 0.01;
    HeadInit head_init = HeadInit::Zero;
    const RiskMatrix* log_costs = nullptr;  // adds the cost column to the log
};

struct TrainLogRow {
    int epoch;
    double loss;  // mean per sample over the epoch
    std::optional<double> lambda;
    double acc;  // training accuracy over the epoch's batches
    std::optional<double> cost;
};

using TrainLog = std::vector<TrainLogRow>;

// header: epoch,loss,lambda,acc,cost (empty cells where not applicable)
void write_train_log_csv(const TrainLog& log, std::ostream& out);

// Cross-entropy training from a seeded fresh state; tags mode=softmax.
TrainLog pretrain_softmax(EvidenceModel& model, const Dataset& data, const TrainOptions& opts);

// From-scratch evidential training with the annealed total loss; alpha is
// evidence + 1 at inference. Tags mode=edl.
TrainLog train_edl(EvidenceModel& model, const Dataset& data, const TrainOptions& opts);

// Continues a softmax-pretrained model under the evidential loss, keeping
// the logits layer and reinterpreting it through the evidence activation
// (clamped-exp by default). The annealing clock restarts.
TrainLog finetune_edl(EvidenceModel& model, const Dataset& data, const TrainOptions& opts);

// Risk-aware phases. riskEDL trains everything jointly under
// loss = EDL + kappa * risk penalty; modes p and pg freeze all but the
// pignistic head and verify the freeze with a parameter checksum.
TrainLog train_risk(EvidenceModel& model, const Dataset& data, const RiskMatrix& r,
                    TrainMode risk_mode, const TrainOptions& opts);

// Convenience: a fresh model sized for the dataset.
EvidenceModel make_model(const BackboneSpec& spec, const Dataset& data, Activation act,
                         std::uint64_t seed);

}  // namespace edl
