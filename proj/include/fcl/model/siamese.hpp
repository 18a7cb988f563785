#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcl/augment/augment.hpp"
#include "fcl/data/dataset.hpp"
#include "fcl/model/encoder.hpp"

namespace fcl::model {

enum class LossKind { Byol, InfoNce };

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind k);

// Siamese contrastive model: online encoder f_o + online predictor g_o
// (trained, aggregated) and a target encoder f_t updated only by EMA and
// structurally excluded from gradients.
class SiameseModel {
  public:
    SiameseModel() = default;
    SiameseModel(const EncoderConfig& cfg, std::size_t predictor_hidden, std::uint64_t seed);

    // g_o(f_o(x)); recorded on the tape.
    nd::Tensor forward_online(nd::Tape& tape, const nd::Tensor& x) const;
    // f_t(x); never recorded, output carries no grad.
    nd::Tensor forward_target(const nd::Tensor& x) const;
    // Encoder-only online path (K-center features, linear probe).
    nd::Tensor forward_online_encoder(nd::Tape& tape, const nd::Tensor& x) const;

    // W_t <- tau*W_t + (1-tau)*W, elementwise over target-encoder parameters.
    void ema_update(nd::real tau);

    std::vector<nd::Tensor> online_params() const;  // encoder + predictor
    std::vector<std::pair<std::string, nd::Tensor>> named_online_params() const;
    std::vector<std::pair<std::string, nd::Tensor>> named_target_params() const;

    // Overwrites online encoder + predictor data from a broadcast snapshot
    // (matched by name; rejects unknown or missing names / shape mismatches).
    void load_online(const std::vector<std::pair<std::string, nd::Tensor>>& named);

    const Encoder& online_encoder() const { return online_encoder_; }
    const Encoder& target_encoder() const { return target_encoder_; }
    const EncoderConfig& encoder_config() const { return online_encoder_.config(); }

  private:
    Encoder online_encoder_;
    Mlp predictor_;
    Encoder target_encoder_;
};

// Eq.-style BYOL dissimilarity: 2 - 2*cos(y_o, y_t), averaged over rows when
// the inputs are [B,D]. Gradient flows only into y_o's subgraph; y_t is
// treated as a constant. Value range [0, 4].
nd::Tensor byol_loss(nd::Tape& tape, const nd::Tensor& y_o, const nd::Tensor& y_t);

// InfoNCE with cosine similarity and temperature; denominator runs over the
// positive plus all negatives. Negatives are constants (target outputs).
nd::Tensor infonce_loss(nd::Tape& tape, const nd::Tensor& y_o, const nd::Tensor& y_t_pos,
                        const std::vector<nd::Tensor>& negatives, nd::real temperature);

// Batch form: row i of y_t is the positive for row i of y_o, the other rows
// are its negatives.
nd::Tensor infonce_batch_loss(nd::Tape& tape, const nd::Tensor& y_o, const nd::Tensor& y_t,
                              nd::real temperature);

struct TrainStepConfig {
    nd::real lr = 0.06;
    nd::real weight_decay = 0.0001;
    nd::real ema_tau = 0.99;
    bool symmetrize = false;
    LossKind loss = LossKind::Byol;
    nd::real temperature = 0.5;
};

// One local optimization step on a batch: strong view pair per sample, mean
// contrastive loss, one SGD step on the online parameters, one EMA update of
// the target. Returns the loss value.
nd::real train_step(SiameseModel& model, std::span<const data::Sample* const> batch,
                    const augment::PipelineConfig& pipeline, nd::Rng& rng,
                    const TrainStepConfig& cfg);

// Stacks per-sample [C,H,W] views into one [B,C,H,W] batch tensor.
nd::Tensor stack_views(const std::vector<nd::Tensor>& views);

}  // namespace fcl::model
