#include "fcl/model/siamese.hpp"

#include <cstring>

#include "fcl/errors.hpp"

namespace fcl::model {

namespace {

using nd::real;
using nd::Tape;
using nd::Tensor;

// Row-normalized copy with no grad attached (target side of the losses).
Tensor normalized_rows_const(const Tensor& x) {
    Tape t = Tape::inference();
    if (x.rank() == 1) {
        Tensor v = nd::l2_normalize(t, x.detach());
        return v;
    }
    return nd::l2_normalize_rows(t, x.detach());
}

Tensor as_rows(Tape& tape, const Tensor& x) {
    if (x.rank() == 1) return nd::reshape(tape, x, {1, x.dim(0)});
    if (x.rank() == 2) return x;
    throw DimensionError("loss: expects [D] or [B,D], got " + nd::shape_str(x.shape()));
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
    if (name == "byol") return LossKind::Byol;
    if (name == "infonce") return LossKind::InfoNce;
    throw ConfigError("loss: unknown kind '" + name + "'");
}

std::string loss_kind_name(LossKind k) { return k == LossKind::Byol ? "byol" : "infonce"; }

SiameseModel::SiameseModel(const EncoderConfig& cfg, std::size_t predictor_hidden,
                           std::uint64_t seed) {
    nd::Rng rng(seed);
    online_encoder_ = Encoder(cfg, rng, true);
    predictor_ = Mlp({cfg.repr_dim, predictor_hidden, cfg.repr_dim}, rng, true);
    // Target starts as an exact copy of the online encoder and never carries
    // gradients.
    nd::Rng dummy(seed);
    target_encoder_ = Encoder(cfg, dummy, false);
    target_encoder_.copy_params_from(online_encoder_);
}

nd::Tensor SiameseModel::forward_online(Tape& tape, const Tensor& x) const {
    return predictor_.forward(tape, online_encoder_.forward(tape, x));
}

nd::Tensor SiameseModel::forward_target(const Tensor& x) const {
    Tape t = Tape::inference();
    return target_encoder_.forward(t, x);
}

nd::Tensor SiameseModel::forward_online_encoder(Tape& tape, const Tensor& x) const {
    return online_encoder_.forward(tape, x);
}

void SiameseModel::ema_update(real tau) {
    const auto online = online_encoder_.params();
    const auto target = target_encoder_.params();
    if (online.size() != target.size())
        throw DimensionError("ema_update: parameter list size mismatch");
    for (std::size_t i = 0; i < online.size(); ++i) {
        Tensor t = target[i];
        if (t.shape() != online[i].shape())
            throw DimensionError("ema_update: shape mismatch at parameter " + std::to_string(i));
        nd::kern::active().ema_lerp(t.data(), online[i].data(), tau, t.size());
    }
}

std::vector<nd::Tensor> SiameseModel::online_params() const {
    std::vector<Tensor> out = online_encoder_.params();
    predictor_.collect_params(out);
    return out;
}

std::vector<std::pair<std::string, nd::Tensor>> SiameseModel::named_online_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    online_encoder_.append_named_params("encoder", out);
    predictor_.append_named_params("predictor", out);
    return out;
}

std::vector<std::pair<std::string, nd::Tensor>> SiameseModel::named_target_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    target_encoder_.append_named_params("target_encoder", out);
    return out;
}

void SiameseModel::load_online(const std::vector<std::pair<std::string, Tensor>>& named) {
    auto own = named_online_params();
    if (own.size() != named.size())
        throw CheckpointError("load_online: expected " + std::to_string(own.size()) +
                              " tensors, got " + std::to_string(named.size()));
    for (std::size_t i = 0; i < own.size(); ++i) {
        if (own[i].first != named[i].first)
            throw CheckpointError("load_online: name mismatch '" + named[i].first +
                                  "' vs expected '" + own[i].first + "'");
        own[i].second.copy_data_from(named[i].second);
    }
}

nd::Tensor byol_loss(Tape& tape, const Tensor& y_o, const Tensor& y_t) {
    Tensor yo = as_rows(tape, y_o);
    Tensor yt = y_t.rank() == 1 ? nd::reshape(tape, y_t, {1, y_t.dim(0)}) : y_t;
    if (yo.shape() != yt.shape())
        throw DimensionError("byol_loss: shape mismatch " + nd::shape_str(yo.shape()) + " vs " +
                             nd::shape_str(yt.shape()));
    Tensor yo_n = nd::l2_normalize_rows(tape, yo);
    Tensor yt_n = normalized_rows_const(yt);
    Tensor cos = nd::row_sum(tape, nd::mul(tape, yo_n, yt_n));
    Tensor loss_rows = nd::add_scalar(tape, nd::scale(tape, cos, real(-2)), real(2));
    return nd::mean_all(tape, loss_rows);
}

nd::Tensor infonce_loss(Tape& tape, const Tensor& y_o, const Tensor& y_t_pos,
                        const std::vector<Tensor>& negatives, real temperature) {
    if (negatives.empty())
        throw Error("infonce_loss: empty negatives (loss degenerates to 0)");
    if (!(temperature > real(0))) throw DomainError("infonce_loss: temperature must be positive");
    const std::size_t d = y_o.size();
    // Constant matrix of normalized target vectors, positive first.
    Tensor targets = Tensor::zeros({negatives.size() + 1, d});
    {
        Tensor pn = normalized_rows_const(y_t_pos);
        std::memcpy(targets.data(), pn.data(), d * sizeof(real));
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            if (negatives[i].size() != d)
                throw DimensionError("infonce_loss: negative " + std::to_string(i) +
                                     " has wrong dimension");
            Tensor nn = normalized_rows_const(negatives[i]);
            std::memcpy(targets.data() + (i + 1) * d, nn.data(), d * sizeof(real));
        }
    }
    Tensor yo_n = nd::l2_normalize_rows(tape, as_rows(tape, y_o));
    Tensor sims = nd::scale(tape, nd::matmul(tape, yo_n, nd::transposed(targets)),
                            real(1) / temperature);
    Tensor lse = nd::row_logsumexp(tape, sims);
    Tensor mask = Tensor::zeros({1, negatives.size() + 1});
    mask.at(0) = 1;
    Tensor pos = nd::row_sum(tape, nd::mul(tape, sims, mask));
    return nd::sub(tape, lse, pos);
}

nd::Tensor infonce_batch_loss(Tape& tape, const Tensor& y_o, const Tensor& y_t, real temperature) {
    if (y_o.rank() != 2 || y_t.shape() != y_o.shape())
        throw DimensionError("infonce_batch_loss: expects matching [B,D] inputs");
    if (y_o.dim(0) < 2)
        throw Error("infonce_batch_loss: batch of " + std::to_string(y_o.dim(0)) +
                    " leaves no negatives");
    if (!(temperature > real(0)))
        throw DomainError("infonce_batch_loss: temperature must be positive");
    const std::size_t b = y_o.dim(0);
    Tensor yo_n = nd::l2_normalize_rows(tape, y_o);
    Tensor yt_n = normalized_rows_const(y_t);
    Tensor sims = nd::scale(tape, nd::matmul(tape, yo_n, nd::transposed(yt_n)),
                            real(1) / temperature);
    Tensor eye = Tensor::zeros({b, b});
    for (std::size_t i = 0; i < b; ++i) eye.at2(i, i) = 1;
    Tensor pos = nd::row_sum(tape, nd::mul(tape, sims, eye));
    Tensor lse = nd::row_logsumexp(tape, sims);
    return nd::mean_all(tape, nd::sub(tape, lse, pos));
}

nd::Tensor stack_views(const std::vector<Tensor>& views) {
    if (views.empty()) throw Error("stack_views: empty batch");
    const nd::Shape& s = views.front().shape();
    nd::Shape out_shape;
    out_shape.push_back(views.size());
    out_shape.insert(out_shape.end(), s.begin(), s.end());
    Tensor out = Tensor::zeros(out_shape);
    const std::size_t stride = views.front().size();
    for (std::size_t i = 0; i < views.size(); ++i) {
        if (views[i].shape() != s) throw DimensionError("stack_views: inhomogeneous shapes");
        std::memcpy(out.data() + i * stride, views[i].data(), stride * sizeof(real));
    }
    return out;
}

nd::real train_step(SiameseModel& model, std::span<const data::Sample* const> batch,
                    const augment::PipelineConfig& pipeline, nd::Rng& rng,
                    const TrainStepConfig& cfg) {
    if (batch.empty()) throw Error("train_step: empty batch");
    const EncoderConfig& ec = model.encoder_config();

    std::vector<Tensor> v1, v2;
    v1.reserve(batch.size());
    v2.reserve(batch.size());
    for (const data::Sample* s : batch) {
        auto [a, b] = augment::strong_views(*s, pipeline, rng, ec.in_channels, ec.in_h, ec.in_w);
        v1.push_back(std::move(a));
        v2.push_back(std::move(b));
    }
    Tensor x1 = stack_views(v1);
    Tensor x2 = stack_views(v2);

    Tape tape;
    auto pair_loss = [&](const Tensor& xa, const Tensor& xb) {
        Tensor yo = model.forward_online(tape, xa);
        Tensor yt = model.forward_target(xb);
        return cfg.loss == LossKind::Byol ? byol_loss(tape, yo, yt)
                                          : infonce_batch_loss(tape, yo, yt, cfg.temperature);
    };
    Tensor loss = pair_loss(x1, x2);
    if (cfg.symmetrize)
        loss = nd::scale(tape, nd::add(tape, loss, pair_loss(x2, x1)), real(0.5));

    auto params = model.online_params();
    for (Tensor& p : params) p.zero_grad();
    tape.backward(loss);
    nd::sgd_step(params, cfg.lr, cfg.weight_decay);
    model.ema_update(cfg.ema_tau);
    return loss.value();
}

}  // namespace fcl::model
