#include "fcl/model/encoder.hpp"

#include <cmath>

#include "fcl/errors.hpp"

namespace fcl::model {

namespace {

using nd::real;
using nd::Tape;
using nd::Tensor;

Tensor he_uniform(nd::Shape shape, std::size_t fan_in, nd::Rng& rng, bool requires_grad) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    const double limit = std::sqrt(6.0 / double(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = real(rng.uniform(-limit, limit));
    return t;
}

}  // namespace

EncoderConfig::Kind parse_encoder_kind(const std::string& name) {
    if (name == "mlp") return EncoderConfig::Kind::Mlp;
    if (name == "smallconv") return EncoderConfig::Kind::SmallConv;
    throw ConfigError("encoder: unknown kind '" + name + "'");
}

std::string encoder_kind_name(EncoderConfig::Kind k) {
    return k == EncoderConfig::Kind::Mlp ? "mlp" : "smallconv";
}

Mlp::Mlp(std::vector<std::size_t> dims, nd::Rng& rng, bool requires_grad) {
    if (dims.size() < 2) throw ConfigError("mlp: needs at least input and output dims");
    // Weights stored [in, out] so the forward is matmul(x, w) on the tape.
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        w_.push_back(he_uniform({dims[i], dims[i + 1]}, dims[i], rng, requires_grad));
        b_.push_back(Tensor::zeros({dims[i + 1]}, requires_grad));
    }
}

nd::Tensor Mlp::forward(Tape& tape, const Tensor& x) const {
    Tensor h = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        h = nd::add_rowvec(tape, nd::matmul(tape, h, w_[l]), b_[l]);
        if (l + 1 < w_.size()) h = nd::relu(tape, h);
    }
    return h;
}

void Mlp::append_named_params(const std::string& prefix,
                              std::vector<std::pair<std::string, Tensor>>& out) const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        out.emplace_back(prefix + ".lin" + std::to_string(l) + ".weight", w_[l]);
        out.emplace_back(prefix + ".lin" + std::to_string(l) + ".bias", b_[l]);
    }
}

void Mlp::collect_params(std::vector<Tensor>& out) const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        out.push_back(w_[l]);
        out.push_back(b_[l]);
    }
}

void Mlp::copy_params_from(const Mlp& other) {
    if (w_.size() != other.w_.size()) throw DimensionError("mlp: layer count mismatch");
    for (std::size_t l = 0; l < w_.size(); ++l) {
        w_[l].copy_data_from(other.w_[l]);
        b_[l].copy_data_from(other.b_[l]);
    }
}

Encoder::Encoder(const EncoderConfig& cfg, nd::Rng& rng, bool requires_grad) : cfg_(cfg) {
    if (cfg.repr_dim < 2) throw ConfigError("encoder: repr_dim must be >= 2");
    for (std::size_t wdt : cfg.hidden)
        if (wdt == 0) throw ConfigError("encoder: hidden widths must be positive");

    const std::size_t flat_in = cfg.in_channels * cfg.in_h * cfg.in_w;
    if (cfg.kind == EncoderConfig::Kind::Mlp) {
        std::vector<std::size_t> dims;
        dims.push_back(flat_in);
        dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
        dims.push_back(cfg.repr_dim);
        mlp_ = Mlp(std::move(dims), rng, requires_grad);
        return;
    }

    // Stride-2 3x3 convolutions, padding 1.
    std::size_t c = cfg.in_channels, h = cfg.in_h, w = cfg.in_w;
    for (std::size_t oc : cfg.hidden) {
        conv_w_.push_back(he_uniform({oc, c, 3, 3}, c * 9, rng, requires_grad));
        conv_b_.push_back(Tensor::zeros({oc}, requires_grad));
        c = oc;
        h = (h + 2 - 3) / 2 + 1;
        w = (w + 2 - 3) / 2 + 1;
        if (h == 0 || w == 0) throw ConfigError("encoder: input too small for conv stack");
    }
    const std::size_t flat = c * h * w;
    fc_w_ = he_uniform({flat, cfg.repr_dim}, flat, rng, requires_grad);
    fc_b_ = Tensor::zeros({cfg.repr_dim}, requires_grad);
}

nd::Tensor Encoder::forward(Tape& tape, const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.in_h ||
        x.dim(3) != cfg_.in_w)
        throw DimensionError("encoder: input " + nd::shape_str(x.shape()) + " does not match [B," +
                             std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.in_h) +
                             "," + std::to_string(cfg_.in_w) + "]");
    const std::size_t batch = x.dim(0);
    if (cfg_.kind == EncoderConfig::Kind::Mlp) {
        Tensor flat = nd::reshape(tape, x, {batch, x.size() / batch});
        return mlp_.forward(tape, flat);
    }
    Tensor h = x;
    for (std::size_t l = 0; l < conv_w_.size(); ++l)
        h = nd::relu(tape, nd::conv2d(tape, h, conv_w_[l], conv_b_[l], 2, 1));
    Tensor flat = nd::reshape(tape, h, {batch, h.size() / batch});
    return nd::add_rowvec(tape, nd::matmul(tape, flat, fc_w_), fc_b_);
}

void Encoder::append_named_params(const std::string& prefix,
                                  std::vector<std::pair<std::string, Tensor>>& out) const {
    if (cfg_.kind == EncoderConfig::Kind::Mlp) {
        mlp_.append_named_params(prefix, out);
        return;
    }
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
        out.emplace_back(prefix + ".conv" + std::to_string(l) + ".weight", conv_w_[l]);
        out.emplace_back(prefix + ".conv" + std::to_string(l) + ".bias", conv_b_[l]);
    }
    out.emplace_back(prefix + ".fc.weight", fc_w_);
    out.emplace_back(prefix + ".fc.bias", fc_b_);
}

std::vector<nd::Tensor> Encoder::params() const {
    std::vector<Tensor> out;
    if (cfg_.kind == EncoderConfig::Kind::Mlp) {
        mlp_.collect_params(out);
        return out;
    }
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
        out.push_back(conv_w_[l]);
        out.push_back(conv_b_[l]);
    }
    out.push_back(fc_w_);
    out.push_back(fc_b_);
    return out;
}

void Encoder::copy_params_from(const Encoder& other) {
    if (cfg_.kind == EncoderConfig::Kind::Mlp) {
        mlp_.copy_params_from(other.mlp_);
        return;
    }
    if (conv_w_.size() != other.conv_w_.size())
        throw DimensionError("encoder: conv stack mismatch");
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
        conv_w_[l].copy_data_from(other.conv_w_[l]);
        conv_b_[l].copy_data_from(other.conv_b_[l]);
    }
    fc_w_.copy_data_from(other.fc_w_);
    fc_b_.copy_data_from(other.fc_b_);
}

}  // namespace fcl::model
