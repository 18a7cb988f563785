#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fcl/ndcore/ops.hpp"
#include "fcl/ndcore/rng.hpp"
#include "fcl/ndcore/tensor.hpp"

namespace fcl::model {

struct EncoderConfig {
    enum class Kind { Mlp, SmallConv };
    Kind kind = Kind::SmallConv;
    std::size_t in_channels = 3;
    std::size_t in_h = 32;
    std::size_t in_w = 32;
    // Conv channel widths for SmallConv (one stride-2 conv per entry),
    // hidden layer widths for Mlp.
    std::vector<std::size_t> hidden = {8, 16};
    std::size_t repr_dim = 32;
};

EncoderConfig::Kind parse_encoder_kind(const std::string& name);
std::string encoder_kind_name(EncoderConfig::Kind k);

// Plain fully connected stack: dims = {in, hidden..., out}, ReLU between
// layers, linear output.
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::vector<std::size_t> dims, nd::Rng& rng, bool requires_grad = true);

    nd::Tensor forward(nd::Tape& tape, const nd::Tensor& x) const;  // [B,in] -> [B,out]
    void append_named_params(const std::string& prefix,
                             std::vector<std::pair<std::string, nd::Tensor>>& out) const;
    void collect_params(std::vector<nd::Tensor>& out) const;
    void copy_params_from(const Mlp& other);

  private:
    std::vector<nd::Tensor> w_, b_;
};

// Representation encoder f: [B,C,H,W] -> [B,D]. SmallConv is a stack of
// stride-2 3x3 convolutions with ReLU, flatten, then a linear map to D;
// Mlp flattens and runs the fully connected stack.
class Encoder {
  public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, nd::Rng& rng, bool requires_grad = true);

    nd::Tensor forward(nd::Tape& tape, const nd::Tensor& x) const;
    void append_named_params(const std::string& prefix,
                             std::vector<std::pair<std::string, nd::Tensor>>& out) const;
    std::vector<nd::Tensor> params() const;
    void copy_params_from(const Encoder& other);
    const EncoderConfig& config() const { return cfg_; }

  private:
    EncoderConfig cfg_;
    std::vector<nd::Tensor> conv_w_, conv_b_;
    nd::Tensor fc_w_, fc_b_;
    Mlp mlp_;
};

}  // namespace fcl::model
