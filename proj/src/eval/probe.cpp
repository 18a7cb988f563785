#include "fcl/eval/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fcl/augment/augment.hpp"
#include "fcl/errors.hpp"
#include "fcl/model/siamese.hpp"
#include "fcl/ndcore/ops.hpp"

namespace fcl::eval {

namespace {
using nd::real;
using nd::Tensor;
}  // namespace

std::vector<std::size_t> stratified_indices(const std::vector<int>& labels, int num_classes,
                                            real fraction, nd::Rng& rng) {
    if (!(fraction > real(0)) || fraction > real(1))
        throw ConfigError("probe: label fraction must be in (0,1]");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw StratificationError("probe: label " + std::to_string(labels[i]) +
                                      " outside [0," + std::to_string(num_classes) + ")");
        by_class[std::size_t(labels[i])].push_back(i);
    }
    std::vector<std::size_t> out;
    for (int c = 0; c < num_classes; ++c) {
        auto& idx = by_class[std::size_t(c)];
        if (idx.empty())
            throw StratificationError("probe: class " + std::to_string(c) +
                                      " absent from the labeled pool");
        const std::size_t take = std::min(
            idx.size(),
            std::size_t(std::ceil(double(fraction) * double(idx.size()))));
        rng.shuffle(idx);
        std::sort(idx.begin(), idx.begin() + std::ptrdiff_t(take));
        out.insert(out.end(), idx.begin(), idx.begin() + std::ptrdiff_t(take));
    }
    return out;
}

nd::Tensor extract_features(const model::Encoder& encoder, const data::Dataset& ds) {
    const model::EncoderConfig& ec = encoder.config();
    const std::size_t n = ds.samples.size();
    const std::size_t d = ec.repr_dim;
    Tensor features = Tensor::zeros({n, d});
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t stop = std::min(n, start + kChunk);
        std::vector<Tensor> views;
        views.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i)
            views.push_back(
                augment::to_tensor(ds.samples[i], ec.in_channels, ec.in_h, ec.in_w));
        nd::Tape tape = nd::Tape::inference();
        Tensor out = encoder.forward(tape, model::stack_views(views));
        std::memcpy(features.data() + start * d, out.data(),
                    (stop - start) * d * sizeof(real));
    }
    return features;
}

real linear_probe_features(const Tensor& train_features, const std::vector<int>& train_labels,
                           const Tensor& test_features, const std::vector<int>& test_labels,
                           int num_classes, const ProbeConfig& cfg) {
    const std::size_t n = train_features.dim(0);
    const std::size_t d = train_features.dim(1);
    if (train_labels.size() != n)
        throw DimensionError("probe: train label count does not match features");

    // Standardize per dimension on the probe-train statistics so the fixed
    // learning rate behaves the same for any encoder output scale.
    std::vector<real> mean(d, 0), inv_std(d, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += train_features.at2(i, j);
    for (std::size_t j = 0; j < d; ++j) mean[j] /= real(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const real c = train_features.at2(i, j) - mean[j];
            inv_std[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j)
        inv_std[j] = real(1) / std::sqrt(inv_std[j] / real(n) + real(1e-8));

    auto standardized = [&](const Tensor& src) {
        Tensor out = Tensor::zeros(src.shape());
        for (std::size_t i = 0; i < src.dim(0); ++i)
            for (std::size_t j = 0; j < d; ++j)
                out.at2(i, j) = (src.at2(i, j) - mean[j]) * inv_std[j];
        return out;
    };
    Tensor train_std = standardized(train_features);
    Tensor test_std = standardized(test_features);

    Tensor w = Tensor::zeros({d, std::size_t(num_classes)}, true);
    Tensor b = Tensor::zeros({std::size_t(num_classes)}, true);
    std::vector<Tensor> params = {w, b};

    nd::Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    const std::size_t batch = cfg.batch == 0 ? n : std::min(cfg.batch, n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            Tensor xb = Tensor::zeros({stop - start, d});
            std::vector<int> yb(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                std::memcpy(xb.data() + (i - start) * d, train_std.data() + order[i] * d,
                            d * sizeof(real));
                yb[i - start] = train_labels[order[i]];
            }
            nd::Tape tape;
            Tensor logits = nd::add_rowvec(tape, nd::matmul(tape, xb, w), b);
            Tensor loss = nd::softmax_cross_entropy(tape, logits, yb);
            w.zero_grad();
            b.zero_grad();
            tape.backward(loss);
            nd::sgd_step(params, cfg.lr, 0);
        }
    }

    // Top-1 on the held-out features; ties resolve to the lowest class index.
    const std::size_t m = test_features.dim(0);
    if (test_labels.size() != m)
        throw DimensionError("probe: test label count does not match features");
    nd::Tape tape = nd::Tape::inference();
    Tensor logits = nd::add_rowvec(tape, nd::matmul(tape, test_std, w), b);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const real* row = logits.data() + i * std::size_t(num_classes);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < std::size_t(num_classes); ++c)
            if (row[c] > row[arg]) arg = c;
        if (int(arg) == test_labels[i]) ++correct;
    }
    return real(correct) / real(m);
}

real linear_probe(const model::Encoder& encoder, const data::Dataset& train,
                  const data::Dataset& test, const ProbeConfig& cfg) {
    std::vector<int> train_labels;
    train_labels.reserve(train.samples.size());
    for (const data::Sample& s : train.samples) {
        if (!s.label) throw MissingLabelError("probe: unlabeled training sample");
        train_labels.push_back(*s.label);
    }
    nd::Rng rng(cfg.seed);
    const std::vector<std::size_t> keep =
        stratified_indices(train_labels, train.num_classes, cfg.label_fraction, rng);

    data::Dataset labeled;
    labeled.channels = train.channels;
    labeled.height = train.height;
    labeled.width = train.width;
    labeled.num_classes = train.num_classes;
    std::vector<int> labels;
    for (std::size_t i : keep) {
        labeled.samples.push_back(train.samples[i]);
        labels.push_back(train_labels[i]);
    }

    std::vector<int> test_labels;
    test_labels.reserve(test.samples.size());
    for (const data::Sample& s : test.samples) {
        if (!s.label) throw MissingLabelError("probe: unlabeled test sample");
        test_labels.push_back(*s.label);
    }

    Tensor train_features = extract_features(encoder, labeled);
    Tensor test_features = extract_features(encoder, test);
    return linear_probe_features(train_features, labels, test_features, test_labels,
                                 train.num_classes, cfg);
}

}  // namespace fcl::eval
