#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fcl/errors.hpp"
#include "fcl/model/checkpoint.hpp"
#include "fcl/model/siamese.hpp"
#include "fcl/ndcore/ops.hpp"

using namespace fcl;
using namespace fcl::model;
using fcl::nd::real;
using fcl::nd::Shape;
using fcl::nd::Tape;
using fcl::nd::Tensor;

namespace {

EncoderConfig tiny_mlp_cfg() {
    EncoderConfig cfg;
    cfg.kind = EncoderConfig::Kind::Mlp;
    cfg.in_channels = 1;
    cfg.in_h = 2;
    cfg.in_w = 2;
    cfg.hidden = {5};
    cfg.repr_dim = 3;
    return cfg;
}

Tensor batch_from(const std::vector<std::vector<real>>& rows, Shape item_shape) {
    Shape shape;
    shape.push_back(rows.size());
    shape.insert(shape.end(), item_shape.begin(), item_shape.end());
    Tensor t = Tensor::zeros(shape);
    std::size_t off = 0;
    for (const auto& r : rows)
        for (real v : r) t.at(off++) = v;
    return t;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero-weight model maps everything to zero") {
    SiameseModel m(tiny_mlp_cfg(), 4, 1);
    for (auto& [name, t] : m.named_online_params())
        for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = 0;
    Tape tape = Tape::inference();
    Tensor y = m.forward_online(tape, batch_from({{0.3, 0.4, 0.5, 0.6}}, {1, 2, 2}));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.at(i) == real(0));
}

TEST_CASE("forward matches a handwritten oracle on a fixed-seed tiny mlp") {
    SiameseModel m(tiny_mlp_cfg(), 4, 12345);
    const std::vector<real> x{0.1, 0.7, 0.2, 0.9};
    Tape tape = Tape::inference();
    Tensor y = m.forward_online(tape, batch_from({x}, {1, 2, 2}));

    // Independent reimplementation from the named parameters ([in,out]
    // weight layout, ReLU between layers, linear output).
    auto params = m.named_online_params();
    auto find = [&](const std::string& name) -> Tensor {
        for (auto& [n, t] : params)
            if (n == name) return t;
        FAIL("missing param ", name);
        return Tensor();
    };
    auto linear = [](const std::vector<double>& in, const Tensor& w, const Tensor& b) {
        std::vector<double> out(w.dim(1), 0.0);
        for (std::size_t o = 0; o < w.dim(1); ++o) {
            double acc = double(b.at(o));
            for (std::size_t i = 0; i < w.dim(0); ++i) acc += in[i] * double(w.at2(i, o));
            out[o] = acc;
        }
        return out;
    };
    std::vector<double> h(x.begin(), x.end());
    h = linear(h, find("encoder.lin0.weight"), find("encoder.lin0.bias"));
    for (double& v : h) v = std::max(0.0, v);
    h = linear(h, find("encoder.lin1.weight"), find("encoder.lin1.bias"));
    h = linear(h, find("predictor.lin0.weight"), find("predictor.lin0.bias"));
    for (double& v : h) v = std::max(0.0, v);
    h = linear(h, find("predictor.lin1.weight"), find("predictor.lin1.bias"));

    REQUIRE(y.size() == h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        CHECK(std::abs(double(y.at(i)) - h[i]) <= 1e-12);
}

TEST_CASE("batched forward equals per-sample forwards row by row") {
    EncoderConfig cfg;
    cfg.kind = EncoderConfig::Kind::SmallConv;
    cfg.in_channels = 3;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.hidden = {4, 8};
    cfg.repr_dim = 6;
    SiameseModel m(cfg, 8, 77);

    nd::Rng rng(5);
    std::vector<std::vector<real>> rows(3, std::vector<real>(3 * 8 * 8));
    for (auto& r : rows)
        for (auto& v : r) v = real(rng.uniform());
    Tape tape = Tape::inference();
    Tensor batch = m.forward_online(tape, batch_from(rows, {3, 8, 8}));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Tensor single = m.forward_online(tape, batch_from({rows[i]}, {3, 8, 8}));
        for (std::size_t j = 0; j < single.size(); ++j)
            CHECK(batch.at2(i, j) == single.at(j));
    }
}

TEST_CASE("target path equals the online encoder at init and ignores online updates") {
    SiameseModel m(tiny_mlp_cfg(), 4, 9);
    Tensor x = batch_from({{0.2, 0.4, 0.6, 0.8}}, {1, 2, 2});

    Tape tape = Tape::inference();
    Tensor enc_online = m.forward_online_encoder(tape, x);
    Tensor enc_target = m.forward_target(x);
    for (std::size_t i = 0; i < enc_online.size(); ++i)
        CHECK(enc_online.at(i) == enc_target.at(i));
    CHECK_FALSE(enc_target.requires_grad());

    // Perturb the online encoder; target output unchanged before any EMA.
    auto params = m.named_online_params();
    params[0].second.at(0) += real(1);
    Tensor enc_target2 = m.forward_target(x);
    for (std::size_t i = 0; i < enc_target.size(); ++i)
        CHECK(enc_target.at(i) == enc_target2.at(i));
}

TEST_CASE("byol loss examples") {
    Tape t;
    Tensor a = Tensor::from_data({2}, {1, 0});
    Tensor b = Tensor::from_data({2}, {0, 1});
    CHECK(byol_loss(t, a, a).value() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(byol_loss(t, a, b).value() == doctest::Approx(2.0).epsilon(1e-12));

    Tensor a2 = Tensor::from_data({2}, {2, 0});
    CHECK(byol_loss(t, a2, a).value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("byol loss is scale invariant and bounded") {
    nd::Rng rng(17);
    Tape t;
    for (int trial = 0; trial < 50; ++trial) {
        Tensor u = Tensor::zeros({5});
        Tensor v = Tensor::zeros({5});
        for (std::size_t i = 0; i < 5; ++i) {
            u.at(i) = real(rng.uniform(-1, 1));
            v.at(i) = real(rng.uniform(-1, 1));
        }
        const double base = double(byol_loss(t, u, v).value());
        CHECK(base >= 0.0);
        CHECK(base <= 4.0);
        const real a = real(rng.uniform(0.1, 10));
        const real b = real(rng.uniform(0.1, 10));
        Tensor ua = nd::scale(t, u, a);
        Tensor vb = nd::scale(t, v, b);
        CHECK(std::abs(double(byol_loss(t, ua, vb).value()) - base) <= 1e-9);
    }
}

TEST_CASE("infonce loss examples") {
    Tape t;
    Tensor y = Tensor::from_data({2}, {1, 0});
    Tensor pos = Tensor::from_data({2}, {1, 0});
    Tensor neg = Tensor::from_data({2}, {0, 1});

    // Positive identical, one orthogonal negative, temperature 1:
    // -log(e / (e + 1)).
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(double(infonce_loss(t, y, pos, {neg}, 1).value()) ==
          doctest::Approx(expected).epsilon(1e-9));

    // Positive and the single negative identical: -log(1/2) = ln 2.
    CHECK(double(infonce_loss(t, y, pos, {pos}, 1).value()) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // Loss decreases as the negative's cosine to y decreases.
    double prev = 1e9;
    for (double c : {0.9, 0.5, 0.0, -0.5, -0.9}) {
        Tensor n = Tensor::from_data({2}, {real(c), real(std::sqrt(1 - c * c))});
        const double val = double(infonce_loss(t, y, pos, {n}, 0.5).value());
        CHECK(val < prev);
        prev = val;
    }

    CHECK_THROWS_AS(infonce_loss(t, y, pos, {}, 1), Error);
}

TEST_CASE("ema update arithmetic") {
    SiameseModel m(tiny_mlp_cfg(), 4, 3);
    auto online = m.named_online_params();
    // tau = 0: target becomes an exact copy of the online encoder.
    online[0].second.at(0) = real(0.25);
    m.ema_update(0);
    CHECK(m.named_target_params()[0].second.at(0) == real(0.25));

    // tau = 0.99 with target 0, online 1 -> 0.01.
    auto target = m.named_target_params();
    target[0].second.at(0) = 0;
    online[0].second.at(0) = 1;
    m.ema_update(real(0.99));
    CHECK(double(m.named_target_params()[0].second.at(0)) ==
          doctest::Approx(0.01).epsilon(1e-12));

    // tau = 1: target unchanged.
    const real before = m.named_target_params()[0].second.at(0);
    online[0].second.at(0) = real(42);
    m.ema_update(1);
    CHECK(m.named_target_params()[0].second.at(0) == before);
}

TEST_CASE("train_step with zero lr only drifts the target") {
    data::Sample s;
    s.id = 0;
    s.label = 0;
    s.pixels = {0.1f, 0.2f, 0.3f, 0.4f};
    SiameseModel m(tiny_mlp_cfg(), 4, 21);
    auto before = m.named_online_params();
    // Separate the target from the online encoder so the EMA has somewhere
    // to move.
    before[0].second.at(0) += real(0.5);
    std::vector<Tensor> snapshot;
    for (auto& [n, t] : before) snapshot.push_back(t.clone());
    const real target_before = m.named_target_params()[0].second.at(0);

    augment::PipelineConfig pipeline;
    pipeline.crop_pad = 0;
    pipeline.jitter = 0;
    nd::Rng rng(4);
    TrainStepConfig cfg;
    cfg.lr = 0;
    cfg.weight_decay = 0;
    cfg.ema_tau = real(0.5);
    const data::Sample* batch[] = {&s};
    train_step(m, batch, pipeline, rng, cfg);

    auto after = m.named_online_params();
    for (std::size_t i = 0; i < after.size(); ++i)
        for (std::size_t j = 0; j < after[i].second.size(); ++j)
            CHECK(after[i].second.at(j) == snapshot[i].at(j));
    CHECK(m.named_target_params()[0].second.at(0) != target_before);
}

TEST_CASE("train_step loss composition with identity augmentations") {
    data::Sample s;
    s.id = 0;
    s.label = 0;
    s.pixels = {0.3f, 0.6f, 0.9f, 0.1f};
    SiameseModel m(tiny_mlp_cfg(), 8, 35);

    augment::PipelineConfig pipeline;
    pipeline.crop_pad = 0;
    pipeline.flip_p = 0;
    pipeline.jitter = 0;
    pipeline.gray_p = 0;

    // Expected value: byol loss of the (identical) views through the same
    // model state before the step mutates it.
    Tensor x = batch_from({{0.3f, 0.6f, 0.9f, 0.1f}}, {1, 2, 2});
    Tape t;
    const double expected =
        double(byol_loss(t, m.forward_online(t, x), m.forward_target(x)).value());

    nd::Rng rng(8);
    TrainStepConfig cfg;
    const data::Sample* batch[] = {&s};
    const double loss = double(train_step(m, batch, pipeline, rng, cfg));
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("train_step empty batch is rejected") {
    SiameseModel m(tiny_mlp_cfg(), 4, 1);
    augment::PipelineConfig pipeline;
    nd::Rng rng(1);
    TrainStepConfig cfg;
    CHECK_THROWS_AS(train_step(m, {}, pipeline, rng, cfg), Error);
}

TEST_CASE("loss on a frozen batch decreases over 20 steps (median over seeds)") {
    std::vector<double> drops;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        data::Dataset ds = data::gen_synthetic(2, 8, 4, 0.3, seed + 10);
        EncoderConfig cfg;
        cfg.kind = EncoderConfig::Kind::Mlp;
        cfg.in_channels = 3;
        cfg.in_h = 4;
        cfg.in_w = 4;
        cfg.hidden = {16};
        cfg.repr_dim = 8;
        SiameseModel m(cfg, 16, seed);

        std::vector<const data::Sample*> batch;
        for (const auto& s : ds.samples) batch.push_back(&s);
        augment::PipelineConfig pipeline;
        pipeline.crop_pad = 1;
        nd::Rng rng(seed + 99);
        TrainStepConfig tcfg;
        tcfg.lr = 0.06;
        tcfg.weight_decay = 0.0001;
        tcfg.ema_tau = 0.99;

        double first = 0, last = 0;
        for (int step = 0; step < 20; ++step) {
            const double loss = double(train_step(m, batch, pipeline, rng, tcfg));
            if (step == 0) first = loss;
            if (step == 19) last = loss;
        }
        drops.push_back(first - last);
    }
    std::sort(drops.begin(), drops.end());
    CHECK(drops[2] > 0.0);  // median strictly positive
}

TEST_CASE("symmetrized loss averages both directions") {
    data::Sample s;
    s.id = 0;
    s.pixels = {0.2f, 0.8f, 0.5f, 0.3f};
    SiameseModel m(tiny_mlp_cfg(), 4, 66);
    augment::PipelineConfig pipeline;
    pipeline.crop_pad = 0;
    pipeline.flip_p = 0;
    pipeline.jitter = 0;
    pipeline.gray_p = 0;
    Tensor x = batch_from({{0.2f, 0.8f, 0.5f, 0.3f}}, {1, 2, 2});
    Tape t;
    const double expected =
        double(byol_loss(t, m.forward_online(t, x), m.forward_target(x)).value());
    nd::Rng rng(2);
    TrainStepConfig cfg;
    cfg.symmetrize = true;
    const data::Sample* batch[] = {&s};
    // Identical views make both directions equal, so the mean is unchanged.
    CHECK(double(train_step(m, batch, pipeline, rng, cfg)) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
    SiameseModel m(tiny_mlp_cfg(), 4, 123);
    const auto path = std::filesystem::temp_directory_path() / "fclsim_test_ckpt.json";

    Checkpoint ck;
    ck.round = 7;
    ck.tensors = m.named_online_params();
    save_checkpoint(ck, path);

    Checkpoint back = load_checkpoint(path);
    CHECK(back.round == 7);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (std::size_t i = 0; i < back.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == ck.tensors[i].first);
        REQUIRE(back.tensors[i].second.shape() == ck.tensors[i].second.shape());
        for (std::size_t j = 0; j < back.tensors[i].second.size(); ++j)
            CHECK(back.tensors[i].second.at(j) == ck.tensors[i].second.at(j));
    }

    // Loading into a model with different shapes must fail.
    EncoderConfig other = tiny_mlp_cfg();
    other.hidden = {7};
    SiameseModel m2(other, 4, 5);
    CHECK_THROWS_AS(load_into(back, m2.named_online_params()), CheckpointError);

    // Same shapes, wrong name.
    Checkpoint renamed = back;
    renamed.tensors[0].first = "encoder.lin9.weight";
    CHECK_THROWS_AS(load_into(renamed, m.named_online_params()), CheckpointError);

    CHECK(params_hash(m.named_online_params()) == params_hash(ck.tensors));
    std::filesystem::remove(path);
}

}  // TEST_SUITE
