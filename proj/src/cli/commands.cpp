#include "fcl/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "fcl/errors.hpp"
#include "fcl/eval/probe.hpp"
#include "fcl/model/checkpoint.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::cli {

using nlohmann::json;
using nd::real;

namespace {

model::EncoderConfig encoder_config(const RunConfig& cfg, const data::Dataset& train) {
    model::EncoderConfig ec;
    ec.kind = model::parse_encoder_kind(cfg.model.encoder);
    ec.in_channels = train.channels;
    ec.in_h = train.height;
    ec.in_w = train.width;
    ec.hidden = cfg.model.hidden;
    ec.repr_dim = cfg.model.repr_dim;
    return ec;
}

model::SiameseModel model_from_config(const RunConfig& cfg, const data::Dataset& train) {
    return model::SiameseModel(encoder_config(cfg, train), cfg.model.predictor_hidden,
                               nd::split_seed(cfg.seed, "init"));
}

eval::ProbeConfig probe_config(const RunConfig& cfg) {
    eval::ProbeConfig pc;
    pc.label_fraction = cfg.probe.label_fraction;
    pc.epochs = cfg.probe.epochs;
    pc.lr = cfg.probe.lr;
    pc.batch = cfg.probe.batch;
    pc.seed = nd::split_seed(cfg.seed, "probe");
    return pc;
}

real run_probe(const RunPlan& plan, const fed::GlobalModel& global) {
    model::SiameseModel m = model_from_config(plan.cfg, plan.train);
    m.load_online(global.params);
    return eval::linear_probe(m.online_encoder(), plan.train, plan.test, probe_config(plan.cfg));
}

json build_manifest(const RunConfig& cfg) {
    json j;
    j["tool"] = "fclsim";
    j["version"] = "1.0.0";
    j["config"] = config_to_json(cfg);
    j["seed"] = cfg.seed;
    j["build"] = {{"precision", sizeof(real) == 8 ? "f64" : "f32"},
                  {"compiler", __VERSION__},
                  {"kernels", nd::kern::active().name}};
    return j;
}

void write_checkpoint(const std::filesystem::path& path, const fed::GlobalModel& global) {
    model::Checkpoint ckpt;
    ckpt.round = global.round;
    ckpt.tensors = global.params;
    model::save_checkpoint(ckpt, path);
}

std::string round_checkpoint_name(int round) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_round_%04d.json", round);
    return buf;
}

// Shared run driver; round checkpoints are written when `out` is given and
// checkpoint_every > 0.
RunResult drive_run(RunPlan& plan, const fed::GlobalModel* resume,
                    const std::filesystem::path* out) {
    RunResult res;
    fed::Orchestrator orch(plan.fed, plan.train);
    const std::size_t probe_every = plan.cfg.probe.every_rounds;
    const std::size_t ckpt_every = plan.cfg.output.checkpoint_every;
    const bool has_test = plan.test.num_classes > 0 && !plan.test.samples.empty();

    fed::RoundCallback cb = [&](int round, const fed::GlobalModel& g) -> real {
        if (out && ckpt_every > 0 && std::size_t(round) % ckpt_every == 0)
            write_checkpoint(*out / round_checkpoint_name(round), g);
        const bool probe_now =
            has_test && probe_every > 0 && std::size_t(round) % probe_every == 0;
        if (!probe_now) return -1;
        const real acc = run_probe(plan, g);
        res.archive.add_probe({plan.cfg.probe.label_fraction, acc, round});
        return acc;
    };

    res.global = resume ? orch.run_from(*resume, res.archive, cb) : orch.run(res.archive, cb);

    if (has_test) {
        for (const auto& row : res.archive.probes())
            if (row.round == res.global.round) res.final_probe_accuracy = row.accuracy;
        if (res.final_probe_accuracy < 0) {
            res.final_probe_accuracy = run_probe(plan, res.global);
            res.archive.add_probe(
                {plan.cfg.probe.label_fraction, res.final_probe_accuracy, res.global.round});
        }
    }
    return res;
}

}  // namespace

real median(std::vector<real> v) {
    if (v.empty()) throw Error("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / real(2);
}

RunPlan prepare_run(const RunConfig& cfg) {
    validate(cfg);
    nd::kern::select_backend(nd::kern::parse_backend(cfg.kernels));

    RunPlan plan;
    plan.cfg = cfg;
    if (cfg.dataset.kind == "cifar10") {
        if (!std::filesystem::exists(cfg.dataset.path))
            throw ConfigError("dataset: path '" + cfg.dataset.path + "' does not exist");
        std::optional<std::size_t> cap;
        if (cfg.dataset.max_records > 0) cap = cfg.dataset.max_records;
        plan.train = data::load_cifar10(cfg.dataset.path, cap);
        if (!cfg.dataset.test_path.empty()) {
            if (!std::filesystem::exists(cfg.dataset.test_path))
                throw ConfigError("dataset: test_path '" + cfg.dataset.test_path +
                                  "' does not exist");
            plan.test = data::load_cifar10(cfg.dataset.test_path, cap);
        }
    } else {
        // Train and test share class templates (same data seed) but draw from
        // disjoint noise streams.
        const std::uint64_t data_seed = nd::split_seed(cfg.seed, "data");
        plan.train = data::gen_synthetic(cfg.dataset.classes, cfg.dataset.per_class,
                                         cfg.dataset.side, cfg.dataset.noise_sigma, data_seed, 0);
        plan.test = data::gen_synthetic(cfg.dataset.classes, cfg.dataset.test_per_class,
                                        cfg.dataset.side, cfg.dataset.noise_sigma, data_seed, 1);
    }

    if (2 * cfg.augment.crop_pad >= std::min(plan.train.height, plan.train.width))
        throw ConfigError("augment.crop_pad " + std::to_string(cfg.augment.crop_pad) +
                          " can blank a " + std::to_string(plan.train.height) + "x" +
                          std::to_string(plan.train.width) + " image");

    fed::FedConfig& f = plan.fed;
    f.encoder = encoder_config(cfg, plan.train);
    f.predictor_hidden = cfg.model.predictor_hidden;
    f.policy = coreset::parse_policy(cfg.policy.kind);
    f.lazy_interval = cfg.policy.lazy_interval;
    f.weak = augment::parse_weak_aug(cfg.augment.weak);
    f.pipeline = {cfg.augment.crop_pad, cfg.augment.flip_p, cfg.augment.jitter,
                  cfg.augment.gray_p};
    f.train.lr = cfg.train.lr;
    f.train.weight_decay = cfg.train.weight_decay;
    f.train.ema_tau = cfg.train.ema_tau;
    f.train.symmetrize = cfg.train.symmetrize;
    f.train.loss = model::parse_loss_kind(cfg.train.loss);
    f.train.temperature = cfg.train.temperature;
    f.stream.stc = cfg.stream.stc;
    f.stream.clients = cfg.stream.clients;
    f.stream.segment = cfg.stream.segment;
    f.stream.segments_per_round =
        cfg.stream.segments_per_round > 0
            ? cfg.stream.segments_per_round
            : data::segments_from_samples(
                  plan.train.samples.size() / std::max<std::size_t>(1, cfg.stream.clients),
                  cfg.stream.segment);
    f.rounds = cfg.train.rounds;
    f.participation = cfg.train.participation;
    f.weighted_agg = cfg.train.weighted_agg;
    f.jobs = cfg.jobs;
    f.log_buffer = cfg.output.log_buffer;
    f.master_seed = cfg.seed;
    return plan;
}

RunResult execute_run(RunPlan& plan) { return drive_run(plan, nullptr, nullptr); }

int cmd_run(const RunConfig& cfg, const std::string& resume_from, bool quiet) {
    // Validate config and inputs fully before creating any output.
    RunPlan plan = prepare_run(cfg);

    fed::GlobalModel start;
    bool resuming = false;
    if (!resume_from.empty()) {
        model::Checkpoint ckpt = model::load_checkpoint(resume_from);
        model::SiameseModel check_model = model_from_config(cfg, plan.train);
        model::load_into(ckpt, check_model.named_online_params());
        start.round = ckpt.round;
        start.params = std::move(ckpt.tensors);
        resuming = true;
    }

    const std::filesystem::path out = resolve_output_dir(cfg.output.dir);
    std::filesystem::create_directories(out);

    RunResult res = drive_run(plan, resuming ? &start : nullptr, &out);

    res.archive.write_csv(out);
    write_checkpoint(out / "checkpoint.json", res.global);
    {
        std::ofstream mf(out / "manifest.json");
        mf << build_manifest(cfg).dump(2) << "\n";
    }
    if (!quiet) {
        std::cout << "run: policy " << cfg.policy.kind << ", " << res.global.round
                  << " rounds, output " << out.string() << "\n";
        if (res.final_probe_accuracy >= 0)
            std::cout << "probe accuracy (fraction "
                      << eval::format_real(double(cfg.probe.label_fraction))
                      << "): " << eval::format_real(double(res.final_probe_accuracy)) << "\n";
    }
    return kExitOk;
}

int cmd_compare(const std::vector<CompareEntry>& entries, const std::vector<std::uint64_t>& seeds,
                const std::string& out_dir) {
    if (entries.empty()) throw ConfigError("compare: no configurations given");
    if (seeds.empty()) throw ConfigError("compare: no seeds given");

    const std::filesystem::path out = resolve_output_dir(out_dir);
    std::filesystem::create_directories(out);
    std::ofstream csv(out / "compare.csv");
    csv << "config,seed,accuracy\n";

    std::map<std::string, std::vector<real>> accs;
    for (const CompareEntry& e : entries) {
        for (std::uint64_t seed : seeds) {
            RunConfig cfg = e.cfg;
            cfg.seed = seed;
            RunPlan plan = prepare_run(cfg);
            RunResult res = execute_run(plan);
            accs[e.name].push_back(res.final_probe_accuracy);
            csv << e.name << ',' << seed << ','
                << eval::format_real(double(res.final_probe_accuracy)) << '\n';
            csv.flush();
            std::cout << e.name << " seed " << seed << ": accuracy "
                      << eval::format_real(double(res.final_probe_accuracy)) << std::endl;
        }
    }

    std::vector<std::pair<std::string, real>> medians;
    for (const CompareEntry& e : entries) medians.emplace_back(e.name, median(accs[e.name]));

    std::cout << "\nconfig,median_accuracy\n";
    for (const auto& [name, med] : medians)
        std::cout << name << ',' << eval::format_real(double(med)) << "\n";

    auto ranked = medians;
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    std::cout << "ordering:";
    for (std::size_t i = 0; i < ranked.size(); ++i)
        std::cout << (i ? " >= " : " ") << ranked[i].first;
    std::cout << "\n";
    return kExitOk;
}

int cmd_probe(const RunConfig& cfg, const std::string& checkpoint_path) {
    RunPlan plan = prepare_run(cfg);
    if (plan.test.samples.empty()) throw ConfigError("probe: config provides no test split");
    model::Checkpoint ckpt = model::load_checkpoint(checkpoint_path);
    model::SiameseModel m = model_from_config(cfg, plan.train);
    model::load_into(ckpt, m.named_online_params());
    const real acc =
        eval::linear_probe(m.online_encoder(), plan.train, plan.test, probe_config(cfg));
    std::cout << "checkpoint round " << ckpt.round << ", label fraction "
              << eval::format_real(double(cfg.probe.label_fraction)) << ", accuracy "
              << eval::format_real(double(acc)) << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& run_dir) {
    const std::filesystem::path mf = std::filesystem::path(run_dir) / "manifest.json";
    std::ifstream in(mf);
    if (!in) throw ConfigError("inspect: no manifest at " + mf.string());
    std::cout << in.rdbuf();
    return kExitOk;
}

}  // namespace fcl::cli
