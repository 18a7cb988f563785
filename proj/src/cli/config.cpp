#include "fcl/cli/config.hpp"

#include <cstdlib>
#include <fstream>

#include "fcl/errors.hpp"

namespace fcl::cli {

using nlohmann::json;

namespace {

// Typed field extraction with key-qualified errors.
template <class T>
void take(const json& j, const std::string& section, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + section + "." + key + "'");
    }
}

void reject_unknown(const json& j, const std::string& section,
                    std::initializer_list<const char*> known) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("config: unknown key '" +
                              (section.empty() ? key : section + "." + key) + "'");
    }
}

}  // namespace

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, "",
                   {"dataset", "stream", "policy", "model", "train", "augment", "probe", "output",
                    "seed", "jobs", "kernels"});
    RunConfig cfg;

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(d, "dataset",
                       {"kind", "classes", "per_class", "side", "noise_sigma", "test_per_class",
                        "path", "test_path", "max_records"});
        take(d, "dataset", "kind", cfg.dataset.kind);
        take(d, "dataset", "classes", cfg.dataset.classes);
        take(d, "dataset", "per_class", cfg.dataset.per_class);
        take(d, "dataset", "side", cfg.dataset.side);
        take(d, "dataset", "noise_sigma", cfg.dataset.noise_sigma);
        take(d, "dataset", "test_per_class", cfg.dataset.test_per_class);
        take(d, "dataset", "path", cfg.dataset.path);
        take(d, "dataset", "test_path", cfg.dataset.test_path);
        take(d, "dataset", "max_records", cfg.dataset.max_records);
    }
    if (j.contains("stream")) {
        const json& s = j.at("stream");
        reject_unknown(s, "stream", {"stc", "clients", "segment", "segments_per_round"});
        take(s, "stream", "stc", cfg.stream.stc);
        take(s, "stream", "clients", cfg.stream.clients);
        take(s, "stream", "segment", cfg.stream.segment);
        take(s, "stream", "segments_per_round", cfg.stream.segments_per_round);
    }
    if (j.contains("policy")) {
        const json& p = j.at("policy");
        reject_unknown(p, "policy", {"kind", "lazy_interval"});
        take(p, "policy", "kind", cfg.policy.kind);
        take(p, "policy", "lazy_interval", cfg.policy.lazy_interval);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, "model", {"encoder", "hidden", "repr_dim", "predictor_hidden"});
        take(m, "model", "encoder", cfg.model.encoder);
        take(m, "model", "hidden", cfg.model.hidden);
        take(m, "model", "repr_dim", cfg.model.repr_dim);
        take(m, "model", "predictor_hidden", cfg.model.predictor_hidden);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t, "train",
                       {"lr", "weight_decay", "ema_tau", "rounds", "symmetrize", "loss",
                        "temperature", "participation", "weighted_agg"});
        take(t, "train", "lr", cfg.train.lr);
        take(t, "train", "weight_decay", cfg.train.weight_decay);
        take(t, "train", "ema_tau", cfg.train.ema_tau);
        take(t, "train", "rounds", cfg.train.rounds);
        take(t, "train", "symmetrize", cfg.train.symmetrize);
        take(t, "train", "loss", cfg.train.loss);
        take(t, "train", "temperature", cfg.train.temperature);
        take(t, "train", "participation", cfg.train.participation);
        take(t, "train", "weighted_agg", cfg.train.weighted_agg);
    }
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        reject_unknown(a, "augment", {"crop_pad", "flip_p", "jitter", "gray_p", "weak"});
        take(a, "augment", "crop_pad", cfg.augment.crop_pad);
        take(a, "augment", "flip_p", cfg.augment.flip_p);
        take(a, "augment", "jitter", cfg.augment.jitter);
        take(a, "augment", "gray_p", cfg.augment.gray_p);
        take(a, "augment", "weak", cfg.augment.weak);
    }
    if (j.contains("probe")) {
        const json& p = j.at("probe");
        reject_unknown(p, "probe", {"label_fraction", "epochs", "lr", "batch", "every_rounds"});
        take(p, "probe", "label_fraction", cfg.probe.label_fraction);
        take(p, "probe", "epochs", cfg.probe.epochs);
        take(p, "probe", "lr", cfg.probe.lr);
        take(p, "probe", "batch", cfg.probe.batch);
        take(p, "probe", "every_rounds", cfg.probe.every_rounds);
    }
    if (j.contains("output")) {
        const json& o = j.at("output");
        reject_unknown(o, "output", {"dir", "log_buffer", "checkpoint_every"});
        take(o, "output", "dir", cfg.output.dir);
        take(o, "output", "log_buffer", cfg.output.log_buffer);
        take(o, "output", "checkpoint_every", cfg.output.checkpoint_every);
    }
    take(j, "", "seed", cfg.seed);
    take(j, "", "jobs", cfg.jobs);
    take(j, "", "kernels", cfg.kernels);

    validate(cfg);
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = {{"kind", cfg.dataset.kind},
                    {"classes", cfg.dataset.classes},
                    {"per_class", cfg.dataset.per_class},
                    {"side", cfg.dataset.side},
                    {"noise_sigma", cfg.dataset.noise_sigma},
                    {"test_per_class", cfg.dataset.test_per_class},
                    {"path", cfg.dataset.path},
                    {"test_path", cfg.dataset.test_path},
                    {"max_records", cfg.dataset.max_records}};
    j["stream"] = {{"stc", cfg.stream.stc},
                   {"clients", cfg.stream.clients},
                   {"segment", cfg.stream.segment},
                   {"segments_per_round", cfg.stream.segments_per_round}};
    j["policy"] = {{"kind", cfg.policy.kind}, {"lazy_interval", cfg.policy.lazy_interval}};
    j["model"] = {{"encoder", cfg.model.encoder},
                  {"hidden", cfg.model.hidden},
                  {"repr_dim", cfg.model.repr_dim},
                  {"predictor_hidden", cfg.model.predictor_hidden}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"ema_tau", cfg.train.ema_tau},
                  {"rounds", cfg.train.rounds},
                  {"symmetrize", cfg.train.symmetrize},
                  {"loss", cfg.train.loss},
                  {"temperature", cfg.train.temperature},
                  {"participation", cfg.train.participation},
                  {"weighted_agg", cfg.train.weighted_agg}};
    j["augment"] = {{"crop_pad", cfg.augment.crop_pad},
                    {"flip_p", cfg.augment.flip_p},
                    {"jitter", cfg.augment.jitter},
                    {"gray_p", cfg.augment.gray_p},
                    {"weak", cfg.augment.weak}};
    j["probe"] = {{"label_fraction", cfg.probe.label_fraction},
                  {"epochs", cfg.probe.epochs},
                  {"lr", cfg.probe.lr},
                  {"batch", cfg.probe.batch},
                  {"every_rounds", cfg.probe.every_rounds}};
    j["output"] = {{"dir", cfg.output.dir},
                   {"log_buffer", cfg.output.log_buffer},
                   {"checkpoint_every", cfg.output.checkpoint_every}};
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["kernels"] = cfg.kernels;
    return j;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    // An empty file means "all defaults".
    in >> std::ws;
    if (in.eof()) return config_from_json(json::object());
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: malformed JSON in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError("config: '" + key + "' " + why);
    };
    if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "cifar10")
        fail("dataset.kind", "must be 'synthetic' or 'cifar10'");
    if (cfg.dataset.kind == "synthetic") {
        if (cfg.dataset.classes < 1) fail("dataset.classes", "must be >= 1");
        if (cfg.dataset.per_class < 1) fail("dataset.per_class", "must be >= 1");
        if (cfg.dataset.side < 4) fail("dataset.side", "must be >= 4");
        if (cfg.dataset.noise_sigma < 0) fail("dataset.noise_sigma", "must be >= 0");
        if (cfg.dataset.test_per_class < 1) fail("dataset.test_per_class", "must be >= 1");
    } else if (cfg.dataset.path.empty()) {
        fail("dataset.path", "is required for cifar10");
    }
    if (cfg.stream.stc < 1) fail("stream.stc", "must be >= 1");
    if (cfg.stream.clients < 1) fail("stream.clients", "must be >= 1");
    if (cfg.stream.segment < 1) fail("stream.segment", "must be >= 1");
    if (cfg.policy.kind != "is" && cfg.policy.kind != "rr" && cfg.policy.kind != "fifo" &&
        cfg.policy.kind != "kcenter")
        fail("policy.kind", "must be one of is|rr|fifo|kcenter");
    if (cfg.model.encoder != "smallconv" && cfg.model.encoder != "mlp")
        fail("model.encoder", "must be 'smallconv' or 'mlp'");
    if (cfg.model.repr_dim < 2) fail("model.repr_dim", "must be >= 2");
    for (std::size_t h : cfg.model.hidden)
        if (h == 0) fail("model.hidden", "widths must be positive");
    if (cfg.model.predictor_hidden < 1) fail("model.predictor_hidden", "must be >= 1");
    if (!(cfg.train.lr > 0)) fail("train.lr", "must be positive");
    if (cfg.train.weight_decay < 0) fail("train.weight_decay", "must be >= 0");
    if (cfg.train.ema_tau < 0 || cfg.train.ema_tau >= 1) fail("train.ema_tau", "must be in [0,1)");
    if (cfg.train.loss != "byol" && cfg.train.loss != "infonce")
        fail("train.loss", "must be 'byol' or 'infonce'");
    if (!(cfg.train.temperature > 0)) fail("train.temperature", "must be positive");
    if (!(cfg.train.participation > 0) || cfg.train.participation > 1)
        fail("train.participation", "must be in (0,1]");
    if (cfg.augment.flip_p < 0 || cfg.augment.flip_p > 1) fail("augment.flip_p", "must be in [0,1]");
    if (cfg.augment.gray_p < 0 || cfg.augment.gray_p > 1) fail("augment.gray_p", "must be in [0,1]");
    if (cfg.augment.jitter < 0 || cfg.augment.jitter >= 1)
        fail("augment.jitter", "must be in [0,1)");
    if (cfg.augment.weak != "hflip" && cfg.augment.weak != "crop" &&
        cfg.augment.weak != "grayscale" && cfg.augment.weak != "jitter")
        fail("augment.weak", "must be one of hflip|crop|grayscale|jitter");
    if (!(cfg.probe.label_fraction > 0) || cfg.probe.label_fraction > 1)
        fail("probe.label_fraction", "must be in (0,1]");
    if (cfg.probe.epochs < 0) fail("probe.epochs", "must be >= 0");
    if (!(cfg.probe.lr > 0)) fail("probe.lr", "must be positive");
    if (cfg.output.dir.empty()) fail("output.dir", "must not be empty");
    if (cfg.jobs < 1) fail("jobs", "must be >= 1");
    if (cfg.kernels != "auto" && cfg.kernels != "scalar" && cfg.kernels != "avx2")
        fail("kernels", "must be one of auto|scalar|avx2");
}

void apply_override(json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config: override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // bare strings stay strings
    }

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("config: override key '" + key + "' is malformed");
        if (dot == std::string::npos) {
            (*node)[part] = parsed;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

std::filesystem::path resolve_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("FCLSIM_OUT_ROOT")) return std::filesystem::path(root) / p;
    return p;
}

}  // namespace fcl::cli
