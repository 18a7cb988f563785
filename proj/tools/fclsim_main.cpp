// fclsim: deterministic simulator for self-supervised on-device federated
// learning from unlabeled streams. Verbs: run, compare, probe, inspect.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcl/cli/commands.hpp"
#include "fcl/cli/config.hpp"
#include "fcl/errors.hpp"

namespace {

using fcl::cli::RunConfig;
using nlohmann::json;

// defaults -> config file -> --set overrides -> dedicated flags.
struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string policy, out, kernels, loss;
    std::string weak;
    std::uint64_t seed = 0;
    bool has_seed = false;
    long rounds = -1;
    long jobs = -1;
    long lazy = -1;
    double label_fraction = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON run configuration");
    cmd->add_option("--set", o.sets, "Dotted override, e.g. train.lr=0.03")->allow_extra_args(false);
    cmd->add_option("--policy", o.policy, "Buffer policy: is|rr|fifo|kcenter");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--kernels", o.kernels, "Kernel backend: auto|scalar|avx2");
    cmd->add_option("--loss", o.loss, "Contrastive loss: byol|infonce");
    cmd->add_option("--weak", o.weak, "Weak augmentation: hflip|crop|grayscale|jitter");
    cmd->add_option("--seed", o.seed, "Master seed")->each([&o](const std::string&) {
        o.has_seed = true;
    });
    cmd->add_option("--rounds", o.rounds, "Communication rounds");
    cmd->add_option("--jobs", o.jobs, "Concurrent clients");
    cmd->add_option("--lazy", o.lazy, "Lazy scoring interval T (0 disables)");
    cmd->add_option("--label-fraction", o.label_fraction, "Probe label fraction");
}

RunConfig build_config(const CommonOpts& o) {
    json doc = json::object();
    if (!o.config_path.empty()) {
        // Parse strictly first so file errors carry the path.
        fcl::cli::parse_config_file(o.config_path);
        std::ifstream in(o.config_path);
        in >> std::ws;
        if (!in.eof()) in >> doc;
    }
    for (const std::string& s : o.sets) fcl::cli::apply_override(doc, s);
    if (!o.policy.empty()) fcl::cli::apply_override(doc, "policy.kind=" + o.policy);
    if (!o.out.empty()) doc["output"]["dir"] = o.out;
    if (!o.kernels.empty()) fcl::cli::apply_override(doc, "kernels=" + o.kernels);
    if (!o.loss.empty()) fcl::cli::apply_override(doc, "train.loss=" + o.loss);
    if (!o.weak.empty()) fcl::cli::apply_override(doc, "augment.weak=" + o.weak);
    if (o.has_seed) doc["seed"] = o.seed;
    if (o.rounds >= 0) doc["train"]["rounds"] = o.rounds;
    if (o.jobs >= 1) doc["jobs"] = o.jobs;
    if (o.lazy >= 0) doc["policy"]["lazy_interval"] = o.lazy;
    if (o.label_fraction > 0) doc["probe"]["label_fraction"] = o.label_fraction;
    return fcl::cli::config_from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fclsim - federated contrastive learning simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    std::string resume_from;
    CLI::App* run = app.add_subcommand("run", "Execute one federated training run");
    add_common(run, run_opts);
    run->add_option("--resume", resume_from, "Resume from a checkpoint file");

    CommonOpts cmp_opts;
    std::vector<std::string> cmp_configs;
    std::string cmp_policies;
    std::string cmp_seeds = "1,2,3";
    std::string cmp_out = "runs/compare";
    CLI::App* cmp = app.add_subcommand("compare", "Run several configs over seeds and rank them");
    add_common(cmp, cmp_opts);
    cmp->add_option("--configs", cmp_configs, "Additional config files to compare");
    cmp->add_option("--policies", cmp_policies, "Comma list of policies applied to the base config");
    cmp->add_option("--seeds", cmp_seeds, "Comma list of seeds");
    cmp->add_option("--compare-out", cmp_out, "Directory for compare.csv");

    CommonOpts probe_opts;
    std::string ckpt_path;
    CLI::App* probe = app.add_subcommand("probe", "Linear-probe a saved checkpoint");
    add_common(probe, probe_opts);
    probe->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();

    std::string inspect_dir;
    CLI::App* inspect = app.add_subcommand("inspect", "Print a run directory's manifest");
    inspect->add_option("dir", inspect_dir, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run)) return fcl::cli::cmd_run(build_config(run_opts), resume_from);
        if (app.got_subcommand(cmp)) {
            std::vector<fcl::cli::CompareEntry> entries;
            RunConfig base = build_config(cmp_opts);
            auto split_list = [](const std::string& s) {
                std::vector<std::string> out;
                std::size_t start = 0;
                while (start <= s.size()) {
                    const std::size_t comma = s.find(',', start);
                    out.push_back(s.substr(start, comma - start));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
                return out;
            };
            if (!cmp_policies.empty()) {
                for (const std::string& p : split_list(cmp_policies)) {
                    RunConfig c = base;
                    c.policy.kind = p;
                    fcl::cli::validate(c);
                    entries.push_back({p, c});
                }
            } else if (!cmp_configs.empty()) {
                for (const std::string& path : cmp_configs)
                    entries.push_back({path, fcl::cli::parse_config_file(path)});
            } else {
                entries.push_back({"base", base});
            }
            std::vector<std::uint64_t> seeds;
            for (const std::string& s : split_list(cmp_seeds))
                if (!s.empty()) seeds.push_back(std::stoull(s));
            return fcl::cli::cmd_compare(entries, seeds, cmp_out);
        }
        if (app.got_subcommand(probe))
            return fcl::cli::cmd_probe(build_config(probe_opts), ckpt_path);
        if (app.got_subcommand(inspect)) return fcl::cli::cmd_inspect(inspect_dir);
    } catch (const fcl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fcl::cli::kExitInput;
    } catch (const fcl::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fcl::cli::kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fcl::cli::kExitError;
    }
    return fcl::cli::kExitError;
}
