#include "fcl/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fcl/errors.hpp"

namespace fcl::model {

using nlohmann::json;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json j;
    j["format"] = "fclsim-checkpoint";
    j["version"] = ckpt.version;
    j["round"] = ckpt.round;
    j["precision"] = sizeof(nd::real) == 8 ? "f64" : "f32";
    json tensors = json::array();
    for (const auto& [name, t] : ckpt.tensors) {
        json jt;
        jt["name"] = name;
        jt["shape"] = t.shape();
        jt["data"] = std::vector<nd::real>(t.data(), t.data() + t.size());
        tensors.push_back(std::move(jt));
    }
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
    out << j.dump();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CheckpointError("checkpoint: malformed JSON in " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "fclsim-checkpoint")
        throw CheckpointError("checkpoint: unrecognized container in " + path.string());
    if (j.value("version", 0) != 1)
        throw CheckpointError("checkpoint: unsupported version in " + path.string());

    Checkpoint ckpt;
    ckpt.round = j.value("round", 0);
    for (const json& jt : j.at("tensors")) {
        nd::Shape shape = jt.at("shape").get<nd::Shape>();
        std::vector<nd::real> data = jt.at("data").get<std::vector<nd::real>>();
        ckpt.tensors.emplace_back(jt.at("name").get<std::string>(),
                                  nd::Tensor::from_data(std::move(shape), std::move(data)));
    }
    return ckpt;
}

void load_into(const Checkpoint& ckpt, std::vector<std::pair<std::string, nd::Tensor>> target) {
    if (ckpt.tensors.size() != target.size())
        throw CheckpointError("checkpoint: tensor count " + std::to_string(ckpt.tensors.size()) +
                              " does not match model's " + std::to_string(target.size()));
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& [name, src] = ckpt.tensors[i];
        auto& [want_name, dst] = target[i];
        if (name != want_name)
            throw CheckpointError("checkpoint: tensor '" + name + "' where '" + want_name +
                                  "' was expected");
        if (src.shape() != dst.shape())
            throw CheckpointError("checkpoint: shape mismatch for '" + name + "': " +
                                  nd::shape_str(src.shape()) + " vs " +
                                  nd::shape_str(dst.shape()));
        dst.copy_data_from(src);
    }
}

std::uint64_t params_hash(const std::vector<std::pair<std::string, nd::Tensor>>& named) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : named) {
        mix(name.data(), name.size());
        mix(t.data(), t.size() * sizeof(nd::real));
    }
    return h;
}

}  // namespace fcl::model
