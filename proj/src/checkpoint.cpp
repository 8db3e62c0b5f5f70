#include "duomic/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are stored little-endian");

namespace duomic {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'C', 'K'};

nlohmann::json config_json(const ModelConfig& cfg) {
    return {{"block_counts", cfg.block_counts},
            {"base_width", cfg.base_width},
            {"num_classes", cfg.num_classes},
            {"head_hidden", cfg.head_hidden},
            {"head_dropout", cfg.head_dropout},
            {"input_channels", cfg.input_channels},
            {"bottleneck", cfg.bottleneck}};
}

ModelConfig config_from(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.block_counts = j.at("block_counts").get<std::vector<int>>();
    cfg.base_width = j.at("base_width").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.head_dropout = j.at("head_dropout").get<double>();
    cfg.input_channels = j.at("input_channels").get<int>();
    cfg.bottleneck = j.value("bottleneck", false);
    return cfg;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
    try {
        return config_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config: ") + e.what());
    }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const AdamW* optimizer, std::uint64_t train_seed,
                     std::uint64_t step_count) {
    nlohmann::json header;
    header["config"] = config_json(model.config());
    header["freeze_mode"] = freeze_mode_name(model.freeze_mode());
    header["seed"] = train_seed;
    header["step_count"] = step_count;

    std::vector<std::string> frozen;
    std::vector<std::pair<std::string, const Tensor*>> directory;
    for (const auto& e : model.params().entries()) {
        directory.emplace_back(e.name, &e.node->value);
        if (e.frozen) frozen.push_back(e.name);
    }
    std::vector<Tensor> moment_storage;
    if (optimizer) {
        header["optimizer_t"] = optimizer->step_count();
        const auto& state = optimizer->state();
        moment_storage.reserve(state.size() * 2);
        for (const auto& e : model.params().entries()) {
            auto it = state.find(e.name);
            if (it == state.end()) continue;
            moment_storage.push_back(it->second.m);
            directory.emplace_back("opt.m." + e.name, &moment_storage.back());
            moment_storage.push_back(it->second.v);
            directory.emplace_back("opt.v." + e.name, &moment_storage.back());
        }
    }
    header["freeze_mask"] = frozen;

    nlohmann::json tensor_dir = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : directory) {
        tensor_dir.push_back(
            {{"name", name}, {"shape", tensor->shape}, {"offset", offset}});
        offset += tensor->size() * sizeof(float);
    }
    header["tensors"] = tensor_dir;

    const std::string header_text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    write_u32(out, Checkpoint::kVersion);
    write_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out.write(header_text.data(), std::streamsize(header_text.size()));
    for (const auto& [name, tensor] : directory)
        out.write(reinterpret_cast<const char*>(tensor->ptr()),
                  std::streamsize(tensor->size() * sizeof(float)));
    if (!out) throw DataError("short write on checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = std::uint64_t(in.tellg());
    in.seekg(0);

    char magic[4];
    std::uint32_t version = 0, header_len = 0;
    if (file_size < 12) throw FormatError(path.string() + ": truncated checkpoint");
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic, not a DNCK checkpoint");
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != Checkpoint::kVersion)
        throw VersionError(path.string() + ": unsupported checkpoint version " +
                           std::to_string(version));
    in.read(reinterpret_cast<char*>(&header_len), 4);
    if (12 + std::uint64_t(header_len) > file_size)
        throw FormatError(path.string() + ": truncated checkpoint header");

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad header: " + e.what());
    }

    Checkpoint ck;
    try {
        ck.config = config_from(header.at("config"));
        ck.freeze = freeze_mode_from_name(header.value("freeze_mode", "full"));
        ck.freeze_mask = header.value("freeze_mask", std::vector<std::string>{});
        ck.train_seed = header.value("seed", std::uint64_t(0));
        ck.step_count = header.value("step_count", std::uint64_t(0));
        if (header.contains("optimizer_t"))
            ck.optimizer_t = header.at("optimizer_t").get<std::int64_t>();

        const std::uint64_t payload_base = 12 + header_len;
        for (const auto& entry : header.at("tensors")) {
            const std::string name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
            const std::uint64_t bytes = Tensor::count(shape) * sizeof(float);
            if (payload_base + offset + bytes > file_size)
                throw FormatError(path.string() + ": truncated payload for tensor '" + name + "'");
            Tensor t(shape);
            in.seekg(std::streamoff(payload_base + offset));
            in.read(reinterpret_cast<char*>(t.ptr()), std::streamsize(bytes));
            if (!in) throw FormatError(path.string() + ": short read for tensor '" + name + "'");
            ck.tensors.emplace_back(name, std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad header: " + e.what());
    }
    return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
    Model model(ck.config, 0);
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : ck.tensors) by_name[name] = &tensor;
    for (auto& e : model.params().entries()) {
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw FormatError("checkpoint missing tensor '" + e.name + "'");
        if (it->second->shape != e.node->value.shape)
            throw DimensionError("checkpoint tensor '" + e.name + "' has shape " +
                                 it->second->shape_str() + ", model expects " +
                                 e.node->value.shape_str());
        e.node->value = *it->second;
    }
    model.set_freeze(ck.freeze);
    return model;
}

void load_optimizer_state(const Checkpoint& ck, AdamW& optimizer) {
    if (!ck.optimizer_t) return;
    optimizer.set_step_count(*ck.optimizer_t);
    for (const auto& [name, tensor] : ck.tensors) {
        if (name.rfind("opt.m.", 0) == 0)
            optimizer.state()[name.substr(6)].m = tensor;
        else if (name.rfind("opt.v.", 0) == 0)
            optimizer.state()[name.substr(6)].v = tensor;
    }
}

void load_backbone(Model& model, const Checkpoint& source) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : source.tensors) by_name[name] = &tensor;
    for (auto& e : model.params().entries()) {
        if (!Model::is_backbone_param(e.name)) continue;
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw FormatError("backbone source missing tensor '" + e.name + "'");
        if (it->second->shape != e.node->value.shape)
            throw DimensionError("backbone tensor '" + e.name + "' has shape " +
                                 it->second->shape_str() + ", model expects " +
                                 e.node->value.shape_str());
        e.node->value = *it->second;
    }
}

}  // namespace duomic
