#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duomic/model.hpp"
#include "duomic/optim.hpp"

namespace duomic {

/// In-memory form of the DNCK checkpoint file.
///
/// Layout: magic "DNCK", u32 version, u32 header length, UTF-8 JSON header
/// (config, tensor directory with names/shapes/offsets, freeze mask), then
/// raw little-endian f32 payloads in directory order. Optimizer moments ride
/// along as tensors named opt.m.<param> / opt.v.<param>.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    ModelConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;  // directory order
    std::vector<std::string> freeze_mask;                 // frozen parameter names
    FreezeMode freeze = FreezeMode::full;
    std::uint64_t train_seed = 0;
    std::uint64_t step_count = 0;
    std::optional<std::int64_t> optimizer_t;
};

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const AdamW* optimizer = nullptr, std::uint64_t train_seed = 0,
                     std::uint64_t step_count = 0);

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model (parameters bit-exact, freeze restored).
Model model_from_checkpoint(const Checkpoint& ck);

inline Model load_model(const std::filesystem::path& path) {
    return model_from_checkpoint(read_checkpoint(path));
}

/// Restores optimizer moments and step counter, when present.
void load_optimizer_state(const Checkpoint& ck, AdamW& optimizer);

/// Copies backbone tensors (weights, bn params, running stats) from a source
/// checkpoint into a possibly different-headed model. Shape mismatches name
/// the parameter.
void load_backbone(Model& model, const Checkpoint& source);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace duomic
