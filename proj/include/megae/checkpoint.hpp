#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "megae/model.hpp"
#include "megae/wavelet_frame.hpp"

namespace megae {

/// Model checkpoint layout:
///   line 1: "MEGAE-CHECKPOINT 1"
///   line 2: compact JSON header {shape, slope, config, frame, filter_options, seed, tensors}
///   rest:   little-endian float64 payload, tensors in ModelParams::for_each order,
///           each tensor row-major.
struct Checkpoint {
    ModelParams params;
    TrainConfig config;
    FrameSpec frame;
    FilterBankOptions filter_options;
    nlohmann::json extra = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace megae
