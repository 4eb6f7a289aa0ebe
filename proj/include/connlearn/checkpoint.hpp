#pragma once

// On-disk checkpoint: a directory holding manifest.json (config echo,
// ordered parameter index with shapes and byte offsets) and params.bin
// (row-major little-endian float64 values in index order).

#include <filesystem>
#include <string>

#include <json.hpp>

#include "connlearn/config.hpp"
#include "connlearn/params.hpp"

namespace connlearn {

inline constexpr int kCheckpointFormatVersion = 1;

enum class Stage { pretrained, finetuned };
const char* stage_name(Stage s);

struct Checkpoint {
  Model model;
  TrainConfig config;
  Stage stage = Stage::pretrained;
  nlohmann::json manifest;
};

std::string serialize_params(const ModelT<Matrix>& params);
nlohmann::json checkpoint_manifest(const Model& model, const TrainConfig& config, Stage stage);

/// Writes into a temporary sibling directory and renames it into place, so
/// an interrupted save never leaves a partial checkpoint at `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const TrainConfig& config,
                     Stage stage);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// sha256 over manifest.json followed by params.bin.
std::string checkpoint_digest(const std::filesystem::path& dir);

}  // namespace connlearn
