#pragma once

// Operations behind the command-line tool. Each writes its results to files
// and throws on error; the tool maps exceptions to exit codes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "connlearn/config.hpp"
#include "connlearn/errors.hpp"
#include "connlearn/optim.hpp"
#include "connlearn/signals.hpp"

namespace connlearn {

/// Bad command-line usage (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct SynthCommand {
  SynthOptions synth;
  bool unlabeled = false;
  std::filesystem::path out;
};
void cmd_synth(const SynthCommand& cmd);

struct PretrainCommand {
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;
  /// Applied over the config file (flags beat file beat defaults).
  nlohmann::json overrides = nlohmann::json::object();
  std::filesystem::path out;
  std::optional<std::filesystem::path> prior_cache;
  bool log_timing = false;
};
/// Writes <out>/manifest.json + params.bin, <out>/train_log.jsonl and
/// <out>/config.json. Returns the merged configuration.
TrainConfig cmd_pretrain(const PretrainCommand& cmd);

struct FinetuneCommand {
  std::filesystem::path data;
  std::filesystem::path ckpt;
  int folds = 5;
  std::optional<std::filesystem::path> config;
  nlohmann::json overrides = nlohmann::json::object();
  std::filesystem::path out;  // results JSON
  std::optional<std::filesystem::path> fold_checkpoints;
  std::optional<std::filesystem::path> prior_cache;
};
nlohmann::json cmd_finetune(const FinetuneCommand& cmd);

struct ExportGraphCommand {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  std::string subject;
  View view = View::fc;
  int iteration = 0;
  std::filesystem::path out;
};
void cmd_export_graph(const ExportGraphCommand& cmd);

struct ExportPriorCommand {
  std::filesystem::path data;
  std::string subject;
  PriorKind kind = PriorKind::pearson;
  int bins = 8;
  int lag = 1;
  bool standardize = true;
  std::filesystem::path out;
};
void cmd_export_prior(const ExportPriorCommand& cmd);

struct GradcheckCommand {
  std::uint64_t seed = 0;
  std::string scale = "desk";
  std::optional<std::string> corrupt_param;
  std::optional<std::filesystem::path> out;
};
/// Returns the report; report["pass"] decides the exit code.
nlohmann::json cmd_gradcheck(const GradcheckCommand& cmd);

/// Assembles configuration: defaults, then the file, then overrides.
TrainConfig merged_config(const TrainConfig& base, const std::optional<std::filesystem::path>& file,
                          const nlohmann::json& overrides);

}  // namespace connlearn
